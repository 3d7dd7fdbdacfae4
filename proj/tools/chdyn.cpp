#include "chdyn/app.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <iostream>
#include <string>

namespace {

// CHDYN_THREADS caps Eigen's internal parallelism.
void apply_thread_limit()
{
    const char* env = std::getenv("CHDYN_THREADS");
    if (env == nullptr || *env == '\0') return;
    const int n = std::atoi(env);
    if (n < 1) throw chdyn::ConfigError(std::string("CHDYN_THREADS must be a positive integer, got '") + env + "'");
    Eigen::setNbThreads(n);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cahn-Hilliard with dynamic boundary conditions: finite element solver"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    bool dump_matrices = false;
    chdyn::Index levels = 0;

    auto* run = app.add_subcommand("run", "time-step the configured problem, write CSV diagnostics and VTK snapshots");
    run->add_option("config", config_path, "configuration file")->required();
    run->add_option("-o,--output", output_override, "output directory (overrides output.dir)");
    run->add_flag("--dump-matrices", dump_matrices, "also write the assembled matrices in MatrixMarket format");

    auto* verify = app.add_subcommand("verify", "cross-check the solver against the dense reference path");
    verify->add_option("config", config_path, "configuration file")->required();

    auto* refine = app.add_subcommand("refine", "run a uniform refinement ladder with tau proportional to h^2");
    refine->add_option("config", config_path, "configuration file")->required();
    refine->add_option("--levels", levels, "number of mesh levels (overrides refine.levels)")->check(CLI::Range(2, 8));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : chdyn::exit_bad_input;
    }

    return chdyn::guarded(std::cerr, [&] {
        apply_thread_limit();
        chdyn::RunConfig cfg = chdyn::load_config(config_path);
        if (*run) {
            if (!output_override.empty()) cfg.output_dir = output_override;
            return chdyn::cli_run(cfg, std::cout, {dump_matrices, false});
        }
        if (*verify) return chdyn::cli_verify(cfg, std::cout);
        return chdyn::cli_refine(cfg, levels > 0 ? levels : cfg.refine_levels, std::cout);
    });
}
