#pragma once

// Command implementations behind the `chdyn` executable. Each returns a
// process exit code: 0 success, 1 solver or check failure, 2 bad input.

#include "chdyn/config.hpp"
#include "chdyn/diagnostics.hpp"
#include "chdyn/initial_condition.hpp"
#include "chdyn/oracle.hpp"
#include "chdyn/time_stepper.hpp"
#include "chdyn/vtk.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace chdyn {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_bad_input = 2;

/// Maps the exception taxonomy onto exit codes and reports the message.
inline int guarded(std::ostream& err, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_bad_input;
    } catch (const MeshError& e) {
        err << "mesh error: " << e.what() << '\n';
        return exit_bad_input;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return exit_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

inline std::shared_ptr<const SchemeContext> make_context(const Mesh& mesh, const RunConfig& cfg)
{
    return make_context(mesh, cfg.model, cfg.bulk_potential, cfg.surface_potential);
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    bool dump_matrices = false;
    bool quiet = false;
};

inline std::filesystem::path snapshot_path(const std::filesystem::path& dir, Index step)
{
    std::ostringstream name;
    name << "state_" << std::setw(6) << std::setfill('0') << step << ".vtk";
    return dir / name.str();
}

inline int cli_run(const RunConfig& cfg, std::ostream& log, const RunOptions& opts = {})
{
    LoadReport report;
    const Mesh mesh = build_mesh(cfg, &report);
    for (const auto& w : report.warnings) log << "mesh: " << w << '\n';
    const auto ctx = make_context(mesh, cfg);
    const TimeStepper stepper(ctx, cfg.newton, cfg.schur);

    std::filesystem::create_directories(cfg.output_dir);
    if (opts.dump_matrices) dump_matrix_market(ctx->disc, cfg.output_dir / "matrices");

    const auto csv_path = cfg.output_dir / "diagnostics.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    csv << csv_header << '\n';

    const auto coupling = assumption_C_report(mesh.h_max(), cfg.model.tau, cfg.model.kappa);
    if (!opts.quiet)
        log << "mesh: " << mesh.n_vertices() << " vertices, " << mesh.n_cells() << " cells, "
            << mesh.n_boundary_vertices() << " boundary vertices, h = " << mesh.h_max() << '\n'
            << "coupling h^" << coupling.power << "/tau = " << coupling.ratio << '\n';

    auto emit = [&](const StepState& s) {
        write_csv_row(csv, s.step, s.time, s.newton_iters, s.diagnostics);
        const bool snapshot = s.step == 0 || s.step == cfg.steps || (cfg.output_every > 0 && s.step % cfg.output_every == 0);
        if (snapshot) write_vtk(mesh, s.phi, s.potentials.bulk, s.potentials.surface, snapshot_path(cfg.output_dir, s.step));
    };

    StabilityLedger ledger;
    StepState state = stepper.initial_state(initial_condition(cfg.initial, mesh, cfg.seed));
    ledger.initial_total = state.diagnostics.total;
    emit(state);
    for (Index k = 1; k <= cfg.steps; ++k) {
        state = stepper.advance(state);
        ledger.add(state.diagnostics, state.increments);
        emit(state);
        if (!state.energy_check.pass)
            log << "warning: step " << k << " energy law margin " << state.energy_check.margin << " below slack\n";
    }
    csv.flush();
    if (!csv) throw std::runtime_error("write to " + csv_path.string() + " failed");

    if (!opts.quiet) {
        const auto old = log.precision(12);
        log << "final energy " << state.diagnostics.total << ", energy + accumulated dissipation "
            << ledger.left_side(state.diagnostics) << " (initial " << ledger.initial_total << ")\n"
            << "wrote " << csv_path.string() << '\n';
        log.precision(old);
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace app_detail {

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline std::string fmt(double v)
{
    std::ostringstream s;
    s << std::setprecision(3) << std::scientific << v;
    return s.str();
}

} // namespace app_detail

/// Cross-checks the production pipeline against the dense oracle on the
/// configured mesh and a short run of the configured problem.
inline std::vector<CheckResult> oracle_suite(const RunConfig& cfg, Index max_steps = 20)
{
    using app_detail::fmt;
    using app_detail::max_abs;
    const Mesh mesh = build_mesh(cfg);
    if (mesh.n_vertices() + mesh.n_boundary_vertices() > oracle::dense_guard)
        throw ConfigError("verify: mesh too large for the dense oracle (" +
                          std::to_string(mesh.n_vertices() + mesh.n_boundary_vertices()) + " > " +
                          std::to_string(oracle::dense_guard) + " unknowns)");
    const auto ctx = make_context(mesh, cfg);
    const auto dense = oracle::dense_scheme(mesh, *ctx);
    const TimeStepper stepper(ctx, cfg.newton, cfg.schur);
    std::vector<CheckResult> out;

    {
        const auto& d = ctx->disc;
        const double err = std::max({max_abs(Eigen::MatrixXd(d.stiffness_bulk) - dense.stiffness_bulk) /
                                         max_abs(dense.stiffness_bulk),
                                     max_abs(Eigen::MatrixXd(d.stiffness_surface) - dense.stiffness_surface) /
                                         max_abs(dense.stiffness_surface),
                                     max_abs(Eigen::MatrixXd(d.mass_bulk.diagonal.asDiagonal()) - dense.mass_bulk) /
                                         max_abs(dense.mass_bulk),
                                     max_abs(Eigen::MatrixXd(d.mass_surface.diagonal.asDiagonal()) - dense.mass_surface) /
                                         max_abs(dense.mass_surface)});
        out.push_back({"assembly", err <= 1e-13, "max relative entry difference " + fmt(err)});
    }
    {
        const Eigen::MatrixXd s(stepper.schur().matrix());
        const Eigen::MatrixXd ref = oracle::dense_schur(dense);
        const double norm = s.norm();
        const double asym = (s - s.transpose()).norm();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
        const double lmin = eig.eigenvalues().minCoeff();
        const double diff = (s - ref).norm() / ref.norm();
        out.push_back({"schur_spd", lmin > 0.0 && asym <= 1e-14 * norm && diff <= 1e-13,
                       "min eigenvalue " + fmt(lmin) + ", symmetry defect " + fmt(asym / norm) + ", vs dense " + fmt(diff)});
    }
    {
        std::mt19937_64 rng(cfg.seed + 17);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            Vector phi(mesh.n_vertices()), phi_old(mesh.n_vertices());
            for (auto& v : phi) v = dist(rng);
            for (auto& v : phi_old) v = dist(rng);
            const Potentials p = recover_potentials(stepper.schur(), *ctx, phi, phi_old);
            const auto ref = oracle::dense_coupled_solve(dense, phi, phi_old);
            worst = std::max({worst, oracle::relative_error(p.bulk, ref.potentials.bulk),
                              oracle::relative_error(p.surface, ref.potentials.surface)});
        }
        out.push_back({"reduction", worst <= 1e-8, "max relative error over 10 random inputs " + fmt(worst)});
    }
    {
        std::mt19937_64 rng(cfg.seed + 29);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            Vector phi(mesh.n_vertices()), phi_old(mesh.n_vertices()), v(mesh.n_vertices());
            for (auto& x : phi) x = dist(rng);
            for (auto& x : phi_old) x = dist(rng);
            for (auto& x : v) x = dist(rng);
            const double eps = 1e-6;
            const Vector fd = (stepper.residual(phi + eps * v, phi_old) - stepper.residual(phi - eps * v, phi_old)) / (2 * eps);
            worst = std::max(worst, oracle::relative_error(stepper.jacobian_apply(phi, v), fd));
        }
        out.push_back({"jacobian", worst <= 1e-5, "max relative error vs central differences " + fmt(worst)});
    }
    {
        StepState state = stepper.initial_state(initial_condition(cfg.initial, mesh, cfg.seed));
        const double mass0 = state.diagnostics.bulk_mass, surf0 = state.diagnostics.surf_mass;
        const double mass_scale = std::max(1e-300, std::abs(mass0)), surf_scale = std::max(1e-300, std::abs(surf0));
        double worst_pot = 0.0, worst_omega = 0.0, worst_gamma = 0.0, worst_mu = 0.0, worst_compat = 0.0;
        double worst_mass = 0.0, worst_surf = 0.0;
        bool ok_form = true, ok_compat = true, ok_energy = true;
        const Index steps = std::min(cfg.steps, max_steps);
        for (Index k = 1; k <= steps; ++k) {
            const Vector phi_old = state.phi;
            state = stepper.advance(state);
            const auto ref = oracle::dense_coupled_solve(dense, state.phi, phi_old);
            worst_pot = std::max({worst_pot, oracle::relative_error(state.potentials.bulk, ref.potentials.bulk),
                                  oracle::relative_error(state.potentials.surface, ref.potentials.surface)});
            const auto compat = compatibility_defect(*ctx, state.potentials);
            const double compat_tol = 10.0 * cfg.schur.cg_tol * std::max(1.0, compat.scale);
            ok_compat = ok_compat && compat.defect <= compat_tol;
            worst_compat = std::max(worst_compat, compat.defect);
            const auto form = oracle::verify_matrixform(dense, state.phi, state.potentials, phi_old);
            const double phase_tol =
                10.0 * (std::max(cfg.newton.abs_tol, state.residual_norm) + cfg.model.tau * compat_tol);
            ok_form = ok_form && form.pass(phase_tol, 10.0 * cfg.newton.abs_tol);
            worst_omega = std::max(worst_omega, form.omega_phi);
            worst_gamma = std::max(worst_gamma, form.gamma_phi);
            worst_mu = std::max(worst_mu, form.mu);
            ok_energy = ok_energy && state.energy_check.pass;
            worst_mass = std::max(worst_mass, std::abs(state.diagnostics.bulk_mass - mass0) / mass_scale);
            worst_surf = std::max(worst_surf, std::abs(state.diagnostics.surf_mass - surf0) / surf_scale);
        }
        const std::string tag = " over " + std::to_string(steps) + " steps";
        out.push_back({"step_potentials", worst_pot <= 1e-8, "max relative error vs dense solve " + fmt(worst_pot) + tag});
        out.push_back({"matrix_form", ok_form,
                       "max residuals omega " + fmt(worst_omega) + ", gamma " + fmt(worst_gamma) + ", mu " + fmt(worst_mu) + tag});
        out.push_back({"compatibility", ok_compat, "max defect " + fmt(worst_compat) + tag});
        out.push_back({"energy_law", ok_energy, "per-step discrete energy law" + tag});
        // zero initial mass makes a relative drift meaningless; fall back to absolute
        const bool ok_mass = (std::abs(mass0) > 0 ? worst_mass : worst_mass * mass_scale) <= 1e-10;
        out.push_back({"bulk_mass", ok_mass, "max relative drift " + fmt(worst_mass) + tag});
        if (cfg.model.mode == BoundaryMode::cahn_hilliard) {
            const bool ok_surf = (std::abs(surf0) > 0 ? worst_surf : worst_surf * surf_scale) <= 1e-10;
            out.push_back({"surface_mass", ok_surf, "max relative drift " + fmt(worst_surf) + tag});
        }
    }
    return out;
}

inline int cli_verify(const RunConfig& cfg, std::ostream& log)
{
    const auto results = oracle_suite(cfg);
    bool all = true;
    for (const auto& r : results) {
        log << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        all = all && r.pass;
    }
    log << (all ? "all checks passed" : "some checks FAILED") << '\n';
    return all ? exit_ok : exit_failure;
}

// ---------------------------------------------------------------------------
// refine

struct RefineLevel {
    Index n_vertices = 0;
    double h = 0.0;
    double tau = 0.0;
    Index steps = 0;
    double shape_regularity = 0.0;
    CouplingReport coupling;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    Index newton_iters = 0;
};

struct RefineStudy {
    std::vector<RefineLevel> levels;
    std::vector<double> l2_differences; // ‖Φ_{l+1} − I Φ_l‖ on level l+1
    std::vector<double> h1_differences; // H¹ seminorm of the same

    bool l2_strictly_decreasing() const
    {
        for (std::size_t i = 1; i < l2_differences.size(); ++i)
            if (!(l2_differences[i] < l2_differences[i - 1])) return false;
        return true;
    }
};

/// Uniform refinement ladder: level l halves h and divides τ by four, with
/// the same final time. Final states are compared after exact prolongation
/// of the coarser one.
inline RefineStudy refine_study(const RunConfig& cfg, Index levels)
{
    if (levels < 2) throw ConfigError("refine: at least 2 levels are needed");
    RefineStudy study;
    Mesh mesh = build_mesh(cfg);
    std::vector<RefinedMesh> ladder;
    Vector previous_final;
    for (Index l = 0; l < levels; ++l) {
        if (l > 0) {
            ladder.push_back(refine_uniform(mesh));
            mesh = ladder.back().mesh;
        }
        RunConfig level_cfg = cfg;
        const double factor = std::pow(4.0, static_cast<double>(l));
        level_cfg.model.tau = cfg.model.tau / factor;
        level_cfg.steps = cfg.steps * static_cast<Index>(factor);
        const auto ctx = make_context(mesh, level_cfg);
        const TimeStepper stepper(ctx, cfg.newton, cfg.schur);

        RefineLevel info;
        info.n_vertices = mesh.n_vertices();
        info.h = mesh.h_max();
        info.tau = level_cfg.model.tau;
        info.steps = level_cfg.steps;
        info.shape_regularity = mesh.shape_regularity();
        info.coupling = assumption_C_report(info.h, info.tau, cfg.model.kappa);

        StepState state = stepper.initial_state(initial_condition(cfg.initial, mesh, cfg.seed));
        info.initial_energy = state.diagnostics.total;
        for (Index k = 1; k <= level_cfg.steps; ++k) {
            state = stepper.advance(state);
            info.newton_iters += state.newton_iters;
        }
        info.final_energy = state.diagnostics.total;
        study.levels.push_back(info);

        if (l > 0) {
            const Vector diff = state.phi - prolongate(ladder.back(), previous_final);
            study.l2_differences.push_back(std::sqrt(diff.dot(ctx->disc.mass_bulk.apply(diff))));
            study.h1_differences.push_back(std::sqrt(std::max(0.0, diff.dot(ctx->disc.stiffness_bulk * diff))));
        }
        previous_final = state.phi;
    }
    return study;
}

inline void print_refine_study(std::ostream& log, const RefineStudy& study)
{
    const auto old_flags = log.flags();
    const auto old_precision = log.precision(6);
    log << "level  vertices  h          tau        steps  shape    coupling   E0          E_final\n";
    for (std::size_t l = 0; l < study.levels.size(); ++l) {
        const auto& v = study.levels[l];
        log << std::left << std::setw(7) << l << std::setw(10) << v.n_vertices << std::setw(11) << v.h << std::setw(11)
            << v.tau << std::setw(7) << v.steps << std::setw(9) << v.shape_regularity << std::setw(11)
            << v.coupling.ratio << std::setw(12) << v.initial_energy << v.final_energy << '\n';
    }
    log << "successive differences of final states (fine level minus prolongated coarse level):\n";
    for (std::size_t i = 0; i < study.l2_differences.size(); ++i)
        log << "  " << i << " -> " << i + 1 << ": L2 " << study.l2_differences[i] << ", H1 seminorm "
            << study.h1_differences[i] << '\n';
    log << "L2 differences " << (study.l2_strictly_decreasing() ? "strictly decreasing" : "NOT strictly decreasing")
        << " (Cauchy evidence only; no rate is claimed)\n";
    log.flags(old_flags);
    log.precision(old_precision);
}

inline int cli_refine(const RunConfig& cfg, Index levels, std::ostream& log)
{
    const RefineStudy study = refine_study(cfg, levels);
    print_refine_study(log, study);
    return exit_ok;
}

} // namespace chdyn
