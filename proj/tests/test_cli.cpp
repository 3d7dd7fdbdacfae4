#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome run_cli(const std::string& args, const fs::path& dir)
{
    const fs::path log = dir / "cli.log";
    const std::string cmd = std::string("\"") + CHDYN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    o.output = ss.str();
    return o;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("chdyn_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    const fs::path p = dir / "case.cfg";
    std::ofstream(p) << text;
    return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST(Cli, RunWritesMonotoneDiagnosticsAndSnapshots)
{
    const fs::path dir = scratch("run");
    const auto cfg = write_config(dir, "mesh.structured = 6\nmodel.tau = 1e-3\ninitial.condition = random(0.1)\n"
                                       "initial.seed = 3\nrun.steps = 12\noutput.every = 5\n");
    const auto out = dir / "out";
    const auto r = run_cli("run \"" + cfg.string() + "\" -o \"" + out.string() + "\" --dump-matrices", dir);
    ASSERT_EQ(r.code, 0) << r.output;

    const auto rows = read_csv(out / "diagnostics.csv");
    ASSERT_EQ(rows.size(), 14u); // header + steps 0..12
    std::size_t total = 0;
    while (total < rows[0].size() && rows[0][total] != "total") ++total;
    ASSERT_LT(total, rows[0].size());
    for (std::size_t k = 2; k < rows.size(); ++k)
        EXPECT_LE(std::stod(rows[k][total]), std::stod(rows[k - 1][total]) + 1e-12) << "row " << k;

    for (int step : {0, 5, 10, 12}) {
        char name[32];
        std::snprintf(name, sizeof name, "state_%06d.vtk", step);
        EXPECT_TRUE(fs::exists(out / name)) << name;
    }
    EXPECT_FALSE(fs::exists(out / "state_000003.vtk"));
    EXPECT_TRUE(fs::exists(out / "state_000012_gamma.vtk"));
    EXPECT_FALSE(fs::is_empty(out / "matrices"));
    fs::remove_all(dir);
}

TEST(Cli, VerifyPassesOnSmallMesh)
{
    const fs::path dir = scratch("verify");
    const auto cfg = write_config(dir, "mesh.structured = 2\nmodel.tau = 1e-2\ninitial.condition = random(0.5)\n"
                                       "initial.seed = 1\nrun.steps = 3\n");
    const auto r = run_cli("verify \"" + cfg.string() + "\"", dir);
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("all checks passed"), std::string::npos) << r.output;
    EXPECT_EQ(r.output.find("FAIL"), std::string::npos) << r.output;
    fs::remove_all(dir);
}

TEST(Cli, RefineReportsLadder)
{
    const fs::path dir = scratch("refine");
    const auto cfg = write_config(dir, "mesh.structured = 2\nmodel.tau = 1e-2\n"
                                       "initial.condition = tanh(1, 0, 0.5, 0.3)\nrun.steps = 2\n");
    const auto r = run_cli("refine \"" + cfg.string() + "\" --levels 2", dir);
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("0 -> 1"), std::string::npos) << r.output;
    fs::remove_all(dir);
}

TEST(Cli, BadInputExitsWithTwo)
{
    const fs::path dir = scratch("bad");
    const auto cfg = write_config(dir, "mesh.structured = 4\nmodel.tau = -1\n");
    auto r = run_cli("run \"" + cfg.string() + "\"", dir);
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("model.tau"), std::string::npos) << r.output;

    r = run_cli("run \"" + (dir / "missing.cfg").string() + "\"", dir);
    EXPECT_EQ(r.code, 2) << r.output;

    const auto broken_mesh = dir / "broken.chmesh";
    std::ofstream(broken_mesh) << "chmesh 2d\nvertices 1\n0 0\n";
    const auto cfg2 = write_config(dir, "mesh.file = broken.chmesh\n");
    r = run_cli("run \"" + cfg2.string() + "\"", dir);
    EXPECT_EQ(r.code, 2) << r.output;

    r = run_cli("frobnicate", dir);
    EXPECT_EQ(r.code, 2) << r.output;
    fs::remove_all(dir);
}
