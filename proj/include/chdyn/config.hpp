#pragma once

// Run configuration: flat `key = value` text.
//
//   # comment                      full-line or after whitespace
//   [model]                        section header, prefixes following keys
//   tau = 1e-3                     -> model.tau
//   model.kappa = 1                dotted keys work anywhere
//
// Every key is known in advance; anything else is rejected with the key name.
// mesh.file is resolved against the config file's directory, output.dir
// against the working directory.

#include "chdyn/errors.hpp"
#include "chdyn/initial_condition.hpp"
#include "chdyn/params.hpp"
#include "chdyn/potential_solver.hpp"
#include "chdyn/potentials.hpp"
#include "chdyn/time_stepper.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chdyn {

struct RunConfig {
    std::optional<std::filesystem::path> mesh_file;
    std::optional<Index> structured_n;
    ModelParams model;
    std::string bulk_potential_spec = "doublewell";
    std::string surface_potential_spec = "doublewell";
    PotentialSplit bulk_potential = double_well_penalized(0.0);
    PotentialSplit surface_potential = double_well_penalized(0.0);
    NewtonConfig newton;
    SchurSettings schur;
    Index steps = 10;
    std::filesystem::path output_dir = "output";
    Index output_every = 0; // 0: first and last state only
    InitialCondition initial;
    std::uint64_t seed = 0;
    Index refine_levels = 3;
};

namespace config_detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline double to_double(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    if (!std::isfinite(v)) throw ConfigError(key + ": value must be finite");
    return v;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& text)
{
    Int v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return v;
}

/// "name(a, b, …)" -> name and arguments; "name" -> name and no arguments.
struct Call {
    std::string name;
    std::vector<std::string> args;
};

inline Call parse_call(const std::string& key, const std::string& text)
{
    Call c;
    const auto open = text.find('(');
    if (open == std::string::npos) {
        c.name = trim(text);
        return c;
    }
    if (text.back() != ')') throw ConfigError(key + ": missing ')' in '" + text + "'");
    c.name = trim(std::string_view(text).substr(0, open));
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    if (!trim(inner).empty()) {
        std::stringstream ss(inner);
        std::string part;
        while (std::getline(ss, part, ',')) c.args.push_back(trim(part));
        if (inner.back() == ',') c.args.emplace_back();
    }
    return c;
}

inline void expect_args(const std::string& key, const Call& c, std::size_t lo, std::size_t hi)
{
    if (c.args.size() < lo || c.args.size() > hi) {
        std::ostringstream msg;
        msg << key << ": " << c.name << " takes ";
        if (lo == hi)
            msg << lo;
        else
            msg << lo << " to " << hi;
        msg << " argument(s), got " << c.args.size();
        throw ConfigError(msg.str());
    }
}

} // namespace config_detail

/// "doublewell", "doublewell(c_pen)" or "wetting".
inline PotentialSplit parse_potential(const std::string& key, const std::string& text)
{
    using namespace config_detail;
    const Call c = parse_call(key, text);
    if (c.name == "doublewell") {
        expect_args(key, c, 0, 1);
        const double pen = c.args.empty() ? 0.0 : to_double(key, c.args[0]);
        if (pen < 0.0) throw ConfigError(key + ": doublewell penalty must be >= 0");
        return double_well_penalized(pen);
    }
    if (c.name == "wetting") {
        expect_args(key, c, 0, 0);
        return wetting_energy();
    }
    throw ConfigError(key + ": unknown potential '" + c.name + "' (expected doublewell or wetting)");
}

/// "constant(c)", "random(amplitude, mean)" or "tanh(nx, ny, offset, width)".
inline InitialCondition parse_initial_condition(const std::string& key, const std::string& text)
{
    using namespace config_detail;
    const Call c = parse_call(key, text);
    InitialCondition ic;
    if (c.name == "constant") {
        expect_args(key, c, 1, 1);
        ic = InitialCondition::make_constant(to_double(key, c.args[0]));
    } else if (c.name == "random") {
        expect_args(key, c, 1, 2);
        ic = InitialCondition::make_random(to_double(key, c.args[0]), c.args.size() > 1 ? to_double(key, c.args[1]) : 0.0);
    } else if (c.name == "tanh") {
        expect_args(key, c, 4, 4);
        ic = InitialCondition::make_tanh(to_double(key, c.args[0]), to_double(key, c.args[1]), to_double(key, c.args[2]),
                                         to_double(key, c.args[3]));
    } else {
        throw ConfigError(key + ": unknown initial condition '" + c.name + "' (expected constant, random or tanh)");
    }
    try {
        validate(ic);
    } catch (const ConfigError& e) {
        throw ConfigError(key + std::string(e.what()).substr(std::string("initial.condition").size()));
    }
    return ic;
}

/// Splits the text into (key, value) pairs; rejects malformed lines and repeats.
inline std::map<std::string, std::string> parse_key_values(std::istream& in)
{
    using config_detail::trim;
    std::map<std::string, std::string> entries;
    std::string section;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": missing key");
        if (value.empty()) throw ConfigError(where + ": " + key + " has no value");
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        if (!entries.emplace(key, value).second) throw ConfigError(where + ": duplicate key " + key);
    }
    return entries;
}

/// Parses and validates a whole configuration. Relative mesh paths resolve
/// against `base_dir`.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {})
{
    using namespace config_detail;
    const auto entries = parse_key_values(in);
    RunConfig cfg;

    auto number = [](const std::string& k, const std::string& v) { return to_double(k, v); };
    auto count = [](const std::string& k, const std::string& v) {
        const auto n = to_integer<long long>(k, v);
        return static_cast<Index>(n);
    };

    for (const auto& [key, value] : entries) {
        if (key == "mesh.file") {
            std::filesystem::path p = value;
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            cfg.mesh_file = p;
        } else if (key == "mesh.structured") {
            cfg.structured_n = count(key, value);
        } else if (key == "model.m") {
            cfg.model.mobility = number(key, value);
        } else if (key == "model.m_gamma") {
            cfg.model.surface_mobility = number(key, value);
        } else if (key == "model.sigma") {
            cfg.model.sigma = number(key, value);
        } else if (key == "model.delta") {
            cfg.model.delta = number(key, value);
        } else if (key == "model.delta_gamma") {
            cfg.model.delta_gamma = number(key, value);
        } else if (key == "model.kappa") {
            cfg.model.kappa = number(key, value);
        } else if (key == "model.tau") {
            cfg.model.tau = number(key, value);
        } else if (key == "model.bc") {
            if (value == "ch")
                cfg.model.mode = BoundaryMode::cahn_hilliard;
            else if (value == "ac")
                cfg.model.mode = BoundaryMode::allen_cahn;
            else
                throw ConfigError(key + ": expected ch or ac, got '" + value + "'");
        } else if (key == "potential.bulk") {
            cfg.bulk_potential_spec = value;
            cfg.bulk_potential = parse_potential(key, value);
        } else if (key == "potential.surface") {
            cfg.surface_potential_spec = value;
            cfg.surface_potential = parse_potential(key, value);
        } else if (key == "newton.abs_tol") {
            cfg.newton.abs_tol = number(key, value);
        } else if (key == "newton.rel_tol") {
            cfg.newton.rel_tol = number(key, value);
        } else if (key == "newton.max_iters") {
            cfg.newton.max_iters = count(key, value);
        } else if (key == "newton.damping") {
            cfg.newton.damping = number(key, value);
        } else if (key == "newton.max_backtracks") {
            cfg.newton.max_backtracks = count(key, value);
        } else if (key == "krylov.tol") {
            cfg.newton.krylov_tol = number(key, value);
        } else if (key == "krylov.restart") {
            cfg.newton.krylov_restart = count(key, value);
        } else if (key == "krylov.maxit") {
            cfg.newton.krylov_maxit = count(key, value);
        } else if (key == "krylov.preconditioner") {
            if (value == "coupled")
                cfg.newton.preconditioner = Preconditioner::coupled;
            else if (value == "none")
                cfg.newton.preconditioner = Preconditioner::none;
            else
                throw ConfigError(key + ": expected coupled or none, got '" + value + "'");
        } else if (key == "solver.schur") {
            if (value == "auto")
                cfg.schur.method = SchurMethod::automatic;
            else if (value == "cholesky")
                cfg.schur.method = SchurMethod::cholesky;
            else if (value == "cg")
                cfg.schur.method = SchurMethod::cg;
            else
                throw ConfigError(key + ": expected auto, cholesky or cg, got '" + value + "'");
        } else if (key == "solver.cg_tol") {
            cfg.schur.cg_tol = number(key, value);
        } else if (key == "solver.cg_maxit") {
            cfg.schur.cg_maxit = count(key, value);
        } else if (key == "run.steps") {
            cfg.steps = count(key, value);
        } else if (key == "output.dir") {
            cfg.output_dir = value;
        } else if (key == "output.every") {
            cfg.output_every = count(key, value);
        } else if (key == "initial.condition") {
            cfg.initial = parse_initial_condition(key, value);
        } else if (key == "initial.seed") {
            cfg.seed = to_integer<std::uint64_t>(key, value);
        } else if (key == "refine.levels") {
            cfg.refine_levels = count(key, value);
        } else {
            throw ConfigError("unknown key " + key);
        }
    }

    if (cfg.mesh_file && cfg.structured_n) throw ConfigError("mesh.file and mesh.structured are mutually exclusive");
    if (!cfg.mesh_file && !cfg.structured_n) throw ConfigError("mesh: one of mesh.file or mesh.structured is required");
    if (cfg.structured_n && *cfg.structured_n < 1) throw ConfigError("mesh.structured must be >= 1");
    if (cfg.mesh_file && !std::filesystem::is_regular_file(*cfg.mesh_file))
        throw ConfigError("mesh.file: " + cfg.mesh_file->string() + " does not exist");
    validate(cfg.model, cfg.surface_potential);
    validate(cfg.newton);
    if (!(cfg.schur.cg_tol > 0.0 && cfg.schur.cg_tol < 1.0)) throw ConfigError("solver.cg_tol must lie in (0, 1)");
    if (cfg.schur.cg_maxit < 0) throw ConfigError("solver.cg_maxit must be >= 0");
    if (cfg.steps < 1) throw ConfigError("run.steps must be >= 1");
    if (cfg.output_every < 0) throw ConfigError("output.every must be >= 0");
    if (cfg.output_dir.empty()) throw ConfigError("output.dir must not be empty");
    if (cfg.refine_levels < 2) throw ConfigError("refine.levels must be >= 2");
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in, path.parent_path());
}

inline Mesh build_mesh(const RunConfig& cfg, LoadReport* report = nullptr)
{
    if (cfg.mesh_file) return load_mesh(*cfg.mesh_file, report);
    return structured_unit_square(*cfg.structured_n);
}

} // namespace chdyn
