#pragma once

#include "chdyn/errors.hpp"
#include "chdyn/potentials.hpp"

#include <cmath>
#include <string>

namespace chdyn {

/// Which evolution law closes the problem on the boundary.
enum class BoundaryMode { cahn_hilliard, allen_cahn };

inline const char* to_string(BoundaryMode mode)
{
    return mode == BoundaryMode::cahn_hilliard ? "ch" : "ac";
}

/// Physical and numerical constants of the coupled bulk/surface model.
struct ModelParams {
    double mobility = 1.0;         // m
    double surface_mobility = 1.0; // m_Γ
    double sigma = 1.0;
    double delta = 1.0;
    double delta_gamma = 1.0;
    double kappa = 1.0; // surface diffusion weight, may be zero
    double tau = 1e-3;  // time increment
    BoundaryMode mode = BoundaryMode::cahn_hilliard;
};

/// Throws ConfigError naming the first offending field.
inline void validate(const ModelParams& p, const PotentialSplit& surface)
{
    auto positive = [](double v, const char* name) {
        if (!(std::isfinite(v) && v > 0.0)) throw ConfigError(std::string(name) + " must be a finite positive number");
    };
    positive(p.mobility, "model.m");
    positive(p.surface_mobility, "model.m_gamma");
    positive(p.sigma, "model.sigma");
    positive(p.delta, "model.delta");
    positive(p.delta_gamma, "model.delta_gamma");
    positive(p.tau, "model.tau");
    if (!(std::isfinite(p.kappa) && p.kappa >= 0.0)) throw ConfigError("model.kappa must be finite and >= 0");
    if (p.kappa == 0.0 && !(surface.beta > 0.0))
        throw ConfigError("model.kappa = 0 requires a surface potential with beta > 0 (got " + surface.name + ")");
}

} // namespace chdyn
