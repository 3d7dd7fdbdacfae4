#pragma once

#include "chdyn/assembly.hpp"
#include "chdyn/errors.hpp"
#include "chdyn/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace chdyn {

/// φ₀ choices. All are evaluated by nodal interpolation.
struct InitialCondition {
    enum class Kind { constant, random, tanh_interface };

    Kind kind = Kind::constant;
    double value = 0.0;     // constant
    double amplitude = 0.0; // random: uniform on [mean − amplitude, mean + amplitude]
    double mean = 0.0;
    double nx = 1.0, ny = 0.0; // tanh_interface: unit normal
    double offset = 0.5;
    double width = 0.1;

    static InitialCondition make_constant(double c)
    {
        InitialCondition ic;
        ic.value = c;
        return ic;
    }
    static InitialCondition make_random(double amplitude, double mean)
    {
        InitialCondition ic;
        ic.kind = Kind::random;
        ic.amplitude = amplitude;
        ic.mean = mean;
        return ic;
    }
    static InitialCondition make_tanh(double nx, double ny, double offset, double width)
    {
        InitialCondition ic;
        ic.kind = Kind::tanh_interface;
        ic.nx = nx;
        ic.ny = ny;
        ic.offset = offset;
        ic.width = width;
        return ic;
    }
};

inline void validate(const InitialCondition& ic)
{
    switch (ic.kind) {
    case InitialCondition::Kind::constant:
        if (!std::isfinite(ic.value)) throw ConfigError("initial.condition: constant value must be finite");
        break;
    case InitialCondition::Kind::random:
        if (!std::isfinite(ic.mean)) throw ConfigError("initial.condition: random mean must be finite");
        if (!(ic.amplitude >= 0.0) || !std::isfinite(ic.amplitude))
            throw ConfigError("initial.condition: random amplitude must be finite and >= 0");
        break;
    case InitialCondition::Kind::tanh_interface:
        if (!std::isfinite(ic.nx) || !std::isfinite(ic.ny) || std::hypot(ic.nx, ic.ny) == 0.0)
            throw ConfigError("initial.condition: tanh normal must be a finite nonzero vector");
        if (!std::isfinite(ic.offset)) throw ConfigError("initial.condition: tanh offset must be finite");
        if (!(ic.width > 0.0) || !std::isfinite(ic.width))
            throw ConfigError("initial.condition: tanh width must be finite and > 0");
        break;
    }
}

/// Nodal values of φ₀. The random variant draws one value per vertex in
/// vertex order from a 64-bit Mersenne Twister, so a fixed seed reproduces
/// the field exactly.
inline Vector initial_condition(const InitialCondition& ic, const Mesh& mesh, std::uint64_t seed = 0)
{
    validate(ic);
    const Index n = mesh.n_vertices();
    Vector phi(n);
    switch (ic.kind) {
    case InitialCondition::Kind::constant:
        phi.setConstant(ic.value);
        break;
    case InitialCondition::Kind::random: {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(ic.mean - ic.amplitude, ic.mean + ic.amplitude);
        for (Index i = 0; i < n; ++i) phi[i] = ic.amplitude == 0.0 ? ic.mean : dist(rng);
        break;
    }
    case InitialCondition::Kind::tanh_interface: {
        const double len = std::hypot(ic.nx, ic.ny);
        const double ux = ic.nx / len, uy = ic.ny / len;
        for (Index i = 0; i < n; ++i) {
            const auto& p = mesh.vertices()[static_cast<std::size_t>(i)];
            phi[i] = std::tanh((p.x * ux + p.y * uy - ic.offset) / ic.width);
        }
        break;
    }
    }
    return phi;
}

} // namespace chdyn
