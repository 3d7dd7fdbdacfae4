#pragma once

#include <stdexcept>
#include <string>

namespace chdyn {

/// Malformed or invalid mesh input.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value; raised before any computation starts.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure of a linear or nonlinear solve.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace chdyn
