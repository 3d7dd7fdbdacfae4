#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace chdyn {

using ScalarFn = std::function<double(double)>;

/// A potential W = W₊ + W₋ split into a convex part (treated implicitly in
/// time) and a concave part (treated explicitly), with two derivatives each.
struct PotentialSplit {
    std::string name;

    ScalarFn convex_value;
    ScalarFn convex_d1;
    ScalarFn convex_d2;
    ScalarFn concave_value;
    ScalarFn concave_d1;
    ScalarFn concave_d2;

    /// Quadratic gain of the concave part:
    /// W₋'(s₂)(s₁ − s₂) ≥ W₋(s₁) − W₋(s₂) + β|s₁ − s₂|².
    double beta = 0.0;
    /// W(s) ≥ lower_bound for all s.
    double lower_bound = 0.0;

    double value(double s) const { return convex_value(s) + concave_value(s); }
    double d1(double s) const { return convex_d1(s) + concave_d1(s); }
    double d2(double s) const { return convex_d2(s) + concave_d2(s); }
};

/// Implicit-convex / explicit-concave derivative W₊'(new) + W₋'(old).
inline double evaluate_mixed_d1(const PotentialSplit& split, double phi_new, double phi_old)
{
    return split.convex_d1(phi_new) + split.concave_d1(phi_old);
}

/// ¼(1 − φ²)² + c_pen·max(|φ| − 1, 0)², split as ¼(φ⁴ + 1) + penalty and −½φ².
///
/// The penalty is C¹ but not C²; its second derivative at |φ| = 1 takes the
/// right-sided value 2·c_pen.
inline PotentialSplit double_well_penalized(double c_pen)
{
    if (!(c_pen >= 0.0)) throw std::invalid_argument("double well penalty must be >= 0");
    auto excess = [](double s) { return std::max(std::abs(s) - 1.0, 0.0); };

    PotentialSplit w;
    std::ostringstream name;
    name << "doublewell(" << c_pen << ")";
    w.name = name.str();
    w.convex_value = [=](double s) {
        const double e = excess(s);
        return 0.25 * (s * s * s * s + 1.0) + c_pen * e * e;
    };
    w.convex_d1 = [=](double s) {
        const double e = excess(s);
        return s * s * s + 2.0 * c_pen * e * (s < 0.0 ? -1.0 : 1.0);
    };
    w.convex_d2 = [=](double s) { return 3.0 * s * s + (std::abs(s) >= 1.0 ? 2.0 * c_pen : 0.0); };
    w.concave_value = [](double s) { return -0.5 * s * s; };
    w.concave_d1 = [](double s) { return -s; };
    w.concave_d2 = [](double) { return -1.0; };
    w.beta = 0.5;
    w.lower_bound = 0.0;
    return w;
}

/// Fluid-solid interfacial energy sin(π/2·clamp(φ, −1, 1)) split with ±π²φ²/8.
inline PotentialSplit wetting_energy()
{
    using std::numbers::pi;
    constexpr double k = pi * pi / 8.0;
    auto clamp1 = [](double s) { return std::clamp(s, -1.0, 1.0); };

    PotentialSplit g;
    g.name = "wetting";
    g.convex_value = [=](double s) { return std::sin(0.5 * pi * clamp1(s)) + k * s * s; };
    g.convex_d1 = [=](double s) {
        const double sine_part = std::abs(s) < 1.0 ? 0.5 * pi * std::cos(0.5 * pi * s) : 0.0;
        return sine_part + 2.0 * k * s;
    };
    g.convex_d2 = [=](double s) {
        const double sine_part = std::abs(s) < 1.0 ? -0.25 * pi * pi * std::sin(0.5 * pi * s) : 0.0;
        return sine_part + 2.0 * k;
    };
    g.concave_value = [=](double s) { return -k * s * s; };
    g.concave_d1 = [=](double s) { return -2.0 * k * s; };
    g.concave_d2 = [=](double) { return -2.0 * k; };
    g.beta = k;
    g.lower_bound = -1.0;
    return g;
}

} // namespace chdyn
