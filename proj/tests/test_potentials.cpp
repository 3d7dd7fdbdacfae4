#include "chdyn/potentials.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace chdyn;

namespace {

std::vector<double> grid(double lo, double hi, int n)
{
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return s;
}

// Avoids the kinks |s| = 1 of the penalty and the clamp.
std::vector<double> smooth_samples()
{
    std::vector<double> out;
    for (double s : grid(-3.0, 3.0, 100))
        if (std::abs(std::abs(s) - 1.0) > 1e-3) out.push_back(s);
    return out;
}

std::vector<PotentialSplit> shipped()
{
    return {double_well_penalized(0.0), double_well_penalized(10.0), wetting_energy()};
}

double central(const ScalarFn& f, double s, double h) { return (f(s + h) - f(s - h)) / (2.0 * h); }

} // namespace

TEST(DoubleWell, ValuesAtMinimum)
{
    const auto w = double_well_penalized(0.0);
    EXPECT_DOUBLE_EQ(w.value(1.0), 0.0);
    EXPECT_DOUBLE_EQ(w.d1(1.0), 0.0);
    EXPECT_DOUBLE_EQ(w.convex_d1(1.0), 1.0);
    EXPECT_DOUBLE_EQ(w.concave_d1(1.0), -1.0);
}

TEST(DoubleWell, ValuesAtZero)
{
    const auto w = double_well_penalized(0.0);
    EXPECT_DOUBLE_EQ(w.value(0.0), 0.25);
    EXPECT_DOUBLE_EQ(w.convex_d2(0.0), 0.0);
    EXPECT_DOUBLE_EQ(w.concave_d2(0.0), -1.0);
}

TEST(DoubleWell, PenaltyOutsideUnitInterval)
{
    const auto w = double_well_penalized(10.0);
    // ¼(1 − 2.25)² + 10·0.5²
    EXPECT_DOUBLE_EQ(w.value(1.5), 0.390625 + 2.5);
    EXPECT_DOUBLE_EQ(w.value(-1.5), 0.390625 + 2.5);
    EXPECT_DOUBLE_EQ(w.convex_d2(1.0), 3.0 + 20.0); // right-sided at the kink
    EXPECT_THROW(double_well_penalized(-1.0), std::invalid_argument);
}

TEST(Wetting, ReferenceValues)
{
    const auto g = wetting_energy();
    const double k = M_PI * M_PI / 8.0;
    EXPECT_DOUBLE_EQ(g.value(0.0), 0.0);
    EXPECT_NEAR(g.convex_value(1.0), 1.0 + k, 1e-15);
    EXPECT_NEAR(g.concave_value(1.0), -k, 1e-15);
    EXPECT_NEAR(g.value(1.0), 1.0, 1e-14);
    EXPECT_NEAR(g.value(3.0), 1.0, 1e-13);
    EXPECT_NEAR(g.value(-3.0), -1.0, 1e-13);
    EXPECT_DOUBLE_EQ(g.beta, k);
}

TEST(MixedDerivative, ConvexNewConcaveOld)
{
    const auto w = double_well_penalized(0.0);
    EXPECT_DOUBLE_EQ(evaluate_mixed_d1(w, 1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(evaluate_mixed_d1(w, 1.0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(evaluate_mixed_d1(w, 0.0, 1.0), -1.0);
}

TEST(Potentials, DerivativesMatchCentralDifferences)
{
    for (const auto& p : shipped()) {
        for (double s : smooth_samples()) {
            const double h = 1e-5;
            auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
            EXPECT_LT(rel(central(p.convex_value, s, h), p.convex_d1(s)), 1e-6) << p.name << " s=" << s;
            EXPECT_LT(rel(central(p.concave_value, s, h), p.concave_d1(s)), 1e-6) << p.name << " s=" << s;
            EXPECT_LT(rel(central(p.convex_d1, s, h), p.convex_d2(s)), 1e-6) << p.name << " s=" << s;
            EXPECT_LT(rel(central(p.concave_d1, s, h), p.concave_d2(s)), 1e-6) << p.name << " s=" << s;
        }
    }
}

TEST(Potentials, FirstDerivativesAreContinuousAtKinks)
{
    for (const auto& p : shipped()) {
        for (double s : {-1.0, 1.0}) {
            const double e = 1e-9;
            EXPECT_NEAR(p.convex_d1(s - e), p.convex_d1(s + e), 1e-7) << p.name;
            EXPECT_NEAR(p.d1(s - e), p.d1(s + e), 1e-7) << p.name;
        }
    }
}

TEST(Potentials, ConvexConcaveSignsAndLowerBound)
{
    for (const auto& p : shipped()) {
        for (double s : grid(-3.0, 3.0, 1000)) {
            EXPECT_GE(p.convex_d2(s), 0.0) << p.name << " s=" << s;
            EXPECT_LE(p.concave_d2(s), 0.0) << p.name << " s=" << s;
            EXPECT_GE(p.value(s), p.lower_bound) << p.name << " s=" << s;
        }
    }
}

TEST(Potentials, SplittingInequalities)
{
    const auto s = grid(-3.0, 3.0, 61);
    for (const auto& p : shipped()) {
        for (double a : s) {
            for (double b : s) {
                const double slack = 1e-12 * (1.0 + std::abs(p.convex_value(a)) + std::abs(p.convex_value(b)));
                EXPECT_GE(p.convex_d1(a) * (a - b), p.convex_value(a) - p.convex_value(b) - slack) << p.name;
                EXPECT_GE(p.concave_d1(b) * (a - b),
                          p.concave_value(a) - p.concave_value(b) + p.beta * (a - b) * (a - b) - slack)
                    << p.name;
            }
        }
    }
}

TEST(Potentials, CubicGrowthOfFirstDerivative)
{
    for (const auto& p : shipped()) {
        double c = 0.0;
        for (double s : grid(-10.0, 10.0, 2001)) c = std::max(c, std::abs(p.d1(s)) / (1.0 + std::abs(s * s * s)));
        // the ratio still creeps up past |s| = 10 (s³ − s over 1 + s³ tends to 1 from below)
        for (double s : grid(-1000.0, 1000.0, 2001))
            EXPECT_LE(std::abs(p.d1(s)), 1.05 * c * (1.0 + std::abs(s * s * s))) << p.name;
    }
}

TEST(Wetting, SinePartHasLipschitzDerivative)
{
    // d/ds sin(π/2·clamp(s)) is bounded by π²/4 in slope
    const auto g = wetting_energy();
    const double k = M_PI * M_PI / 8.0;
    const auto s = grid(-3.0, 3.0, 1000);
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double d_prev = g.convex_d1(s[i - 1]) - 2.0 * k * s[i - 1];
        const double d_next = g.convex_d1(s[i]) - 2.0 * k * s[i];
        EXPECT_LE(std::abs(d_next - d_prev), M_PI * M_PI / 4.0 * (s[i] - s[i - 1]) + 1e-12);
    }
}
