#include "chdyn/time_stepper.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace chdyn;

namespace {

std::shared_ptr<const SchemeContext> context(Index n, double tau = 1e-3, BoundaryMode mode = BoundaryMode::cahn_hilliard,
                                             PotentialSplit surface = double_well_penalized(0.0))
{
    ModelParams p;
    p.tau = tau;
    p.mode = mode;
    return make_context(structured_unit_square(n), p, double_well_penalized(0.0), std::move(surface));
}

Vector random_vector(Index n, std::mt19937_64& rng, double amp, double mean = 0.0)
{
    std::uniform_real_distribution<double> d(mean - amp, mean + amp);
    Vector v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double max_rel(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()); }

} // namespace

TEST(Residual, VanishesAtUniformStates)
{
    const auto ctx = context(6);
    const TimeStepper stepper(ctx);
    const Index n = ctx->blocks().n_total;
    for (double c : {1.0, -1.0, 0.0}) {
        const Vector u = Vector::Constant(n, c);
        EXPECT_LT(stepper.residual(u, u).cwiseAbs().maxCoeff(), 1e-13) << "c=" << c;
    }
}

TEST(Jacobian, MatchesCentralDifferences)
{
    std::mt19937_64 rng(11);
    for (auto mode : {BoundaryMode::cahn_hilliard, BoundaryMode::allen_cahn}) {
        const auto ctx = context(5, 1e-2, mode, wetting_energy());
        const TimeStepper stepper(ctx);
        const Index n = ctx->blocks().n_total;
        for (int pair = 0; pair < 10; ++pair) {
            // stay clear of the kinks at |Φ| = 1
            const Vector phi = random_vector(n, rng, 0.8);
            const Vector old = random_vector(n, rng, 0.8);
            const Vector v = random_vector(n, rng, 1.0);
            const double h = 1e-6;
            const Vector fd = (stepper.residual(phi + h * v, old) - stepper.residual(phi - h * v, old)) / (2.0 * h);
            EXPECT_LE(max_rel(stepper.jacobian_apply(phi, v), fd), 1e-5);
        }
    }
}

TEST(Jacobian, LinearInDirection)
{
    std::mt19937_64 rng(12);
    const auto ctx = context(5, 1e-2);
    const TimeStepper stepper(ctx);
    const Index n = ctx->blocks().n_total;
    const Vector phi = random_vector(n, rng, 1.2);
    const Vector a = random_vector(n, rng, 1.0), b = random_vector(n, rng, 1.0);
    EXPECT_LT(stepper.jacobian_apply(phi, Vector::Zero(n)).cwiseAbs().maxCoeff(), 1e-300);
    const Vector lhs = stepper.jacobian_apply(phi, Vector(3.0 * a - b));
    const Vector rhs = 3.0 * stepper.jacobian_apply(phi, a) - stepper.jacobian_apply(phi, b);
    EXPECT_LE(max_rel(lhs, rhs), 1e-12);
}

TEST(Newton, EquilibriumNeedsNoIterations)
{
    const auto ctx = context(4);
    const TimeStepper stepper(ctx);
    const Vector one = Vector::Ones(ctx->blocks().n_total);
    const StepState s = stepper.solve_step(one);
    EXPECT_EQ(s.newton_iters, 0);
    EXPECT_EQ(s.phi, one);
    EXPECT_DOUBLE_EQ(s.time, 1e-3);
}

TEST(Newton, ConvergesForLargeSteps)
{
    std::mt19937_64 rng(13);
    for (double tau : {0.1, 1.0}) {
        const auto ctx = context(8, tau);
        const TimeStepper stepper(ctx);
        const Vector old = random_vector(ctx->blocks().n_total, rng, 0.1);
        const StepState s = stepper.solve_step(old);
        EXPECT_LE(s.residual_norm, stepper.newton_config().abs_tol + stepper.newton_config().rel_tol * stepper.residual(old, old).norm());
        EXPECT_LE(s.diagnostics.total, energy(*ctx, old).total + energy_slack(energy(*ctx, old).total));
        EXPECT_LE(std::abs(s.diagnostics.bulk_mass - energy(*ctx, old).bulk_mass), 1e-10);
    }
}

TEST(Newton, WithoutPreconditionerAgrees)
{
    std::mt19937_64 rng(14);
    const auto ctx = context(6, 1e-3);
    NewtonConfig plain;
    plain.preconditioner = Preconditioner::none;
    const TimeStepper a(ctx), b(ctx, plain);
    const Vector old = random_vector(ctx->blocks().n_total, rng, 0.1);
    EXPECT_LE(max_rel(b.solve_step(old).phi, a.solve_step(old).phi), 1e-8);
}

TEST(Newton, MaxItersCarriesBestIterateAndHistory)
{
    std::mt19937_64 rng(15);
    const auto ctx = context(6, 1.0);
    NewtonConfig tight;
    tight.max_iters = 1;
    tight.abs_tol = 1e-300;
    tight.rel_tol = 1e-300;
    const TimeStepper stepper(ctx, tight);
    const Vector old = random_vector(ctx->blocks().n_total, rng, 0.5);
    try {
        stepper.solve_step(old);
        FAIL() << "expected MaxItersExceeded";
    } catch (const MaxItersExceeded& e) {
        ASSERT_EQ(e.residual_history.size(), 2u);
        EXPECT_LT(e.residual_history[1], e.residual_history[0]);
        EXPECT_EQ(e.best_iterate.size(), old.size());
        EXPECT_NEAR(stepper.residual(e.best_iterate, old).norm(), e.residual_history[1], 1e-12);
    }
}

TEST(Newton, RejectsNonFiniteInput)
{
    const auto ctx = context(3);
    const TimeStepper stepper(ctx);
    Vector bad = Vector::Zero(ctx->blocks().n_total);
    bad[2] = std::nan("");
    EXPECT_THROW(stepper.solve_step(bad), SolverError);
    EXPECT_THROW(stepper.solve_step(Vector::Zero(3)), std::invalid_argument);
}

TEST(NewtonConfig, Validation)
{
    const auto ctx = context(2);
    auto bad = [&](auto mutate) {
        NewtonConfig c;
        mutate(c);
        return c;
    };
    EXPECT_THROW(TimeStepper(ctx, bad([](NewtonConfig& c) { c.abs_tol = 0.0; })), ConfigError);
    EXPECT_THROW(TimeStepper(ctx, bad([](NewtonConfig& c) { c.max_iters = 0; })), ConfigError);
    EXPECT_THROW(TimeStepper(ctx, bad([](NewtonConfig& c) { c.damping = 1.0; })), ConfigError);
    EXPECT_THROW(TimeStepper(ctx, bad([](NewtonConfig& c) { c.krylov_tol = 1.0; })), ConfigError);
    EXPECT_THROW(TimeStepper(ctx, bad([](NewtonConfig& c) { c.krylov_restart = 0; })), ConfigError);
    EXPECT_NO_THROW(TimeStepper(ctx, NewtonConfig{}));
}

TEST(Run, EquilibriumStaysPut)
{
    const auto ctx = context(4, 0.5);
    const TimeStepper stepper(ctx);
    const Vector minus = -Vector::Ones(ctx->blocks().n_total);
    const auto states = stepper.run(minus, 5);
    ASSERT_EQ(states.size(), 6u);
    for (const auto& s : states) EXPECT_EQ(s.phi, minus);
    EXPECT_EQ(states.back().step, 5);
    EXPECT_DOUBLE_EQ(states.back().time, 2.5);
}

TEST(Run, SpinodalDecompositionDissipatesAndConserves)
{
    std::mt19937_64 rng(16);
    for (auto mode : {BoundaryMode::cahn_hilliard, BoundaryMode::allen_cahn}) {
        const auto ctx = context(12, 1e-3, mode);
        const TimeStepper stepper(ctx);
        const Vector init = random_vector(ctx->blocks().n_total, rng, 0.1);
        int callbacks = 0;
        const auto states = stepper.run(init, 100, [&](const StepState&) { ++callbacks; });
        EXPECT_EQ(callbacks, 101);
        const double m0 = states.front().diagnostics.bulk_mass;
        const double s0 = states.front().diagnostics.surf_mass;
        for (std::size_t k = 1; k < states.size(); ++k) {
            const auto& prev = states[k - 1].diagnostics;
            const auto& cur = states[k].diagnostics;
            EXPECT_LE(cur.total, prev.total + energy_slack(prev.total));
            EXPECT_TRUE(states[k].energy_check.pass);
            EXPECT_LE(std::abs(cur.bulk_mass - m0), 1e-12);
            if (mode == BoundaryMode::cahn_hilliard) EXPECT_LE(std::abs(cur.surf_mass - s0), 1e-12);
        }
        EXPECT_LT(states.back().diagnostics.total, states.front().diagnostics.total);
    }
}

TEST(Run, NeedsAtLeastOneStep)
{
    const auto ctx = context(2);
    EXPECT_THROW(TimeStepper(ctx).run(Vector::Zero(ctx->blocks().n_total), 0), std::invalid_argument);
}
