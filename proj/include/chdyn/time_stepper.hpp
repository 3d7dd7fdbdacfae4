#pragma once

#include "chdyn/assembly.hpp"
#include "chdyn/diagnostics.hpp"
#include "chdyn/errors.hpp"
#include "chdyn/krylov.hpp"
#include "chdyn/potential_solver.hpp"

#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace chdyn {

enum class Preconditioner { none, coupled };

struct NewtonConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    Index max_iters = 50;
    double damping = 0.5; // backtracking factor
    Index max_backtracks = 30;
    double krylov_tol = 1e-8;
    Index krylov_restart = 50;
    Index krylov_maxit = 1000;
    Preconditioner preconditioner = Preconditioner::coupled;
};

inline void validate(const NewtonConfig& c)
{
    if (!(c.abs_tol > 0.0)) throw ConfigError("newton.abs_tol must be > 0");
    if (!(c.rel_tol > 0.0)) throw ConfigError("newton.rel_tol must be > 0");
    if (c.max_iters < 1) throw ConfigError("newton.max_iters must be >= 1");
    if (!(c.damping > 0.0 && c.damping < 1.0)) throw ConfigError("newton.damping must lie in (0, 1)");
    if (c.max_backtracks < 0) throw ConfigError("newton.max_backtracks must be >= 0");
    if (!(c.krylov_tol > 0.0 && c.krylov_tol < 1.0)) throw ConfigError("krylov.tol must lie in (0, 1)");
    if (c.krylov_restart < 1) throw ConfigError("krylov.restart must be >= 1");
    if (c.krylov_maxit < 1) throw ConfigError("krylov.maxit must be >= 1");
}

/// One accepted time level.
struct StepState {
    Index step = 0;
    double time = 0.0;
    Vector phi;
    Potentials potentials;
    Index newton_iters = 0;
    double residual_norm = 0.0;
    EnergyReport diagnostics;
    StepIncrements increments;
    EnergyCheck energy_check;
};

/// Newton gave up; carries the best iterate and the residual history.
class NewtonFailure : public SolverError {
public:
    NewtonFailure(const std::string& what, Vector best, std::vector<double> history)
        : SolverError(what), best_iterate(std::move(best)), residual_history(std::move(history))
    {}
    Vector best_iterate;
    std::vector<double> residual_history;
};

class MaxItersExceeded : public NewtonFailure {
public:
    using NewtonFailure::NewtonFailure;
};

class KrylovStagnation : public SolverError {
public:
    using SolverError::SolverError;
};

/// The discrete energy went up across an accepted step.
class EnergyIncreaseError : public SolverError {
public:
    using SolverError::SolverError;
};

/// Sparse Jacobian of the unreduced system in (Φ, P, P_Γ); its exact solve
/// inverts the Jacobian of the reduced equation and serves as preconditioner.
///
/// Unknown layout: [w (n) | q (n) | q_Γ (n_Γ)]
/// Row blocks:
///   M w + τ m L q                                      = M r
///   M q + ext(M_Γ q_Γ) − d(R_Γ, R_Ω̊)/dΦ · w            = 0
///   m L|ΓΩ q − m_Γ M|ΓΓ M_Γ⁻¹ L_Γ q_Γ   (AC: m_Γ M|ΓΓ q_Γ) = 0
class CoupledPreconditioner {
public:
    explicit CoupledPreconditioner(std::shared_ptr<const SchemeContext> ctx) : ctx_(std::move(ctx)) {}

    void factorize(const Vector& phi)
    {
        const auto& c = *ctx_;
        const auto& d = c.disc;
        const auto& p = c.params;
        const Index n = c.blocks().n_total, nb = c.blocks().n_boundary;
        const Index q0 = n, s0 = 2 * n;

        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(3 * d.stiffness_bulk.nonZeros() + 4 * n + 6 * nb));
        const double gradient = p.delta * p.sigma;
        for (Index k = 0; k < d.stiffness_bulk.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(d.stiffness_bulk, k); it; ++it) {
                t.emplace_back(it.row(), q0 + it.col(), p.tau * p.mobility * it.value());
                t.emplace_back(q0 + it.row(), it.col(), -gradient * it.value());
                if (it.row() < nb) t.emplace_back(s0 + it.row(), q0 + it.col(), p.mobility * it.value());
            }
        }
        for (Index i = 0; i < n; ++i) {
            const double mass = d.mass_bulk.diagonal[i];
            t.emplace_back(i, i, mass);
            t.emplace_back(q0 + i, q0 + i, mass);
            t.emplace_back(q0 + i, i, -(p.sigma / p.delta) * mass * c.bulk.convex_d2(phi[i]));
        }
        for (Index g = 0; g < nb; ++g) {
            const double mass_s = d.mass_surface.diagonal[g];
            t.emplace_back(q0 + g, s0 + g, mass_s);
            t.emplace_back(q0 + g, g, -mass_s / p.delta_gamma * c.surface.convex_d2(phi[g]));
            if (p.mode == BoundaryMode::allen_cahn)
                t.emplace_back(s0 + g, s0 + g, -p.surface_mobility * d.mass_bulk.diagonal[g]);
        }
        for (Index k = 0; k < d.stiffness_surface.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(d.stiffness_surface, k); it; ++it) {
                t.emplace_back(q0 + it.row(), it.col(), -p.kappa * p.delta_gamma * it.value());
                if (p.mode == BoundaryMode::cahn_hilliard)
                    t.emplace_back(s0 + it.row(), s0 + it.col(),
                                   -p.surface_mobility * d.mass_bulk.diagonal[it.row()] /
                                       d.mass_surface.diagonal[it.row()] * it.value());
            }
        }

        SparseMatrix jac(2 * n + nb, 2 * n + nb);
        jac.setFromTriplets(t.begin(), t.end());
        jac.makeCompressed();
        if (!analyzed_) {
            lu_.analyzePattern(jac);
            analyzed_ = true;
        }
        lu_.factorize(jac);
        if (lu_.info() != Eigen::Success) throw SolverError("coupled Jacobian factorization failed: " + lu_.lastErrorMessage());
    }

    Vector apply(const Vector& r) const
    {
        const Index n = ctx_->blocks().n_total;
        Vector rhs = Vector::Zero(2 * n + ctx_->blocks().n_boundary);
        rhs.head(n) = ctx_->disc.mass_bulk.apply(r);
        const Vector sol = lu_.solve(rhs);
        return sol.head(n);
    }

private:
    std::shared_ptr<const SchemeContext> ctx_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
};

/// Advances Φⁿ⁻¹ → Φⁿ by solving the Schur-reduced nonlinear equation
///   H(Φ) = Φ − Φⁿ⁻¹ + τ·m·M_Ω⁻¹·L_Ω·P(Φ) = 0
/// with damped Newton and GMRES on the matrix-free Jacobian.
class TimeStepper {
public:
    using Callback = std::function<void(const StepState&)>;

    explicit TimeStepper(std::shared_ptr<const SchemeContext> ctx, NewtonConfig newton = {}, SchurSettings schur = {})
        : ctx_(std::move(ctx)), newton_(newton), schur_(build_schur(ctx_->disc, ctx_->params, schur))
    {
        validate(newton_);
    }

    const SchemeContext& context() const { return *ctx_; }
    const SchurOperator& schur() const { return schur_; }
    const NewtonConfig& newton_config() const { return newton_; }

    struct Evaluation {
        Vector value;
        Potentials potentials;
    };

    /// H(Φ) together with the potentials it was built from.
    Evaluation evaluate(const Vector& phi, const Vector& phi_old) const
    {
        Evaluation e;
        e.potentials = recover_potentials(schur_, *ctx_, phi, phi_old);
        e.value = phi - phi_old + flow(e.potentials.bulk);
        return e;
    }

    Vector residual(const Vector& phi, const Vector& phi_old) const { return evaluate(phi, phi_old).value; }

    /// dH/dΦ·v. Only the convex parts of the potentials depend on Φⁿ.
    Vector jacobian_apply(const Vector& phi, const Vector& v) const
    {
        const Potentials dp = schur_.potentials_from(linearized_residuals(*ctx_, phi, v));
        return v + flow(dp.bulk);
    }

    StepState solve_step(const Vector& phi_old, Index step = 1, double time_old = 0.0) const
    {
        detail::check_length(*ctx_, phi_old, "phi_old");
        if (!phi_old.allFinite()) throw SolverError("previous time level contains non-finite values");

        Vector phi = phi_old;
        Evaluation eval = evaluate(phi, phi_old);
        double norm = eval.value.norm();
        const double tol = newton_.abs_tol + newton_.rel_tol * norm;
        std::vector<double> history{norm};

        std::optional<CoupledPreconditioner> precond;
        if (newton_.preconditioner == Preconditioner::coupled) precond.emplace(ctx_);

        Index iters = 0;
        while (!(norm <= tol)) {
            if (iters == newton_.max_iters) {
                std::ostringstream msg;
                msg << "Newton did not converge in " << iters << " iterations (residual " << norm << ", target " << tol
                    << ")";
                throw MaxItersExceeded(msg.str(), phi, history);
            }
            if (precond) precond->factorize(phi);
            auto apply = [&](const Vector& v) { return jacobian_apply(phi, v); };
            auto pre = [&](const Vector& v) { return precond ? precond->apply(v) : v; };
            const KrylovResult kr =
                gmres(apply, pre, Vector(-eval.value), newton_.krylov_tol, newton_.krylov_restart, newton_.krylov_maxit);
            if (!kr.converged && !(kr.relative_residual < 0.5)) {
                std::ostringstream msg;
                msg << "GMRES stagnated at relative residual " << kr.relative_residual << " after " << kr.iterations
                    << " iterations";
                throw KrylovStagnation(msg.str());
            }

            double lambda = 1.0;
            bool accepted = false;
            for (Index b = 0; b <= newton_.max_backtracks; ++b) {
                Vector trial = phi + lambda * kr.x;
                Evaluation trial_eval = evaluate(trial, phi_old);
                const double trial_norm = trial_eval.value.norm();
                if (trial_norm <= (1.0 - 1e-4 * lambda) * norm) {
                    phi = std::move(trial);
                    eval = std::move(trial_eval);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                lambda *= newton_.damping;
            }
            ++iters;
            history.push_back(norm);
            if (!accepted) {
                // a full step can fail to decrease once the residual sits at roundoff level
                if (norm <= 10.0 * tol) break;
                throw NewtonFailure("line search found no decrease after " + std::to_string(newton_.max_backtracks) +
                                        " backtracks",
                                    phi, history);
            }
        }

        StepState s;
        s.step = step;
        s.time = time_old + ctx_->params.tau;
        s.newton_iters = iters;
        s.residual_norm = norm;
        s.diagnostics = step_report(*ctx_, phi, eval.potentials);
        s.increments = increment_terms(*ctx_, phi, phi_old);
        s.energy_check = energy_inequality_check(energy(*ctx_, phi_old), s.diagnostics, s.increments);
        s.potentials = std::move(eval.potentials);
        s.phi = std::move(phi);
        return s;
    }

    /// One accepted step after `prev`. Throws EnergyIncreaseError if the
    /// energy rises beyond roundoff slack.
    StepState advance(const StepState& prev) const
    {
        StepState next = solve_step(prev.phi, prev.step + 1, prev.time);
        if (next.diagnostics.total > prev.diagnostics.total + energy_slack(prev.diagnostics.total)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "energy increased at step " << next.step << ": " << prev.diagnostics.total << " -> "
                << next.diagnostics.total;
            throw EnergyIncreaseError(msg.str());
        }
        return next;
    }

    /// Initial state followed by n_steps accepted steps.
    std::vector<StepState> run(const Vector& initial, Index n_steps, const Callback& on_step = {}) const
    {
        if (n_steps < 1) throw std::invalid_argument("run needs n_steps >= 1");
        std::vector<StepState> states;
        states.reserve(static_cast<std::size_t>(n_steps + 1));
        states.push_back(initial_state(initial));
        if (on_step) on_step(states.back());
        for (Index k = 1; k <= n_steps; ++k) {
            states.push_back(advance(states.back()));
            if (on_step) on_step(states.back());
        }
        return states;
    }

    StepState initial_state(const Vector& initial) const
    {
        detail::check_length(*ctx_, initial, "initial condition");
        StepState s;
        s.phi = initial;
        s.diagnostics = energy(*ctx_, initial);
        s.potentials = {Vector::Zero(initial.size()), Vector::Zero(ctx_->blocks().n_boundary)};
        return s;
    }

private:
    /// τ·m·M_Ω⁻¹·L_Ω·P
    Vector flow(const Vector& bulk_potential) const
    {
        const auto& p = ctx_->params;
        return (p.tau * p.mobility) * ctx_->disc.mass_bulk.solve(ctx_->disc.stiffness_bulk * bulk_potential);
    }

    std::shared_ptr<const SchemeContext> ctx_;
    NewtonConfig newton_;
    SchurOperator schur_;
};

} // namespace chdyn
