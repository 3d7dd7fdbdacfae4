#pragma once

#include "chdyn/assembly.hpp"
#include "chdyn/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <memory>
#include <string>
#include <vector>

namespace chdyn {

/// Nodal chemical potentials: bulk P (all vertices) and surface P_Γ.
struct Potentials {
    Vector bulk;
    Vector surface;
};

enum class SchurMethod { automatic, cholesky, cg };

struct SchurSettings {
    SchurMethod method = SchurMethod::automatic;
    double cg_tol = 1e-10;
    /// 0 selects 10 * n_boundary.
    Index cg_maxit = 0;
    /// automatic uses Cholesky up to this many boundary unknowns
    Index cholesky_limit = 2000;
};

/// The boundary-sized SPD system that couples bulk and surface potentials.
///
/// Cahn-Hilliard boundary law:
///   S = m·L_Ω|ΓΓ + m_Γ·D·L_Γ·D,   D = M_Ω|ΓΓ·M_Γ⁻¹
/// Allen-Cahn boundary law:
///   S = m·L_Ω|ΓΓ + m_Γ·M_Ω|ΓΓ²·M_Γ⁻¹
///
/// S depends on the mesh and the mobilities only, so it is factorized once
/// and reused for every residual and Jacobian evaluation.
class SchurOperator {
public:
    static SchurOperator build(const Discretization& disc, const ModelParams& params, SchurSettings settings = {});

    const SparseMatrix& matrix() const { return *matrix_; }
    BoundaryMode mode() const { return mode_; }
    SchurMethod method() const { return method_; }
    const SchurSettings& settings() const { return settings_; }

    /// Solves S x = rhs.
    Vector solve(const Vector& rhs) const;

    /// The linear part of the reduction: potentials for given right-hand sides
    /// (R_Γ, R_Ω̊). Interior values by diagonal elimination, boundary trace by
    /// the Schur solve, surface potential by back-substitution.
    Potentials potentials_from(const Residuals& r) const;

    /// Right-hand side of the Schur system for given (R_Γ, R_Ω̊).
    Vector schur_rhs(const Residuals& r) const;

private:
    SchurOperator() = default;

    BoundaryMode mode_ = BoundaryMode::cahn_hilliard;
    SchurMethod method_ = SchurMethod::cholesky;
    SchurSettings settings_;
    double mobility_ = 1.0;
    double surface_mobility_ = 1.0;
    BlockMaps blocks_;
    Vector mass_gamma_block_; // M_Ω|ΓΓ
    Vector mass_interior_;    // M_Ω|Ω̊Ω̊
    Vector mass_surface_;     // M_Γ
    SparseMatrix stiffness_gi_;
    SparseMatrix stiffness_surface_;
    // heap-held: the CG solver keeps a reference to it across copies
    std::shared_ptr<const SparseMatrix> matrix_;
    std::shared_ptr<const Eigen::SimplicialLLT<SparseMatrix>> cholesky_;
    std::shared_ptr<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>> cg_;
};

inline SchurOperator build_schur(const Discretization& disc, const ModelParams& params, SchurSettings settings = {})
{
    return SchurOperator::build(disc, params, settings);
}

inline SchurOperator SchurOperator::build(const Discretization& disc, const ModelParams& params,
                                          SchurSettings settings)
{
    if (!(params.mobility > 0.0) || !(params.surface_mobility > 0.0))
        throw ConfigError("Schur operator needs positive mobilities");

    SchurOperator s;
    s.mode_ = params.mode;
    s.settings_ = settings;
    s.mobility_ = params.mobility;
    s.surface_mobility_ = params.surface_mobility;
    s.blocks_ = disc.blocks;
    s.mass_gamma_block_ = disc.blocks.boundary(disc.mass_bulk.diagonal);
    s.mass_interior_ = disc.blocks.interior(disc.mass_bulk.diagonal);
    s.mass_surface_ = disc.mass_surface.diagonal;
    s.stiffness_gi_ = disc.stiffness_gi;
    s.stiffness_surface_ = disc.stiffness_surface;

    const Index nb = disc.blocks.n_boundary;
    const Vector scale = s.mass_gamma_block_.cwiseQuotient(s.mass_surface_); // D

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(disc.stiffness_gg.nonZeros() + disc.stiffness_surface.nonZeros()));
    for (Index k = 0; k < disc.stiffness_gg.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(disc.stiffness_gg, k); it; ++it)
            triplets.emplace_back(it.row(), it.col(), params.mobility * it.value());
    if (s.mode_ == BoundaryMode::cahn_hilliard) {
        for (Index k = 0; k < disc.stiffness_surface.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(disc.stiffness_surface, k); it; ++it)
                triplets.emplace_back(it.row(), it.col(),
                                      params.surface_mobility * it.value() * (scale[it.row()] * scale[it.col()]));
    } else {
        for (Index i = 0; i < nb; ++i)
            triplets.emplace_back(i, i, params.surface_mobility * scale[i] * s.mass_gamma_block_[i]);
    }
    auto matrix = std::make_shared<SparseMatrix>(nb, nb);
    matrix->setFromTriplets(triplets.begin(), triplets.end());
    s.matrix_ = matrix;

    s.method_ = settings.method;
    if (s.method_ == SchurMethod::automatic)
        s.method_ = nb <= settings.cholesky_limit ? SchurMethod::cholesky : SchurMethod::cg;

    if (s.method_ == SchurMethod::cholesky) {
        auto llt = std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>(*s.matrix_);
        if (llt->info() != Eigen::Success)
            throw SolverError("Cholesky factorization of the Schur matrix failed: matrix is not positive "
                              "definite (mesh or assembly defect)");
        s.cholesky_ = std::move(llt);
    } else {
        auto cg = std::make_shared<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>>();
        cg->setTolerance(settings.cg_tol);
        cg->setMaxIterations(settings.cg_maxit > 0 ? settings.cg_maxit : 10 * nb);
        cg->compute(*s.matrix_);
        if (cg->info() != Eigen::Success) throw SolverError("CG setup for the Schur matrix failed");
        s.cg_ = std::move(cg);
    }
    return s;
}

inline Vector SchurOperator::solve(const Vector& rhs) const
{
    if (cholesky_) {
        Vector x = cholesky_->solve(rhs);
        // one step of iterative refinement keeps the flow-map identity at roundoff level
        const Vector defect = rhs - *matrix_ * x;
        x += cholesky_->solve(defect);
        return x;
    }
    Vector x = cg_->solve(rhs);
    if (cg_->info() != Eigen::Success)
        throw SolverError("CG on the Schur matrix did not reach tolerance " + std::to_string(settings_.cg_tol) +
                          " within " + std::to_string(cg_->maxIterations()) +
                          " iterations (estimated error " + std::to_string(cg_->error()) +
                          "); the matrix may be indefinite");
    return x;
}

inline Vector SchurOperator::schur_rhs(const Residuals& r) const
{
    const Vector interior_potential = r.interior.cwiseQuotient(mass_interior_);
    Vector rhs = -mobility_ * (stiffness_gi_ * interior_potential);
    const Vector scale = mass_gamma_block_.cwiseQuotient(mass_surface_);
    if (mode_ == BoundaryMode::cahn_hilliard) {
        const Vector surf = stiffness_surface_ * r.boundary.cwiseQuotient(mass_surface_);
        rhs += surface_mobility_ * scale.cwiseProduct(surf);
    } else {
        rhs += surface_mobility_ * scale.cwiseProduct(r.boundary);
    }
    return rhs;
}

inline Potentials SchurOperator::potentials_from(const Residuals& r) const
{
    if (r.boundary.size() != blocks_.n_boundary || r.interior.size() != blocks_.n_interior())
        throw std::invalid_argument("residual block sizes do not match the Schur operator");
    Potentials p;
    p.bulk.resize(blocks_.n_total);
    p.bulk.tail(blocks_.n_interior()) = r.interior.cwiseQuotient(mass_interior_);
    p.bulk.head(blocks_.n_boundary) = solve(schur_rhs(r));
    p.surface = (r.boundary - mass_gamma_block_.cwiseProduct(p.bulk.head(blocks_.n_boundary)))
                    .cwiseQuotient(mass_surface_);
    return p;
}

inline Potentials recover_potentials(const SchurOperator& schur, const SchemeContext& ctx, const Vector& phi,
                                     const Vector& phi_old)
{
    return schur.potentials_from(residuals(ctx, phi, phi_old));
}

/// Flow-map compatibility defect, max-norm:
///   CH: m·M_Ω|ΓΓ⁻¹·L_Ω|ΓΩ·P − m_Γ·M_Γ⁻¹·L_Γ·P_Γ
///   AC: m·M_Ω|ΓΓ⁻¹·L_Ω|ΓΩ·P − m_Γ·P_Γ
/// Both terms are the boundary velocity (Φⁿ − Φⁿ⁻¹)/τ seen from the bulk and
/// from the surface equation.
struct CompatibilityDefect {
    double defect = 0.0;
    double scale = 0.0; // max-norm of the larger of the two terms
};

inline CompatibilityDefect compatibility_defect(const SchemeContext& ctx, const Potentials& pot)
{
    const auto& d = ctx.disc;
    const auto& blk = ctx.blocks();
    const Vector bulk_flux = ctx.params.mobility *
                             Vector(blk.boundary(Vector(d.stiffness_bulk * pot.bulk)))
                                 .cwiseQuotient(blk.boundary(d.mass_bulk.diagonal));
    Vector surface_flux;
    if (ctx.params.mode == BoundaryMode::cahn_hilliard)
        surface_flux = ctx.params.surface_mobility * (d.stiffness_surface * pot.surface).cwiseQuotient(d.mass_surface.diagonal);
    else
        surface_flux = ctx.params.surface_mobility * pot.surface;
    CompatibilityDefect out;
    out.defect = (bulk_flux - surface_flux).lpNorm<Eigen::Infinity>();
    out.scale = std::max(bulk_flux.lpNorm<Eigen::Infinity>(), surface_flux.lpNorm<Eigen::Infinity>());
    return out;
}

} // namespace chdyn
