#pragma once

// Brute-force reference path. Every matrix is re-derived densely from the
// mesh with its own quadrature, and the coupled potential system is solved
// unreduced. Nothing here reuses the sparse assembly or the Schur reduction.

#include "chdyn/assembly.hpp"
#include "chdyn/errors.hpp"
#include "chdyn/mesh.hpp"
#include "chdyn/potential_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace chdyn::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr Index dense_guard = 2000;

struct DenseScheme {
    Index n_total = 0;
    Index n_boundary = 0;
    MatrixXd mass_bulk;
    MatrixXd mass_surface;
    MatrixXd stiffness_bulk;
    MatrixXd stiffness_surface;
    ModelParams params;
    PotentialSplit bulk;
    PotentialSplit surface;

    Index n_interior() const { return n_total - n_boundary; }
};

/// Dense matrices from scratch: P1 basis coefficients by solving the local
/// Vandermonde system, lumped masses by edge-midpoint (bulk) and two-point
/// Gauss (boundary) quadrature of each hat function.
inline DenseScheme dense_scheme(const Mesh& mesh, const SchemeContext& ctx)
{
    DenseScheme s;
    s.n_total = mesh.n_vertices();
    s.n_boundary = mesh.n_boundary_vertices();
    if (s.n_total + s.n_boundary > dense_guard)
        throw std::invalid_argument("oracle dense guard exceeded: " + std::to_string(s.n_total + s.n_boundary) + " > " +
                                    std::to_string(dense_guard));
    s.params = ctx.params;
    s.bulk = ctx.bulk;
    s.surface = ctx.surface;
    s.mass_bulk = MatrixXd::Zero(s.n_total, s.n_total);
    s.stiffness_bulk = MatrixXd::Zero(s.n_total, s.n_total);
    s.mass_surface = MatrixXd::Zero(s.n_boundary, s.n_boundary);
    s.stiffness_surface = MatrixXd::Zero(s.n_boundary, s.n_boundary);

    for (const auto& cell : mesh.cells()) {
        Eigen::Matrix3d vandermonde;
        for (int k = 0; k < 3; ++k) {
            const auto& p = mesh.vertices()[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])];
            vandermonde.row(k) << 1.0, p.x, p.y;
        }
        // column k holds (a, b, c) of χ_k = a + b x + c y
        const Eigen::Matrix3d coeffs = vandermonde.inverse();
        const double area = 0.5 * std::abs(vandermonde.determinant());

        Eigen::Matrix<double, 3, 2> midpoints;
        for (int k = 0; k < 3; ++k) midpoints.row(k) = 0.5 * (vandermonde.block<1, 2>(k, 1) + vandermonde.block<1, 2>((k + 1) % 3, 1));

        for (int a = 0; a < 3; ++a) {
            double integral = 0.0;
            for (int q = 0; q < 3; ++q)
                integral += coeffs(0, a) + coeffs(1, a) * midpoints(q, 0) + coeffs(2, a) * midpoints(q, 1);
            const auto ia = cell[static_cast<std::size_t>(a)];
            s.mass_bulk(ia, ia) += area * integral / 3.0;
            for (int b = 0; b < 3; ++b) {
                const auto ib = cell[static_cast<std::size_t>(b)];
                s.stiffness_bulk(ia, ib) += area * (coeffs(1, a) * coeffs(1, b) + coeffs(2, a) * coeffs(2, b));
            }
        }
    }

    const double gauss = 0.5 / std::sqrt(3.0);
    for (const auto& face : mesh.boundary_faces()) {
        const auto& p = mesh.vertices()[static_cast<std::size_t>(face[0])];
        const auto& q = mesh.vertices()[static_cast<std::size_t>(face[1])];
        const double len = std::sqrt((q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y));
        // hats on the reference segment: 1 − t and t, Gauss points 1/2 ± 1/(2√3)
        const double hat0 = 0.5 * len * ((0.5 + gauss) + (0.5 - gauss));
        const double hat1 = 0.5 * len * ((0.5 - gauss) + (0.5 + gauss));
        s.mass_surface(face[0], face[0]) += hat0;
        s.mass_surface(face[1], face[1]) += hat1;
        const std::array<double, 2> slope = {-1.0 / len, 1.0 / len};
        const std::array<Index, 2> ids = {face[0], face[1]};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                s.stiffness_surface(ids[static_cast<std::size_t>(a)], ids[static_cast<std::size_t>(b)]) +=
                    len * slope[static_cast<std::size_t>(a)] * slope[static_cast<std::size_t>(b)];
    }
    return s;
}

struct DenseResiduals {
    VectorXd boundary;
    VectorXd interior;
};

/// R_Γ and R_Ω̊ written out term by term with dense products.
inline DenseResiduals dense_residuals(const DenseScheme& s, const VectorXd& phi, const VectorXd& phi_old)
{
    const auto& p = s.params;
    const Index n = s.n_total, nb = s.n_boundary;
    VectorXd f_plus(n), f_minus(n);
    for (Index i = 0; i < n; ++i) {
        f_plus[i] = s.bulk.convex_d1(phi[i]);
        f_minus[i] = s.bulk.concave_d1(phi_old[i]);
    }
    VectorXd g_plus(nb), g_minus(nb);
    for (Index i = 0; i < nb; ++i) {
        g_plus[i] = s.surface.convex_d1(phi[i]);
        g_minus[i] = s.surface.concave_d1(phi_old[i]);
    }
    const VectorXd full = p.delta * p.sigma * s.stiffness_bulk * phi + p.sigma / p.delta * s.mass_bulk * f_plus +
                          p.sigma / p.delta * s.mass_bulk * f_minus;
    DenseResiduals r;
    r.boundary = full.head(nb) + p.kappa * p.delta_gamma * s.stiffness_surface * phi.head(nb) +
                 s.mass_surface * g_plus / p.delta_gamma + s.mass_surface * g_minus / p.delta_gamma;
    r.interior = full.tail(n - nb);
    return r;
}

/// The (n + n_Γ)-square coupled system for (P|Γ, P|Ω̊, P_Γ) as one dense matrix.
inline MatrixXd coupled_matrix(const DenseScheme& s)
{
    const auto& p = s.params;
    const Index n = s.n_total, nb = s.n_boundary, ni = s.n_interior();
    MatrixXd mass_inv = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) mass_inv(i, i) = 1.0 / s.mass_bulk(i, i);
    MatrixXd surface_mass_inv = MatrixXd::Zero(nb, nb);
    for (Index i = 0; i < nb; ++i) surface_mass_inv(i, i) = 1.0 / s.mass_surface(i, i);

    MatrixXd a = MatrixXd::Zero(n + nb, n + nb);
    a.block(0, 0, nb, nb) = s.mass_bulk.block(0, 0, nb, nb);
    a.block(0, n, nb, nb) = s.mass_surface;
    a.block(nb, nb, ni, ni) = s.mass_bulk.block(nb, nb, ni, ni);
    const MatrixXd mass_inv_gamma_rows = mass_inv.topRows(nb); // M_Ω⁻¹|Γ×Ω
    a.block(n, 0, nb, nb) = p.mobility * mass_inv_gamma_rows * s.stiffness_bulk.leftCols(nb);
    a.block(n, nb, nb, ni) = p.mobility * mass_inv_gamma_rows * s.stiffness_bulk.rightCols(ni);
    if (p.mode == BoundaryMode::cahn_hilliard)
        a.block(n, n, nb, nb) = -p.surface_mobility * surface_mass_inv * s.stiffness_surface;
    else
        a.block(n, n, nb, nb) = -p.surface_mobility * MatrixXd::Identity(nb, nb);
    return a;
}

struct DenseSolve {
    Potentials potentials;
    double block_residual = 0.0; // max-norm of A·x − b after the solve
    double rhs_scale = 0.0;
};

/// Solves the unreduced coupled system by dense LU with partial pivoting.
inline DenseSolve dense_coupled_solve(const DenseScheme& s, const VectorXd& phi, const VectorXd& phi_old)
{
    const Index n = s.n_total, nb = s.n_boundary;
    const MatrixXd a = coupled_matrix(s);
    const DenseResiduals r = dense_residuals(s, phi, phi_old);
    VectorXd rhs = VectorXd::Zero(n + nb);
    rhs.head(nb) = r.boundary;
    rhs.segment(nb, n - nb) = r.interior;

    const Eigen::PartialPivLU<MatrixXd> lu(a);
    if (!(lu.rcond() > 1e-15)) throw SolverError("oracle coupled system is singular (assembly defect)");
    const VectorXd x = lu.solve(rhs);

    DenseSolve out;
    out.potentials.bulk = x.head(n);
    out.potentials.surface = x.tail(nb);
    out.block_residual = (a * x - rhs).lpNorm<Eigen::Infinity>();
    out.rhs_scale = std::max(rhs.lpNorm<Eigen::Infinity>(), (a.cwiseAbs() * x.cwiseAbs()).maxCoeff());
    return out;
}

/// Schur matrix written out densely from the oracle matrices.
inline MatrixXd dense_schur(const DenseScheme& s)
{
    const auto& p = s.params;
    const Index nb = s.n_boundary;
    const MatrixXd mgg = s.mass_bulk.topLeftCorner(nb, nb);
    const MatrixXd mg_inv = s.mass_surface.diagonal().cwiseInverse().asDiagonal();
    MatrixXd out = p.mobility * s.stiffness_bulk.topLeftCorner(nb, nb);
    if (p.mode == BoundaryMode::cahn_hilliard)
        out += p.surface_mobility * mgg * mg_inv * s.stiffness_surface * mg_inv * mgg;
    else
        out += p.surface_mobility * mgg * mg_inv * mgg;
    return out;
}

struct MatrixFormReport {
    double omega_phi = 0.0; // bulk phase-field equation, in Φ units
    double gamma_phi = 0.0; // surface phase-field equation, in Φ units
    double mu = 0.0;        // potential equation, relative to max(1, ‖P‖∞)

    bool pass(double phase_tol, double mu_tol) const
    {
        return omega_phi <= phase_tol && gamma_phi <= phase_tol && mu <= mu_tol;
    }
};

/// Residuals of the three unreduced discrete equations at (Φⁿ, Pⁿ, P_Γⁿ).
inline MatrixFormReport verify_matrixform(const DenseScheme& s, const VectorXd& phi, const Potentials& pot,
                                          const VectorXd& phi_old)
{
    const auto& p = s.params;
    const Index n = s.n_total, nb = s.n_boundary;
    const VectorXd mass = s.mass_bulk.diagonal();
    const VectorXd mass_s = s.mass_surface.diagonal();
    const VectorXd diff = phi - phi_old;

    MatrixFormReport rep;
    const VectorXd omega = s.mass_bulk * diff + p.tau * p.mobility * s.stiffness_bulk * pot.bulk;
    rep.omega_phi = omega.cwiseQuotient(mass).lpNorm<Eigen::Infinity>();

    VectorXd gamma;
    if (p.mode == BoundaryMode::cahn_hilliard)
        gamma = s.mass_surface * diff.head(nb) + p.tau * p.surface_mobility * s.stiffness_surface * pot.surface;
    else
        gamma = s.mass_surface * diff.head(nb) + p.tau * p.surface_mobility * s.mass_surface * pot.surface;
    rep.gamma_phi = gamma.cwiseQuotient(mass_s).lpNorm<Eigen::Infinity>();

    const DenseResiduals r = dense_residuals(s, phi, phi_old);
    VectorXd lhs = s.mass_bulk * pot.bulk;
    lhs.head(nb) += s.mass_surface * pot.surface;
    VectorXd rhs(n);
    rhs.head(nb) = r.boundary;
    rhs.tail(n - nb) = r.interior;
    rep.mu = (lhs - rhs).cwiseQuotient(mass).lpNorm<Eigen::Infinity>() / std::max(1.0, pot.bulk.lpNorm<Eigen::Infinity>());
    return rep;
}

/// Discrete energy with dense products.
inline double dense_energy(const DenseScheme& s, const VectorXd& phi)
{
    const auto& p = s.params;
    const Index n = s.n_total, nb = s.n_boundary;
    VectorXd f(n), g(nb);
    for (Index i = 0; i < n; ++i) f[i] = s.bulk.value(phi[i]);
    for (Index i = 0; i < nb; ++i) g[i] = s.surface.value(phi[i]);
    const VectorXd phi_g = phi.head(nb);
    return 0.5 * p.sigma * p.delta * phi.dot(s.stiffness_bulk * phi) + p.sigma / p.delta * VectorXd::Ones(n).dot(s.mass_bulk * f) +
           0.5 * p.kappa * p.delta_gamma * phi_g.dot(s.stiffness_surface * phi_g) +
           VectorXd::Ones(nb).dot(s.mass_surface * g) / p.delta_gamma;
}

inline double relative_error(const VectorXd& a, const VectorXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

} // namespace chdyn::oracle
