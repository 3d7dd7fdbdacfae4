#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace chdyn {

struct KrylovResult {
    Eigen::VectorXd x;
    Eigen::Index iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Restarted GMRES with right preconditioning, zero initial guess.
///
/// `apply(v)` returns A·v and `precondition(v)` returns M⁻¹·v. Stops when
/// ‖b − A·x‖ ≤ tol·‖b‖ or after max_iterations Arnoldi steps in total.
template <class Apply, class Precondition>
KrylovResult gmres(const Apply& apply, const Precondition& precondition, const Eigen::VectorXd& b, double tol,
                   Eigen::Index restart, Eigen::Index max_iterations)
{
    using Eigen::Index;
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    const Index n = b.size();
    KrylovResult out;
    out.x = VectorXd::Zero(n);
    const double b_norm = b.norm();
    if (b_norm == 0.0) {
        out.converged = true;
        return out;
    }
    restart = std::max<Index>(1, std::min(restart, n));

    VectorXd r = b;
    while (out.iterations < max_iterations) {
        const double beta = r.norm();
        if (beta <= tol * b_norm) {
            out.converged = true;
            break;
        }

        MatrixXd basis(n, restart + 1);
        MatrixXd hessenberg = MatrixXd::Zero(restart + 1, restart);
        VectorXd cs = VectorXd::Zero(restart), sn = VectorXd::Zero(restart);
        VectorXd g = VectorXd::Zero(restart + 1);
        g[0] = beta;
        basis.col(0) = r / beta;

        Index k = 0;
        bool done = false;
        bool breakdown = false;
        for (Index j = 0; j < restart && out.iterations < max_iterations; ++j) {
            ++out.iterations;
            VectorXd w = apply(precondition(VectorXd(basis.col(j))));
            for (Index i = 0; i <= j; ++i) {
                hessenberg(i, j) = w.dot(basis.col(i));
                w -= hessenberg(i, j) * basis.col(i);
            }
            const double h_next = w.norm();
            hessenberg(j + 1, j) = h_next;
            if (h_next > 0.0) basis.col(j + 1) = w / h_next;

            for (Index i = 0; i < j; ++i) {
                const double t = cs[i] * hessenberg(i, j) + sn[i] * hessenberg(i + 1, j);
                hessenberg(i + 1, j) = -sn[i] * hessenberg(i, j) + cs[i] * hessenberg(i + 1, j);
                hessenberg(i, j) = t;
            }
            const double denom = std::hypot(hessenberg(j, j), hessenberg(j + 1, j));
            cs[j] = denom == 0.0 ? 1.0 : hessenberg(j, j) / denom;
            sn[j] = denom == 0.0 ? 0.0 : hessenberg(j + 1, j) / denom;
            hessenberg(j, j) = denom;
            hessenberg(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            k = j + 1;
            if (std::abs(g[j + 1]) <= tol * b_norm || h_next == 0.0) {
                done = true;
                breakdown = h_next == 0.0;
                break;
            }
        }

        const VectorXd y = hessenberg.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        out.x += precondition(VectorXd(basis.leftCols(k) * y));
        r = b - apply(out.x);
        if (done && r.norm() <= tol * b_norm) {
            out.converged = true;
            break;
        }
        if (breakdown) break; // invariant subspace exhausted
    }
    out.relative_residual = r.norm() / b_norm;
    out.converged = out.converged || out.relative_residual <= tol;
    return out;
}

} // namespace chdyn
