#pragma once

#include "chdyn/mesh.hpp"
#include "chdyn/params.hpp"
#include "chdyn/potentials.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/SparseExtra>

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace chdyn {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Lumped (diagonal) mass matrix.
struct DiagMatrix {
    Vector diagonal;

    Index size() const { return diagonal.size(); }
    Vector apply(const Vector& v) const { return diagonal.cwiseProduct(v); }
    Vector solve(const Vector& v) const { return v.cwiseQuotient(diagonal); }
    double total() const { return diagonal.sum(); }
};

/// Boundary/interior split of the nodal numbering. Boundary nodes come first.
struct BlockMaps {
    Index n_total = 0;
    Index n_boundary = 0;

    Index n_interior() const { return n_total - n_boundary; }

    template <class V>
    auto boundary(const V& v) const { return v.head(n_boundary); }
    template <class V>
    auto interior(const V& v) const { return v.tail(n_interior()); }

    /// Zero extension of a boundary vector to the whole domain.
    Vector extend(const Vector& boundary_values) const
    {
        Vector out = Vector::Zero(n_total);
        out.head(n_boundary) = boundary_values;
        return out;
    }
};

/// P1 matrices on the bulk mesh and on its boundary polyline.
struct Discretization {
    BlockMaps blocks;
    DiagMatrix mass_bulk;    // M_Ω
    DiagMatrix mass_surface; // M_Γ
    SparseMatrix stiffness_bulk;    // L_Ω
    SparseMatrix stiffness_surface; // L_Γ

    // blocks of L_Ω
    SparseMatrix stiffness_gg; // Γ×Γ
    SparseMatrix stiffness_gi; // Γ×Ω̊
    SparseMatrix stiffness_ig; // Ω̊×Γ
    SparseMatrix stiffness_ii; // Ω̊×Ω̊

    double area() const { return mass_bulk.total(); }
    double perimeter() const { return mass_surface.total(); }
};

/// Lumped mass |K|/3 per vertex and exact P1 stiffness on every triangle.
inline std::pair<DiagMatrix, SparseMatrix> assemble_bulk(const Mesh& mesh)
{
    const Index n = mesh.n_vertices();
    DiagMatrix mass{Vector::Zero(n)};
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(9 * mesh.n_cells()));

    for (Index c = 0; c < mesh.n_cells(); ++c) {
        const auto& cell = mesh.cells()[static_cast<std::size_t>(c)];
        const double area = mesh.cell_area(c);
        // ∇λ_k = rot(x_{k+2} − x_{k+1}) / (2|K|)
        std::array<std::array<double, 2>, 3> grad{};
        for (std::size_t k = 0; k < 3; ++k) {
            const auto& p = mesh.vertices()[static_cast<std::size_t>(cell[(k + 1) % 3])];
            const auto& q = mesh.vertices()[static_cast<std::size_t>(cell[(k + 2) % 3])];
            grad[k] = {(p.y - q.y) / (2.0 * area), (q.x - p.x) / (2.0 * area)};
        }
        for (std::size_t a = 0; a < 3; ++a) {
            mass.diagonal[cell[a]] += area / 3.0;
            for (std::size_t b = 0; b < 3; ++b)
                triplets.emplace_back(cell[a], cell[b], area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]));
        }
    }
    SparseMatrix stiffness(n, n);
    stiffness.setFromTriplets(triplets.begin(), triplets.end());
    return {std::move(mass), std::move(stiffness)};
}

/// Lumped mass |K^Γ|/2 and 1D P1 stiffness on every boundary edge.
inline std::pair<DiagMatrix, SparseMatrix> assemble_boundary(const Mesh& mesh)
{
    const Index n = mesh.n_boundary_vertices();
    DiagMatrix mass{Vector::Zero(n)};
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(4 * mesh.n_boundary_faces()));

    for (Index f = 0; f < mesh.n_boundary_faces(); ++f) {
        const auto& face = mesh.boundary_faces()[static_cast<std::size_t>(f)];
        const double len = mesh.boundary_face_length(f);
        mass.diagonal[face[0]] += 0.5 * len;
        mass.diagonal[face[1]] += 0.5 * len;
        triplets.emplace_back(face[0], face[0], 1.0 / len);
        triplets.emplace_back(face[1], face[1], 1.0 / len);
        triplets.emplace_back(face[0], face[1], -1.0 / len);
        triplets.emplace_back(face[1], face[0], -1.0 / len);
    }
    SparseMatrix stiffness(n, n);
    stiffness.setFromTriplets(triplets.begin(), triplets.end());
    return {std::move(mass), std::move(stiffness)};
}

inline Discretization discretize(const Mesh& mesh)
{
    Discretization d;
    d.blocks = {mesh.n_vertices(), mesh.n_boundary_vertices()};
    std::tie(d.mass_bulk, d.stiffness_bulk) = assemble_bulk(mesh);
    std::tie(d.mass_surface, d.stiffness_surface) = assemble_boundary(mesh);
    const Index nb = d.blocks.n_boundary, ni = d.blocks.n_interior();
    d.stiffness_gg = d.stiffness_bulk.block(0, 0, nb, nb);
    d.stiffness_gi = d.stiffness_bulk.block(0, nb, nb, ni);
    d.stiffness_ig = d.stiffness_bulk.block(nb, 0, ni, nb);
    d.stiffness_ii = d.stiffness_bulk.block(nb, nb, ni, ni);
    return d;
}

/// Everything needed to evaluate the discrete scheme on one mesh.
struct SchemeContext {
    Discretization disc;
    ModelParams params;
    PotentialSplit bulk;
    PotentialSplit surface;

    const BlockMaps& blocks() const { return disc.blocks; }
};

inline std::shared_ptr<const SchemeContext> make_context(const Mesh& mesh, const ModelParams& params,
                                                         PotentialSplit bulk, PotentialSplit surface)
{
    validate(params, surface);
    return std::make_shared<const SchemeContext>(
        SchemeContext{discretize(mesh), params, std::move(bulk), std::move(surface)});
}

/// Right-hand sides R_Γ(Φ) and R_Ω̊(Φ) of the chemical-potential equations.
struct Residuals {
    Vector boundary; // length n_boundary
    Vector interior; // length n_interior
};

namespace detail {

inline void check_length(const SchemeContext& ctx, const Vector& v, const char* what)
{
    if (v.size() != ctx.blocks().n_total)
        throw std::invalid_argument(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                                    std::to_string(ctx.blocks().n_total));
}

template <class Fn>
Vector nodal(const Vector& v, const Fn& fn)
{
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) out[i] = fn(v[i]);
    return out;
}

} // namespace detail

inline Residuals residuals(const SchemeContext& ctx, const Vector& phi, const Vector& phi_old)
{
    detail::check_length(ctx, phi, "phi");
    detail::check_length(ctx, phi_old, "phi_old");
    const auto& d = ctx.disc;
    const auto& p = ctx.params;
    const auto& blk = ctx.blocks();

    const Vector bulk_grad = p.delta * p.sigma * (d.stiffness_bulk * phi);
    Vector f_mixed(phi.size());
    for (Index i = 0; i < phi.size(); ++i) f_mixed[i] = evaluate_mixed_d1(ctx.bulk, phi[i], phi_old[i]);
    const Vector bulk = bulk_grad + (p.sigma / p.delta) * d.mass_bulk.apply(f_mixed);

    const Vector phi_g = blk.boundary(phi);
    const Vector phi_old_g = blk.boundary(phi_old);
    Vector g_mixed(phi_g.size());
    for (Index i = 0; i < phi_g.size(); ++i) g_mixed[i] = evaluate_mixed_d1(ctx.surface, phi_g[i], phi_old_g[i]);

    Residuals r;
    r.boundary = blk.boundary(bulk) + p.kappa * p.delta_gamma * (d.stiffness_surface * phi_g) +
                 d.mass_surface.apply(g_mixed) / p.delta_gamma;
    r.interior = blk.interior(bulk);
    return r;
}

inline Vector residual_interior(const SchemeContext& ctx, const Vector& phi, const Vector& phi_old)
{
    return residuals(ctx, phi, phi_old).interior;
}

inline Vector residual_boundary(const SchemeContext& ctx, const Vector& phi, const Vector& phi_old)
{
    return residuals(ctx, phi, phi_old).boundary;
}

/// Directional derivative of (R_Γ, R_Ω̊) at phi along v. Concave parts are
/// explicit in time and drop out.
inline Residuals linearized_residuals(const SchemeContext& ctx, const Vector& phi, const Vector& v)
{
    detail::check_length(ctx, phi, "phi");
    detail::check_length(ctx, v, "direction");
    const auto& d = ctx.disc;
    const auto& p = ctx.params;
    const auto& blk = ctx.blocks();

    const Vector f2 = detail::nodal(phi, ctx.bulk.convex_d2);
    const Vector bulk =
        p.delta * p.sigma * (d.stiffness_bulk * v) + (p.sigma / p.delta) * d.mass_bulk.apply(f2.cwiseProduct(v));
    const Vector g2 = detail::nodal(Vector(blk.boundary(phi)), ctx.surface.convex_d2);
    const Vector v_g = blk.boundary(v);

    Residuals r;
    r.boundary = blk.boundary(bulk) + p.kappa * p.delta_gamma * (d.stiffness_surface * v_g) +
                 d.mass_surface.apply(g2.cwiseProduct(v_g)) / p.delta_gamma;
    r.interior = blk.interior(bulk);
    return r;
}

/// Writes M_Ω, L_Ω, M_Γ, L_Γ as MatrixMarket coordinate files into dir.
inline void dump_matrix_market(const Discretization& d, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto diag = [](const DiagMatrix& m) {
        SparseMatrix s(m.size(), m.size());
        std::vector<Eigen::Triplet<double>> t;
        for (Index i = 0; i < m.size(); ++i) t.emplace_back(i, i, m.diagonal[i]);
        s.setFromTriplets(t.begin(), t.end());
        return s;
    };
    const bool ok = Eigen::saveMarket(diag(d.mass_bulk), (dir / "mass_bulk.mtx").string()) &&
                    Eigen::saveMarket(d.stiffness_bulk, (dir / "stiffness_bulk.mtx").string()) &&
                    Eigen::saveMarket(diag(d.mass_surface), (dir / "mass_surface.mtx").string()) &&
                    Eigen::saveMarket(d.stiffness_surface, (dir / "stiffness_surface.mtx").string());
    if (!ok) throw std::runtime_error("failed writing MatrixMarket files to " + dir.string());
}

} // namespace chdyn
