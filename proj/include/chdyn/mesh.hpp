#pragma once

#include "chdyn/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace chdyn {

using Index = Eigen::Index;

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

using Cell = std::array<Index, 3>;
using Face = std::array<Index, 2>;

/// What the validating constructor changed or noticed while building a mesh.
struct LoadReport {
    bool renumbered = false;
    /// permutation[old_index] == new_index
    std::vector<Index> permutation;
    Index reoriented_cells = 0;
    std::vector<std::string> warnings;
};

/// Triangulation of a polygon together with its boundary edges.
///
/// Vertices are numbered boundary-first: indices [0, n_boundary_vertices())
/// lie on the boundary, all others are interior. Every cell is nonobtuse and
/// positively oriented, and every boundary face is an edge of exactly one
/// cell. Instances are immutable once built.
class Mesh {
public:
    /// Validates the input, repairs orientation and renumbers boundary-first.
    static Mesh from_arrays(std::vector<Point> vertices, std::vector<Cell> cells,
                            std::vector<Face> boundary_faces, LoadReport* report = nullptr);

    const std::vector<Point>& vertices() const { return vertices_; }
    const std::vector<Cell>& cells() const { return cells_; }
    const std::vector<Face>& boundary_faces() const { return faces_; }

    Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
    Index n_cells() const { return static_cast<Index>(cells_.size()); }
    Index n_boundary_faces() const { return static_cast<Index>(faces_.size()); }
    Index n_boundary_vertices() const { return n_boundary_; }
    Index n_interior_vertices() const { return n_vertices() - n_boundary_; }
    double h_max() const { return h_max_; }

    double cell_area(Index c) const;
    double boundary_face_length(Index f) const;

    /// Largest ratio of cell diameter to inradius.
    double shape_regularity() const;

private:
    Mesh() = default;

    std::vector<Point> vertices_;
    std::vector<Cell> cells_;
    std::vector<Face> faces_;
    Index n_boundary_ = 0;
    double h_max_ = 0.0;
};

namespace detail {

inline double distance(const Point& a, const Point& b) { return std::hypot(b.x - a.x, b.y - a.y); }

inline double signed_area(const Point& a, const Point& b, const Point& c)
{
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

/// Interior angle (radians) at vertex a of triangle (a, b, c).
inline double angle_at(const Point& a, const Point& b, const Point& c)
{
    const double ux = b.x - a.x, uy = b.y - a.y;
    const double vx = c.x - a.x, vy = c.y - a.y;
    const double cosine = (ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy));
    return std::acos(std::clamp(cosine, -1.0, 1.0));
}

inline Face sorted(Face f)
{
    if (f[0] > f[1]) std::swap(f[0], f[1]);
    return f;
}

inline std::string format_face(const Face& f)
{
    return "(" + std::to_string(f[0]) + ", " + std::to_string(f[1]) + ")";
}

} // namespace detail

inline Mesh Mesh::from_arrays(std::vector<Point> vertices, std::vector<Cell> cells,
                              std::vector<Face> faces, LoadReport* report)
{
    LoadReport local;
    LoadReport& rep = report ? *report : local;
    rep = LoadReport{};

    const auto nv = static_cast<Index>(vertices.size());
    if (nv < 3) throw MeshError("mesh needs at least 3 vertices");
    if (cells.empty()) throw MeshError("mesh has no cells");
    if (faces.empty()) throw MeshError("mesh has no boundary faces");

    for (Index i = 0; i < nv; ++i) {
        const auto& p = vertices[static_cast<std::size_t>(i)];
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw MeshError("vertex " + std::to_string(i) + " has non-finite coordinates");
    }

    auto check_index = [nv](Index v, const std::string& what) {
        if (v < 0 || v >= nv)
            throw MeshError(what + " references vertex " + std::to_string(v) + " out of range [0, " +
                            std::to_string(nv) + ")");
    };

    double extent = 0.0;
    for (const auto& p : vertices) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
    const double degenerate_area = 1e-14 * std::max(extent * extent, 1e-300);

    // orientation and nonobtuseness
    constexpr double right_angle = 0.5 * 3.14159265358979323846;
    constexpr double angle_tol = 1e-10;
    double worst_angle = 0.0;
    Index worst_cell = -1;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto& cell = cells[c];
        const std::string what = "cell " + std::to_string(c);
        for (Index v : cell) check_index(v, what);
        if (cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2])
            throw MeshError(what + " repeats a vertex");

        const auto& a = vertices[static_cast<std::size_t>(cell[0])];
        const auto& b = vertices[static_cast<std::size_t>(cell[1])];
        const auto& d = vertices[static_cast<std::size_t>(cell[2])];
        const double area = detail::signed_area(a, b, d);
        if (std::abs(area) <= degenerate_area) throw MeshError(what + " is degenerate (zero area)");
        if (area < 0.0) {
            std::swap(cell[1], cell[2]);
            ++rep.reoriented_cells;
        }

        const std::array<double, 3> angles = {detail::angle_at(a, b, d), detail::angle_at(b, d, a),
                                              detail::angle_at(d, a, b)};
        const double largest = *std::max_element(angles.begin(), angles.end());
        if (largest > right_angle + angle_tol && largest > worst_angle) {
            worst_angle = largest;
            worst_cell = static_cast<Index>(c);
        }
    }
    if (worst_cell >= 0) {
        std::ostringstream msg;
        msg << "obtuse cell " << worst_cell << ": largest angle " << std::setprecision(10)
            << worst_angle * 180.0 / (2.0 * right_angle) << " degrees";
        throw MeshError(msg.str());
    }
    if (rep.reoriented_cells > 0)
        rep.warnings.push_back("reoriented " + std::to_string(rep.reoriented_cells) +
                               " clockwise cell(s)");

    // edge incidence
    std::map<Face, int> edge_cells;
    for (const auto& cell : cells) {
        for (int k = 0; k < 3; ++k) {
            const Face e = detail::sorted({cell[static_cast<std::size_t>(k)],
                                           cell[static_cast<std::size_t>((k + 1) % 3)]});
            if (++edge_cells[e] > 2)
                throw MeshError("edge " + detail::format_face(e) + " is shared by more than two cells");
        }
    }

    std::map<Face, Index> face_index;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const std::string what = "boundary face " + std::to_string(f);
        for (Index v : faces[f]) check_index(v, what);
        const Face e = detail::sorted(faces[f]);
        const auto it = edge_cells.find(e);
        if (it == edge_cells.end() || it->second != 1)
            throw MeshError("dangling boundary face " + std::to_string(f) + " " + detail::format_face(faces[f]) +
                            ": not an edge of exactly one cell");
        if (!face_index.emplace(e, static_cast<Index>(f)).second)
            throw MeshError("duplicate boundary face " + detail::format_face(faces[f]));
    }
    for (const auto& [edge, count] : edge_cells) {
        if (count == 1 && !face_index.contains(edge))
            throw MeshError("boundary edge " + detail::format_face(edge) + " is not covered by a boundary face");
    }

    std::vector<char> used(vertices.size(), 0);
    for (const auto& cell : cells)
        for (Index v : cell) used[static_cast<std::size_t>(v)] = 1;
    for (Index i = 0; i < nv; ++i)
        if (!used[static_cast<std::size_t>(i)])
            throw MeshError("vertex " + std::to_string(i) + " is not referenced by any cell");

    // boundary-first renumbering, stable within each class
    std::vector<char> on_boundary(vertices.size(), 0);
    for (const auto& f : faces) on_boundary[static_cast<std::size_t>(f[0])] = on_boundary[static_cast<std::size_t>(f[1])] = 1;
    rep.permutation.assign(vertices.size(), -1);
    Index next = 0;
    for (Index i = 0; i < nv; ++i)
        if (on_boundary[static_cast<std::size_t>(i)]) rep.permutation[static_cast<std::size_t>(i)] = next++;
    const Index n_boundary = next;
    for (Index i = 0; i < nv; ++i)
        if (!on_boundary[static_cast<std::size_t>(i)]) rep.permutation[static_cast<std::size_t>(i)] = next++;
    for (Index i = 0; i < nv; ++i)
        if (rep.permutation[static_cast<std::size_t>(i)] != i) rep.renumbered = true;

    Mesh mesh;
    mesh.n_boundary_ = n_boundary;
    mesh.vertices_.resize(vertices.size());
    for (Index i = 0; i < nv; ++i)
        mesh.vertices_[static_cast<std::size_t>(rep.permutation[static_cast<std::size_t>(i)])] =
            vertices[static_cast<std::size_t>(i)];
    auto remap = [&rep](Index v) { return rep.permutation[static_cast<std::size_t>(v)]; };
    mesh.cells_.reserve(cells.size());
    for (const auto& c : cells) mesh.cells_.push_back({remap(c[0]), remap(c[1]), remap(c[2])});
    mesh.faces_.reserve(faces.size());
    for (const auto& f : faces) mesh.faces_.push_back({remap(f[0]), remap(f[1])});

    double h = 0.0;
    for (const auto& c : mesh.cells_) {
        for (int k = 0; k < 3; ++k)
            h = std::max(h, detail::distance(mesh.vertices_[static_cast<std::size_t>(c[static_cast<std::size_t>(k)])],
                                             mesh.vertices_[static_cast<std::size_t>(c[static_cast<std::size_t>((k + 1) % 3)])]));
    }
    mesh.h_max_ = h;
    if (rep.renumbered) rep.warnings.push_back("vertices renumbered boundary-first");
    return mesh;
}

inline double Mesh::cell_area(Index c) const
{
    if (c < 0 || c >= n_cells()) throw std::out_of_range("cell index " + std::to_string(c) + " out of range");
    const auto& cell = cells_[static_cast<std::size_t>(c)];
    return detail::signed_area(vertices_[static_cast<std::size_t>(cell[0])], vertices_[static_cast<std::size_t>(cell[1])],
                               vertices_[static_cast<std::size_t>(cell[2])]);
}

inline double Mesh::boundary_face_length(Index f) const
{
    if (f < 0 || f >= n_boundary_faces())
        throw std::out_of_range("boundary face index " + std::to_string(f) + " out of range");
    const auto& face = faces_[static_cast<std::size_t>(f)];
    return detail::distance(vertices_[static_cast<std::size_t>(face[0])], vertices_[static_cast<std::size_t>(face[1])]);
}

inline double Mesh::shape_regularity() const
{
    double worst = 0.0;
    for (Index c = 0; c < n_cells(); ++c) {
        const auto& cell = cells_[static_cast<std::size_t>(c)];
        double diameter = 0.0, perimeter = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double len = detail::distance(vertices_[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])],
                                                vertices_[static_cast<std::size_t>(cell[static_cast<std::size_t>((k + 1) % 3)])]);
            diameter = std::max(diameter, len);
            perimeter += len;
        }
        const double inradius = 2.0 * cell_area(c) / perimeter;
        worst = std::max(worst, diameter / inradius);
    }
    return worst;
}

/// Unit square split into n x n squares, each cut along its (0,0)-(1,1) diagonal.
inline Mesh structured_unit_square(Index n)
{
    if (n < 1) throw MeshError("structured_unit_square needs n >= 1");
    const Index side = n + 1;
    auto id = [side](Index i, Index j) { return j * side + i; };
    const double h = 1.0 / static_cast<double>(n);

    std::vector<Point> vertices;
    vertices.reserve(static_cast<std::size_t>(side * side));
    for (Index j = 0; j <= n; ++j)
        for (Index i = 0; i <= n; ++i)
            vertices.push_back({i == n ? 1.0 : static_cast<double>(i) * h, j == n ? 1.0 : static_cast<double>(j) * h});

    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(2 * n * n));
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }

    std::vector<Face> faces;
    faces.reserve(static_cast<std::size_t>(4 * n));
    for (Index i = 0; i < n; ++i) faces.push_back({id(i, 0), id(i + 1, 0)});
    for (Index j = 0; j < n; ++j) faces.push_back({id(n, j), id(n, j + 1)});
    for (Index i = n; i > 0; --i) faces.push_back({id(i, n), id(i - 1, n)});
    for (Index j = n; j > 0; --j) faces.push_back({id(0, j), id(0, j - 1)});

    return Mesh::from_arrays(std::move(vertices), std::move(cells), std::move(faces));
}

/// Mesh after one uniform red refinement, plus for every fine vertex the two
/// coarse vertices it interpolates (equal indices for inherited vertices).
struct RefinedMesh {
    Mesh mesh;
    std::vector<Face> parents;
};

inline RefinedMesh refine_uniform(const Mesh& coarse)
{
    std::vector<Point> vertices = coarse.vertices();
    std::vector<Face> parents;
    parents.reserve(vertices.size());
    for (Index i = 0; i < coarse.n_vertices(); ++i) parents.push_back({i, i});

    std::map<Face, Index> midpoint;
    auto mid = [&](Index a, Index b) {
        const Face key = detail::sorted({a, b});
        const auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const auto& p = coarse.vertices()[static_cast<std::size_t>(a)];
        const auto& q = coarse.vertices()[static_cast<std::size_t>(b)];
        vertices.push_back({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)});
        parents.push_back(key);
        const auto idx = static_cast<Index>(vertices.size() - 1);
        midpoint.emplace(key, idx);
        return idx;
    };

    std::vector<Cell> cells;
    cells.reserve(4 * coarse.cells().size());
    for (const auto& c : coarse.cells()) {
        const Index m01 = mid(c[0], c[1]), m12 = mid(c[1], c[2]), m20 = mid(c[2], c[0]);
        cells.push_back({c[0], m01, m20});
        cells.push_back({m01, c[1], m12});
        cells.push_back({m20, m12, c[2]});
        cells.push_back({m01, m12, m20});
    }
    std::vector<Face> faces;
    faces.reserve(2 * coarse.boundary_faces().size());
    for (const auto& f : coarse.boundary_faces()) {
        const Index m = mid(f[0], f[1]);
        faces.push_back({f[0], m});
        faces.push_back({m, f[1]});
    }

    LoadReport report;
    Mesh fine = Mesh::from_arrays(std::move(vertices), std::move(cells), std::move(faces), &report);
    std::vector<Face> fine_parents(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i)
        fine_parents[static_cast<std::size_t>(report.permutation[i])] = parents[i];
    return {std::move(fine), std::move(fine_parents)};
}

/// P1 prolongation of coarse nodal values onto a mesh produced by refine_uniform.
inline Eigen::VectorXd prolongate(const RefinedMesh& refined, const Eigen::VectorXd& coarse_values)
{
    Eigen::VectorXd fine(refined.mesh.n_vertices());
    for (Index i = 0; i < fine.size(); ++i) {
        const auto& p = refined.parents[static_cast<std::size_t>(i)];
        fine[i] = 0.5 * (coarse_values[p[0]] + coarse_values[p[1]]);
    }
    return fine;
}

// ---------------------------------------------------------------------------
// chmesh text format

inline Mesh parse_mesh(std::istream& in, LoadReport* report = nullptr)
{
    int line_no = 0;
    auto next_line = [&](const char* expecting) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
        }
        throw MeshError(std::string("unexpected end of mesh file, expecting ") + expecting);
    };
    auto fail = [&](const std::string& what) {
        throw MeshError("mesh parse error at line " + std::to_string(line_no) + ": " + what);
    };
    auto section = [&](const std::string& keyword) {
        std::istringstream ss(next_line(keyword.c_str()));
        std::string word;
        long long count = -1;
        std::string extra;
        if (!(ss >> word >> count) || word != keyword || count < 0 || (ss >> extra))
            fail("expected '" + keyword + " <count>'");
        return static_cast<std::size_t>(count);
    };
    auto read_row = [&](auto& values, const char* what) {
        std::istringstream ss(next_line(what));
        for (auto& v : values)
            if (!(ss >> v)) fail(std::string("malformed ") + what + " line");
        std::string extra;
        if (ss >> extra) fail(std::string("trailing tokens on ") + what + " line");
    };

    {
        std::istringstream ss(next_line("header"));
        std::string magic, dim, extra;
        if (!(ss >> magic >> dim) || magic != "chmesh" || dim != "2d" || (ss >> extra))
            fail("expected header 'chmesh 2d'");
    }

    std::vector<Point> vertices(section("vertices"));
    for (auto& p : vertices) {
        std::array<double, 2> xy{};
        read_row(xy, "vertex");
        p = {xy[0], xy[1]};
    }
    std::vector<Cell> cells(section("cells"));
    for (auto& c : cells) read_row(c, "cell");
    std::vector<Face> faces(section("boundary"));
    for (auto& f : faces) read_row(f, "boundary");

    return Mesh::from_arrays(std::move(vertices), std::move(cells), std::move(faces), report);
}

inline Mesh load_mesh(const std::filesystem::path& path, LoadReport* report = nullptr)
{
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file " + path.string());
    return parse_mesh(in, report);
}

inline void write_mesh(std::ostream& out, const Mesh& mesh)
{
    out << "chmesh 2d\n";
    out << "# " << mesh.n_boundary_vertices() << " boundary vertices listed first\n";
    out << "vertices " << mesh.n_vertices() << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : mesh.vertices()) out << p.x << ' ' << p.y << '\n';
    out << "cells " << mesh.n_cells() << '\n';
    for (const auto& c : mesh.cells()) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    out << "boundary " << mesh.n_boundary_faces() << '\n';
    for (const auto& f : mesh.boundary_faces()) out << f[0] << ' ' << f[1] << '\n';
}

inline void save_mesh(const std::filesystem::path& path, const Mesh& mesh)
{
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write mesh file " + path.string());
    write_mesh(out, mesh);
    if (!out) throw MeshError("failed writing mesh file " + path.string());
}

} // namespace chdyn
