#pragma once

// Legacy ASCII VTK output. Values are printed with 9 significant digits so
// that files are byte-stable across runs on one platform.

#include "chdyn/assembly.hpp"
#include "chdyn/mesh.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace chdyn {

namespace vtk {

inline constexpr int digits = 9;

inline void write_scalars(std::ostream& out, const std::string& name, const Vector& values)
{
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Index i = 0; i < values.size(); ++i) out << values[i] << '\n';
}

inline void open_for_write(std::ofstream& out, const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out.open(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(digits);
}

inline void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

} // namespace vtk

/// Triangulation with point data `phi` and `mu`.
inline void write_vtk_bulk(std::ostream& out, const Mesh& mesh, const Vector& phi, const Vector& mu)
{
    if (phi.size() != mesh.n_vertices() || mu.size() != mesh.n_vertices())
        throw std::invalid_argument("write_vtk: field length does not match the mesh");
    out << "# vtk DataFile Version 3.0\nchdyn bulk\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.n_vertices() << " double\n";
    for (const auto& p : mesh.vertices()) out << p.x << ' ' << p.y << " 0\n";
    out << "CELLS " << mesh.n_cells() << ' ' << 4 * mesh.n_cells() << '\n';
    for (const auto& c : mesh.cells()) out << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    out << "CELL_TYPES " << mesh.n_cells() << '\n';
    for (Index c = 0; c < mesh.n_cells(); ++c) out << "5\n";
    out << "POINT_DATA " << mesh.n_vertices() << '\n';
    vtk::write_scalars(out, "phi", phi);
    vtk::write_scalars(out, "mu", mu);
}

/// Boundary polyline with point data `mu_gamma`. Points are the boundary
/// vertices in mesh order, so point i here is vertex i of the bulk file.
inline void write_vtk_boundary(std::ostream& out, const Mesh& mesh, const Vector& mu_gamma)
{
    const Index nb = mesh.n_boundary_vertices();
    if (mu_gamma.size() != nb) throw std::invalid_argument("write_vtk: mu_gamma length does not match the boundary");
    out << "# vtk DataFile Version 3.0\nchdyn boundary\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nb << " double\n";
    for (Index i = 0; i < nb; ++i) {
        const auto& p = mesh.vertices()[static_cast<std::size_t>(i)];
        out << p.x << ' ' << p.y << " 0\n";
    }
    out << "CELLS " << mesh.n_boundary_faces() << ' ' << 3 * mesh.n_boundary_faces() << '\n';
    for (const auto& f : mesh.boundary_faces()) out << "2 " << f[0] << ' ' << f[1] << '\n';
    out << "CELL_TYPES " << mesh.n_boundary_faces() << '\n';
    for (Index f = 0; f < mesh.n_boundary_faces(); ++f) out << "3\n";
    out << "POINT_DATA " << nb << '\n';
    vtk::write_scalars(out, "mu_gamma", mu_gamma);
}

struct VtkPaths {
    std::filesystem::path bulk;
    std::filesystem::path boundary;
};

/// Writes `path` (bulk) and `<stem>_gamma<ext>` next to it (boundary).
inline VtkPaths write_vtk(const Mesh& mesh, const Vector& phi, const Vector& mu, const Vector& mu_gamma,
                          const std::filesystem::path& path)
{
    VtkPaths paths{path, path};
    paths.boundary.replace_filename(path.stem().string() + "_gamma" + path.extension().string());
    {
        std::ofstream out;
        vtk::open_for_write(out, paths.bulk);
        write_vtk_bulk(out, mesh, phi, mu);
        vtk::finish(out, paths.bulk);
    }
    {
        std::ofstream out;
        vtk::open_for_write(out, paths.boundary);
        write_vtk_boundary(out, mesh, mu_gamma);
        vtk::finish(out, paths.boundary);
    }
    return paths;
}

/// Minimal reader for files produced above.
struct VtkData {
    std::vector<Point> points;
    std::vector<std::vector<Index>> cells;
    std::vector<int> cell_types;
    std::map<std::string, std::vector<double>> point_data;
};

inline VtkData read_vtk(std::istream& in)
{
    VtkData data;
    std::string token;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) throw std::runtime_error("malformed VTK file: " + what);
    };
    std::string line;
    for (int i = 0; i < 4; ++i) expect(static_cast<bool>(std::getline(in, line)), "truncated header");
    expect(line == "DATASET UNSTRUCTURED_GRID", "unsupported dataset '" + line + "'");
    Index count = 0;
    while (in >> token) {
        if (token == "POINTS") {
            in >> count >> token;
            data.points.resize(static_cast<std::size_t>(count));
            double z = 0.0;
            for (auto& p : data.points) in >> p.x >> p.y >> z;
        } else if (token == "CELLS") {
            Index total = 0;
            in >> count >> total;
            data.cells.resize(static_cast<std::size_t>(count));
            for (auto& c : data.cells) {
                Index k = 0;
                in >> k;
                c.resize(static_cast<std::size_t>(k));
                for (auto& v : c) in >> v;
            }
        } else if (token == "CELL_TYPES") {
            in >> count;
            data.cell_types.resize(static_cast<std::size_t>(count));
            for (auto& t : data.cell_types) in >> t;
        } else if (token == "POINT_DATA") {
            in >> count;
        } else if (token == "SCALARS") {
            std::string name, type, lookup, table;
            int components = 0;
            in >> name >> type >> components >> lookup >> table;
            expect(lookup == "LOOKUP_TABLE", "missing LOOKUP_TABLE for " + name);
            auto& values = data.point_data[name];
            values.resize(static_cast<std::size_t>(count));
            for (auto& v : values) in >> v;
        } else {
            expect(false, "unexpected token '" + token + "'");
        }
        expect(!in.fail(), "bad value near " + token);
    }
    return data;
}

inline VtkData read_vtk(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_vtk(in);
}

} // namespace chdyn
