#include "chdyn/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace chdyn;

namespace {

Mesh unit_triangle()
{
    return Mesh::from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {{0, 1}, {1, 2}, {2, 0}});
}

std::string message_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const MeshError& e) {
        return e.what();
    }
    return "<no MeshError>";
}

bool is_on_unit_square_boundary(const Point& p)
{
    return p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
}

} // namespace

TEST(Mesh, SingleTriangle)
{
    const Mesh m = unit_triangle();
    EXPECT_EQ(m.n_vertices(), 3);
    EXPECT_EQ(m.n_boundary_vertices(), 3);
    EXPECT_EQ(m.n_interior_vertices(), 0);
    EXPECT_DOUBLE_EQ(m.h_max(), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(m.cell_area(0), 0.5);
    EXPECT_DOUBLE_EQ(m.boundary_face_length(0), 1.0);
}

TEST(Mesh, IndexOutOfRange)
{
    const Mesh m = unit_triangle();
    EXPECT_THROW(m.cell_area(1), std::out_of_range);
    EXPECT_THROW(m.cell_area(-1), std::out_of_range);
    EXPECT_THROW(m.boundary_face_length(3), std::out_of_range);
}

TEST(Mesh, StructuredCounts)
{
    for (Index n : {1, 2, 3, 4, 7}) {
        const Mesh m = structured_unit_square(n);
        EXPECT_EQ(m.n_vertices(), (n + 1) * (n + 1));
        EXPECT_EQ(m.n_cells(), 2 * n * n);
        EXPECT_EQ(m.n_boundary_faces(), 4 * n);
        EXPECT_EQ(m.n_boundary_vertices(), 4 * n);
        EXPECT_NEAR(m.h_max(), std::sqrt(2.0) / static_cast<double>(n), 1e-15);
    }
}

TEST(Mesh, StructuredAnglesAreRightOrHalfRight)
{
    const Mesh m = structured_unit_square(3);
    for (const auto& c : m.cells()) {
        for (int k = 0; k < 3; ++k) {
            const auto& a = m.vertices()[static_cast<std::size_t>(c[static_cast<std::size_t>(k)])];
            const auto& b = m.vertices()[static_cast<std::size_t>(c[static_cast<std::size_t>((k + 1) % 3)])];
            const auto& d = m.vertices()[static_cast<std::size_t>(c[static_cast<std::size_t>((k + 2) % 3)])];
            const double ux = b.x - a.x, uy = b.y - a.y, vx = d.x - a.x, vy = d.y - a.y;
            const double deg = std::acos((ux * vx + uy * vy) / std::hypot(ux, uy) / std::hypot(vx, vy)) * 180.0 / M_PI;
            EXPECT_TRUE(std::abs(deg - 45.0) < 1e-9 || std::abs(deg - 90.0) < 1e-9) << deg;
        }
    }
}

TEST(Mesh, StructuredMeasures)
{
    const Mesh m = structured_unit_square(16);
    double area = 0.0, perimeter = 0.0;
    for (Index c = 0; c < m.n_cells(); ++c) area += m.cell_area(c);
    for (Index f = 0; f < m.n_boundary_faces(); ++f) perimeter += m.boundary_face_length(f);
    EXPECT_NEAR(area, 1.0, 1e-14);
    EXPECT_NEAR(perimeter, 4.0, 1e-14);
}

TEST(Mesh, BoundaryFirstNumbering)
{
    const Mesh m = structured_unit_square(5);
    for (Index i = 0; i < m.n_vertices(); ++i)
        EXPECT_EQ(is_on_unit_square_boundary(m.vertices()[static_cast<std::size_t>(i)]), i < m.n_boundary_vertices()) << i;
    for (const auto& f : m.boundary_faces()) {
        EXPECT_LT(f[0], m.n_boundary_vertices());
        EXPECT_LT(f[1], m.n_boundary_vertices());
    }
}

TEST(Mesh, CellsArePositivelyOriented)
{
    const Mesh m = structured_unit_square(4);
    for (const auto& c : m.cells()) {
        const auto& a = m.vertices()[static_cast<std::size_t>(c[0])];
        const auto& b = m.vertices()[static_cast<std::size_t>(c[1])];
        const auto& d = m.vertices()[static_cast<std::size_t>(c[2])];
        EXPECT_GT((b.x - a.x) * (d.y - a.y) - (d.x - a.x) * (b.y - a.y), 0.0);
    }
}

TEST(Mesh, RenumberingRecordsPermutation)
{
    // interior vertex listed first
    std::vector<Point> v = {{0.5, 0.5}, {0, 0}, {1, 0}, {1, 1}, {0, 1}};
    std::vector<Cell> c = {{1, 2, 0}, {2, 3, 0}, {3, 4, 0}, {4, 1, 0}};
    std::vector<Face> f = {{1, 2}, {2, 3}, {3, 4}, {4, 1}};
    LoadReport rep;
    const Mesh m = Mesh::from_arrays(v, c, f, &rep);
    EXPECT_TRUE(rep.renumbered);
    ASSERT_EQ(rep.permutation.size(), 5u);
    EXPECT_EQ(rep.permutation[0], 4);
    for (std::size_t old = 0; old < v.size(); ++old)
        EXPECT_EQ(m.vertices()[static_cast<std::size_t>(rep.permutation[old])], v[old]);
    EXPECT_EQ(m.n_boundary_vertices(), 4);
}

TEST(Mesh, ClockwiseCellsAreRepaired)
{
    LoadReport rep;
    const Mesh m = Mesh::from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}}, {{0, 1}, {1, 2}, {2, 0}}, &rep);
    EXPECT_EQ(rep.reoriented_cells, 1);
    EXPECT_FALSE(rep.warnings.empty());
    EXPECT_DOUBLE_EQ(m.cell_area(0), 0.5);
}

TEST(Mesh, ObtuseCellRejectedWithAngle)
{
    // apex angle at (0.5, h): tan(α/2) = 0.5/h; α = 91° → h = 0.5/tan(45.5°)
    const double h = 0.5 / std::tan(45.5 * M_PI / 180.0);
    const std::string msg = message_of(
        [&] { Mesh::from_arrays({{0, 0}, {1, 0}, {0.5, h}}, {{0, 1, 2}}, {{0, 1}, {1, 2}, {2, 0}}); });
    EXPECT_NE(msg.find("obtuse cell 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("91"), std::string::npos) << msg;
}

TEST(Mesh, RejectsInvalidTopology)
{
    // collinear
    EXPECT_NE(message_of([] { Mesh::from_arrays({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, {{0, 1}, {1, 2}, {2, 0}}); })
                  .find("degenerate"),
              std::string::npos);
    // boundary face that is not a cell edge
    const std::vector<Point> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const std::vector<Cell> two = {{0, 1, 2}, {0, 2, 3}};
    EXPECT_NE(message_of([&] { Mesh::from_arrays(sq, two, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}); }).find("dangling"),
              std::string::npos);
    // missing boundary edge
    EXPECT_THROW(Mesh::from_arrays(sq, two, {{0, 1}, {1, 2}, {2, 3}}), MeshError);
    // index out of range, non-finite coordinate
    EXPECT_THROW(Mesh::from_arrays(sq, {{0, 1, 7}}, {{0, 1}}), MeshError);
    EXPECT_THROW(Mesh::from_arrays({{0, 0}, {1, 0}, {0, NAN}}, {{0, 1, 2}}, {{0, 1}, {1, 2}, {2, 0}}), MeshError);
}

TEST(Mesh, FileRoundTripIsBitExact)
{
    const RefinedMesh r = refine_uniform(structured_unit_square(3));
    std::stringstream buf;
    write_mesh(buf, r.mesh);
    const Mesh back = parse_mesh(buf);
    EXPECT_EQ(back.vertices(), r.mesh.vertices());
    EXPECT_EQ(back.cells(), r.mesh.cells());
    EXPECT_EQ(back.boundary_faces(), r.mesh.boundary_faces());
    EXPECT_EQ(back.n_boundary_vertices(), r.mesh.n_boundary_vertices());
}

TEST(Mesh, ParsesCommentsAndReportsErrors)
{
    std::istringstream ok("# a triangle\nchmesh 2d\nvertices 3\n0 0\n1 0 # right\n0 1\ncells 1\n0 1 2\nboundary 3\n0 1\n1 2\n2 0\n");
    EXPECT_EQ(parse_mesh(ok).n_cells(), 1);
    std::istringstream bad_header("chmesh 3d\n");
    EXPECT_THROW(parse_mesh(bad_header), MeshError);
    std::istringstream truncated("chmesh 2d\nvertices 3\n0 0\n1 0\n");
    EXPECT_THROW(parse_mesh(truncated), MeshError);
    std::istringstream junk("chmesh 2d\nvertices 3\n0 zero\n1 0\n0 1\ncells 1\n0 1 2\nboundary 3\n0 1\n1 2\n2 0\n");
    EXPECT_THROW(parse_mesh(junk), MeshError);
}

TEST(Mesh, RefinementHalvesAndProlongatesLinearFieldsExactly)
{
    const Mesh coarse = structured_unit_square(2);
    const RefinedMesh fine = refine_uniform(coarse);
    EXPECT_EQ(fine.mesh.n_cells(), 4 * coarse.n_cells());
    EXPECT_NEAR(fine.mesh.h_max(), 0.5 * coarse.h_max(), 1e-15);
    EXPECT_NEAR(fine.mesh.shape_regularity(), coarse.shape_regularity(), 1e-12);

    auto linear = [](const Point& p) { return 0.3 + 2.0 * p.x - 1.5 * p.y; };
    Eigen::VectorXd cv(coarse.n_vertices());
    for (Index i = 0; i < cv.size(); ++i) cv[i] = linear(coarse.vertices()[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd fv = prolongate(fine, cv);
    for (Index i = 0; i < fv.size(); ++i)
        EXPECT_NEAR(fv[i], linear(fine.mesh.vertices()[static_cast<std::size_t>(i)]), 1e-14);
}

TEST(Mesh, ShapeRegularityOfRightIsoscelesTriangle)
{
    // diameter √2, inradius (2 − √2)/2 for legs of length 1
    EXPECT_NEAR(unit_triangle().shape_regularity(), std::sqrt(2.0) / ((2.0 - std::sqrt(2.0)) / 2.0), 1e-12);
}
