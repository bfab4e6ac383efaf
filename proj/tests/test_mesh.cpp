#include <doctest.h>

#include "wfem/exceptions.hpp"
#include "wfem/mesh.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace wfem;

namespace {

double quad_jacobian_min(const Mesh& m, std::size_t e) {
    const auto* n = m.element(e);
    double jmin = 1e300;
    // corners of the bilinear map
    for (int c = 0; c < 4; ++c) {
        const Point& p = m.node(n[c]);
        const Point& a = m.node(n[(c + 1) % 4]);
        const Point& b = m.node(n[(c + 3) % 4]);
        const double j = (a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0]);
        jmin = std::min(jmin, j);
    }
    return jmin;
}

}  // namespace

TEST_CASE("interval mesh examples") {
    auto m = interval_mesh(0.2, 100, BoundaryTag::Dirichlet);
    CHECK(m.num_nodes() == 101);
    CHECK(m.h_max() == doctest::Approx(0.002).epsilon(1e-12));

    auto one = interval_mesh(1.0, 1, BoundaryTag::Dirichlet);
    REQUIRE(one.num_nodes() == 2);
    CHECK(one.node(0)[0] == 0.0);
    CHECK(one.node(1)[0] == 1.0);
    CHECK(one.h_max() == 1.0);

    auto fine = interval_mesh(0.2, 200, BoundaryTag::Dirichlet);
    CHECK(fine.h_max() == doctest::Approx(0.5 * m.h_max()).epsilon(1e-12));
    CHECK(m.num_facets() == 2);
    for (const auto& f : m.facets()) CHECK(f.tag == BoundaryTag::Dirichlet);
}

TEST_CASE("interval mesh rejects bad input") {
    CHECK_THROWS_AS(interval_mesh(0.0, 10, BoundaryTag::Dirichlet), InvalidArgument);
    CHECK_THROWS_AS(interval_mesh(-1.0, 10, BoundaryTag::Dirichlet), InvalidArgument);
    CHECK_THROWS_AS(interval_mesh(1.0, 0, BoundaryTag::Dirichlet), InvalidArgument);
}

TEST_CASE("mesh constructor validates elements") {
    // inverted segment
    CHECK_THROWS_AS(Mesh(1, {{0.0, 0.0}, {1.0, 0.0}}, {1, 0}, {}), InvalidArgument);
    // clockwise quad
    CHECK_THROWS_AS(Mesh(2, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {0, 3, 2, 1}, {}), InvalidArgument);
    // node index out of range
    CHECK_THROWS(Mesh(1, {{0.0, 0.0}, {1.0, 0.0}}, {0, 2}, {}));
}

TEST_CASE("channel mesh sizes") {
    CHECK(channel_mesh(1).num_elements() == 100);
    CHECK(channel_mesh(6).num_elements() == 3200);
    CHECK(channel_mesh(8).num_elements() == 12800);
    CHECK(mesh_size(channel_mesh(1)) == doctest::Approx(0.002));
    CHECK_THROWS_AS(channel_mesh(0), InvalidArgument);
    CHECK_THROWS_AS(focus_mesh(0), InvalidArgument);
    for (int n = 1; n < 8; ++n) {
        const double r = mesh_size(channel_mesh(n)) / mesh_size(channel_mesh(n + 1));
        CHECK(r == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("unit square quad diameter") {
    Mesh sq(2, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {0, 1, 2, 3}, {});
    CHECK(mesh_size(sq) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("focus geometry arc") {
    FocusGeometry g;
    CHECK(std::abs(g.arc_y(0.0)) < 1e-15);
    CHECK(std::abs(g.arc_y(0.04)) < 1e-15);
    CHECK(g.arc_y(0.02) == doctest::Approx(0.04 - std::sqrt(0.002)).epsilon(1e-14));
    CHECK(g.arc_y(0.02) == doctest::Approx(-0.004721).epsilon(1e-4));
}

TEST_CASE("focus mesh level 1") {
    FocusGeometry g;
    auto m = focus_mesh(1, g);
    CHECK(m.dim() == 2);
    CHECK(m.num_elements() == 700);
    CHECK(m.num_nodes() == 21 * 36);

    // bottom nodes on the circle
    std::set<std::size_t> on_source;
    for (const auto& f : m.facets())
        if (f.tag == BoundaryTag::NeumannSource) {
            on_source.insert(f.nodes[0]);
            on_source.insert(f.nodes[1]);
        }
    CHECK(on_source.size() == 21);
    for (auto i : on_source) {
        const Point& p = m.node(i);
        const double r2 = (p[0] - g.cx) * (p[0] - g.cx) + (p[1] - g.cy) * (p[1] - g.cy);
        CHECK(std::abs(r2 - g.radius_sq) <= 1e-12 * g.radius_sq);
    }
}

TEST_CASE("focus mesh boundary facets are exactly the boundary edges") {
    auto m = focus_mesh(2);
    std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const auto* n = m.element(e);
        for (int k = 0; k < 4; ++k) {
            auto a = n[k], b = n[(k + 1) % 4];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::set<std::pair<std::size_t, std::size_t>> boundary;
    for (const auto& [edge, count] : edge_count)
        if (count == 1) boundary.insert(edge);
    std::set<std::pair<std::size_t, std::size_t>> tagged;
    std::size_t n_source = 0, n_absorbing = 0;
    for (const auto& f : m.facets()) {
        tagged.insert({std::min(f.nodes[0], f.nodes[1]), std::max(f.nodes[0], f.nodes[1])});
        if (f.tag == BoundaryTag::NeumannSource) ++n_source;
        if (f.tag == BoundaryTag::Absorbing) ++n_absorbing;
    }
    CHECK(tagged.size() == m.num_facets());  // one tag per facet
    CHECK(tagged == boundary);
    CHECK(n_source == 40);
    CHECK(n_absorbing == 40 + 2 * 70);
}

TEST_CASE("focus mesh jacobians positive up to level 6") {
    for (int n = 1; n <= 6; ++n) {
        auto m = focus_mesh(n);
        double jmin = 1e300;
        for (std::size_t e = 0; e < m.num_elements(); ++e) jmin = std::min(jmin, quad_jacobian_min(m, e));
        CHECK(jmin > 0.0);
    }
}

TEST_CASE("focus mesh quasiuniform refinement") {
    double prev = mesh_size(focus_mesh(1));
    for (int n = 2; n <= 5; ++n) {
        const double h = mesh_size(focus_mesh(n));
        const double r = prev / h;
        CHECK(r >= 1.9);
        CHECK(r <= 2.1);
        CHECK(std::abs(h - 0.5 * prev) <= 0.05 * 0.5 * prev);
        prev = h;
    }
}

TEST_CASE("write_mesh header") {
    auto m = interval_mesh(1.0, 2, BoundaryTag::Dirichlet);
    std::ostringstream os;
    write_mesh(os, m);
    std::istringstream is(os.str());
    int dim = 0;
    std::size_t nn = 0, ne = 0, nf = 0;
    is >> dim >> nn >> ne >> nf;
    CHECK(dim == 1);
    CHECK(nn == 3);
    CHECK(ne == 2);
    CHECK(nf == 2);
    CHECK(to_string(BoundaryTag::Absorbing) == "absorbing");
}
