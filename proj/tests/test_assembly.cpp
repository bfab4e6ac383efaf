#include <doctest.h>

#include "oracles.hpp"
#include "wfem/assembly.hpp"

#include <cmath>
#include <random>

using namespace wfem;

namespace {

std::shared_ptr<const FeSpace> unit_interval(std::size_t n, BoundaryTag tag = BoundaryTag::Dirichlet) {
    return std::make_shared<FeSpace>(std::make_shared<Mesh>(interval_mesh(1.0, n, tag)));
}

std::shared_ptr<const FeSpace> rectangle(double lx, double ly, std::size_t nx, std::size_t ny, SideTags tags = {}) {
    return std::make_shared<FeSpace>(std::make_shared<Mesh>(rectangle_mesh(lx, ly, nx, ny, tags)));
}

void check_matrix(const SparseMatrix& a, const oracle::Dense& expected, double tol = 1e-14) {
    for (std::size_t i = 0; i < expected.size(); ++i)
        for (std::size_t j = 0; j < expected.size(); ++j)
            CHECK(std::abs(a(i, j) - expected[i][j]) <= tol);
}

// Smallest Rayleigh quotient over random vectors, a cheap positivity probe.
double min_rayleigh(const SparseMatrix& a, std::mt19937& rng, int samples = 50) {
    double lo = 1e300;
    for (int s = 0; s < samples; ++s) {
        auto x = oracle::random_vector(a.rows(), rng);
        lo = std::min(lo, dot(x, spmv(a, x)) / dot(x, x));
    }
    return lo;
}

}  // namespace

TEST_CASE("stiffness hand values") {
    auto v = unit_interval(2);
    check_matrix(stiffness(*v), {{2, -2, 0}, {-2, 4, -2}, {0, -2, 2}});

    auto sq = rectangle(1.0, 1.0, 1, 1);
    auto k = stiffness(*sq);
    for (std::size_t i = 0; i < 4; ++i) CHECK(k(i, i) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

    auto focus = std::make_shared<FeSpace>(std::make_shared<Mesh>(focus_mesh(1)));
    auto kf = stiffness(*focus);
    std::vector<double> ones(kf.rows(), 1.0);
    CHECK(max_abs(spmv(kf, ones)) < 1e-12);
    CHECK(kf.is_symmetric());
}

TEST_CASE("mass hand values") {
    auto v = unit_interval(2);
    check_matrix(mass(*v), {{2.0 / 12, 1.0 / 12, 0}, {1.0 / 12, 4.0 / 12, 1.0 / 12}, {0, 1.0 / 12, 2.0 / 12}});

    // exact monomial integrals on [0,1]: int x(1-x)^2 = 1/12, int x^2(1-x) = 1/12, int x^3 = 1/4
    auto one = unit_interval(1);
    auto w = weighted_mass(*one, CoefficientField::function([](const Point& p) { return p[0]; }));
    check_matrix(w, {{1.0 / 12, 1.0 / 12}, {1.0 / 12, 0.25}});
    std::vector<double> nodal{0.0, 1.0};
    check_matrix(weighted_mass(*one, CoefficientField::nodal(nodal)), {{1.0 / 12, 1.0 / 12}, {1.0 / 12, 0.25}});

    auto rect = rectangle(2.0, 3.0, 4, 5);
    auto m = mass(*rect);
    std::vector<double> ones(m.rows(), 1.0);
    CHECK(dot(ones, spmv(m, ones)) == doctest::Approx(6.0).epsilon(1e-13));
    auto m1 = weighted_mass(*rect, CoefficientField::constant(1.0));
    for (std::size_t i = 0; i < m.nnz(); ++i) CHECK(std::abs(m.values()[i] - m1.values()[i]) < 1e-14);
}

TEST_CASE("assembled matrices are symmetric positive definite") {
    std::mt19937 rng(9);
    auto focus = std::make_shared<FeSpace>(std::make_shared<Mesh>(focus_mesh(1)));
    auto channel = std::make_shared<FeSpace>(std::make_shared<Mesh>(channel_mesh(1)));
    for (const auto& v : {focus, channel}) {
        auto m = mass(*v);
        CHECK(m.is_symmetric());
        CHECK(min_rayleigh(m, rng) > 0.0);

        std::vector<double> w = oracle::random_vector(v->n_dofs(), rng, 0.5, 2.0);
        auto mw = weighted_mass(*v, CoefficientField::nodal(w));
        CHECK(mw.is_symmetric());
        // M(w) >= 0.5 M(1) in the Loewner order
        auto diff = mw;
        diff.add_scaled(-0.5, m);
        CHECK(min_rayleigh(diff, rng) >= -1e-14);
    }
    auto k = stiffness(*channel);
    std::vector<double> b(k.rows(), 0.0);
    apply_dirichlet_in_place(k, b, channel->dirichlet_mask());
    CHECK(k.is_symmetric());
    CHECK(min_rayleigh(k, rng) > 0.0);
}

TEST_CASE("assembly is additive over element subsets") {
    auto v = std::make_shared<FeSpace>(std::make_shared<Mesh>(focus_mesh(1)));
    std::mt19937 rng(17);
    std::bernoulli_distribution coin(0.5);
    std::vector<bool> in_a(v->num_elements());
    for (std::size_t e = 0; e < in_a.size(); ++e) in_a[e] = coin(rng);

    auto k = stiffness(*v);
    SparseMatrix part_a(v->pattern()), part_b(v->pattern());
    for (std::size_t e = 0; e < v->num_elements(); ++e) {
        auto local = local_stiffness(*v, e);
        auto& target = in_a[e] ? part_a : part_b;
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) target.values()[v->slot(e, a, b)] += local[a * 4 + b];
    }
    part_a.add_scaled(1.0, part_b);
    for (std::size_t i = 0; i < k.nnz(); ++i) CHECK(std::abs(part_a.values()[i] - k.values()[i]) < 1e-12 * (1 + std::abs(k.values()[i])));
}

TEST_CASE("boundary mass") {
    auto v = unit_interval(3, BoundaryTag::Absorbing);
    auto b = boundary_mass(*v, BoundaryTag::Absorbing);
    CHECK(b(0, 0) == 1.0);
    CHECK(b(3, 3) == 1.0);
    CHECK(b(1, 1) == 0.0);

    SideTags tags;
    tags.bottom = BoundaryTag::NeumannSource;
    auto sq = rectangle(2.0, 1.0, 1, 1, tags);
    auto bs = boundary_mass(*sq, BoundaryTag::NeumannSource);
    const double l = 2.0;
    // bottom nodes are 0 and 1
    CHECK(bs(0, 0) == doctest::Approx(l / 3).epsilon(1e-14));
    CHECK(bs(0, 1) == doctest::Approx(l / 6).epsilon(1e-14));
    CHECK(bs(1, 1) == doctest::Approx(l / 3).epsilon(1e-14));
    CHECK(bs(2, 2) == 0.0);

    auto none = boundary_mass(*sq, BoundaryTag::Absorbing);
    for (double x : none.values()) CHECK(x == 0.0);
}

TEST_CASE("load vectors") {
    auto v = unit_interval(2);
    auto z = load(*v, CoefficientField::constant(0.0));
    for (double x : z) CHECK(x == 0.0);

    auto b = load(*v, CoefficientField::function([](const Point& p) { return p[0]; }));
    CHECK(b[0] == doctest::Approx(1.0 / 24).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(1.0 / 4).epsilon(1e-14));
    CHECK(b[2] == doctest::Approx(5.0 / 24).epsilon(1e-14));

    auto focus = std::make_shared<FeSpace>(std::make_shared<Mesh>(focus_mesh(2)));
    auto one = load(*focus, CoefficientField::constant(1.0));
    double area = 0.0;
    for (double x : one) area += x;
    // rectangle 0.04 x 0.05 plus the circular segment below y = 0 (polygonal approximation)
    FocusGeometry g;
    const double r = std::sqrt(g.radius_sq);
    const double half = std::asin(0.02 / r);
    const double segment = 0.5 * g.radius_sq * (2 * half - std::sin(2 * half));
    CHECK(area == doctest::Approx(0.04 * 0.05 + segment).epsilon(1e-3));
}

TEST_CASE("neumann load") {
    SideTags tags;
    tags.left = BoundaryTag::NeumannSource;
    auto sq = rectangle(1.0, 3.0, 2, 6, tags);
    auto zero = neumann_load(*sq, BoundaryTag::NeumannSource, 0.0);
    for (double x : zero) CHECK(x == 0.0);
    auto b = neumann_load(*sq, BoundaryTag::NeumannSource, 1.0);
    double s = 0.0;
    for (double x : b) s += x;
    CHECK(s == doctest::Approx(3.0).epsilon(1e-14));

    // arc length R * opening angle
    FocusGeometry g;
    const double r = std::sqrt(g.radius_sq);
    const double arc = 2 * r * std::asin(0.02 / r);
    for (int level = 1; level <= 3; ++level) {
        auto v = std::make_shared<FeSpace>(std::make_shared<Mesh>(focus_mesh(level, g)));
        auto t = neumann_load(*v, BoundaryTag::NeumannSource, 1.0);
        double len = 0.0;
        for (double x : t) len += x;
        CHECK(len == doctest::Approx(arc).epsilon(1e-3));
        CHECK(len < arc);  // chords
    }
}

TEST_CASE("apply_dirichlet") {
    auto v = unit_interval(3);
    auto k = stiffness(*v);
    Vector b{1, 2, 3, 4};
    auto [a0, b0] = apply_dirichlet(k, b, std::vector<std::size_t>{});
    for (std::size_t i = 0; i < k.nnz(); ++i) CHECK(a0.values()[i] == k.values()[i]);
    CHECK(b0 == b);

    std::vector<std::size_t> all{0, 1, 2, 3};
    auto [a1, b1] = apply_dirichlet(k, b, all);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(a1(i, j) == (i == j ? 1.0 : 0.0));
    CHECK(b1 == Vector{0, 0, 0, 0});

    std::vector<std::size_t> ends{0, 3};
    auto [a2, b2] = apply_dirichlet(k, b, ends);
    CHECK(a2(1, 1) == k(1, 1));
    CHECK(a2(1, 0) == 0.0);
    CHECK(a2(0, 1) == 0.0);
    CHECK(b2 == Vector{0, 2, 3, 0});
    CHECK(a2.is_symmetric());
}
