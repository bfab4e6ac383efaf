#include <doctest.h>

#include "oracles.hpp"
#include "wfem/wavesolver.hpp"

#include <cmath>
#include <numbers>

using namespace wfem;

namespace {

std::shared_ptr<const FeSpace> unit_interval(std::size_t n) {
    return std::make_shared<FeSpace>(std::make_shared<Mesh>(interval_mesh(1.0, n, BoundaryTag::Dirichlet)));
}

std::shared_ptr<const FeSpace> channel_space(int level) {
    return std::make_shared<FeSpace>(std::make_shared<Mesh>(channel_mesh(level)));
}

double rel_diff(const Vector& a, const Vector& b) {
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
        n = std::max(n, std::abs(b[i]));
    }
    return n > 0 ? d / n : d;
}

Problem channel_problem(int level, std::size_t steps) {
    Problem p;
    p.kind = ProblemKind::Channel;
    p.level = level;
    p.time.n_points = steps + 1;
    p.time.final_time = 37e-6 * static_cast<double>(steps) / 2000.0;
    return p;
}

}  // namespace

TEST_CASE("nonlinearity coefficient and margin") {
    MaterialParams water;
    CHECK(water.k() == doctest::Approx(1.5556e-9).epsilon(1e-4));
    CHECK(nondegeneracy_check(std::vector<double>{0, 0, 0}, water.k()) == 1.0);
    CHECK(nondegeneracy_check(std::vector<double>{1e9, -3e9}, 0.0) == 1.0);
    CHECK(nondegeneracy_check(std::vector<double>{0.5e8, -1.2e8}, water.k()) == doctest::Approx(0.6267).epsilon(1e-4));
    CHECK(1.0 / (2.0 * water.k()) == doctest::Approx(3.2143e8).epsilon(1e-4));

    MaterialParams bad;
    bad.c = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    TimeGrid g{1.0, 1};
    CHECK_THROWS_AS(g.validate(), InvalidArgument);
}

TEST_CASE("newmark_predict examples") {
    NewmarkParams p;
    WaveState s{0.0, {1.0, 2.0}, {0.5, -1.0}, {0.0, 0.0}};
    auto pr = newmark_predict(s, 0.1, p);
    CHECK(pr.u_star[0] == doctest::Approx(1.05));
    CHECK(pr.u_star[1] == doctest::Approx(1.9));
    CHECK(pr.v_star == s.v);

    WaveState one{0.0, {0.0}, {0.0}, {1.0}};
    auto q = newmark_predict(one, 1.0, p);
    CHECK(q.u_star[0] == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(q.v_star[0] == doctest::Approx(0.25).epsilon(1e-14));

    Vector u, v;
    newmark_correct(q, std::vector<double>{2.0}, 1.0, p, u, v);
    CHECK(u[0] == doctest::Approx(0.05 + 0.9).epsilon(1e-14));
    CHECK(v[0] == doctest::Approx(0.25 + 1.5).epsilon(1e-14));
}

TEST_CASE("newmark on the scalar oscillator follows the cosine") {
    // u'' = -u, u(0) = 1, u'(0) = 0; implicit acceleration a = -(u* + beta dt^2 a)
    auto integrate = [](NewmarkParams p, double dt, std::size_t n) {
        WaveState s{0.0, {1.0}, {0.0}, {-1.0}};
        for (std::size_t i = 0; i < n; ++i) {
            auto pr = newmark_predict(s, dt, p);
            const double a = -pr.u_star[0] / (1.0 + p.beta * dt * dt);
            newmark_correct(pr, std::vector<double>{a}, dt, p, s.u, s.v);
            s.a = {a};
        }
        return s.u[0];
    };
    CHECK(std::abs(integrate({0.25, 0.5}, 1e-3, 1000) - std::cos(1.0)) < 1e-6);
    CHECK(std::abs(integrate({0.45, 0.75}, 1e-3, 1000) - std::cos(1.0)) < 1e-3);
    // trapezoidal rule conserves the amplitude over many periods
    const double far = integrate({0.25, 0.5}, 1e-2, 10000);
    CHECK(std::abs(far) <= 1.0 + 1e-12);
}

TEST_CASE("initial acceleration examples") {
    MaterialParams m;
    m.beta_a = 0.0;
    m.b = 0.0;
    m.c = 2.0;
    const std::size_t n = 6;
    auto v = unit_interval(n);
    auto ops = std::make_shared<const WaveOperators>(v, m);
    WesterveltSolver ws(ops, NewmarkParams{});

    Vector zero(n + 1, 0.0);
    auto a0 = ws.initial_acceleration(zero, zero);
    for (double a : a0) CHECK(a == 0.0);

    // interior blocks on h = 1/6: K = tridiag(-1,2,-1)/h, M = h/6 tridiag(1,4,1)
    const double h = 1.0 / n;
    const std::size_t ni = n - 1;
    oracle::Dense k(ni, std::vector<double>(ni, 0.0)), mm = k;
    for (std::size_t i = 0; i < ni; ++i) {
        k[i][i] = 2 / h;
        mm[i][i] = 4 * h / 6;
        if (i > 0) k[i][i - 1] = k[i - 1][i] = -1 / h, mm[i][i - 1] = mm[i - 1][i] = h / 6;
    }
    std::vector<double> w{0.3, -1.0, 2.0, 0.5, -0.7};
    std::vector<double> mw(ni, 0.0);
    for (std::size_t i = 0; i < ni; ++i)
        for (std::size_t j = 0; j < ni; ++j) mw[i] += mm[i][j] * w[j];
    auto u_int = oracle::solve(k, mw);
    Vector u0(n + 1, 0.0);
    for (std::size_t i = 0; i < ni; ++i) u0[i + 1] = u_int[i];
    auto a = ws.initial_acceleration(u0, zero);
    CHECK(a.front() == 0.0);
    CHECK(a.back() == 0.0);
    for (std::size_t i = 0; i < ni; ++i) CHECK(a[i + 1] == doctest::Approx(-4.0 * w[i]).epsilon(1e-8));

    LinearWaveSolver ls(ops, LinearCoefficients{[](const Point&, double) { return 1.0; }, {}, {}, {}}, NewmarkParams{});
    auto al = ls.initial_acceleration(u0, zero);
    for (std::size_t i = 0; i < ni; ++i) CHECK(al[i + 1] == doctest::Approx(-4.0 * w[i]).epsilon(1e-8));
}

TEST_CASE("linear step keeps the zero state and a discrete steady state") {
    MaterialParams m;
    m.c = 1.0;
    m.b = 0.1;
    m.beta_a = 0.0;
    auto v = unit_interval(20);
    auto ops = std::make_shared<const WaveOperators>(v, m);
    LinearCoefficients zero_coeffs{[](const Point&, double) { return 1.0; }, {}, {}, {}};
    LinearWaveSolver zero_solver(ops, zero_coeffs, NewmarkParams{});
    WaveState s{0.0, Vector(21, 0.0), Vector(21, 0.0), Vector(21, 0.0)};
    for (int i = 0; i < 10; ++i) s = zero_solver.step(s, 0.01);
    CHECK(max_abs(s.u) == 0.0);
    CHECK(max_abs(s.a) == 0.0);

    // -c^2 u'' = 1 discretely: interior K u = h (load of f = 1)
    const std::size_t ni = 19;
    const double h = 1.0 / 20;
    oracle::Dense k(ni, std::vector<double>(ni, 0.0));
    for (std::size_t i = 0; i < ni; ++i) {
        k[i][i] = 2 / h;
        if (i > 0) k[i][i - 1] = k[i - 1][i] = -1 / h;
    }
    auto u_int = oracle::solve(k, std::vector<double>(ni, h));
    Vector u0(21, 0.0);
    for (std::size_t i = 0; i < ni; ++i) u0[i + 1] = u_int[i];
    LinearCoefficients steady{[](const Point& p, double) { return 1.0 + 0.5 * p[0]; },
                              [](const Point&, double) { return 2.0; },
                              [](const Point&, double) { return 1.0; },
                              {}};
    LinearWaveSolver solver(ops, steady, NewmarkParams{});
    WaveState st{0.0, u0, Vector(21, 0.0), {}};
    st.a = solver.initial_acceleration(st.u, st.v);
    CHECK(max_abs(st.a) < 1e-8);
    for (int i = 0; i < 50; ++i) st = solver.step(st, 0.02);
    CHECK(rel_diff(st.u, u0) < 1e-9);
    CHECK(max_abs(st.v) < 1e-8);
}

TEST_CASE("linear solver is exact for solutions in the discrete space") {
    // xi(t) = phi p(t) with phi a random element of S_h and p quadratic, which Newmark integrates exactly
    MaterialParams m;
    m.c = 1.5;
    m.b = 0.2;
    m.beta_a = 0.0;
    const std::size_t n = 16;
    auto v = unit_interval(n);
    auto ops = std::make_shared<const WaveOperators>(v, m);
    std::mt19937 rng(8);
    Vector phi = oracle::random_vector(n + 1, rng);
    phi.front() = phi.back() = 0.0;
    auto p = [](double t) { return 1.0 + 2.0 * t + 3.0 * t * t; };
    auto dp = [](double t) { return 2.0 + 6.0 * t; };
    const Vector m_phi = spmv(ops->unit_mass(), phi);
    const Vector k_phi = spmv(ops->stiffness(), phi);
    LinearCoefficients coeffs;
    coeffs.alpha = [](const Point&, double) { return 1.0; };
    coeffs.extra_load = [&](double t) {
        Vector f(n + 1);
        for (std::size_t i = 0; i <= n; ++i) f[i] = 6.0 * m_phi[i] + m.c * m.c * p(t) * k_phi[i] + m.b * dp(t) * k_phi[i];
        return f;
    };
    for (NewmarkParams nm : {NewmarkParams{0.25, 0.5}, NewmarkParams{0.45, 0.75}}) {
        LinearWaveSolver solver(ops, coeffs, nm);
        WaveState s{0.0, phi, phi, {}};
        for (auto& x : s.v) x *= dp(0.0);
        s.a = solver.initial_acceleration(s.u, s.v);
        double worst = 0.0;
        for (int i = 0; i < 40; ++i) {
            s = solver.step(s, 0.025);
            Vector exact = phi;
            for (auto& x : exact) x *= p(s.t);
            worst = std::max(worst, rel_diff(s.u, exact));
        }
        CHECK(std::abs(s.t - 1.0) < 1e-12);
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("linear solver rejects non-positive alpha") {
    MaterialParams m;
    auto v = unit_interval(4);
    auto ops = std::make_shared<const WaveOperators>(v, m);
    LinearWaveSolver solver(ops, LinearCoefficients{[](const Point&, double) { return -1.0; }, {}, {}, {}}, NewmarkParams{});
    WaveState s{0.0, Vector(5, 0.0), Vector(5, 0.0), Vector(5, 0.0)};
    CHECK_THROWS_AS(solver.step(s, 1e-3), DegenerateState);
}

TEST_CASE("westervelt with k = 0 reduces to the linear step") {
    auto v = channel_space(2);
    MaterialParams m;
    m.beta_a = 0.0;
    auto ops = std::make_shared<const WaveOperators>(v, m);
    ChannelData ch;
    WaveState s;
    s.u = ritz_project(v, [&](const Point& p) { return Point{ch.du0(p[0]), 0.0}; }, PcgOptions{1e-8, 0}).dofs;
    s.v = ritz_project(v, [&](const Point& p) { return Point{ch.du1(p[0]), 0.0}; }, PcgOptions{1e-8, 0}).dofs;
    WesterveltSolver ws(ops, NewmarkParams{});
    LinearWaveSolver ls(ops, LinearCoefficients{[](const Point&, double) { return 1.0; }, {}, {}, {}}, NewmarkParams{});
    s.a = ws.initial_acceleration(s.u, s.v);
    CHECK(rel_diff(s.a, ls.initial_acceleration(s.u, s.v)) < 1e-9);
    const double dt = TimeGrid{}.dt();
    auto w = ws.step(s, dt);
    auto l = ls.step(s, dt);
    CHECK(w.iterations <= 2);
    CHECK(rel_diff(w.state.u, l.u) < 1e-9);
    CHECK(rel_diff(w.state.v, l.v) < 1e-9);
    CHECK(rel_diff(w.state.a, l.a) < 1e-9);
}

TEST_CASE("fixed-point iteration behaviour on the channel") {
    auto v = channel_space(1);
    MaterialParams m;
    auto ops = std::make_shared<const WaveOperators>(v, m);
    ChannelData ch;
    WaveState s;
    s.u = ritz_project(v, [&](const Point& p) { return Point{ch.du0(p[0]), 0.0}; }, PcgOptions{1e-8, 0}).dofs;
    s.v = ritz_project(v, [&](const Point& p) { return Point{ch.du1(p[0]), 0.0}; }, PcgOptions{1e-8, 0}).dofs;
    const double dt = TimeGrid{}.dt();

    WesterveltSolver ws(ops, NewmarkParams{});
    s.a = ws.initial_acceleration(s.u, s.v);
    auto first = ws.step(s, dt);
    CHECK(first.iterations >= 2);
    CHECK(first.iterations <= 10);

    // doubling the tolerance moves the accepted acceleration by no more than the tolerance scale
    FixedPointConfig loose;
    loose.tol = 2e-8;
    WesterveltSolver wl(ops, NewmarkParams{}, loose);
    auto second = wl.step(s, dt);
    CHECK(rel_diff(second.state.a, first.state.a) < 10 * loose.tol);

    FixedPointConfig expl;
    expl.explicit_rhs = true;
    WesterveltSolver we(ops, NewmarkParams{}, expl);
    auto third = we.step(s, dt);
    CHECK(rel_diff(third.state.a, first.state.a) < 1e-6);

    FixedPointConfig one;
    one.max_iter = 1;
    WesterveltSolver w1(ops, NewmarkParams{}, one);
    CHECK_THROWS_AS(w1.step(s, dt), FixedPointDivergence);
}

TEST_CASE("run: zero data gives the zero trajectory") {
    auto p = channel_problem(1, 100);
    p.channel.A1 = 0.0;
    p.channel.A2 = 0.0;
    p.snapshot_stride = 10;
    auto traj = run(p);
    CHECK(traj.records.size() == 101);
    CHECK(traj.snapshots.size() == 11);
    for (const auto& s : traj.snapshots) {
        CHECK(max_abs(s.u) == 0.0);
        CHECK(max_abs(s.v) == 0.0);
        CHECK(max_abs(s.a) == 0.0);
    }
    CHECK(traj.min_margin() == 1.0);
}

TEST_CASE("run is deterministic") {
    auto p = channel_problem(2, 200);
    p.snapshot_stride = 1;
    auto a = run(p);
    auto b = run(p);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
        CHECK(a.snapshots[i].u == b.snapshots[i].u);
        CHECK(a.snapshots[i].v == b.snapshots[i].v);
        CHECK(a.snapshots[i].a == b.snapshots[i].a);
    }
}

TEST_CASE("fixed-point counts do not grow under refinement") {
    std::size_t first = 0;
    for (int level = 1; level <= 4; ++level) {
        Problem p;
        p.level = level;
        auto traj = run(p);
        CHECK(traj.min_margin() > 0.0);
        if (level == 1) first = traj.max_fp_iters();
        CHECK(traj.max_fp_iters() <= first + 2);
        MESSAGE("level " << level << " max fixed-point iterations " << traj.max_fp_iters());
    }
}

TEST_CASE("run reports degenerate and diverging steps") {
    auto p = channel_problem(1, 10);
    p.channel.A1 = 3.5e8;
    try {
        run(p);
        FAIL("expected StepFailure");
    } catch (const StepFailure& e) {
        CHECK(e.cause() == StepFailure::Cause::Degenerate);
        CHECK(e.step() == 0);
    }
    auto q = channel_problem(1, 10);
    q.fixed_point.max_iter = 1;
    try {
        run(q);
        FAIL("expected StepFailure");
    } catch (const StepFailure& e) {
        CHECK(e.cause() == StepFailure::Cause::FixedPoint);
        CHECK(e.step() == 1);
    }
}

TEST_CASE("time-step halving on the manufactured solution") {
    auto final_u = [](NewmarkParams nm, std::size_t steps) {
        Problem p;
        p.kind = ProblemKind::LinearMms;
        p.level = 6;
        p.material = MaterialParams{1.0, 1.0, 0.1, 0.0};
        p.newmark = nm;
        p.time = TimeGrid{1.0, steps + 1};
        p.snapshot_stride = steps;
        return run(p).snapshots.back().u;
    };
    for (NewmarkParams nm : {NewmarkParams{0.25, 0.5}, NewmarkParams{0.45, 0.75}}) {
        auto ref = final_u(nm, 10240);
        std::vector<double> err;
        for (std::size_t steps : {160u, 320u, 640u}) {
            auto u = final_u(nm, steps);
            double e = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) e = std::max(e, std::abs(u[i] - ref[i]));
            err.push_back(e);
        }
        for (std::size_t i = 1; i < err.size(); ++i) {
            const double ord = std::log2(err[i - 1] / err[i]);
            MESSAGE("newmark (" << nm.beta << ", " << nm.gamma << ") temporal order " << ord);
            if (nm.gamma == 0.5)
                CHECK(std::abs(ord - 2.0) <= 0.3);
            else
                CHECK(ord >= 1.0);
        }
    }
}

TEST_CASE("focus run from rest stays finite") {
    Problem p;
    p.kind = ProblemKind::Focus;
    p.level = 1;
    p.time = TimeGrid{5e-6, 438};
    auto traj = run(p);
    CHECK(std::isfinite(traj.max_abs_u()));
    CHECK(traj.max_abs_u() > 0.0);
    CHECK(traj.min_margin() > 0.9);
}
