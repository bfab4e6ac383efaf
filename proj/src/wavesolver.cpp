#include "wfem/wavesolver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <string>

namespace wfem {

void MaterialParams::validate() const {
    if (!(c > 0.0) || !(rho > 0.0)) {
        throw InvalidArgument("material: c and rho must be positive");
    }
    if (!(b >= 0.0)) {
        throw InvalidArgument("material: b must be non-negative");
    }
    if (!std::isfinite(beta_a)) {
        throw InvalidArgument("material: beta_a must be finite");
    }
}

void TimeGrid::validate() const {
    if (n_points < 2) {
        throw InvalidArgument("time grid needs at least two points");
    }
    if (!(final_time > 0.0) || !std::isfinite(final_time)) {
        throw InvalidArgument("final time must be positive");
    }
}

Prediction newmark_predict(const WaveState& state, double dt, const NewmarkParams& p) {
    const std::size_t n = state.u.size();
    Prediction pred{Vector(n), Vector(n)};
    const double cu = dt * dt * (0.5 - p.beta);
    const double cv = dt * (1.0 - p.gamma);
    for (std::size_t i = 0; i < n; ++i) {
        pred.u_star[i] = state.u[i] + dt * state.v[i] + cu * state.a[i];
        pred.v_star[i] = state.v[i] + cv * state.a[i];
    }
    return pred;
}

void newmark_correct(const Prediction& pred, std::span<const double> a, double dt, const NewmarkParams& p,
                     Vector& u, Vector& v) {
    const std::size_t n = a.size();
    u.resize(n);
    v.resize(n);
    const double bu = p.beta * dt * dt;
    const double gv = p.gamma * dt;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = pred.u_star[i] + bu * a[i];
        v[i] = pred.v_star[i] + gv * a[i];
    }
}

double nondegeneracy_check(std::span<const double> u, double k) {
    if (k == 0.0) {
        return 1.0;
    }
    return 1.0 - 2.0 * k * max_abs(u);
}

WaveOperators::WaveOperators(std::shared_ptr<const FeSpace> space, MaterialParams material, TimeFunction neumann_flux)
    : space_(std::move(space)), material_(material), flux_(std::move(neumann_flux)),
      stiffness_(wfem::stiffness(*space_)), absorbing_(boundary_mass(*space_, BoundaryTag::Absorbing)),
      mass_(mass(*space_)), trace_(neumann_load(*space_, BoundaryTag::NeumannSource, 1.0)) {
    material_.validate();
    has_absorbing_ = std::any_of(space_->mesh().facets().begin(), space_->mesh().facets().end(),
                                 [](const Facet& f) { return f.tag == BoundaryTag::Absorbing; });
}

Vector WaveOperators::boundary_load(double t) const {
    Vector f(space_->n_dofs(), 0.0);
    if (flux_) {
        axpy(material_.c * material_.c * flux_(t), trace_, f);
    }
    return f;
}

namespace {

// a_eff = mass + gamma dt damping + beta dt^2 c^2 K
void build_effective(SparseMatrix& a_eff, const SparseMatrix& mass_part, const SparseMatrix& damping,
                     const SparseMatrix& k, double gamma_dt, double beta_dt2_c2) {
    a_eff = mass_part;
    a_eff.add_scaled(gamma_dt, damping);
    a_eff.add_scaled(beta_dt2_c2, k);
}

// rhs = load - c^2 K u* - damping v*
Vector effective_rhs(Vector load, const SparseMatrix& k, double c2, const SparseMatrix& damping,
                     const Prediction& pred) {
    const Vector ku = spmv(k, pred.u_star);
    const Vector cv = spmv(damping, pred.v_star);
    for (std::size_t i = 0; i < load.size(); ++i) {
        load[i] -= c2 * ku[i] + cv[i];
    }
    return load;
}

Vector solve_constrained(SparseMatrix& a, Vector rhs, const FeSpace& space, const PcgOptions& options,
                         std::span<const double> guess, SolveReport* report = nullptr) {
    apply_dirichlet_in_place(a, rhs, space.dirichlet_mask());
    SolveResult solved = pcg(a, rhs, options, guess);
    if (report) {
        *report = solved.report;
    }
    return std::move(solved.x);
}

void require_length(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n) {
        throw InvalidArgument(std::string(what) + " has wrong length");
    }
}

}  // namespace

LinearWaveSolver::LinearWaveSolver(std::shared_ptr<const WaveOperators> ops, LinearCoefficients coeffs,
                                   NewmarkParams newmark, SolverConfig config)
    : ops_(std::move(ops)), coeffs_(std::move(coeffs)), newmark_(newmark), config_(config),
      m_alpha_(ops_->space().pattern()), damping_(ops_->space().pattern()), a_eff_(ops_->space().pattern()) {
    if (!coeffs_.alpha) {
        throw InvalidArgument("linear solver needs an alpha coefficient");
    }
}

void LinearWaveSolver::assemble_coefficients(double t) {
    const FeSpace& V = ops_->space();
    double alpha_lo = std::numeric_limits<double>::infinity();
    weighted_mass_into(V,
                       CoefficientField::function([&](const Point& p) {
                           const double a = coeffs_.alpha(p, t);
                           alpha_lo = std::min(alpha_lo, a);
                           return a;
                       }),
                       m_alpha_);
    if (!(alpha_lo > config_.alpha_min)) {
        throw DegenerateState("alpha = " + std::to_string(alpha_lo) + " at a quadrature point violates alpha > " +
                                  std::to_string(config_.alpha_min),
                              alpha_lo);
    }
    const MaterialParams& mat = ops_->material();
    if (coeffs_.beta) {
        weighted_mass_into(V, CoefficientField::function([&](const Point& p) { return coeffs_.beta(p, t); }),
                           damping_);
    } else {
        damping_.set_zero();
    }
    damping_.add_scaled(mat.b, ops_->stiffness());
    damping_.add_scaled(mat.c, ops_->absorbing_mass());
}

Vector LinearWaveSolver::rhs_load(double t) const {
    Vector f = ops_->boundary_load(t);
    const FeSpace& V = ops_->space();
    if (coeffs_.source) {
        axpy(1.0, load(V, CoefficientField::function([&](const Point& p) { return coeffs_.source(p, t); })), f);
    }
    if (coeffs_.extra_load) {
        axpy(1.0, coeffs_.extra_load(t), f);
    }
    return f;
}

Vector LinearWaveSolver::initial_acceleration(std::span<const double> u0, std::span<const double> v0) {
    const std::size_t n = ops_->space().n_dofs();
    require_length(u0, n, "u0");
    require_length(v0, n, "v0");
    assemble_coefficients(0.0);
    const Prediction pred{Vector(u0.begin(), u0.end()), Vector(v0.begin(), v0.end())};
    const double c2 = ops_->material().c * ops_->material().c;
    Vector rhs = effective_rhs(rhs_load(0.0), ops_->stiffness(), c2, damping_, pred);
    a_eff_ = m_alpha_;
    return solve_constrained(a_eff_, std::move(rhs), ops_->space(), config_.pcg, {}, &report_);
}

WaveState LinearWaveSolver::step(const WaveState& state, double dt) {
    const double t_next = state.t + dt;
    const Prediction pred = newmark_predict(state, dt, newmark_);
    assemble_coefficients(t_next);
    const double c2 = ops_->material().c * ops_->material().c;
    build_effective(a_eff_, m_alpha_, damping_, ops_->stiffness(), newmark_.gamma * dt, newmark_.beta * dt * dt * c2);
    Vector rhs = effective_rhs(rhs_load(t_next), ops_->stiffness(), c2, damping_, pred);
    WaveState next;
    next.t = t_next;
    next.a = solve_constrained(a_eff_, std::move(rhs), ops_->space(), config_.pcg, state.a, &report_);
    newmark_correct(pred, next.a, dt, newmark_, next.u, next.v);
    return next;
}

WesterveltSolver::WesterveltSolver(std::shared_ptr<const WaveOperators> ops, NewmarkParams newmark,
                                   FixedPointConfig fixed_point, SolverConfig config)
    : ops_(std::move(ops)), newmark_(newmark), fixed_point_(fixed_point), config_(config),
      m_alpha_(ops_->space().pattern()), m_vel_(ops_->space().pattern()), damping_(ops_->space().pattern()),
      a_eff_(ops_->space().pattern()) {
    if (!(fixed_point_.tol > 0.0)) {
        throw InvalidArgument("fixed-point tolerance must be positive");
    }
    if (fixed_point_.max_iter == 0) {
        throw InvalidArgument("fixed-point max_iter must be positive");
    }
}

void WesterveltSolver::check_margin(std::span<const double> u) const {
    const double margin = nondegeneracy_check(u, ops_->material().k());
    if (margin <= config_.margin_min) {
        throw DegenerateState("non-degeneracy margin " + std::to_string(margin) + " <= " +
                                  std::to_string(config_.margin_min),
                              margin);
    }
}

Vector WesterveltSolver::initial_acceleration(std::span<const double> u0, std::span<const double> v0) {
    const FeSpace& V = ops_->space();
    require_length(u0, V.n_dofs(), "u0");
    require_length(v0, V.n_dofs(), "v0");
    check_margin(u0);
    const MaterialParams& mat = ops_->material();
    const double k = mat.k();
    Vector alpha(V.n_dofs());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        alpha[i] = 1.0 - 2.0 * k * u0[i];
    }
    weighted_mass_into(V, CoefficientField::nodal(alpha), m_alpha_);
    damping_ = ops_->stiffness();
    damping_.scale(mat.b);
    damping_.add_scaled(mat.c, ops_->absorbing_mass());

    Vector load = ops_->boundary_load(0.0);
    if (k != 0.0) {
        weighted_mass_into(V, CoefficientField::nodal(v0), m_vel_);
        axpy(2.0 * k, spmv(m_vel_, v0), load);
    }
    const Prediction pred{Vector(u0.begin(), u0.end()), Vector(v0.begin(), v0.end())};
    Vector rhs = effective_rhs(std::move(load), ops_->stiffness(), mat.c * mat.c, damping_, pred);
    a_eff_ = m_alpha_;
    return solve_constrained(a_eff_, std::move(rhs), V, config_.pcg, {});
}

WesterveltStep WesterveltSolver::step(const WaveState& state, double dt) {
    const FeSpace& V = ops_->space();
    const MaterialParams& mat = ops_->material();
    const double k = mat.k();
    const double c2 = mat.c * mat.c;
    const double t_next = state.t + dt;
    const Prediction pred = newmark_predict(state, dt, newmark_);
    const Vector boundary = ops_->boundary_load(t_next);

    WesterveltStep out;
    out.state.t = t_next;
    Vector a_iter = state.a;
    Vector u_iter, v_iter, alpha(V.n_dofs());
    double change = 0.0;
    bool converged = false;
    for (std::size_t it = 1; it <= fixed_point_.max_iter; ++it) {
        newmark_correct(pred, a_iter, dt, newmark_, u_iter, v_iter);
        check_margin(u_iter);
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            alpha[i] = 1.0 - 2.0 * k * u_iter[i];
        }
        weighted_mass_into(V, CoefficientField::nodal(alpha), m_alpha_);
        damping_ = ops_->stiffness();
        damping_.scale(mat.b);
        damping_.add_scaled(mat.c, ops_->absorbing_mass());
        Vector load = boundary;
        if (k != 0.0) {
            weighted_mass_into(V, CoefficientField::nodal(v_iter), m_vel_);
            if (fixed_point_.explicit_rhs) {
                axpy(2.0 * k, spmv(m_vel_, v_iter), load);
            } else {
                damping_.add_scaled(-2.0 * k, m_vel_);
            }
        }
        build_effective(a_eff_, m_alpha_, damping_, ops_->stiffness(), newmark_.gamma * dt, newmark_.beta * dt * dt * c2);
        Vector rhs = effective_rhs(std::move(load), ops_->stiffness(), c2, damping_, pred);
        Vector a_next = solve_constrained(a_eff_, std::move(rhs), V, config_.pcg, a_iter);

        double diff2 = 0.0;
        for (std::size_t i = 0; i < a_next.size(); ++i) {
            const double d = a_next[i] - a_iter[i];
            diff2 += d * d;
        }
        change = std::sqrt(diff2);
        a_iter = std::move(a_next);
        out.iterations = it;
        if (change <= fixed_point_.tol * std::max(norm2(a_iter), fixed_point_.floor)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw FixedPointDivergence("fixed-point iteration did not converge in " +
                                       std::to_string(fixed_point_.max_iter) + " iterations (last change " +
                                       std::to_string(change) + ")",
                                   out.iterations, change);
    }
    out.state.a = std::move(a_iter);
    newmark_correct(pred, out.state.a, dt, newmark_, out.state.u, out.state.v);
    check_margin(out.state.u);
    return out;
}

double ChannelData::u0(double x) const {
    const double d = x - mu;
    return A1 * std::exp(-d * d / (2.0 * sigma1 * sigma1));
}

double ChannelData::du0(double x) const { return -(x - mu) / (sigma1 * sigma1) * u0(x); }

double ChannelData::u1(double x) const {
    const double d = x - mu;
    return A2 * d * std::exp(-d * d / (2.0 * sigma2 * sigma2));
}

double ChannelData::du1(double x) const {
    const double d = x - mu;
    const double s2 = sigma2 * sigma2;
    return A2 * std::exp(-d * d / (2.0 * s2)) * (1.0 - d * d / s2);
}

double FocusData::flux(double t) const {
    const double omega = 2.0 * std::numbers::pi * frequency;
    const double base = g0 * std::sin(omega * t);
    if (t > 2.0 * std::numbers::pi / omega) {
        return base * (1.0 + std::sin(omega * t / 4.0));
    }
    return base;
}

namespace {

// g(t) = (1 + t^2) e^{-t} and its derivatives.
double mms_g(double t) { return (1.0 + t * t) * std::exp(-t); }
double mms_dg(double t) { return -(t - 1.0) * (t - 1.0) * std::exp(-t); }
double mms_ddg(double t) { return (t - 1.0) * (t - 3.0) * std::exp(-t); }

}  // namespace

double MmsData::u(double x, double t) const { return std::sin(std::numbers::pi * x) * mms_g(t); }
double MmsData::u_t(double x, double t) const { return std::sin(std::numbers::pi * x) * mms_dg(t); }
double MmsData::u_tt(double x, double t) const { return std::sin(std::numbers::pi * x) * mms_ddg(t); }
double MmsData::u_x(double x, double t) const {
    return std::numbers::pi * std::cos(std::numbers::pi * x) * mms_g(t);
}
double MmsData::u_xt(double x, double t) const {
    return std::numbers::pi * std::cos(std::numbers::pi * x) * mms_dg(t);
}

double MmsData::alpha(double x, double t) const {
    return variable_coefficients ? 1.0 + 0.5 * std::sin(std::numbers::pi * x) * std::cos(t) : 1.0;
}

double MmsData::beta(double x, double t) const {
    (void)t;
    return variable_coefficients ? 0.5 * std::cos(std::numbers::pi * x) : 0.0;
}

double MmsData::source(double x, double t, const MaterialParams& m) const {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    // -Lap u = pi^2 u, -Lap u_t = pi^2 u_t
    return alpha(x, t) * u_tt(x, t) + m.c * m.c * pi2 * u(x, t) + m.b * pi2 * u_t(x, t) + beta(x, t) * u_t(x, t);
}

std::shared_ptr<const Mesh> make_mesh(const Problem& problem) {
    switch (problem.kind) {
        case ProblemKind::Channel: return std::make_shared<const Mesh>(channel_mesh(problem.level));
        case ProblemKind::Focus: return std::make_shared<const Mesh>(focus_mesh(problem.level, problem.focus.geometry));
        case ProblemKind::LinearMms:
            if (problem.level < 1 || problem.level > 24) {
                throw InvalidArgument("mms level out of range");
            }
            return std::make_shared<const Mesh>(
                interval_mesh(1.0, std::size_t{1} << problem.level, BoundaryTag::Dirichlet));
    }
    throw InvalidArgument("unknown problem kind");
}

std::size_t Trajectory::max_fp_iters() const {
    std::size_t m = 0;
    for (const StepRecord& r : records) {
        m = std::max(m, r.fp_iters);
    }
    return m;
}

double Trajectory::max_abs_u() const {
    double m = 0.0;
    for (const StepRecord& r : records) {
        m = std::max(m, r.max_abs_u);
    }
    return m;
}

double Trajectory::min_margin() const {
    double m = 1.0;
    for (const StepRecord& r : records) {
        m = std::min(m, r.margin);
    }
    return m;
}

Trajectory run(const Problem& problem, const StepObserver& observer) {
    return run(problem, std::make_shared<const FeSpace>(make_mesh(problem)), observer);
}

namespace {

StepFailure wrap_failure(std::size_t step, const std::string& message, StepFailure::Cause cause) {
    return StepFailure("step " + std::to_string(step) + ": " + message, step, cause);
}

}  // namespace

Trajectory run(const Problem& problem, std::shared_ptr<const FeSpace> space, const StepObserver& observer) {
    problem.time.validate();
    problem.material.validate();
    if (!problem.newmark.unconditionally_stable()) {
        std::clog << "warning: Newmark parameters (beta=" << problem.newmark.beta << ", gamma=" << problem.newmark.gamma
                  << ") lie outside the unconditionally stable region\n";
    }

    TimeFunction flux;
    if (problem.kind == ProblemKind::Focus) {
        flux = [focus = problem.focus](double t) { return focus.flux(t); };
    }
    auto ops = std::make_shared<const WaveOperators>(space, problem.material, flux);

    // Initial data.
    WaveState state;
    state.t = 0.0;
    const PcgOptions& pcg_opts = problem.solver.ritz_pcg;
    switch (problem.kind) {
        case ProblemKind::Channel: {
            const ChannelData ch = problem.channel;
            state.u = ritz_project(space, [ch](const Point& p) { return Point{ch.du0(p[0]), 0.0}; }, pcg_opts).dofs;
            state.v = ritz_project(space, [ch](const Point& p) { return Point{ch.du1(p[0]), 0.0}; }, pcg_opts).dofs;
            break;
        }
        case ProblemKind::Focus:
            state.u.assign(space->n_dofs(), 0.0);
            state.v.assign(space->n_dofs(), 0.0);
            break;
        case ProblemKind::LinearMms: {
            const MmsData mms = problem.mms;
            state.u = ritz_project(space, [mms](const Point& p) { return Point{mms.u_x(p[0], 0.0), 0.0}; }, pcg_opts).dofs;
            state.v = ritz_project(space, [mms](const Point& p) { return Point{mms.u_xt(p[0], 0.0), 0.0}; }, pcg_opts).dofs;
            break;
        }
    }

    std::unique_ptr<LinearWaveSolver> linear;
    std::unique_ptr<WesterveltSolver> westervelt;
    if (problem.kind == ProblemKind::LinearMms) {
        const MmsData mms = problem.mms;
        const MaterialParams mat = problem.material;
        LinearCoefficients coeffs;
        coeffs.alpha = [mms](const Point& p, double t) { return mms.alpha(p[0], t); };
        if (mms.variable_coefficients) {
            coeffs.beta = [mms](const Point& p, double t) { return mms.beta(p[0], t); };
        }
        coeffs.source = [mms, mat](const Point& p, double t) { return mms.source(p[0], t, mat); };
        linear = std::make_unique<LinearWaveSolver>(ops, std::move(coeffs), problem.newmark, problem.solver);
    } else if (problem.linearized) {
        LinearCoefficients coeffs;
        coeffs.alpha = [](const Point&, double) { return 1.0; };
        linear = std::make_unique<LinearWaveSolver>(ops, std::move(coeffs), problem.newmark, problem.solver);
    } else {
        westervelt = std::make_unique<WesterveltSolver>(ops, problem.newmark, problem.fixed_point, problem.solver);
    }

    const double k = problem.material.k();
    Trajectory traj;
    traj.space = space;
    const std::size_t n_steps = problem.time.steps();
    const double dt = problem.time.dt();
    traj.records.reserve(n_steps + 1);

    auto record = [&](std::size_t step, std::size_t iters) {
        const double umax = max_abs(state.u);
        traj.records.push_back({step, state.t, iters, umax, nondegeneracy_check(state.u, k)});
        const std::size_t stride = problem.snapshot_stride;
        if (stride > 0 && (step % stride == 0 || step == n_steps)) {
            traj.snapshot_steps.push_back(step);
            traj.snapshots.push_back(state);
        }
        if (observer) {
            observer(step, state);
        }
    };

    for (std::size_t step = 0; step <= n_steps; ++step) {
        try {
            std::size_t iters = 0;
            if (step == 0) {
                state.a = linear ? linear->initial_acceleration(state.u, state.v)
                                 : westervelt->initial_acceleration(state.u, state.v);
            } else {
                if (linear) {
                    state = linear->step(state, dt);
                    iters = 1;
                } else {
                    WesterveltStep s = westervelt->step(state, dt);
                    state = std::move(s.state);
                    iters = s.iterations;
                }
                // Time levels are set from the grid, not accumulated.
                state.t = problem.time.time(step);
            }
            record(step, iters);
        } catch (const DegenerateState& e) {
            throw wrap_failure(step, e.what(), StepFailure::Cause::Degenerate);
        } catch (const FixedPointDivergence& e) {
            throw wrap_failure(step, e.what(), StepFailure::Cause::FixedPoint);
        } catch (const IterativeFailure& e) {
            throw wrap_failure(step, e.what(), StepFailure::Cause::Solver);
        } catch (const SingularPreconditioner& e) {
            throw wrap_failure(step, e.what(), StepFailure::Cause::Solver);
        }
    }
    return traj;
}

}  // namespace wfem
