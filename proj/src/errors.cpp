#include "wfem/errors.hpp"

#include "wfem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace wfem {

NormEvaluator::NormEvaluator(const FeSpace& space) : mass_(mass(space)), stiffness_(stiffness(space)) {}

double NormEvaluator::l2(std::span<const double> dofs) const {
    return std::sqrt(std::max(0.0, dot(dofs, spmv(mass_, dofs))));
}

double NormEvaluator::h1_semi(std::span<const double> dofs) const {
    return std::sqrt(std::max(0.0, dot(dofs, spmv(stiffness_, dofs))));
}

double l2_norm(const FeFunction& f) { return NormEvaluator(*f.space).l2(f.dofs); }

double h1_seminorm(const FeFunction& f) { return NormEvaluator(*f.space).h1_semi(f.dofs); }

namespace {

// Integral over the mesh of integrand(element, ref point, physical point,
// shape values, physical gradients) with an n-point-per-direction Gauss rule.
template <typename Integrand>
double integrate(const FeSpace& space, int points, Integrand integrand) {
    const QuadratureRule rule = gauss_rule(space.dim(), points);
    const std::size_t npe = space.nodes_per_element();
    std::array<double, FeSpace::max_nodes_per_element> phi{};
    std::array<Point, FeSpace::max_nodes_per_element> grads{};
    double total = 0.0;
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        for (std::size_t q = 0; q < rule.size(); ++q) {
            double det = 0.0;
            shape_values(space.dim(), rule.points[q], std::span<double>(phi.data(), npe));
            space.physical_gradients(e, rule.points[q], std::span<Point>(grads.data(), npe), &det);
            const Point x = space.map_to_physical(e, rule.points[q]);
            total += rule.weights[q] * det * integrand(e, x, phi, grads);
        }
    }
    return total;
}

double l2_error_dofs(const FeSpace& space, std::span<const double> dofs, const ScalarFunction& exact, int points) {
    const std::size_t npe = space.nodes_per_element();
    const double sq = integrate(space, points, [&](std::size_t e, const Point& x, const auto& phi, const auto&) {
        const std::size_t* v = space.mesh().element(e);
        double uh = 0.0;
        for (std::size_t a = 0; a < npe; ++a) {
            uh += phi[a] * dofs[v[a]];
        }
        const double d = uh - exact(x);
        return d * d;
    });
    return std::sqrt(sq);
}

double h1_error_dofs(const FeSpace& space, std::span<const double> dofs, const GradientFunction& grad_exact,
                     int points) {
    const std::size_t npe = space.nodes_per_element();
    const double sq = integrate(space, points, [&](std::size_t e, const Point& x, const auto&, const auto& grads) {
        const std::size_t* v = space.mesh().element(e);
        Point g{0.0, 0.0};
        for (std::size_t a = 0; a < npe; ++a) {
            g[0] += grads[a][0] * dofs[v[a]];
            g[1] += grads[a][1] * dofs[v[a]];
        }
        const Point ge = grad_exact(x);
        const double dx = g[0] - ge[0], dy = g[1] - ge[1];
        return dx * dx + dy * dy;
    });
    return std::sqrt(sq);
}

}  // namespace

double l2_error(const FeFunction& f, const ScalarFunction& exact, int points) {
    return l2_error_dofs(*f.space, f.dofs, exact, points);
}

double h1_error(const FeFunction& f, const GradientFunction& grad_exact, int points) {
    return h1_error_dofs(*f.space, f.dofs, grad_exact, points);
}

ErrorAccumulator::ErrorAccumulator(std::shared_ptr<const FeSpace> reference, std::shared_ptr<const FeSpace> coarse)
    : reference_(std::move(reference)), norms_(*reference_) {
    if (coarse && coarse != reference_) {
        transfer_ = transfer_operator(*coarse, *reference_);
    }
}

void ErrorAccumulator::accumulate(double t, double eu_l2, double eu_h1, double ev_l2, double ev_h1, double ea_l2) {
    max_.LinfL2_u = std::max(max_.LinfL2_u, eu_l2);
    max_.LinfH1_u = std::max(max_.LinfH1_u, eu_h1);
    max_.LinfL2_v = std::max(max_.LinfL2_v, ev_l2);
    max_.LinfH1_v = std::max(max_.LinfH1_v, ev_h1);
    const double ea_sq = ea_l2 * ea_l2;
    if (count_ > 0) {
        l2l2_sq_ += 0.5 * (t - last_t_) * (last_ea_sq_ + ea_sq);
    }
    last_t_ = t;
    last_ea_sq_ = ea_sq;
    ++count_;
}

void ErrorAccumulator::add(double t, const WaveState& coarse, const WaveState& reference) {
    auto diff = [&](const Vector& c, const Vector& r) {
        Vector e = transfer_ ? spmv(*transfer_, c) : c;
        if (e.size() != r.size()) {
            throw InvalidArgument("error accumulator: state length does not match the reference space");
        }
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] -= r[i];
        }
        return e;
    };
    const Vector eu = diff(coarse.u, reference.u);
    const Vector ev = diff(coarse.v, reference.v);
    const Vector ea = diff(coarse.a, reference.a);
    accumulate(t, norms_.l2(eu), norms_.h1_semi(eu), norms_.l2(ev), norms_.h1_semi(ev), norms_.l2(ea));
}

NormReport ErrorAccumulator::report() const {
    NormReport r = max_;
    r.L2L2_a = std::sqrt(l2l2_sq_);
    return r;
}

ExactErrorAccumulator::ExactErrorAccumulator(std::shared_ptr<const FeSpace> space, ExactSolution exact, int points)
    : space_(std::move(space)), exact_(std::move(exact)), points_(points) {}

void ExactErrorAccumulator::add(const WaveState& state) {
    const double t = state.t;
    const FeSpace& V = *space_;
    const double eu_l2 = l2_error_dofs(V, state.u, [&](const Point& p) { return exact_.u(p, t); }, points_);
    const double eu_h1 = h1_error_dofs(V, state.u, [&](const Point& p) { return exact_.grad_u(p, t); }, points_);
    const double ev_l2 = l2_error_dofs(V, state.v, [&](const Point& p) { return exact_.u_t(p, t); }, points_);
    const double ev_h1 = h1_error_dofs(V, state.v, [&](const Point& p) { return exact_.grad_u_t(p, t); }, points_);
    const double ea_l2 = l2_error_dofs(V, state.a, [&](const Point& p) { return exact_.u_tt(p, t); }, points_);
    max_.LinfL2_u = std::max(max_.LinfL2_u, eu_l2);
    max_.LinfH1_u = std::max(max_.LinfH1_u, eu_h1);
    max_.LinfL2_v = std::max(max_.LinfL2_v, ev_l2);
    max_.LinfH1_v = std::max(max_.LinfH1_v, ev_h1);
    const double ea_sq = ea_l2 * ea_l2;
    if (count_ > 0) {
        l2l2_sq_ += 0.5 * (t - last_t_) * (last_ea_sq_ + ea_sq);
    }
    last_t_ = t;
    last_ea_sq_ = ea_sq;
    ++count_;
}

NormReport ExactErrorAccumulator::report() const {
    NormReport r = max_;
    r.L2L2_a = std::sqrt(l2l2_sq_);
    return r;
}

NormReport trajectory_error(const Trajectory& coarse, const Trajectory& reference) {
    if (coarse.snapshots.size() != reference.snapshots.size() || coarse.snapshot_steps != reference.snapshot_steps) {
        throw InvalidArgument("trajectory_error: trajectories do not share snapshot steps");
    }
    for (std::size_t n = 0; n < coarse.snapshots.size(); ++n) {
        const double tc = coarse.snapshots[n].t, tr = reference.snapshots[n].t;
        if (std::abs(tc - tr) > 1e-12 * std::max({1e-300, std::abs(tc), std::abs(tr)})) {
            throw InvalidArgument("trajectory_error: time grids differ at snapshot " + std::to_string(n));
        }
    }
    ErrorAccumulator acc(reference.space, coarse.space);
    for (std::size_t n = 0; n < coarse.snapshots.size(); ++n) {
        acc.add(reference.snapshots[n].t, coarse.snapshots[n], reference.snapshots[n]);
    }
    return acc.report();
}

double order(double e_prev, double e_next) {
    if (!(e_prev > 0.0) || !(e_next > 0.0)) {
        throw InvalidArgument("order: errors must be positive");
    }
    return std::log(e_prev / e_next) / std::log(2.0);
}

double OrderTable::order_at(std::size_t row, std::size_t col) const {
    if (row == 0 || row >= errors.size()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double prev = errors[row - 1].as_array()[col];
    const double next = errors[row].as_array()[col];
    if (!(prev > 0.0) || !(next > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return order(prev, next);
}

void write_order_table(std::ostream& out, const OrderTable& table) {
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "level,e_LinfL2_u,ord,e_LinfH1_u,ord,e_LinfL2_v,ord,e_LinfH1_v,ord,e_L2L2_a,ord\n";
    for (std::size_t row = 0; row < table.errors.size(); ++row) {
        out << table.levels.at(row);
        const auto e = table.errors[row].as_array();
        for (std::size_t col = 0; col < NormReport::size; ++col) {
            const double ord = table.order_at(row, col);
            out << ',' << e[col] << ',';
            if (std::isnan(ord)) {
                out << "NaN";
            } else {
                out << ord;
            }
        }
        out << '\n';
    }
    out.precision(precision);
}

double qoi(const Trajectory& traj) {
    if (traj.snapshots.empty() || !traj.space) {
        throw InvalidArgument("qoi: trajectory has no snapshots");
    }
    const NormEvaluator norms(*traj.space);
    double q = 0.0;
    for (const WaveState& s : traj.snapshots) {
        q = std::max(q, norms.l2(s.u));
    }
    return q;
}

namespace {

// Solves the 3x3 system a x = b by Gaussian elimination with partial pivoting.
bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
    double scale = 0.0;
    for (const auto& row : a) {
        for (double v : row) {
            scale = std::max(scale, std::abs(v));
        }
    }
    if (!(scale > 0.0)) {
        return false;
    }
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        if (std::abs(a[pivot][col]) <= 1e-14 * scale) {
            return false;
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

double sum_squares(std::span<const double> h, std::span<const double> q, const std::array<double, 3>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double r = q[i] - (p[0] + p[1] * std::pow(h[i], p[2]));
        s += r * r;
    }
    return s;
}

}  // namespace

PowerFit fit_power(std::span<const double> h, std::span<const double> q, std::array<double, 3> start) {
    if (h.size() != q.size()) {
        throw InvalidArgument("fit_power: h and q differ in length");
    }
    if (h.size() < 3) {
        throw InvalidArgument("fit_power: need at least three data points");
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0) || !std::isfinite(q[i])) {
            throw InvalidArgument("fit_power: h must be positive and q finite");
        }
    }
    constexpr std::size_t max_iter = 10000;
    constexpr double step_tol = 1e-10;
    constexpr double lambda_max = 1e30;

    std::array<double, 3> p = start;
    double lambda = 1e-3;
    double s = sum_squares(h, q, p);
    double q_scale = 0.0;
    for (double v : q) {
        q_scale += v * v;
    }

    PowerFit fit;
    fit.residual_history.push_back(s);
    for (std::size_t it = 0; it < max_iter; ++it) {
        if (s <= 1e-30 * std::max(q_scale, 1e-300)) {
            break;
        }
        // Normal equations of the linearized model.
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double hg = std::pow(h[i], p[2]);
            const std::array<double, 3> j{1.0, hg, p[1] * hg * std::log(h[i])};
            const double r = q[i] - (p[0] + p[1] * hg);
            for (int a = 0; a < 3; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 3; ++b) {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        double diag_max = std::max({jtj[0][0], jtj[1][1], jtj[2][2]});
        bool accepted = false;
        bool converged = false;
        while (!accepted) {
            if (lambda > lambda_max) {
                throw FitFailure("fit_power: no descent step after damping retries (residual " + std::to_string(s) + ")",
                                 s);
            }
            auto damped = jtj;
            for (int a = 0; a < 3; ++a) {
                damped[a][a] += lambda * std::max(jtj[a][a], 1e-12 * diag_max);
            }
            std::array<double, 3> delta{};
            if (!solve3(damped, jtr, delta)) {
                lambda *= 10.0;
                continue;
            }
            const std::array<double, 3> trial{p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]};
            const double step = std::sqrt(delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]);
            const double size = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            const bool tiny = step <= step_tol * std::max(size, 1e-300);
            const double s_trial = sum_squares(h, q, trial);
            if (std::isfinite(s_trial) && s_trial <= s) {
                p = trial;
                s = s_trial;
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                fit.residual_history.push_back(s);
            } else {
                lambda *= 10.0;
            }
            if (tiny) {
                converged = true;
                break;
            }
        }
        fit.iterations = it + 1;
        if (converged) {
            break;
        }
        if (fit.iterations == max_iter) {
            throw FitFailure("fit_power: no convergence within iteration limit", s);
        }
    }
    // A power term that is flat over the data (gamma -> 0 or beta -> 0) cannot be
    // told apart from the constant; report it as part of alpha.
    double term_min = std::numeric_limits<double>::infinity(), term_max = -term_min, q_max = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double term = p[1] * std::pow(h[i], p[2]);
        term_min = std::min(term_min, term);
        term_max = std::max(term_max, term);
        q_max = std::max(q_max, std::abs(q[i]));
    }
    if (term_max - term_min <= 1e-8 * std::max(q_max, 1e-300)) {
        p[0] += 0.5 * (term_min + term_max);
        p[1] = 0.0;
        s = sum_squares(h, q, p);
    }
    fit.alpha = p[0];
    fit.beta = p[1];
    fit.gamma = p[2];
    fit.residual = s;
    return fit;
}

void write_fit_report(std::ostream& out, const PowerFit& fit) {
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "alpha,beta,gamma,residual\n" << fit.alpha << ',' << fit.beta << ',' << fit.gamma << ',' << fit.residual << '\n';
    out.precision(precision);
}

}  // namespace wfem
