#pragma once

#include "wfem/fespace.hpp"
#include "wfem/linalg.hpp"
#include "wfem/wavesolver.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace wfem {

/// Space-time error norms of one run against a reference.
struct NormReport {
    double LinfL2_u = 0.0;   // Pa
    double LinfH1_u = 0.0;   // Pa (seminorm)
    double LinfL2_v = 0.0;   // Pa/s
    double LinfH1_v = 0.0;   // Pa/s (seminorm)
    double L2L2_a = 0.0;     // Pa/s^2

    static constexpr std::size_t size = 5;
    std::array<double, size> as_array() const { return {LinfL2_u, LinfH1_u, LinfL2_v, LinfH1_v, L2L2_a}; }
};

/// L2 norm and H1 seminorm through the consistent mass and stiffness matrices.
class NormEvaluator {
public:
    explicit NormEvaluator(const FeSpace& space);

    double l2(std::span<const double> dofs) const;
    double h1_semi(std::span<const double> dofs) const;

private:
    SparseMatrix mass_;
    SparseMatrix stiffness_;
};

double l2_norm(const FeFunction& f);
double h1_seminorm(const FeFunction& f);

/// |f - exact|_{L2} by Gauss quadrature with `points` nodes per direction and element.
double l2_error(const FeFunction& f, const ScalarFunction& exact, int points = 5);
/// |grad(f - exact)|_{L2}, given the exact gradient.
double h1_error(const FeFunction& f, const GradientFunction& grad_exact, int points = 5);

/// Streams errors snapshot by snapshot: maxima over time for the L-infinity
/// terms, trapezoidal rule over the snapshot times for the L2-in-time term.
class ErrorAccumulator {
public:
    /// Errors measured on `reference`; `coarse` (if given and distinct) is
    /// transferred to it by nodal interpolation first.
    ErrorAccumulator(std::shared_ptr<const FeSpace> reference, std::shared_ptr<const FeSpace> coarse = nullptr);

    void add(double t, const WaveState& coarse, const WaveState& reference);
    NormReport report() const;
    std::size_t count() const noexcept { return count_; }

private:
    void accumulate(double t, double eu_l2, double eu_h1, double ev_l2, double ev_h1, double ea_l2);

    std::shared_ptr<const FeSpace> reference_;
    NormEvaluator norms_;
    std::optional<SparseMatrix> transfer_;
    NormReport max_{};
    double l2l2_sq_ = 0.0;
    double last_t_ = 0.0;
    double last_ea_sq_ = 0.0;
    std::size_t count_ = 0;

};

/// Exact solution u and its derivatives in space-time form, for manufactured solutions.
struct ExactSolution {
    std::function<double(const Point&, double)> u, u_t, u_tt;
    std::function<Point(const Point&, double)> grad_u, grad_u_t;
};

/// Same norms as ErrorAccumulator against an exact solution, via quadrature.
class ExactErrorAccumulator {
public:
    ExactErrorAccumulator(std::shared_ptr<const FeSpace> space, ExactSolution exact, int points = 5);

    void add(const WaveState& state);
    NormReport report() const;

private:
    std::shared_ptr<const FeSpace> space_;
    ExactSolution exact_;
    int points_;
    NormReport max_{};
    double l2l2_sq_ = 0.0;
    double last_t_ = 0.0;
    double last_ea_sq_ = 0.0;
    std::size_t count_ = 0;
};

/// Errors of `coarse` against `reference` over their shared snapshots.
NormReport trajectory_error(const Trajectory& coarse, const Trajectory& reference);

/// log2(e_prev / e_next).
double order(double e_prev, double e_next);

struct OrderTable {
    std::vector<int> levels;
    std::vector<NormReport> errors;

    /// Order of column `col` at row `row`; NaN for the first row or non-positive errors.
    double order_at(std::size_t row, std::size_t col) const;
};

/// Header `level,e_LinfL2_u,ord,e_LinfH1_u,ord,e_LinfL2_v,ord,e_LinfH1_v,ord,e_L2L2_a,ord`.
void write_order_table(std::ostream& out, const OrderTable& table);

/// max over snapshots of the L2 norm of u.
double qoi(const Trajectory& traj);

struct PowerFit {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double residual = 0.0;   // sum of squared residuals
    std::size_t iterations = 0;
    /// Residual after every accepted step, starting with the initial guess.
    std::vector<double> residual_history;
};

/// Least-squares fit of q = alpha + beta h^gamma by Levenberg-damped Gauss-Newton.
PowerFit fit_power(std::span<const double> h, std::span<const double> q, std::array<double, 3> start = {1.0, 1.0, 2.0});

/// Header `alpha,beta,gamma,residual`.
void write_fit_report(std::ostream& out, const PowerFit& fit);

}  // namespace wfem
