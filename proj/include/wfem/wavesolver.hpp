#pragma once

#include "wfem/assembly.hpp"
#include "wfem/fespace.hpp"
#include "wfem/linalg.hpp"
#include "wfem/mesh.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace wfem {

/// Acoustic medium. Defaults are water.
struct MaterialParams {
    double c = 1500.0;     // m/s
    double rho = 1000.0;   // kg/m^3
    double b = 6e-9;       // m^2/s
    double beta_a = 3.5;   // nonlinearity parameter

    /// Nonlinearity coefficient k = beta_a / (rho c^2), in 1/Pa.
    double k() const noexcept { return beta_a / (rho * c * c); }
    void validate() const;
};

struct NewmarkParams {
    double beta = 0.45;
    double gamma = 0.75;

    bool unconditionally_stable() const noexcept { return gamma >= 0.5 && beta >= 0.5 * gamma; }
};

/// Uniform time grid on [0, final_time] with n_points grid points.
struct TimeGrid {
    double final_time = 37e-6;
    std::size_t n_points = 2001;

    double dt() const noexcept { return final_time / static_cast<double>(n_points - 1); }
    std::size_t steps() const noexcept { return n_points - 1; }
    double time(std::size_t n) const noexcept { return static_cast<double>(n) * dt(); }
    void validate() const;
};

/// Displacement, velocity and acceleration coefficient vectors at time t.
struct WaveState {
    double t = 0.0;
    Vector u, v, a;
};

struct FixedPointConfig {
    double tol = 1e-8;
    std::size_t max_iter = 100;
    /// Absolute floor (Pa/s^2) of the acceleration norm in the stopping test.
    double floor = 1.0;
    /// Treat 2k u_t^2 fully explicitly instead of moving 2k v^(i) u_t into the damping operator.
    bool explicit_rhs = false;
};

struct SolverConfig {
    PcgOptions pcg{};
    /// Solver settings of the Ritz projection of initial data. The pure stiffness
    /// system is far worse conditioned than the per-step systems; at 12800
    /// elements its attainable relative residual is around 1e-9.
    PcgOptions ritz_pcg{1e-8, 0};
    /// Non-degeneracy margin 1 - 2k max|u| at or below which a step is rejected.
    double margin_min = 0.05;
    /// Lower bound the linear solver requires of alpha at quadrature points.
    double alpha_min = 0.0;
};

struct Prediction {
    Vector u_star;
    Vector v_star;
};

/// u* = u + dt v + dt^2 (1/2 - beta) a,  v* = v + dt (1 - gamma) a.
Prediction newmark_predict(const WaveState& state, double dt, const NewmarkParams& p);
/// u = u* + beta dt^2 a,  v = v* + gamma dt a.
void newmark_correct(const Prediction& pred, std::span<const double> a, double dt, const NewmarkParams& p,
                     Vector& u, Vector& v);

/// 1 - 2k max_i |u_i|.
double nondegeneracy_check(std::span<const double> u, double k);

using TimeFunction = std::function<double(double t)>;
using SpaceTimeFunction = std::function<double(const Point&, double t)>;

/// Time-independent operators of a run: stiffness K, absorbing boundary mass B,
/// Neumann trace loads and the material. The weak boundary terms follow from
/// c^2 (du/dn): absorbing sides contribute c B u_t, the source side c^2 g(t) (1, phi).
class WaveOperators {
public:
    WaveOperators(std::shared_ptr<const FeSpace> space, MaterialParams material, TimeFunction neumann_flux = {});

    const FeSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const FeSpace>& shared_space() const noexcept { return space_; }
    const MaterialParams& material() const noexcept { return material_; }
    const SparseMatrix& stiffness() const noexcept { return stiffness_; }
    const SparseMatrix& absorbing_mass() const noexcept { return absorbing_; }
    const SparseMatrix& unit_mass() const noexcept { return mass_; }
    bool has_absorbing() const noexcept { return has_absorbing_; }

    /// c^2 g(t) (1, phi_i) over NeumannSource facets; zero without a flux.
    Vector boundary_load(double t) const;

private:
    std::shared_ptr<const FeSpace> space_;
    MaterialParams material_;
    TimeFunction flux_;
    SparseMatrix stiffness_;
    SparseMatrix absorbing_;
    SparseMatrix mass_;
    Vector trace_;
    bool has_absorbing_ = false;
};

/// Coefficients of alpha u_tt - c^2 Lap u - b Lap u_t + beta u_t = f.
/// Unset beta/source are zero; `extra_load` adds an assembled vector to the right-hand side.
struct LinearCoefficients {
    SpaceTimeFunction alpha;
    SpaceTimeFunction beta;
    SpaceTimeFunction source;
    std::function<Vector(double t)> extra_load;
};

/// Newmark integrator for the linear variable-coefficient equation; one linear
/// solve per step with coefficients evaluated at the new time level.
class LinearWaveSolver {
public:
    LinearWaveSolver(std::shared_ptr<const WaveOperators> ops, LinearCoefficients coeffs, NewmarkParams newmark,
                     SolverConfig config = {});

    /// Acceleration consistent with the equation at t = 0.
    Vector initial_acceleration(std::span<const double> u0, std::span<const double> v0);
    WaveState step(const WaveState& state, double dt);

    const SolveReport& last_report() const noexcept { return report_; }

private:
    void assemble_coefficients(double t);
    Vector rhs_load(double t) const;

    std::shared_ptr<const WaveOperators> ops_;
    LinearCoefficients coeffs_;
    NewmarkParams newmark_;
    SolverConfig config_;
    SparseMatrix m_alpha_, damping_, a_eff_;
    SolveReport report_;
};

struct WesterveltStep {
    WaveState state;
    std::size_t iterations = 0;
};

/// Newmark integrator for (1 - 2ku) u_tt - c^2 Lap u - b Lap u_t = 2k u_t^2 with a
/// fixed-point iteration on the new acceleration inside each step. Iterate i freezes
/// the mass coefficient 1 - 2k u^(i) and, by default, moves 2k v^(i) u_t into the
/// damping operator.
class WesterveltSolver {
public:
    WesterveltSolver(std::shared_ptr<const WaveOperators> ops, NewmarkParams newmark, FixedPointConfig fixed_point = {},
                     SolverConfig config = {});

    Vector initial_acceleration(std::span<const double> u0, std::span<const double> v0);
    WesterveltStep step(const WaveState& state, double dt);

private:
    void check_margin(std::span<const double> u) const;

    std::shared_ptr<const WaveOperators> ops_;
    NewmarkParams newmark_;
    FixedPointConfig fixed_point_;
    SolverConfig config_;
    SparseMatrix m_alpha_, m_vel_, damping_, a_eff_;
};

enum class ProblemKind { Channel, Focus, LinearMms };

/// Gaussian pulse initial data of the channel experiment.
struct ChannelData {
    double A1 = 1.2e8;     // Pa
    double A2 = -1e11;     // Pa/s per m
    double sigma1 = 0.015;
    double sigma2 = 0.02;
    double mu = 0.1;       // m

    double u0(double x) const;
    double du0(double x) const;
    double u1(double x) const;
    double du1(double x) const;
};

/// Modulated sinusoidal Neumann source of the focused-ultrasound experiment.
struct FocusData {
    double g0 = 1e7;        // Pa/m
    double frequency = 60e3;  // Hz
    FocusGeometry geometry{};

    /// g0 sin(wt) (1 + sin(wt/4)) for t > 2 pi / w, g0 sin(wt) before.
    double flux(double t) const;
};

/// Manufactured solution u = sin(pi x)(1 + t^2) e^{-t} on [0, 1] with
/// alpha = 1 + 0.5 sin(pi x) cos t, beta = 0.5 cos(pi x) (or alpha = 1, beta = 0).
struct MmsData {
    bool variable_coefficients = true;

    double u(double x, double t) const;
    double u_t(double x, double t) const;
    double u_tt(double x, double t) const;
    double u_x(double x, double t) const;
    double u_xt(double x, double t) const;
    double alpha(double x, double t) const;
    double beta(double x, double t) const;
    double source(double x, double t, const MaterialParams& m) const;
};

struct Problem {
    ProblemKind kind = ProblemKind::Channel;
    int level = 1;
    MaterialParams material{};
    TimeGrid time{};
    NewmarkParams newmark{};
    FixedPointConfig fixed_point{};
    SolverConfig solver{};
    ChannelData channel{};
    FocusData focus{};
    MmsData mms{};
    /// Solve channel/focus with the linear solver (alpha = 1, beta = 0, f = 0) instead of Westervelt.
    bool linearized = false;
    /// Keep every stride-th state (and the last); 0 keeps none.
    std::size_t snapshot_stride = 0;
};

std::shared_ptr<const Mesh> make_mesh(const Problem& problem);

struct StepRecord {
    std::size_t step = 0;
    double t = 0.0;
    std::size_t fp_iters = 0;
    double max_abs_u = 0.0;
    double margin = 1.0;
};

struct Trajectory {
    std::shared_ptr<const FeSpace> space;
    std::vector<std::size_t> snapshot_steps;
    std::vector<WaveState> snapshots;
    std::vector<StepRecord> records;

    std::size_t max_fp_iters() const;
    double max_abs_u() const;
    double min_margin() const;
};

/// Error raised by `run`, tagged with the failing step.
class StepFailure : public Error {
public:
    enum class Cause { Solver, Degenerate, FixedPoint, Other };

    StepFailure(const std::string& what, std::size_t step, Cause cause) : Error(what), step_(step), cause_(cause) {}
    std::size_t step() const noexcept { return step_; }
    Cause cause() const noexcept { return cause_; }

private:
    std::size_t step_;
    Cause cause_;
};

/// Called with every state from step 0 (initial data) to the last step.
using StepObserver = std::function<void(std::size_t step, const WaveState& state)>;

/// Time-marches a problem: channel from Ritz-projected Gaussian data, focus from
/// rest, manufactured solution from the Ritz projection of its initial data.
Trajectory run(const Problem& problem, const StepObserver& observer = {});
/// Same, on a space the caller already built from make_mesh(problem).
Trajectory run(const Problem& problem, std::shared_ptr<const FeSpace> space, const StepObserver& observer = {});

}  // namespace wfem
