#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "harnacklab/geometry.hpp"

namespace harnacklab {

/// Coefficients of the reaction-diffusion equation u_t = Lap_V u + a u + b u^p.
/// Construction enforces a >= 0, b <= 0, p > 1.
struct EquationParams {
  double a = 0.0;
  double b = 0.0;
  double p = 2.0;

  EquationParams() = default;
  EquationParams(double a_, double b_, double p_);

  bool has_equilibrium() const { return a > 0.0 && b < 0.0; }
  /// The positive constant steady state (-a/b)^(1/(p-1)); requires a>0, b<0.
  double equilibrium() const;
};

struct SolveConfig {
  double final_time = 10.0;
  double dt = 0.0;            // 0 selects the CFL-limited step
  double cfl = 0.5;           // dt <= cfl * h^2 / (2n), cfl <= 1
  int record_stride = 0;      // 0 picks a stride targeting ~400 records
  double positivity_floor = 1e-12;
  double elliptic_tol = 1e-10;
  long max_steps = 50'000'000;
  long elliptic_max_iters = 10'000'000;
};

/// Recorded solution history of one parabolic run. Every stored field is
/// strictly positive; the run aborts otherwise.
struct Trajectory {
  std::vector<double> times;
  std::vector<ScalarField> fields;
  EquationParams params;
  const ManifoldModel* model = nullptr;  // non-owning; caller keeps it alive
  double dt = 0.0;
  long steps = 0;
};

/// Right-hand side Lap_V u + a u + b u^p. This is the canonical evaluation
/// of u_t used by every Harnack quantity; time derivatives are never formed
/// by differencing stored fields.
ScalarField rhs(const ManifoldModel& model, const ScalarField& field,
                const EquationParams& params);

/// Stable time step for the explicit scheme on this model.
double stable_dt(const ManifoldModel& model, const SolveConfig& config);

/// Classical RK4 over the method-of-lines system. Throws PositivityLost if
/// the solution dips below the positivity floor, StabilityViolation on
/// NaN/Inf.
Trajectory solve_parabolic(const ManifoldModel& model, const ScalarField& initial,
                           const EquationParams& params, const SolveConfig& config);

/// Continue a run from its final recorded state for `extra_time`, reusing
/// the same step size.
Trajectory continue_parabolic(const Trajectory& start, double extra_time);

/// Steady state of rhs(.) = 0 by pseudo-time marching until the max-norm
/// residual drops below config.elliptic_tol. Throws NoConvergence when the
/// iteration budget is exhausted.
ScalarField solve_elliptic(const ManifoldModel& model, const EquationParams& params,
                           const SolveConfig& config, const ScalarField& initial_guess);

/// A prescribed space-time solution with the analytic pieces needed to
/// manufacture a forcing for it.
struct ManufacturedSolution {
  std::function<double(double x, double y, double t)> u;
  std::function<double(double x, double y, double t)> u_t;
  std::function<double(double x, double y, double t)> lap;     // Laplace-Beltrami
  std::function<double(double x, double y, double t)> grad_x;  // coordinate partials,
  std::function<double(double x, double y, double t)> grad_y;  // used by the drift term
};

struct ConvergenceReport {
  std::vector<int> resolutions;
  std::vector<double> errors;  // max-norm error at final time per rung
  double fitted_order = 0.0;   // least-squares slope of log err vs log h
};

/// Runs the forced equation u_t = Lap_V u + a u + b u^p + g with g chosen so
/// `exact` solves it, on a ladder of refinements of `base`, and fits the
/// spatial convergence order.
ConvergenceReport manufactured_convergence(const ManifoldModel& base,
                                           const EquationParams& params,
                                           const ManufacturedSolution& exact,
                                           double final_time, int rungs = 3,
                                           double cfl = 0.5);

}  // namespace harnacklab
