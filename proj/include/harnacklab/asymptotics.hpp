#pragma once

#include <string>
#include <vector>

#include "harnacklab/harnack.hpp"
#include "harnacklab/solver.hpp"

namespace harnacklab {

/// Closed-form solution of the spatially homogeneous equation
/// u' = a u + b u^p (Bernoulli structure):
///   a > 0:  u(t) = [(-b/a) + (u0^(1-p) + b/a) e^(-a(p-1)t)]^(-1/(p-1))
///   a = 0:  u(t) = [u0^(1-p) + (p-1)(-b) t]^(-1/(p-1))
///   b = 0:  u(t) = u0 e^(at)
struct OdeSolution {
  EquationParams params;
  double u0 = 1.0;
  double t_min = -std::numeric_limits<double>::infinity();  // validity interval (t_min, inf)

  double operator()(double t) const;
};

OdeSolution ode_closed_form(const EquationParams& params, double u0);
double ode_closed_form(const EquationParams& params, double u0, double t);

enum class OdeBehavior { ConvergesToEquilibrium, BlowUp, Decay };

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<double> values;
  OdeBehavior behavior = OdeBehavior::Decay;
  double blowup_time = std::numeric_limits<double>::infinity();
};

/// Adaptive embedded RK integration of the comparison Cauchy problem
/// w_t = delta |a w + b w^p| - C w / t on [t_start, t_end]. Finite-time
/// escape is reported through behavior = BlowUp together with the escape
/// time (the trajectory holds the values up to it).
OdeTrajectory ode_comparison_w(double delta, double C, double a, double b, double p,
                               double t_start, double w_start, double t_end);

struct RateFit {
  double rate = 0.0;          // decay rate c (exponential) or exponent q (power)
  double window_t0 = 0.0;
  double window_t1 = 0.0;
  double residual = 0.0;      // rms residual of the regression
  bool low_confidence = false;  // window shorter than 3 e-foldings
};

/// Least-squares slope of ln|value - target| against t over the final half
/// of the series; returns the decay rate c (positive for decay toward the
/// target). Throws NonConvergent when the distance is not shrinking.
RateFit fit_exponential_rate(const std::vector<double>& times,
                             const std::vector<double>& values, double target);

enum class FitDirection { Decay, Growth };

/// Log-log regression exponent over the final decade of the series.
RateFit fit_power_exponent(const std::vector<double>& times,
                           const std::vector<double>& values,
                           FitDirection direction = FitDirection::Decay);

struct CheckResult {
  std::string name;
  bool pass = false;
  bool ran = true;          // false when the regime makes the check inapplicable
  double statistic = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::vector<CheckResult> checks;
  double fitted_rate = 0.0;     // exponential rate toward u*, when fitted
  double fitted_exponent = 0.0; // power-decay exponent, when fitted
  bool all_pass = true;
};

/// Long-time behavior checks on one recorded run:
///  (i)   trapping: sup_x u <= u* + tol once started below u* (a>0, b<0);
///        runs started above must come back below u* + 1e-3 by the end;
///  (ii)  exponential convergence of ||u - u*||_inf with a fitted rate;
///  (iii) power decay of sup_x u with exponent -1/(p-1) (a = 0);
///  (iv)  d/dt ln u >= delta |a + b u^(p-1)| - C/t at recorded points with
///        the C fitted from the run.
SuiteReport check_liouville_suite(const Trajectory& traj, const CurvatureSpec& curv,
                                  const HarnackParams& hp);

}  // namespace harnacklab
