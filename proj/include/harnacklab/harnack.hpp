#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "harnacklab/geometry.hpp"
#include "harnacklab/solver.hpp"

namespace harnacklab {

/// Parameter regimes for the gradient-estimate machinery.
///
/// DL   gamma in (0,1), delta < 0: holds for every K >= 0 (a > 0).
/// DL0  a = 0 case with delta fixed at -1, Ric_V^m >= 0.
/// DG1  gamma, delta in (0,1): needs p > 1 + 2/m and K < l_threshold(m,p,a).
/// DG2  gamma, delta in (0,1): needs max(4/m,1) < p <= 1 + 2/m and K = 0.
/// EllipticDge  fixed gamma = 2/3, delta = min(1/2, 2/(3p)) for the
///              elliptic estimate; any K >= 0.
enum class Regime { DL, DL0, DG1, DG2, EllipticDge };

std::string to_string(Regime regime);

/// Signed slack of each feasibility inequality. The quantified "for all
/// u > 0" condition is affine in s = u^(p-1) (b <= 0), so it reduces to the
/// two coefficient margins.
struct ConstraintReport {
  double curvature_margin = 0.0;   // (2a/m)(1-gamma)(1-delta) - K
  double mixed_term_margin = 0.0;  // (gamma-delta)(p-1) - delta(p-1)^2 - (4/m)gamma(1-gamma)(1-delta)
  double l_constant_margin = 0.0;  // (4/m)gamma(1-delta)a
  double l_slope_margin = 0.0;     // (p-1) - (4/m)gamma(1-delta)
  bool feasible = false;

  double min_margin() const;
};

/// A (gamma, delta) pair with its regime tag and constraint margins.
struct HarnackParams {
  double gamma = 0.0;
  double delta = 0.0;
  Regime regime = Regime::DL;
  ConstraintReport margins;
  bool feasible = false;
};

/// The Harnack quantity F = gamma |grad f|^2 - f_t + delta (a + b u^(p-1)),
/// f = ln u, with u_t evaluated through rhs(). Requires u positive.
ScalarField harnack_quantity(const ManifoldModel& model, const ScalarField& u,
                             const EquationParams& params, const HarnackParams& hp);

/// Curvature-bound ceiling below which the delta > 0 estimate holds:
/// (p-1)a/2 on p in [1+2/m, 1+4/m), 2a/m on p >= 1+4/m.
double l_threshold(double m, double p, double a);

/// Margins of the delta < 0 system at the given point; valid for any real
/// delta (the DG regimes reuse the same expressions with delta > 0).
ConstraintReport constraint_margins_dl(double m, double p, double a, double K,
                                       double gamma, double delta);

/// Margins of the delta > 0 system; strict positivity required. Throws
/// RegimeError when p <= 1 + 2/m or K >= l_threshold(m, p, a).
ConstraintReport constraint_margins_dg1(double m, double p, double a, double K,
                                        double gamma, double delta);

/// Re-evaluates the margins for hp's regime at (m, p, a, K).
ConstraintReport evaluate_margins(const HarnackParams& hp, double m, double p,
                                  double a, double K);

/// Constructive parameters for the small-p window max(4/m,1) < p <= 1+2/m,
/// K = 0: a near-1 gamma_1 with delta_1 = 1 - m(p-1)/(4 gamma_1) > 0, plus
/// a small-gamma companion satisfying the delta < 0 system at delta = -delta_1.
std::pair<HarnackParams, HarnackParams> dg_case2_params(double m, double p, double a);

/// Grid search over the regime's (gamma, delta) box maximizing the minimum
/// margin (64x64 with two 8x refinements). Returns the best point; its
/// `feasible` flag is false only when no sampled point satisfies the regime.
HarnackParams feasibility_search(Regime regime, double m, double p, double a,
                                 double K);

/// Worst sampled value of the quantified condition
/// L(s) = (4/m) gamma (1-delta)(a + b s) - b (p-1) s over `count` random
/// points s = u^(p-1) in (0, s_max]. Cross-checks the coefficient
/// decomposition behind l_constant_margin / l_slope_margin.
double sample_quantified_condition(const HarnackParams& hp, double m, double p,
                                   double a, double b, double s_max, int count,
                                   std::uint64_t seed);

/// Grid search without the regime hypothesis gate, for sweeps probing
/// outside the regime (such rows simply come back infeasible). Supports
/// DL, DL0 and DG1.
HarnackParams feasibility_probe(Regime regime, double m, double p, double a,
                                double K);

constexpr double kGlobalRadius = std::numeric_limits<double>::infinity();

/// Right-hand side C (1/t + (1 + sqrt(K) R)/R^2), with 1/0 = +inf and the
/// global case R = inf giving C/t.
double bound_rhs(double C, double t, double R, double K);

struct HarnackVerification {
  Regime regime = Regime::DL;
  double gamma = 0.0;
  double delta = 0.0;
  double C_fit = 0.0;   // max(0, sup of t * sup_x F) over the recorded run
  std::vector<std::pair<double, double>> sup_tF_series;  // (t, t * sup_x F)
  bool violation = false;  // t*F grows like a positive power of t
  // diagnostic field G = t Phi F at the final recorded time, when a ball
  // radius admitting a cutoff profile was given; empty otherwise
  Array G_diagnostic;
};

/// Evaluates F at every recorded time and fits the empirical constant.
/// R = kGlobalRadius checks the global bound C/t; a finite R restricts the
/// sup to B(x0, R) and normalizes by (1/t + (1+sqrt(K)R)/R^2).
HarnackVerification verify_harnack(const Trajectory& traj, const HarnackParams& hp,
                                   const CurvatureSpec& curv,
                                   double R = kGlobalRadius, double x0 = 0.0,
                                   double y0 = 0.0);

/// Discrete residual RHS - (Lap_V F - F_t) of the key differential
/// inequality for F. F_t is expanded by the chain rule through rhs(), never
/// by temporal differencing. Positive values are violations; they shrink at
/// O(h^2), and vanish (to rounding) for spatially homogeneous states.
ScalarField key_inequality_residual(const ManifoldModel& model, const ScalarField& u,
                              const EquationParams& params, const HarnackParams& hp,
                              double m);

/// Radial quartic-spline bump: 1 on [0,R], (1 - ((d-R)/(R/2))^2)^2 on
/// [R, 3R/2], 0 beyond. C^1, radially non-increasing.
struct CutoffProfile {
  double x0 = 0.0, y0 = 0.0;
  double R = 0.0;
  Array phi;        // profile values on the grid
  Array dphi;       // analytic radial derivative phi'(d) per node
  Array grad_ratio; // |grad Phi| / sqrt(Phi), analytic, 0 where Phi = 0
};

/// Builds the profile centered at (x0, y0); on the sphere the center is the
/// north pole. Requires 3R/2 below the model's injectivity scale.
CutoffProfile cutoff_phi(const ManifoldModel& model, double R, double x0 = 0.0,
                         double y0 = 0.0);

struct CutoffReport {
  double sup_grad_ratio_R = 0.0;   // sup(|grad Phi|/sqrt(Phi)) * R
  double inf_lap_scaled = 0.0;     // inf(discrete Lap Phi) * R^2 / (1 + sqrt(K) R)
};

CutoffReport cutoff_verify(const CutoffProfile& profile, const ManifoldModel& model,
                           double m);

struct EllipticCheckReport {
  double lhs_sup = 0.0;     // sup over B(x0,R) of the gradient/reaction quantity
  double bound_base = 0.0;  // 1/R^2 + K
  double ratio = 0.0;
};

/// Left-hand side of the elliptic estimate over B(x0, R):
/// |grad u|^2/u^2 + |a + b u^(p-1)| for a > 0, and
/// |grad u|^2/u^2 - b u^(p-1) for a = 0.
EllipticCheckReport elliptic_estimate_check(const ManifoldModel& model,
                                            const ScalarField& u_steady,
                                            const EquationParams& params, double m,
                                            double K, double R, double x0 = 0.0,
                                            double y0 = 0.0);

}  // namespace harnacklab
