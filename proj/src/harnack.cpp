#include "harnacklab/harnack.hpp"

#include <algorithm>
#include <cmath>

#include "harnacklab/rng.hpp"

namespace harnacklab {

namespace {

// u^(p-1) elementwise with fast paths.
Array pow_pm1(const Array& u, double p) {
  if (p == 2.0) return u;
  if (p == 3.0) return u.square();
  return u.pow(p - 1.0);
}

void require_positive(const ScalarField& u) {
  if (!(u.values.minCoeff() > 0.0))
    throw NonPositiveField("operation requires a strictly positive field");
}

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::DL: return "dl";
    case Regime::DL0: return "dl0";
    case Regime::DG1: return "dg1";
    case Regime::DG2: return "dg2";
    case Regime::EllipticDge: return "elliptic";
  }
  return "?";
}

double ConstraintReport::min_margin() const {
  return std::min(std::min(curvature_margin, mixed_term_margin),
                  std::min(l_constant_margin, l_slope_margin));
}

ScalarField harnack_quantity(const ManifoldModel& model, const ScalarField& u,
                             const EquationParams& params, const HarnackParams& hp) {
  check_shape(model, u);
  require_positive(u);
  const Array& uv = u.values;
  ScalarField f{uv.log(), false};
  Array gf2 = gradient_sq(model, f).values;
  Array ut = rhs(model, u, params).values;
  Array reaction = params.a + params.b * pow_pm1(uv, params.p);
  Array F = hp.gamma * gf2 - ut / uv + hp.delta * reaction;
  return {std::move(F), false};
}

double l_threshold(double m, double p, double a) {
  if (!(m >= 1.0)) throw DomainError("l_threshold requires m >= 1");
  if (!(a >= 0.0)) throw DomainError("l_threshold requires a >= 0");
  if (p < 1.0 + 2.0 / m)
    throw DomainError("l_threshold is defined for p >= 1 + 2/m");
  if (p < 1.0 + 4.0 / m) return 0.5 * (p - 1.0) * a;
  return 2.0 * a / m;
}

namespace {

ConstraintReport margins_at(double m, double p, double a, double K, double gamma,
                            double delta) {
  ConstraintReport r;
  r.curvature_margin = (2.0 * a / m) * (1.0 - gamma) * (1.0 - delta) - K;
  r.mixed_term_margin = (gamma - delta) * (p - 1.0) - delta * (p - 1.0) * (p - 1.0) -
                        (4.0 / m) * gamma * (1.0 - gamma) * (1.0 - delta);
  r.l_constant_margin = (4.0 / m) * gamma * (1.0 - delta) * a;
  // coefficient of s = u^(p-1) in the quantified condition, sign-corrected
  // for b <= 0
  r.l_slope_margin = (p - 1.0) - (4.0 / m) * gamma * (1.0 - delta);
  return r;
}

// Slack below which the slope margin counts as zero; the small-p window
// construction makes it vanish identically.
constexpr double kSlopeTol = 1e-12;

bool feasible_for(Regime regime, const ConstraintReport& r) {
  switch (regime) {
    case Regime::DL:
    case Regime::DL0:
      return r.min_margin() >= 0.0;
    case Regime::DG1:
      return r.curvature_margin > 0.0 && r.mixed_term_margin > 0.0 &&
             r.l_constant_margin > 0.0 && r.l_slope_margin > 0.0;
    case Regime::DG2:
      return r.curvature_margin > 0.0 && r.mixed_term_margin > 0.0 &&
             r.l_constant_margin > 0.0 && r.l_slope_margin >= -kSlopeTol;
    case Regime::EllipticDge:
      return r.mixed_term_margin >= 0.0 && r.l_constant_margin >= 0.0;
  }
  return false;
}

ConstraintReport elliptic_margins(double m, double p, double gamma, double delta) {
  // coefficient signs needed by the elliptic estimate with the fixed
  // (gamma, delta): the squared-reaction coefficient and the
  // |grad f|^2 u^(p-1) coefficient
  ConstraintReport r;
  r.curvature_margin = 0.0;
  r.mixed_term_margin = (2.0 / m) * (1.0 - delta) *
                        (gamma * (1.0 - delta) - 2.0 * delta * (1.0 - gamma));
  r.l_constant_margin = gamma - delta * p;
  r.l_slope_margin = 0.0;
  r.feasible = feasible_for(Regime::EllipticDge, r);
  return r;
}

}  // namespace

ConstraintReport constraint_margins_dl(double m, double p, double a, double K,
                                       double gamma, double delta) {
  ConstraintReport r = margins_at(m, p, a, K, gamma, delta);
  r.feasible = feasible_for(Regime::DL, r);
  return r;
}

ConstraintReport constraint_margins_dg1(double m, double p, double a, double K,
                                        double gamma, double delta) {
  if (!(p > 1.0 + 2.0 / m))
    throw RegimeError("delta > 0 case 1 requires p > 1 + 2/m");
  if (!(K >= 0.0) || K >= l_threshold(m, p, a))
    throw RegimeError("delta > 0 case 1 requires K in [0, L(m,p,a))");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
  if (!(delta >= 0.0)) throw DomainError("delta must be >= 0 here");
  ConstraintReport r = margins_at(m, p, a, K, gamma, delta);
  r.feasible = feasible_for(Regime::DG1, r);
  return r;
}

ConstraintReport evaluate_margins(const HarnackParams& hp, double m, double p,
                                  double a, double K) {
  ConstraintReport r;
  if (hp.regime == Regime::EllipticDge) {
    r = elliptic_margins(m, p, hp.gamma, hp.delta);
  } else {
    r = margins_at(m, p, a, K, hp.gamma, hp.delta);
    r.feasible = feasible_for(hp.regime, r);
  }
  return r;
}

std::pair<HarnackParams, HarnackParams> dg_case2_params(double m, double p, double a) {
  if (!(a > 0.0)) throw RegimeError("the delta > 0 estimates require a > 0");
  if (!(p > std::max(4.0 / m, 1.0)) || !(p <= 1.0 + 2.0 / m))
    throw RegimeError("small-p window requires max(4/m, 1) < p <= 1 + 2/m");

  // gamma_1 near 1 with delta_1 = 1 - m(p-1)/(4 gamma_1) > 0
  double gamma1 = 0.75;
  HarnackParams primary;
  bool found = false;
  for (int it = 0; it < 200; ++it) {
    const double delta1 = 1.0 - m * (p - 1.0) / (4.0 * gamma1);
    ConstraintReport r = margins_at(m, p, a, 0.0, gamma1, delta1);
    r.feasible = feasible_for(Regime::DG2, r);
    if (r.feasible && delta1 > 0.0) {
      primary = HarnackParams{gamma1, delta1, Regime::DG2, r, true};
      found = true;
      break;
    }
    gamma1 = 0.5 * (gamma1 + 1.0);
  }
  if (!found) throw SearchFailure("no gamma_1 in (1/2, 1) satisfied the margins");

  // small-gamma companion for the delta < 0 system at delta = -delta_1
  double gamma2 = 0.25;
  for (int it = 0; it < 200; ++it) {
    ConstraintReport r = constraint_margins_dl(m, p, a, 0.0, gamma2, -primary.delta);
    if (r.feasible)
      return {primary, HarnackParams{gamma2, -primary.delta, Regime::DL, r, true}};
    gamma2 *= 0.5;
  }
  throw SearchFailure("no small gamma_2 satisfied the companion system");
}

namespace {

struct Box {
  double glo, ghi, dlo, dhi;
};

// The margins carry incommensurate units, so the Chebyshev objective
// normalizes each one by its natural scale; feasibility still uses the raw
// signs.
struct MarginScales {
  double curvature, mixed, l_constant, l_slope;
};

MarginScales margin_scales(double m, double p, double a, double K) {
  const double q = p - 1.0;
  MarginScales s;
  s.curvature = std::max(2.0 * a / m + K, 1e-12);
  s.mixed = q + q * q;
  s.l_constant = std::max((4.0 / m) * a, 1e-12);
  s.l_slope = q;
  return s;
}

double scaled_objective(const ConstraintReport& r, const MarginScales& s) {
  return std::min(std::min(r.curvature_margin / s.curvature,
                           r.mixed_term_margin / s.mixed),
                  std::min(r.l_constant_margin / s.l_constant,
                           r.l_slope_margin / s.l_slope));
}

// 64x64 Chebyshev-style search (maximize the minimum scaled margin) with two
// 8x refinements around the best point. The delta < 0 regimes scan delta
// from 0 downward so ties resolve toward moderate parameters.
HarnackParams grid_search(Regime regime, double m, double p, double a, double K,
                          Box box) {
  constexpr int N = 64;
  const MarginScales scales = margin_scales(m, p, a, K);
  const bool descend_delta = regime == Regime::DL || regime == Regime::DL0;
  double best_obj = -std::numeric_limits<double>::infinity();
  double best_g = box.glo, best_d = box.dlo;
  const Box orig = box;
  for (int pass = 0; pass < 3; ++pass) {
    const double cg = (box.ghi - box.glo) / (N - 1);
    const double cd = (box.dhi - box.dlo) / (N - 1);
    for (int i = 0; i < N; ++i) {
      const double g = box.glo + i * cg;
      for (int j = 0; j < N; ++j) {
        const double d = descend_delta ? box.dhi - j * cd : box.dlo + j * cd;
        const double obj = scaled_objective(margins_at(m, p, a, K, g, d), scales);
        if (obj > best_obj) {
          best_obj = obj;
          best_g = g;
          best_d = d;
        }
      }
    }
    box.glo = std::max(orig.glo, best_g - 4.0 * cg);
    box.ghi = std::min(orig.ghi, best_g + 4.0 * cg);
    box.dlo = std::max(orig.dlo, best_d - 4.0 * cd);
    box.dhi = std::min(orig.dhi, best_d + 4.0 * cd);
  }
  ConstraintReport r = margins_at(m, p, a, K, best_g, best_d);
  r.feasible = feasible_for(regime, r);
  return HarnackParams{best_g, best_d, regime, r, r.feasible};
}

}  // namespace

HarnackParams feasibility_search(Regime regime, double m, double p, double a,
                                 double K) {
  if (!(m > 1.0)) throw DomainError("feasibility search requires m > 1");
  if (!(p > 1.0)) throw DomainError("feasibility search requires p > 1");
  if (!(K >= 0.0)) throw DomainError("feasibility search requires K >= 0");

  switch (regime) {
    case Regime::DL: {
      if (!(a > 0.0)) throw RegimeError("the delta < 0 system requires a > 0");
      // the box must reach deep enough into delta < 0 to absorb K
      const double dlo = -3.0 - m * K / a;
      return grid_search(regime, m, p, a, K, Box{1e-3, 0.999, dlo, -1e-6});
    }
    case Regime::DL0: {
      if (a != 0.0) throw RegimeError("this regime is the a = 0 case");
      if (K != 0.0) throw RegimeError("this regime requires Ric_V^m >= 0 (K = 0)");
      return grid_search(regime, m, p, 0.0, 0.0, Box{1e-3, 0.999, -1.0, -1.0});
    }
    case Regime::DG1: {
      if (!(a > 0.0)) throw RegimeError("the delta > 0 estimates require a > 0");
      if (!(p > 1.0 + 2.0 / m))
        throw RegimeError("delta > 0 case 1 requires p > 1 + 2/m");
      if (K >= l_threshold(m, p, a))
        throw RegimeError("delta > 0 case 1 requires K in [0, L(m,p,a))");
      // delta floored strictly above 0: this regime wants a strictly
      // positive delta, while the raw maximin may sit exactly on delta = 0
      return grid_search(regime, m, p, a, K, Box{1e-3, 0.999, 1e-4, 0.95});
    }
    case Regime::DG2: {
      if (K != 0.0) throw RegimeError("small-p window requires K = 0");
      return dg_case2_params(m, p, a).first;
    }
    case Regime::EllipticDge: {
      HarnackParams hp;
      hp.gamma = 2.0 / 3.0;
      hp.delta = std::min(0.5, 2.0 / (3.0 * p));
      hp.regime = Regime::EllipticDge;
      hp.margins = elliptic_margins(m, p, hp.gamma, hp.delta);
      hp.feasible = hp.margins.feasible;
      return hp;
    }
  }
  throw DomainError("unknown regime");
}

double sample_quantified_condition(const HarnackParams& hp, double m, double p,
                                   double a, double b, double s_max, int count,
                                   std::uint64_t seed) {
  Rng rng(seed);
  const double c0 = (4.0 / m) * hp.gamma * (1.0 - hp.delta);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double s = rng.uniform(0.0, s_max);
    const double L = c0 * (a + b * s) - b * (p - 1.0) * s;
    worst = std::min(worst, L);
  }
  return worst;
}

HarnackParams feasibility_probe(Regime regime, double m, double p, double a,
                                double K) {
  switch (regime) {
    case Regime::DL: {
      const double dlo = a > 0.0 ? -3.0 - m * K / a : -3.0 - m * K;
      return grid_search(regime, m, p, a, K, Box{1e-3, 0.999, dlo, -1e-6});
    }
    case Regime::DL0:
      return grid_search(regime, m, p, a, K, Box{1e-3, 0.999, -1.0, -1.0});
    case Regime::DG1:
      return grid_search(regime, m, p, a, K, Box{1e-3, 0.999, 1e-4, 0.95});
    default:
      throw DomainError("probe supports the DL, DL0 and DG1 boxes");
  }
}

double bound_rhs(double C, double t, double R, double K) {
  if (!(C > 0.0)) throw DomainError("bound constant must be positive");
  if (t < 0.0) throw DomainError("time must be nonnegative");
  if (!(R > 0.0)) throw DomainError("radius must be positive");
  if (t == 0.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(R)) return C / t;
  return C * (1.0 / t + (1.0 + std::sqrt(K) * R) / (R * R));
}

HarnackVerification verify_harnack(const Trajectory& traj, const HarnackParams& hp,
                                   const CurvatureSpec& curv, double R, double x0,
                                   double y0) {
  if (traj.model == nullptr || traj.fields.empty())
    throw DomainError("trajectory has no recorded fields");
  const ManifoldModel& model = *traj.model;
  ConstraintReport margins =
      evaluate_margins(hp, curv.m, traj.params.p, traj.params.a, curv.K);
  if (!margins.feasible)
    throw InfeasibleParams("(gamma, delta) infeasible for (m, p, a, K) = (" +
                           std::to_string(curv.m) + ", " + std::to_string(traj.params.p) +
                           ", " + std::to_string(traj.params.a) + ", " +
                           std::to_string(curv.K) + ")");

  std::vector<char> mask;
  if (!std::isinf(R)) {
    Array d = distance_from(model, x0, y0);
    mask.resize(static_cast<std::size_t>(d.size()));
    int inside = 0;
    for (Eigen::Index k = 0; k < d.size(); ++k) inside += (mask[k] = d[k] <= R);
    if (inside == 0) throw DomainError("no grid nodes inside B(x0, R)");
  }

  HarnackVerification out;
  out.regime = hp.regime;
  out.gamma = hp.gamma;
  out.delta = hp.delta;
  Array F_last;
  double t_last = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double t = traj.times[i];
    if (t <= 0.0) continue;
    Array F = harnack_quantity(model, traj.fields[i], traj.params, hp).values;
    double sup = -std::numeric_limits<double>::infinity();
    if (mask.empty()) {
      sup = F.maxCoeff();
    } else {
      for (Eigen::Index k = 0; k < F.size(); ++k)
        if (mask[k]) sup = std::max(sup, F[k]);
    }
    const double val = std::isinf(R) ? t * sup : sup / bound_rhs(1.0, t, R, curv.K);
    out.sup_tF_series.emplace_back(t, val);
    out.C_fit = std::max(out.C_fit, val);
    if (i + 1 == traj.times.size()) {
      F_last = std::move(F);
      t_last = t;
    }
  }
  out.C_fit = std::max(0.0, out.C_fit);
  if (!std::isinf(R) && F_last.size() > 0 && R < model.diameter() &&
      1.5 * R < model.injectivity_scale()) {
    const CutoffProfile prof = cutoff_phi(model, R, x0, y0);
    out.G_diagnostic = t_last * prof.phi * F_last;
  }

  // unbounded-growth heuristic: t*F rising monotonically across the whole
  // last half AND growing like a positive power of t. A series converging
  // to a finite constant rises with vanishing log-slope and is not flagged.
  const std::size_t n = out.sup_tF_series.size();
  if (n >= 8) {
    const std::size_t half = n / 2;
    bool rising = true;
    for (std::size_t i = half; i + 1 < n; ++i)
      if (out.sup_tF_series[i + 1].second <= out.sup_tF_series[i].second) rising = false;
    const auto [tm, gm] = out.sup_tF_series[half];
    const auto [te, ge] = out.sup_tF_series[n - 1];
    if (rising && ge > 0.0 && gm > 0.0 && te > tm)
      out.violation = std::log(ge / gm) / std::log(te / tm) >= 0.5;
  }
  return out;
}

ScalarField key_inequality_residual(const ManifoldModel& model, const ScalarField& u,
                              const EquationParams& params, const HarnackParams& hp,
                              double m) {
  check_shape(model, u);
  require_positive(u);
  const double g = hp.gamma, d = hp.delta;
  const double a = params.a, b = params.b, p = params.p;
  const Array& uv = u.values;

  ScalarField f{uv.log(), false};
  Array gf2 = gradient_sq(model, f).values;
  Array E = pow_pm1(uv, p);
  Array A = a + b * E;
  Array r = rhs(model, u, params).values;
  Array P = r / uv;  // time derivative of ln u
  ScalarField Pf{P, false};
  Array F = g * gf2 - P + d * A;
  ScalarField Ff{F, false};

  // F_t by the chain rule through rhs: the linearization of rhs at u applied
  // to u_t = rhs(u)
  Array lin = drift_laplacian(model, ScalarField{r, false}).values + a * r +
              p * b * E * r;
  Array dtP = lin / uv - P.square();
  Array dtF = 2.0 * g * gradient_inner(model, f, Pf).values - dtP +
              d * b * (p - 1.0) * E * P;

  Array lhs = drift_laplacian(model, Ff).values - dtF;

  const double q = p - 1.0;
  Array rhs_total =
      2.0 * g * hessian_traceless_sq(model, f).values +
      2.0 * g * ricci_vm_quadratic(model, m, f).values -
      2.0 * gradient_inner(model, f, Ff).values +
      (4.0 * a / m) * g * (1.0 - g) * (1.0 - d) * gf2 +
      (2.0 / m) * g * (1.0 - d) * (1.0 - d) * A.square() -
      b * ((g - d) * q - d * q * q - (4.0 / m) * g * (1.0 - g) * (1.0 - d)) * E * gf2 +
      ((4.0 / m) * g * (1.0 - d) * A - b * q * E) * F +
      (2.0 / m) * g * (1.0 - g) * (1.0 - g) * gf2.square() +
      (2.0 / m) * g * F.square() + (4.0 / m) * g * (1.0 - g) * gf2 * F;

  return {rhs_total - lhs, false};
}

CutoffProfile cutoff_phi(const ManifoldModel& model, double R, double x0, double y0) {
  if (!(R > 0.0)) throw DomainError("cutoff radius must be positive");
  // R past the diameter covers the whole model (Phi = 1 everywhere, no
  // ramp); otherwise the ramp must stay inside the injectivity scale
  if (R < model.diameter() && 1.5 * R >= model.injectivity_scale())
    throw RadiusTooLarge("3R/2 must stay below the injectivity scale " +
                         std::to_string(model.injectivity_scale()));
  CutoffProfile prof;
  prof.x0 = x0;
  prof.y0 = y0;
  prof.R = R;
  Array dist = distance_from(model, x0, y0);
  const auto nn = dist.size();
  prof.phi = Array::Zero(nn);
  prof.dphi = Array::Zero(nn);
  prof.grad_ratio = Array::Zero(nn);
  for (Eigen::Index k = 0; k < nn; ++k) {
    const double dd = dist[k];
    if (dd <= R) {
      prof.phi[k] = 1.0;
    } else if (dd < 1.5 * R) {
      const double s = (dd - R) / (0.5 * R);
      const double w = 1.0 - s * s;
      prof.phi[k] = w * w;
      prof.dphi[k] = -8.0 * s * w / R;
      prof.grad_ratio[k] = 8.0 * s / R;  // |phi'| / sqrt(phi) = 8 s / R
    }
  }
  return prof;
}

CutoffReport cutoff_verify(const CutoffProfile& profile, const ManifoldModel& model,
                           double m) {
  const double K = curvature_lower_bound(model, m).K;
  CutoffReport rep;
  rep.sup_grad_ratio_R = profile.grad_ratio.maxCoeff() * profile.R;
  const Array lap = laplacian(model, ScalarField{profile.phi, false}).values;
  rep.inf_lap_scaled =
      lap.minCoeff() * profile.R * profile.R / (1.0 + std::sqrt(K) * profile.R);
  return rep;
}

EllipticCheckReport elliptic_estimate_check(const ManifoldModel& model,
                                            const ScalarField& u_steady,
                                            const EquationParams& params, double m,
                                            double K, double R, double x0, double y0) {
  check_shape(model, u_steady);
  require_positive(u_steady);
  (void)m;
  const Array& uv = u_steady.values;
  Array log_grad = gradient_sq(model, u_steady).values / uv.square();
  Array reaction = params.a + params.b * pow_pm1(uv, params.p);
  Array lhs = params.a > 0.0 ? (log_grad + reaction.abs()).eval()
                             : (log_grad - params.b * pow_pm1(uv, params.p)).eval();

  EllipticCheckReport rep;
  if (std::isinf(R)) {
    rep.lhs_sup = lhs.maxCoeff();
    rep.bound_base = K;
  } else {
    Array d = distance_from(model, x0, y0);
    double sup = 0.0;
    for (Eigen::Index k = 0; k < lhs.size(); ++k)
      if (d[k] <= R) sup = std::max(sup, lhs[k]);
    rep.lhs_sup = sup;
    rep.bound_base = 1.0 / (R * R) + K;
  }
  rep.ratio = rep.bound_base > 0.0
                  ? rep.lhs_sup / rep.bound_base
                  : (rep.lhs_sup == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return rep;
}

}  // namespace harnacklab
