// Acceptance suite: runs every verification criterion end to end and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "harnacklab/asymptotics.hpp"
#include "harnacklab/experiment.hpp"
#include "harnacklab/harnack.hpp"
#include "harnacklab/rng.hpp"
#include "harnacklab/solver.hpp"

using namespace harnacklab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTau = 2.0 * kPi;

int g_failures = 0;
int g_index = 0;

void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
  ++g_index;
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!pass) ++g_failures;
  std::printf("[%s] %2d. %-34s %s(%.0f ms)\n", pass ? "PASS" : "FAIL", g_index,
              name.c_str(), detail.empty() ? "" : (detail + " ").c_str(), ms);
  std::fflush(stdout);
}

ScalarField sine_data(const ManifoldModel& model, double base, double amp, int mode) {
  if (model.kind == ModelKind::SphereAxisym)
    return mark_positive(make_field(
        model, [=](double th, double) { return base + amp * std::cos(mode * th); }));
  const double k = 2.0 * kPi * mode / model.size[0];
  return mark_positive(
      make_field(model, [=](double x, double) { return base + amp * std::sin(k * x); }));
}

// deterministic random three-mode data; the sampled function is
// resolution-independent so runs on refined grids see the same initial state
struct RandomWave {
  double c[3], phase[3];

  static RandomWave draw(Rng& rng, double rel) {
    RandomWave w;
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      w.c[k] = (0.4 + 0.6 * rng.uniform()) / (k + 1);
      total += w.c[k];
    }
    for (int k = 0; k < 3; ++k) {
      w.c[k] *= rel / total;
      w.phase[k] = 2.0 * kPi * rng.uniform();
    }
    return w;
  }

  ScalarField sample(const ManifoldModel& model, double base) const {
    const double k0 = 2.0 * kPi / model.size[0];
    return mark_positive(make_field(model, [&](double x, double) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += c[k] * std::sin((k + 1) * k0 * x + phase[k]);
      return base * (1.0 + s);
    }));
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// --------------------------------------------------------------------------

bool ode_oracle_equivalence(std::string& detail) {
  const ManifoldModel circle = build_circle(kTau, 256);
  const ManifoldModel torus = build_torus(kTau, kTau, 96, 96);
  SolveConfig cfg;
  cfg.final_time = 10.0;
  double worst = 0.0;
  for (const EquationParams& eq :
       {EquationParams(1, -1, 2), EquationParams(1, -1, 3), EquationParams(0, -1, 2)}) {
    for (const ManifoldModel* model : {&circle, &torus}) {
      const double u0 = 0.5;
      const Trajectory traj = solve_parabolic(*model, constant_field(*model, u0), eq, cfg);
      const OdeSolution ode = ode_closed_form(eq, u0);
      for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double ref = ode(traj.times[i]);
        worst = std::max(worst,
                         std::abs(traj.fields[i].values[0] - ref) / std::abs(ref));
      }
    }
  }
  detail = "max rel err " + fmt(worst);
  return worst <= 1e-6;
}

bool solver_convergence_order(std::string& detail) {
  ManufacturedSolution circle_ms;
  circle_ms.u = [](double x, double, double t) { return 2.0 + std::sin(x) * std::exp(-t); };
  circle_ms.u_t = [](double x, double, double t) { return -std::sin(x) * std::exp(-t); };
  circle_ms.lap = [](double x, double, double t) { return -std::sin(x) * std::exp(-t); };
  circle_ms.grad_x = [](double x, double, double t) { return std::cos(x) * std::exp(-t); };
  const ConvergenceReport rc = manufactured_convergence(
      build_circle(kTau, 64), EquationParams(1, -1, 2), circle_ms, 0.5);

  ManufacturedSolution sphere_ms;
  sphere_ms.u = [](double th, double, double t) { return 2.0 + std::cos(th) * std::exp(-t); };
  sphere_ms.u_t = [](double th, double, double t) { return -std::cos(th) * std::exp(-t); };
  sphere_ms.lap = [](double th, double, double t) { return -2.0 * std::cos(th) * std::exp(-t); };
  sphere_ms.grad_x = [](double th, double, double t) { return -std::sin(th) * std::exp(-t); };
  const ConvergenceReport rs = manufactured_convergence(
      build_sphere(1.0, 32), EquationParams(1, -1, 2), sphere_ms, 0.25);

  detail = "orders " + fmt(rc.fitted_order) + " (circle), " + fmt(rs.fitted_order) +
           " (sphere)";
  auto ok = [](double o) { return o >= 1.7 && o <= 2.3; };
  return ok(rc.fitted_order) && ok(rs.fitted_order);
}

bool harnack_constant_stability(std::string& detail) {
  struct Config {
    ManifoldModel model;
    EquationParams eq;
    double m;
  };
  std::vector<Config> configs;
  configs.push_back({build_circle(kTau, 256), EquationParams(1, -1, 2), 2.0});
  configs.push_back({build_circle(kTau, 256,
                                  DriftSpec::circle(
                                      [](double x) { return 0.2 * std::sin(x); },
                                      [](double x) { return 0.2 * std::cos(x); })),
                     EquationParams(1, -1, 2.5), 3.0});

  SolveConfig cfg;
  cfg.final_time = 10.0;
  bool ok = true;
  for (const Config& c : configs) {
    const CurvatureSpec curv = curvature_lower_bound(c.model, c.m);
    const HarnackParams hp =
        feasibility_search(Regime::DL, c.m, c.eq.p, c.eq.a, curv.K);
    Rng rng(2026);
    std::vector<RandomWave> waves;
    std::vector<double> cfits;
    // data above the equilibrium keeps -d/dt ln u positive, so the
    // constant is fitted from a genuine O(1)-time envelope peak
    for (int run = 0; run < 10; ++run) {
      waves.push_back(RandomWave::draw(rng, 0.5));
      const Trajectory traj =
          solve_parabolic(c.model, waves.back().sample(c.model, 2.0), c.eq, cfg);
      const HarnackVerification v = verify_harnack(traj, hp, curv);
      if (v.violation || !std::isfinite(v.C_fit)) ok = false;
      cfits.push_back(v.C_fit);
    }
    const double cmax = *std::max_element(cfits.begin(), cfits.end());
    const double cmin = *std::min_element(cfits.begin(), cfits.end());
    if (!(cmin > 0.0) || cmax > 2.0 * cmin) ok = false;

    // grid doubling on the first ensemble member
    const ManifoldModel fine = rebuild(c.model, 512);
    const CurvatureSpec curv2 = curvature_lower_bound(fine, c.m);
    const Trajectory ft = solve_parabolic(fine, waves[0].sample(fine, 2.0), c.eq, cfg);
    const double c2 = verify_harnack(ft, hp, curv2).C_fit;
    const double change = std::abs(c2 - cfits[0]) / cfits[0];
    if (change > 0.2) ok = false;
    detail += "spread " + fmt(cmax / cmin) + ", doubling " + fmt(change) + "; ";
  }
  return ok;
}

bool lemma_inequality_refinement(std::string& detail) {
  const EquationParams eq(1, -1, 2);
  bool ok = true;

  // homogeneous states: residual is rounding noise
  {
    const ManifoldModel model = build_circle(kTau, 64);
    const HarnackParams hp = feasibility_search(Regime::DL, 3.0, 2.0, 1.0, 0.0);
    const double r = key_inequality_residual(model, constant_field(model, 0.5), eq, hp, 3.0)
                         .values.abs()
                         .maxCoeff();
    if (r > 1e-10) ok = false;
    detail += "homog " + fmt(r) + "; ";
  }

  auto ladder_order = [&](ModelKind kind, int base, double m,
                          const CoordFn& fn) -> double {
    const HarnackParams hp = feasibility_search(Regime::DL, m, eq.p, eq.a, 0.0);
    std::vector<double> hs, viols;
    for (int rung = 0; rung < 3; ++rung) {
      const ManifoldModel model = build_model(kind, kTau, base << rung);
      const ScalarField u = mark_positive(make_field(model, fn));
      const Array res = key_inequality_residual(model, u, eq, hp, m).values;
      hs.push_back(model.min_spacing());
      viols.push_back(std::max(0.0, res.maxCoeff()));
    }
    if (viols[0] < 1e-12 && viols[1] < 1e-12 && viols[2] < 1e-12) return 2.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      if (viols[i] <= 0.0) continue;
      sx += std::log(hs[i]);
      sy += std::log(viols[i]);
      sxx += std::log(hs[i]) * std::log(hs[i]);
      sxy += std::log(hs[i]) * std::log(viols[i]);
      ++n;
    }
    return n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  };

  const double oc = ladder_order(ModelKind::Circle, 64, 3.0, [](double x, double) {
    return std::exp(0.5 * std::sin(x));
  });
  const double ot = ladder_order(ModelKind::FlatTorus2D, 24, 4.0, [](double x, double y) {
    return std::exp(0.4 * std::sin(x) * std::cos(y)) * 0.8;
  });
  detail += "orders " + fmt(oc) + " (circle), " + fmt(ot) + " (torus)";
  return ok && oc >= 1.7 && ot >= 1.7;
}

bool feasibility_soundness(std::string& detail) {
  const double ms[] = {2, 3, 6};
  const double ps[] = {1.2, 1.6, 2.0, 2.5, 3.0};
  const double as[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  const double kfracs[] = {0.0, 0.5, 0.9};
  int dl_count = 0, dg_count = 0;
  Rng rng(11);
  for (double m : ms)
    for (double p : ps)
      for (double a : as) {
        const bool l_defined = p >= 1.0 + 2.0 / m;
        const double l_scale = l_defined ? l_threshold(m, p, a) : 0.5 * (p - 1.0) * a;
        for (double frac : kfracs) {
          const double K = frac * l_scale;

          const HarnackParams dl = feasibility_search(Regime::DL, m, p, a, K);
          ++dl_count;
          if (!dl.feasible) {
            detail = "DL failed at m=" + fmt(m) + " p=" + fmt(p) + " a=" + fmt(a) +
                     " K=" + fmt(K);
            return false;
          }
          const ConstraintReport rr = constraint_margins_dl(m, p, a, K, dl.gamma, dl.delta);
          if (!rr.feasible ||
              sample_quantified_condition(dl, m, p, a, -1.0, 10.0 * a, 10000,
                                          rng.next()) < -1e-12) {
            detail = "DL substitution failed";
            return false;
          }

          if (p > 1.0 + 2.0 / m && K < l_threshold(m, p, a)) {
            const HarnackParams dg = feasibility_search(Regime::DG1, m, p, a, K);
            ++dg_count;
            if (!dg.feasible || !(dg.delta > 0.0)) {
              detail = "DG1 failed at m=" + fmt(m) + " p=" + fmt(p) + " a=" + fmt(a) +
                       " K=" + fmt(K);
              return false;
            }
            const ConstraintReport rg =
                constraint_margins_dg1(m, p, a, K, dg.gamma, dg.delta);
            if (!rg.feasible ||
                !(sample_quantified_condition(dg, m, p, a, -1.0, 10.0 * a, 10000,
                                              rng.next()) > 0.0)) {
              detail = "DG1 substitution failed";
              return false;
            }
          }
        }
      }
  detail = std::to_string(dl_count) + " DL + " + std::to_string(dg_count) +
           " DG1 searches verified";
  return true;
}

bool trapping(std::string& detail) {
  const ManifoldModel model = build_torus(kTau, kTau, 96, 96);
  const EquationParams eq(1, -1, 2);
  SolveConfig cfg;
  cfg.final_time = 20.0;

  const Trajectory below = solve_parabolic(model, sine_data(model, 0.5, 0.3, 1), eq, cfg);
  const double h = model.min_spacing();
  double worst = 0.0;
  for (const auto& f : below.fields) worst = std::max(worst, f.values.maxCoeff() - 1.0);
  const bool below_ok = worst <= 10.0 * h * h;

  const Trajectory above = solve_parabolic(model, sine_data(model, 1.3, 0.2, 1), eq, cfg);
  const double final_excess = above.fields.back().values.maxCoeff() - 1.0;
  const bool above_ok = final_excess < 1e-3;

  detail = "excess below " + fmt(worst) + " (tol " + fmt(10 * h * h) + "), above " +
           fmt(final_excess);
  return below_ok && above_ok;
}

bool convergence_rate(std::string& detail) {
  bool ok = true;
  struct Cfg {
    ManifoldModel model;
    EquationParams eq;
    double T;
  };
  std::vector<Cfg> cases;
  cases.push_back({build_torus(kTau, kTau, 96, 96), EquationParams(1, -1, 2), 20.0});
  cases.push_back({build_sphere(1.0, 128), EquationParams(1, -1, 3), 8.0});
  for (const Cfg& c : cases) {
    SolveConfig cfg;
    cfg.final_time = c.T;
    const Trajectory traj =
        solve_parabolic(c.model, sine_data(c.model, 0.5, 0.25, 1), c.eq, cfg);
    const HarnackParams hp = feasibility_search(Regime::DG1, 3.0, c.eq.p, c.eq.a, 0.0);
    const SuiteReport rep = check_liouville_suite(traj, CurvatureSpec{3.0, 0.0}, hp);
    const double expected = (c.eq.p - 1.0) * c.eq.a;
    const double rel = std::abs(rep.fitted_rate - expected) / expected;
    detail += "rate " + fmt(rep.fitted_rate) + " vs " + fmt(expected) + "; ";
    if (rel > 0.1 || !rep.all_pass) ok = false;
  }
  return ok;
}

bool power_decay(std::string& detail) {
  bool ok = true;
  struct Cfg {
    ManifoldModel model;
    double p, T;
  };
  std::vector<Cfg> cases;
  cases.push_back({build_sphere(1.0, 128), 2.0, 80.0});
  cases.push_back({build_circle(kTau, 256), 3.0, 120.0});
  for (const Cfg& c : cases) {
    const EquationParams eq(0, -1, c.p);
    SolveConfig cfg;
    cfg.final_time = c.T;
    const Trajectory traj =
        solve_parabolic(c.model, sine_data(c.model, 1.0, 0.3, 2), eq, cfg);
    std::vector<double> sup;
    for (const auto& f : traj.fields) sup.push_back(f.values.maxCoeff());
    const RateFit fit = fit_power_exponent(traj.times, sup);
    const double expected = -1.0 / (c.p - 1.0);
    const double rel = std::abs(fit.rate - expected) / std::abs(expected);
    detail += "exponent " + fmt(fit.rate) + " vs " + fmt(expected) + "; ";
    if (rel > 0.1) ok = false;
  }
  return ok;
}

bool elliptic_liouville(std::string& detail) {
  bool ok = true;
  SolveConfig cfg;
  cfg.elliptic_tol = 1e-9;
  for (double p : {2.0, 3.0}) {
    for (int which : {0, 1}) {
      const ManifoldModel model =
          which == 0 ? build_torus(kTau, kTau, 96, 96) : build_sphere(1.0, 128);
      const EquationParams eq(1, -1, p);
      const ScalarField u = solve_elliptic(model, eq, cfg, constant_field(model, 0.3));
      const double dist = (u.values - 1.0).abs().maxCoeff();
      const double res = rhs(model, u, eq).values.abs().maxCoeff();
      if (dist >= 1e-4 || res >= 1e-8) ok = false;
      detail += fmt(dist) + "/" + fmt(res) + "; ";
    }
  }
  return ok;
}

bool cutoff_properties(std::string& detail) {
  bool ok = true;
  for (int which : {0, 1}) {
    const ManifoldModel model =
        which == 0 ? build_circle(kTau, 256) : build_sphere(1.0, 128);
    const double R = kPi / 4.0;
    const CutoffProfile prof = cutoff_phi(model, R);
    const Array d = distance_from(model, 0.0);
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (d[k] <= R && prof.phi[k] != 1.0) ok = false;
      if (d[k] >= 1.5 * R && prof.phi[k] != 0.0) ok = false;
    }
    const CutoffReport r1 = cutoff_verify(prof, model, 3.0);
    const ManifoldModel fine = rebuild(model, 2 * model.res[0]);
    const CutoffReport r2 = cutoff_verify(cutoff_phi(fine, R), fine, 3.0);
    const double grad_change =
        std::abs(r2.sup_grad_ratio_R - r1.sup_grad_ratio_R) / r1.sup_grad_ratio_R;
    const double lap_change =
        std::abs(r2.inf_lap_scaled - r1.inf_lap_scaled) / std::abs(r1.inf_lap_scaled);
    if (!std::isfinite(r1.sup_grad_ratio_R) || !std::isfinite(r1.inf_lap_scaled))
      ok = false;
    if (grad_change > 0.1 || lap_change > 0.1) ok = false;
    detail += "grad " + fmt(r1.sup_grad_ratio_R) + " (" + fmt(grad_change) + "), lap " +
              fmt(r1.inf_lap_scaled) + " (" + fmt(lap_change) + "); ";
  }
  return ok;
}

bool scaling_invariance(std::string& detail) {
  SolveConfig cfg;
  cfg.final_time = 0.5;
  double worst = 0.0;
  for (int which : {0, 1}) {
    const ManifoldModel model = which == 0
                                    ? build_circle(kTau, 128)
                                    : build_torus(kTau, kTau, 48, 48);
    const double p = which == 0 ? 2.5 : 2.0;
    const EquationParams eq(1, -1, p);
    const Trajectory traj = solve_parabolic(model, sine_data(model, 0.5, 0.3, 1), eq, cfg);
    const ScalarField& snapshot = traj.fields.back();
    const HarnackParams hp{0.35, -0.6, Regime::DL, {}, true};
    const Array F0 = harnack_quantity(model, snapshot, eq, hp).values;
    for (double lambda : {0.1, 3.0, 50.0}) {
      const EquationParams scaled(1, -std::pow(lambda, 1.0 - p), p);
      const ScalarField v = mark_positive(ScalarField{lambda * snapshot.values, false});
      const Array F = harnack_quantity(model, v, scaled, hp).values;
      worst = std::max(worst, (F - F0).abs().maxCoeff());
    }
  }
  detail = "max |F(lambda u) - F(u)| = " + fmt(worst);
  return worst <= 1e-10;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion("ODE oracle equivalence", ode_oracle_equivalence);
  criterion("solver convergence order", solver_convergence_order);
  criterion("Harnack constant stability", harnack_constant_stability);
  criterion("key inequality under refinement", lemma_inequality_refinement);
  criterion("feasibility soundness + coverage", feasibility_soundness);
  criterion("trapping below equilibrium", trapping);
  criterion("exponential convergence rate", convergence_rate);
  criterion("power decay exponent", power_decay);
  criterion("elliptic Liouville", elliptic_liouville);
  criterion("cutoff profile properties", cutoff_properties);
  criterion("scaling invariance of F", scaling_invariance);
  std::printf("%d of %d criteria failed\n", g_failures, g_index);
  return g_failures;
}
