#include "harnacklab/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "harnacklab/rng.hpp"

namespace harnacklab {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Feasibility: return "feasibility";
    case ExperimentKind::VerifyHarnack: return "verify-harnack";
    case ExperimentKind::Elliptic: return "elliptic";
    case ExperimentKind::Asymptotics: return "asymptotics";
    case ExperimentKind::LemmaCheck: return "lemma-check";
    case ExperimentKind::CutoffCheck: return "cutoff-check";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& value, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": expected a number, got '" +
                     value + "'");
  }
}

long parse_int(const std::string& value, int line) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": expected an integer, got '" +
                     value + "'");
  }
}

ExperimentKind parse_kind(const std::string& v, int line) {
  for (auto k : {ExperimentKind::Simulate, ExperimentKind::Feasibility,
                 ExperimentKind::VerifyHarnack, ExperimentKind::Elliptic,
                 ExperimentKind::Asymptotics, ExperimentKind::LemmaCheck,
                 ExperimentKind::CutoffCheck, ExperimentKind::Sweep})
    if (v == to_string(k)) return k;
  throw ParseError("line " + std::to_string(line) + ": unknown experiment '" + v + "'");
}

ModelKind parse_model(const std::string& v, int line) {
  if (v == "circle") return ModelKind::Circle;
  if (v == "torus") return ModelKind::FlatTorus2D;
  if (v == "sphere") return ModelKind::SphereAxisym;
  throw ParseError("line " + std::to_string(line) + ": unknown model '" + v + "'");
}

Regime parse_regime(const std::string& v, int line) {
  if (v == "dl") return Regime::DL;
  if (v == "dl0") return Regime::DL0;
  if (v == "dg1") return Regime::DG1;
  if (v == "dg2") return Regime::DG2;
  if (v == "elliptic") return Regime::EllipticDge;
  throw ParseError("line " + std::to_string(line) + ": unknown regime '" + v + "'");
}

DriftSpec drift_from_string(const std::string& text, ModelKind kind, double lx) {
  if (text == "none") return DriftSpec::none();
  if (kind == ModelKind::SphereAxisym)
    throw ValidationError("SphereAxisym supports only drift = none");
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ValidationError("drift '" + text + "' needs ':<value>'");
  const std::string name = text.substr(0, colon);
  double amp = 0.0;
  try {
    amp = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("drift '" + text + "' has a malformed amplitude");
  }
  const double k = 2.0 * kPi / lx;
  if (name == "sin") {
    if (kind == ModelKind::Circle)
      return DriftSpec::circle([amp, k](double x) { return amp * std::sin(k * x); },
                               [amp, k](double x) { return amp * k * std::cos(k * x); });
    return DriftSpec::torus(
        [amp, k](double x, double) { return amp * std::sin(k * x); },
        [](double, double) { return 0.0; },
        [amp, k](double x, double) { return amp * k * std::cos(k * x); },
        [](double, double) { return 0.0; }, [](double, double) { return 0.0; },
        [](double, double) { return 0.0; });
  }
  if (name == "const") {
    if (kind == ModelKind::Circle)
      return DriftSpec::circle([amp](double) { return amp; }, [](double) { return 0.0; });
    return DriftSpec::torus([amp](double, double) { return amp; },
                            [](double, double) { return 0.0; },
                            [](double, double) { return 0.0; },
                            [](double, double) { return 0.0; },
                            [](double, double) { return 0.0; },
                            [](double, double) { return 0.0; });
  }
  throw ValidationError("unknown drift '" + text + "'");
}

ManifoldModel build_from_config(const ExperimentConfig& cfg) {
  const DriftSpec drift = drift_from_string(cfg.drift, cfg.model, cfg.size_x);
  switch (cfg.model) {
    case ModelKind::Circle: return build_circle(cfg.size_x, cfg.resolution, drift);
    case ModelKind::FlatTorus2D:
      return build_torus(cfg.size_x, cfg.size_y > 0 ? cfg.size_y : cfg.size_x,
                         cfg.resolution,
                         cfg.resolution_y > 0 ? cfg.resolution_y : cfg.resolution, drift);
    case ModelKind::SphereAxisym: return build_sphere(cfg.size_x, cfg.resolution);
  }
  throw ValidationError("unknown model kind");
}

SolveConfig solve_config(const ExperimentConfig& cfg) {
  SolveConfig sc;
  sc.final_time = cfg.final_time;
  sc.cfl = cfg.cfl;
  sc.dt = cfg.dt;
  sc.record_stride = cfg.record_stride;
  sc.positivity_floor = cfg.positivity_floor;
  sc.elliptic_tol = cfg.elliptic_tol;
  return sc;
}

ScalarField initial_data(const ExperimentConfig& cfg, const ManifoldModel& model) {
  switch (cfg.init) {
    case InitKind::Constant: return mark_positive(constant_field(model, cfg.init_value));
    case InitKind::Sine: {
      const double amp = cfg.init_amplitude;
      const int mode = cfg.init_mode;
      if (model.kind == ModelKind::SphereAxisym)
        return mark_positive(make_field(model, [&](double th, double) {
          return cfg.init_value + amp * std::cos(mode * th);
        }));
      const double k = 2.0 * kPi * mode / model.size[0];
      return mark_positive(make_field(
          model, [&](double x, double) { return cfg.init_value + amp * std::sin(k * x); }));
    }
    case InitKind::File: {
      std::ifstream in(cfg.init_file);
      if (!in) throw ValidationError("cannot open init file '" + cfg.init_file + "'");
      ScalarField f;
      f.values = Array::Zero(model.num_nodes());
      double v;
      Eigen::Index k = 0;
      while (in >> v) {
        if (k >= model.num_nodes())
          throw ValidationError("init file has more values than grid nodes");
        f.values[k++] = v;
      }
      if (k != model.num_nodes())
        throw ValidationError("init file has " + std::to_string(k) + " values, grid needs " +
                              std::to_string(model.num_nodes()));
      return mark_positive(std::move(f));
    }
  }
  throw ValidationError("unknown init kind");
}

// Random smooth positive data for ensembles: three low modes with seeded
// amplitudes and phases, relative amplitude capped so the field stays
// well above zero.
ScalarField ensemble_data(const ExperimentConfig& cfg, const ManifoldModel& model,
                          Rng& rng) {
  const double base = cfg.init_value;
  const double rel = std::min(0.8, std::abs(cfg.init_amplitude) / base);
  double raw[3], total = 0.0;
  for (int k = 0; k < 3; ++k) {
    raw[k] = (0.4 + 0.6 * rng.uniform()) / (k + 1);
    total += raw[k];
  }
  double phase[3];
  for (int k = 0; k < 3; ++k)
    phase[k] = model.kind == ModelKind::SphereAxisym ? 0.0 : 2.0 * kPi * rng.uniform();

  if (model.kind == ModelKind::SphereAxisym) {
    return mark_positive(make_field(model, [&](double th, double) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += rel * raw[k] / total * std::cos((k + 1) * th);
      return base * (1.0 + s);
    }));
  }
  const double k0 = 2.0 * kPi / model.size[0];
  return mark_positive(make_field(model, [&](double x, double) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k)
      s += rel * raw[k] / total * std::sin((k + 1) * k0 * x + phase[k]);
    return base * (1.0 + s);
  }));
}

int worker_count(const ExperimentConfig& cfg) {
  int n = cfg.threads > 0 ? cfg.threads
                          : static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("HARNACK_LAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// file writers

struct Outputs {
  fs::path dir;
  std::vector<std::string>* manifest;

  std::ofstream open(const std::string& name) const {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    manifest->push_back(name);
    return out;
  }
};

void write_series_csv(const Outputs& outs, const Trajectory& traj) {
  auto out = outs.open("series.csv");
  const bool has_eq = traj.params.has_equilibrium();
  const double ustar = has_eq ? traj.params.equilibrium() : 0.0;
  out << "t,sup_u,inf_u,dist_to_ustar\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const Array& u = traj.fields[i].values;
    const double dist = has_eq ? (u - ustar).abs().maxCoeff() : 0.0;
    out << format_double(traj.times[i]) << ',' << format_double(u.maxCoeff()) << ','
        << format_double(u.minCoeff()) << ',' << format_double(dist) << '\n';
  }
}

void write_trajectory_csv(const Outputs& outs, const Trajectory& traj) {
  auto out = outs.open("trajectory.csv");
  out << "t,node,x,y,u,u_t\n";
  // cap the export at ~24 snapshots
  const std::size_t count = traj.times.size();
  const std::size_t stride = std::max<std::size_t>(1, (count + 23) / 24);
  const ManifoldModel& model = *traj.model;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % stride != 0 && i + 1 != count) continue;
    const Array ut = rhs(model, traj.fields[i], traj.params).values;
    for (Eigen::Index k = 0; k < model.num_nodes(); ++k)
      out << format_double(traj.times[i]) << ',' << k << ',' << format_double(model.xs[k])
          << ',' << format_double(model.ys[k]) << ','
          << format_double(traj.fields[i].values[k]) << ',' << format_double(ut[k])
          << '\n';
  }
}

void write_region_row(std::ostream& out, double m, double p, double a, double K,
                      const HarnackParams& hp, bool in_regime) {
  out << format_double(m) << ',' << format_double(p) << ',' << format_double(a) << ','
      << format_double(K) << ',' << format_double(hp.gamma) << ','
      << format_double(hp.delta) << ',' << format_double(hp.margins.curvature_margin)
      << ',' << format_double(hp.margins.mixed_term_margin) << ','
      << format_double(hp.margins.l_constant_margin) << ','
      << format_double(hp.margins.l_slope_margin) << ',' << (hp.feasible ? 1 : 0) << ','
      << (in_regime ? 1 : 0) << '\n';
}

constexpr const char* kRegionHeader =
    "m,p,a,K,gamma,delta,curvature_margin,mixed_term_margin,l_constant_margin,"
    "l_slope_margin,feasible,in_regime\n";

ordered_json check_json(const CheckResult& c) {
  ordered_json j;
  j["name"] = c.name;
  j["pass"] = c.pass;
  j["ran"] = c.ran;
  j["statistic"] = c.statistic;
  j["tolerance"] = c.tolerance;
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

// ---------------------------------------------------------------------------
// experiment bodies

struct Session {
  const ExperimentConfig& cfg;
  ManifoldModel model;
  EquationParams eq;
  CurvatureSpec curv;
  Outputs outs;
  RunReport* report;

  void add_check(CheckResult c) {
    if (c.ran && !c.pass) report->all_pass = false;
    report->checks.push_back(std::move(c));
  }
  void check(const std::string& name, bool pass, double statistic, double tolerance,
             std::string detail = "") {
    add_check(CheckResult{name, pass, true, statistic, tolerance, std::move(detail)});
  }
};

void run_simulate(Session& s) {
  const ScalarField u0 = initial_data(s.cfg, s.model);
  const Trajectory traj = solve_parabolic(s.model, u0, s.eq, solve_config(s.cfg));
  write_series_csv(s.outs, traj);
  write_trajectory_csv(s.outs, traj);
  {
    // metadata sidecar for the trajectory export
    ordered_json j;
    j["model"] = to_string(s.cfg.model);
    j["size"] = {s.model.size[0], s.model.size[1]};
    j["resolution"] = {s.model.res[0], s.model.res[1]};
    j["drift"] = s.cfg.drift;
    j["params"] = {{"a", s.eq.a}, {"b", s.eq.b}, {"p", s.eq.p}};
    j["m"] = s.cfg.m;
    j["K"] = s.curv.K;
    j["dt"] = traj.dt;
    j["steps"] = traj.steps;
    j["records"] = traj.times.size();
    auto out = s.outs.open("run_meta.json");
    out << j.dump(2) << '\n';
  }
  s.check("completed", true, traj.times.back(), 0.0, "final time reached");

  const double spread = u0.values.maxCoeff() - u0.values.minCoeff();
  if (spread == 0.0) {
    // spatially constant run: compare against the closed-form homogeneous
    // solution
    const OdeSolution ode = ode_closed_form(s.eq, u0.values[0]);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const double ref = ode(traj.times[i]);
      const double got = traj.fields[i].values.maxCoeff();
      worst = std::max(worst, std::abs(got - ref) / std::max(std::abs(ref), 1e-300));
    }
    s.check("ode_oracle_match", worst <= 1e-6, worst, 1e-6, "max relative error");
    s.report->fitted["ode_oracle_rel_error"] = worst;
  }
}

void run_feasibility(Session& s) {
  const HarnackParams hp =
      feasibility_search(s.cfg.regime, s.cfg.m, s.eq.p, s.eq.a, s.curv.K);
  {
    auto out = s.outs.open("region.csv");
    out << kRegionHeader;
    write_region_row(out, s.cfg.m, s.eq.p, s.eq.a, s.curv.K, hp, true);
  }
  s.check("feasible", hp.feasible, hp.margins.min_margin(), 0.0, "minimum margin");
  const double s_max =
      (s.eq.a > 0.0 && s.eq.b < 0.0) ? 10.0 * s.eq.a / -s.eq.b : 10.0;
  const double worst = sample_quantified_condition(hp, s.cfg.m, s.eq.p, s.eq.a, s.eq.b,
                                                   s_max, 10000, s.cfg.seed);
  s.check("substitution_sound", worst >= -1e-12, worst, 0.0,
          "worst sampled value of the quantified condition");
  s.report->fitted["gamma"] = hp.gamma;
  s.report->fitted["delta"] = hp.delta;
  s.report->fitted["min_margin"] = hp.margins.min_margin();
}

void run_verify_harnack(Session& s) {
  const HarnackParams hp =
      feasibility_search(s.cfg.regime, s.cfg.m, s.eq.p, s.eq.a, s.curv.K);
  Rng rng(s.cfg.seed);
  std::vector<double> cfits;
  bool any_violation = false;
  ordered_json first_series = ordered_json::array();
  for (int run = 0; run < std::max(1, s.cfg.ensemble); ++run) {
    const ScalarField u0 = s.cfg.ensemble > 1 ? ensemble_data(s.cfg, s.model, rng)
                                              : initial_data(s.cfg, s.model);
    const Trajectory traj = solve_parabolic(s.model, u0, s.eq, solve_config(s.cfg));
    const HarnackVerification v = verify_harnack(traj, hp, s.curv, s.cfg.ball_radius,
                                                 s.cfg.x0, s.cfg.x0_y);
    cfits.push_back(v.C_fit);
    any_violation = any_violation || v.violation;
    if (run == 0) {
      for (const auto& [t, val] : v.sup_tF_series) first_series.push_back({t, val});
      ordered_json j;
      j["regime"] = to_string(hp.regime);
      j["params"] = {{"gamma", hp.gamma}, {"delta", hp.delta}, {"m", s.cfg.m},
                     {"p", s.eq.p},       {"a", s.eq.a},       {"K", s.curv.K}};
      j["C_fit"] = v.C_fit;
      j["sup_tF_series"] = first_series;
      j["violation_flag"] = v.violation;
      auto out = s.outs.open("verification.json");
      out << j.dump(2) << '\n';
      if (v.G_diagnostic.size() > 0) {
        auto gout = s.outs.open("g_diagnostic.csv");
        gout << "node,x,y,G\n";
        for (Eigen::Index k = 0; k < v.G_diagnostic.size(); ++k)
          gout << k << ',' << format_double(s.model.xs[k]) << ','
               << format_double(s.model.ys[k]) << ','
               << format_double(v.G_diagnostic[k]) << '\n';
      }
    }
  }
  const double cmax = *std::max_element(cfits.begin(), cfits.end());
  const double cmin = *std::min_element(cfits.begin(), cfits.end());
  s.check("C_fit_finite", std::isfinite(cmax), cmax, 0.0, "largest fitted constant");
  s.check("no_violation", !any_violation, any_violation ? 1.0 : 0.0, 0.0,
          "t*F stays bounded over every run");
  if (cfits.size() > 1) {
    const bool spread_ok = cmax <= 1e-9 || cmax <= 2.0 * std::max(cmin, 1e-300);
    s.check("ensemble_spread", spread_ok, cmin > 0 ? cmax / cmin : 0.0, 2.0,
            "max/min fitted constant over the ensemble");
  }
  s.report->fitted["C_fit_max"] = cmax;
  s.report->fitted["C_fit_min"] = cmin;
  s.report->fitted["gamma"] = hp.gamma;
  s.report->fitted["delta"] = hp.delta;
}

void run_elliptic(Session& s) {
  const ScalarField guess = initial_data(s.cfg, s.model);
  const ScalarField u = solve_elliptic(s.model, s.eq, solve_config(s.cfg), guess);
  const Array res = rhs(s.model, u, s.eq).values;
  {
    auto out = s.outs.open("steady.csv");
    out << "node,x,y,u,residual\n";
    for (Eigen::Index k = 0; k < s.model.num_nodes(); ++k)
      out << k << ',' << format_double(s.model.xs[k]) << ',' << format_double(s.model.ys[k])
          << ',' << format_double(u.values[k]) << ',' << format_double(res[k]) << '\n';
  }
  s.check("residual", res.abs().maxCoeff() <= s.cfg.elliptic_tol, res.abs().maxCoeff(),
          s.cfg.elliptic_tol, "max |rhs| at the steady state");
  if (s.eq.has_equilibrium()) {
    const double dist = (u.values - s.eq.equilibrium()).abs().maxCoeff();
    s.check("matches_equilibrium", dist < 1e-4, dist, 1e-4, "||u - u*||_inf");
  }
  const double R = std::isinf(s.cfg.ball_radius)
                       ? s.model.injectivity_scale() / 3.0
                       : s.cfg.ball_radius;
  const EllipticCheckReport rep =
      elliptic_estimate_check(s.model, u, s.eq, s.cfg.m, s.curv.K, R, s.cfg.x0, s.cfg.x0_y);
  s.check("estimate_ratio_finite", std::isfinite(rep.ratio), rep.ratio, 0.0,
          "sup LHS / (1/R^2 + K)");
  s.report->fitted["estimate_ratio"] = rep.ratio;
  s.report->fitted["lhs_sup"] = rep.lhs_sup;
}

void run_asymptotics(Session& s) {
  const HarnackParams hp =
      feasibility_search(s.cfg.regime, s.cfg.m, s.eq.p, s.eq.a, s.curv.K);
  const ScalarField u0 = initial_data(s.cfg, s.model);
  const Trajectory traj = solve_parabolic(s.model, u0, s.eq, solve_config(s.cfg));
  write_series_csv(s.outs, traj);
  const SuiteReport suite = check_liouville_suite(traj, s.curv, hp);
  for (const auto& c : suite.checks) s.add_check(c);
  {
    ordered_json j;
    j["checks"] = ordered_json::array();
    for (const auto& c : suite.checks) j["checks"].push_back(check_json(c));
    j["fitted_rates"] = {{"exponential_rate", suite.fitted_rate},
                         {"power_exponent", suite.fitted_exponent}};
    auto out = s.outs.open("suite.json");
    out << j.dump(2) << '\n';
  }
  s.report->fitted["exponential_rate"] = suite.fitted_rate;
  s.report->fitted["power_exponent"] = suite.fitted_exponent;
}

void run_lemma_check(Session& s) {
  const HarnackParams hp =
      feasibility_search(s.cfg.regime, s.cfg.m, s.eq.p, s.eq.a, s.curv.K);

  // homogeneous state: the inequality is saturated, residual is rounding only
  {
    const ScalarField uc = mark_positive(constant_field(s.model, s.cfg.init_value));
    const double r = key_inequality_residual(s.model, uc, s.eq, hp, s.cfg.m)
                         .values.abs()
                         .maxCoeff();
    s.check("homogeneous_residual", r <= 1e-10, r, 1e-10, "|residual| at a constant state");
  }

  // refinement ladder on the configured snapshot
  auto out = s.outs.open("lemma.csv");
  out << "resolution,h,max_violation,max_abs_residual\n";
  std::vector<double> hs, viols;
  for (int rung = 0; rung < 3; ++rung) {
    const int nx = s.cfg.resolution << rung;
    const int ny = s.model.res[1] > 1 ? (s.model.res[1] << rung) : 0;
    const ManifoldModel fine = rebuild(s.model, nx, ny);
    ExperimentConfig sub = s.cfg;
    sub.resolution = nx;
    const ScalarField u = initial_data(sub, fine);
    const Array res = key_inequality_residual(fine, u, s.eq, hp, s.cfg.m).values;
    const double viol = std::max(0.0, res.maxCoeff());
    const double h = fine.min_spacing();
    out << nx << ',' << format_double(h) << ',' << format_double(viol) << ','
        << format_double(res.abs().maxCoeff()) << '\n';
    hs.push_back(h);
    viols.push_back(viol);
  }
  const double tiny = 1e-12;
  bool all_tiny = true;
  for (double v : viols) all_tiny = all_tiny && v < tiny;
  double order = 0.0;
  if (!all_tiny) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t i = 0; i < viols.size(); ++i) {
      if (viols[i] <= 0.0) continue;
      const double lx = std::log(hs[i]), ly = std::log(viols[i]);
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
      ++cnt;
    }
    if (cnt >= 2) order = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  }
  s.check("violation_order", all_tiny || order >= 1.7, order, 1.7,
          all_tiny ? "violation below 1e-12 at every rung" : "fitted order of max violation");
  s.report->fitted["violation_order"] = order;
}

void run_cutoff_check(Session& s) {
  const double R = std::isinf(s.cfg.ball_radius) ? s.model.injectivity_scale() / 3.0
                                                 : s.cfg.ball_radius;
  const CutoffProfile prof = cutoff_phi(s.model, R, s.cfg.x0, s.cfg.x0_y);
  const CutoffReport rep = cutoff_verify(prof, s.model, s.cfg.m);

  const Array dist = distance_from(s.model, s.cfg.x0, s.cfg.x0_y);
  const Array lap = laplacian(s.model, ScalarField{prof.phi, false}).values;
  {
    auto out = s.outs.open("cutoff.csv");
    out << "node,x,y,d,phi,grad_ratio,lap_phi\n";
    for (Eigen::Index k = 0; k < s.model.num_nodes(); ++k)
      out << k << ',' << format_double(s.model.xs[k]) << ',' << format_double(s.model.ys[k])
          << ',' << format_double(dist[k]) << ',' << format_double(prof.phi[k]) << ','
          << format_double(prof.grad_ratio[k]) << ',' << format_double(lap[k]) << '\n';
  }

  bool interior_one = true, outside_zero = true;
  for (Eigen::Index k = 0; k < dist.size(); ++k) {
    if (dist[k] <= R && prof.phi[k] != 1.0) interior_one = false;
    if (dist[k] >= 1.5 * R && prof.phi[k] != 0.0) outside_zero = false;
  }
  s.check("phi_one_inside_R", interior_one, 1.0, 0.0, "Phi = 1 on B(x0,R)");
  s.check("phi_zero_outside", outside_zero, 0.0, 0.0, "Phi = 0 beyond 3R/2");
  s.check("grad_ratio_bound", rep.sup_grad_ratio_R <= 8.0 + 1e-12, rep.sup_grad_ratio_R,
          8.0, "sup(|grad Phi|/sqrt(Phi)) * R");

  // refinement stability
  const ManifoldModel fine =
      rebuild(s.model, 2 * s.model.res[0], s.model.res[1] > 1 ? 2 * s.model.res[1] : 0);
  const CutoffReport rep2 = cutoff_verify(cutoff_phi(fine, R, s.cfg.x0, s.cfg.x0_y), fine,
                                          s.cfg.m);
  const double grad_change =
      std::abs(rep2.sup_grad_ratio_R - rep.sup_grad_ratio_R) /
      std::max(rep.sup_grad_ratio_R, 1e-300);
  const double lap_change = std::abs(rep2.inf_lap_scaled - rep.inf_lap_scaled) /
                            std::max(std::abs(rep.inf_lap_scaled), 1e-300);
  s.check("grad_ratio_stable", grad_change <= 0.1, grad_change, 0.1,
          "relative change under grid doubling");
  s.check("lap_bound_stable", lap_change <= 0.1, lap_change, 0.1,
          "relative change under grid doubling");
  s.report->fitted["sup_grad_ratio_R"] = rep.sup_grad_ratio_R;
  s.report->fitted["inf_lap_scaled"] = rep.inf_lap_scaled;
}

void run_sweep(Session& s) {
  const double L = l_threshold(s.cfg.m, s.eq.p, s.eq.a);
  const int n = std::max(2, s.cfg.sweep_points);
  std::vector<HarnackParams> rows(n);
  std::vector<double> Ks(n);
  std::vector<char> in_regime(n);
  for (int i = 0; i < n; ++i) Ks[i] = s.cfg.sweep_k_factor * L * i / (n - 1);

  const Regime regime = s.cfg.regime;
  parallel_for(n, worker_count(s.cfg), [&](int i) {
    rows[i] = feasibility_probe(regime, s.cfg.m, s.eq.p, s.eq.a, Ks[i]);
    in_regime[i] = regime == Regime::DG1 ? Ks[i] < L : true;
  });

  auto out = s.outs.open("region.csv");
  out << kRegionHeader;
  bool sound = true;
  for (int i = 0; i < n; ++i) {
    write_region_row(out, s.cfg.m, s.eq.p, s.eq.a, Ks[i], rows[i], in_regime[i]);
    if (in_regime[i] && !rows[i].feasible) sound = false;
  }
  s.check("in_regime_rows_feasible", sound, 0.0, 0.0,
          "every row inside the regime found feasible parameters");
}

}  // namespace

// ---------------------------------------------------------------------------
// config parsing

namespace {

struct RawConfig {
  std::vector<std::tuple<int, std::string, std::string>> entries;  // line, key, value
};

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("line " + std::to_string(lineno) + ": empty key or value");
    raw.entries.emplace_back(lineno, key, value);
  }
  return raw;
}

void apply_entry(ExperimentConfig& cfg, int line, const std::string& key,
                 const std::string& value) {
  if (key == "experiment") cfg.kind = parse_kind(value, line);
  else if (key == "model") cfg.model = parse_model(value, line);
  else if (key == "size") cfg.size_x = parse_num(value, line);
  else if (key == "size_y") cfg.size_y = parse_num(value, line);
  else if (key == "resolution") cfg.resolution = static_cast<int>(parse_int(value, line));
  else if (key == "resolution_y")
    cfg.resolution_y = static_cast<int>(parse_int(value, line));
  else if (key == "drift") cfg.drift = value;
  else if (key == "a") cfg.a = parse_num(value, line);
  else if (key == "b") cfg.b = parse_num(value, line);
  else if (key == "p") cfg.p = parse_num(value, line);
  else if (key == "m") cfg.m = parse_num(value, line);
  else if (key == "K") {
    if (value == "auto") cfg.K_auto = true;
    else { cfg.K_auto = false; cfg.K = parse_num(value, line); }
  } else if (key == "regime") cfg.regime = parse_regime(value, line);
  else if (key == "T") cfg.final_time = parse_num(value, line);
  else if (key == "cfl") cfg.cfl = parse_num(value, line);
  else if (key == "dt") cfg.dt = value == "auto" ? 0.0 : parse_num(value, line);
  else if (key == "record_stride")
    cfg.record_stride = static_cast<int>(parse_int(value, line));
  else if (key == "positivity_floor") cfg.positivity_floor = parse_num(value, line);
  else if (key == "elliptic_tol") cfg.elliptic_tol = parse_num(value, line);
  else if (key == "init") {
    if (value == "constant") cfg.init = InitKind::Constant;
    else if (value == "sine") cfg.init = InitKind::Sine;
    else if (value.rfind("file:", 0) == 0) {
      cfg.init = InitKind::File;
      cfg.init_file = value.substr(5);
    } else
      throw ParseError("line " + std::to_string(line) + ": unknown init '" + value + "'");
  } else if (key == "init_value") cfg.init_value = parse_num(value, line);
  else if (key == "init_amplitude") cfg.init_amplitude = parse_num(value, line);
  else if (key == "init_mode") cfg.init_mode = static_cast<int>(parse_int(value, line));
  else if (key == "R")
    cfg.ball_radius = value == "inf" ? kGlobalRadius : parse_num(value, line);
  else if (key == "x0") cfg.x0 = parse_num(value, line);
  else if (key == "x0_y") cfg.x0_y = parse_num(value, line);
  else if (key == "ensemble") cfg.ensemble = static_cast<int>(parse_int(value, line));
  else if (key == "sweep_points")
    cfg.sweep_points = static_cast<int>(parse_int(value, line));
  else if (key == "sweep_k_factor") cfg.sweep_k_factor = parse_num(value, line);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, line));
  else if (key == "threads") cfg.threads = static_cast<int>(parse_int(value, line));
  else if (key == "quiet") cfg.quiet = value == "1" || value == "true";
  else
    throw ParseError("line " + std::to_string(line) + ": unknown key '" + key + "'");
}

void validate(ExperimentConfig& cfg) {
  cfg.echo.clear();
  cfg.warnings.clear();
  if (cfg.resolution < 8 || (cfg.resolution_y != 0 && cfg.resolution_y < 8))
    throw ValidationError("grid resolution must be at least 8 per dimension");
  if (!(cfg.size_x > 0.0) || cfg.size_y < 0.0)
    throw ValidationError("model size must be positive");
  if (!(cfg.a >= 0.0)) throw ValidationError("a >= 0 is required");
  if (!(cfg.b <= 0.0)) throw ValidationError("b <= 0 is required");
  if (!(cfg.p > 1.0)) throw ValidationError("p > 1 is required");
  if (!(cfg.final_time > 0.0)) throw ValidationError("T must be positive");
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) throw ValidationError("cfl must lie in (0, 1]");
  if (!(cfg.positivity_floor > 0.0))
    throw ValidationError("positivity floor must be positive");
  if (cfg.ensemble < 1) throw ValidationError("ensemble must be >= 1");
  if (cfg.init == InitKind::Sine &&
      !(cfg.init_value - std::abs(cfg.init_amplitude) > 0.0))
    throw ValidationError("init amplitude must keep the initial data strictly positive");
  if (cfg.init == InitKind::File && !fs::exists(cfg.init_file))
    throw ValidationError("init file '" + cfg.init_file + "' does not exist");

  // building the model validates drift compatibility and resolves K
  const ManifoldModel model = build_from_config(cfg);
  if (!(cfg.m > model.n))
    throw ValidationError("m must exceed the model dimension n = " +
                          std::to_string(model.n));
  const double K_auto = curvature_lower_bound(model, cfg.m).K;
  if (cfg.K_auto) {
    cfg.K = K_auto;
  } else {
    if (cfg.K < K_auto - 1e-12)
      throw ValidationError("K override " + format_double(cfg.K) +
                            " is below the model's curvature bound " +
                            format_double(K_auto) + "; the hypothesis would be false");
    if (cfg.K > K_auto + 1e-12)
      cfg.warnings.push_back("K override " + format_double(cfg.K) +
                             " is weaker than the model's bound " + format_double(K_auto));
  }

  // regime hypotheses, rejected here for the experiments that consume them
  const bool uses_regime = cfg.kind == ExperimentKind::VerifyHarnack ||
                           cfg.kind == ExperimentKind::Asymptotics ||
                           cfg.kind == ExperimentKind::LemmaCheck ||
                           cfg.kind == ExperimentKind::Feasibility;
  if (uses_regime) {
    switch (cfg.regime) {
      case Regime::DL:
        if (!(cfg.a > 0.0)) throw ValidationError("regime dl requires a > 0");
        break;
      case Regime::DL0:
        if (cfg.a != 0.0) throw ValidationError("regime dl0 requires a = 0");
        if (cfg.K != 0.0) throw ValidationError("regime dl0 requires K = 0");
        break;
      case Regime::DG1: {
        if (!(cfg.a > 0.0)) throw ValidationError("regime dg1 requires a > 0");
        if (!(cfg.p > 1.0 + 2.0 / cfg.m))
          throw ValidationError("regime dg1 requires p > 1 + 2/m");
        const double L = l_threshold(cfg.m, cfg.p, cfg.a);
        if (!(cfg.K < L))
          throw ValidationError("regime dg1 requires K in [0, L(m,p,a)); got K = " +
                                format_double(cfg.K) + ", L = " + format_double(L));
        break;
      }
      case Regime::DG2:
        if (!(cfg.a > 0.0)) throw ValidationError("regime dg2 requires a > 0");
        if (!(cfg.p > std::max(4.0 / cfg.m, 1.0) && cfg.p <= 1.0 + 2.0 / cfg.m))
          throw ValidationError("regime dg2 requires max(4/m, 1) < p <= 1 + 2/m");
        if (cfg.K != 0.0) throw ValidationError("regime dg2 requires K = 0");
        break;
      case Regime::EllipticDge:
        break;
    }
  }
  if (cfg.kind == ExperimentKind::Sweep && cfg.p < 1.0 + 2.0 / cfg.m)
    throw ValidationError("sweep requires p >= 1 + 2/m so L(m,p,a) is defined");

  // echo of every resolved value
  auto put = [&](const std::string& k, const std::string& v) { cfg.echo.emplace_back(k, v); };
  put("experiment", to_string(cfg.kind));
  put("model", to_string(cfg.model));
  put("size", format_double(cfg.size_x));
  if (cfg.model == ModelKind::FlatTorus2D)
    put("size_y", format_double(cfg.size_y > 0 ? cfg.size_y : cfg.size_x));
  put("resolution", std::to_string(cfg.resolution));
  if (cfg.model == ModelKind::FlatTorus2D)
    put("resolution_y",
        std::to_string(cfg.resolution_y > 0 ? cfg.resolution_y : cfg.resolution));
  put("drift", cfg.drift);
  put("a", format_double(cfg.a));
  put("b", format_double(cfg.b));
  put("p", format_double(cfg.p));
  put("m", format_double(cfg.m));
  put("K", format_double(cfg.K));
  put("regime", to_string(cfg.regime));
  put("T", format_double(cfg.final_time));
  put("cfl", format_double(cfg.cfl));
  put("dt", cfg.dt > 0 ? format_double(cfg.dt) : "auto");
  put("record_stride", std::to_string(cfg.record_stride));
  put("positivity_floor", format_double(cfg.positivity_floor));
  put("elliptic_tol", format_double(cfg.elliptic_tol));
  switch (cfg.init) {
    case InitKind::Constant: put("init", "constant"); break;
    case InitKind::Sine: put("init", "sine"); break;
    case InitKind::File: put("init", "file:" + cfg.init_file); break;
  }
  put("init_value", format_double(cfg.init_value));
  put("init_amplitude", format_double(cfg.init_amplitude));
  put("init_mode", std::to_string(cfg.init_mode));
  put("R", std::isinf(cfg.ball_radius) ? "inf" : format_double(cfg.ball_radius));
  put("x0", format_double(cfg.x0));
  put("x0_y", format_double(cfg.x0_y));
  put("ensemble", std::to_string(cfg.ensemble));
  put("sweep_points", std::to_string(cfg.sweep_points));
  put("sweep_k_factor", format_double(cfg.sweep_k_factor));
  put("out", cfg.out_dir);
  put("seed", std::to_string(cfg.seed));
  put("threads", std::to_string(cfg.threads));
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  const RawConfig raw = tokenize(text);
  ExperimentConfig cfg;
  for (const auto& [line, key, value] : raw.entries) apply_entry(cfg, line, key, value);
  validate(cfg);
  return cfg;
}

ExperimentConfig revalidate(ExperimentConfig cfg) {
  if (cfg.K_auto) cfg.K = 0.0;
  validate(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.kind = cfg.kind;
  report.config_echo = cfg.echo;

  Session s{cfg,
            build_from_config(cfg),
            EquationParams(cfg.a, cfg.b, cfg.p),
            CurvatureSpec{cfg.m, cfg.K},
            Outputs{fs::path(cfg.out_dir), &report.outputs},
            &report};

  switch (cfg.kind) {
    case ExperimentKind::Simulate: run_simulate(s); break;
    case ExperimentKind::Feasibility: run_feasibility(s); break;
    case ExperimentKind::VerifyHarnack: run_verify_harnack(s); break;
    case ExperimentKind::Elliptic: run_elliptic(s); break;
    case ExperimentKind::Asymptotics: run_asymptotics(s); break;
    case ExperimentKind::LemmaCheck: run_lemma_check(s); break;
    case ExperimentKind::CutoffCheck: run_cutoff_check(s); break;
    case ExperimentKind::Sweep: run_sweep(s); break;
  }

  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();

  ordered_json j;
  j["experiment"] = to_string(cfg.kind);
  j["config"] = ordered_json::object();
  for (const auto& [k, v] : cfg.echo) j["config"][k] = v;
  if (!cfg.warnings.empty()) j["warnings"] = cfg.warnings;
  j["checks"] = ordered_json::array();
  for (const auto& c : report.checks) j["checks"].push_back(check_json(c));
  j["fitted"] = report.fitted;
  j["outputs"] = report.outputs;
  j["all_pass"] = report.all_pass;
  j["wall_ms"] = report.wall_ms;
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "report.json", std::ios::binary);
  out << j.dump(2) << '\n';
  report.outputs.push_back("report.json");

  return report;
}

// ---------------------------------------------------------------------------
// presets

namespace {

const std::vector<Preset> kPresets = {
    {"thm-1-1-harnack",
     "parabolic gradient bound on a drifted circle, ensemble-fitted constant",
     "experiment = verify-harnack\nmodel = circle\nresolution = 256\ndrift = sin:0.2\n"
     "a = 1\nb = -1\np = 2.5\nm = 3\nregime = dl\nT = 10\n"
     "init = sine\ninit_value = 2.0\ninit_amplitude = 1.0\nensemble = 10\n"},
    {"cor-1-2-trapping",
     "solutions started above the equilibrium come back under it",
     "experiment = asymptotics\nmodel = torus\nresolution = 96\n"
     "a = 1\nb = -1\np = 2\nm = 3\nregime = dg1\nT = 20\n"
     "init = sine\ninit_value = 1.3\ninit_amplitude = 0.2\n"},
    {"thm-1-3-a0",
     "a = 0 gradient bound with delta = -1 on the circle",
     "experiment = verify-harnack\nmodel = circle\nresolution = 256\n"
     "a = 0\nb = -1\np = 2\nm = 3\nregime = dl0\nT = 10\n"
     "init = sine\ninit_value = 1.0\ninit_amplitude = 0.3\nensemble = 5\n"},
    {"cor-1-6-decay",
     "a = 0 runs decay like t^(-1/(p-1))",
     "experiment = asymptotics\nmodel = sphere\nsize = 1\nresolution = 128\n"
     "a = 0\nb = -1\np = 2\nm = 3\nregime = dl0\nT = 80\n"
     "init = sine\ninit_value = 0.5\ninit_amplitude = 0.2\ninit_mode = 2\n"},
    {"thm-1-7-dg",
     "delta > 0 gradient bound below the curvature ceiling",
     "experiment = verify-harnack\nmodel = circle\nresolution = 256\n"
     "a = 1\nb = -1\np = 2.5\nm = 2\nregime = dg1\nT = 10\n"
     "init = sine\ninit_value = 2.0\ninit_amplitude = 1.0\nensemble = 5\n"},
    {"cor-1-9-convergence",
     "solutions converge to the equilibrium from below",
     "experiment = asymptotics\nmodel = torus\nresolution = 96\n"
     "a = 1\nb = -1\np = 2\nm = 3\nregime = dg1\nT = 20\n"
     "init = sine\ninit_value = 0.5\ninit_amplitude = 0.3\n"},
    {"cor-1-10-rate",
     "exponential convergence rate matches the linearization",
     "experiment = asymptotics\nmodel = sphere\nsize = 1\nresolution = 128\n"
     "a = 1\nb = -1\np = 3\nm = 3\nregime = dg1\nT = 15\n"
     "init = sine\ninit_value = 0.4\ninit_amplitude = 0.2\n"},
    {"cor-1-11-elliptic",
     "the steady positive solution is the constant equilibrium",
     "experiment = elliptic\nmodel = torus\nresolution = 96\n"
     "a = 1\nb = -1\np = 2\nm = 3\nregime = elliptic\nelliptic_tol = 1e-9\n"
     "init = constant\ninit_value = 0.3\n"},
    {"lemma-2-1-check",
     "discrete residual of the key differential inequality shrinks at O(h^2)",
     "experiment = lemma-check\nmodel = circle\nresolution = 64\n"
     "a = 1\nb = -1\np = 2\nm = 3\nregime = dl\n"
     "init = sine\ninit_value = 0.8\ninit_amplitude = 0.4\n"},
    {"lemma-2-2-cutoff",
     "quartic cutoff profile satisfies the gradient and Laplacian bounds",
     "experiment = cutoff-check\nmodel = circle\nresolution = 256\n"
     "m = 3\nR = 0.78539816339744831\n"},
};

}  // namespace

const std::vector<Preset>& presets() { return kPresets; }

ExperimentConfig preset_config(const std::string& name) {
  for (const auto& p : kPresets)
    if (p.name == name) return parse_config_text(p.config_text);
  throw ValidationError("unknown preset '" + name + "'");
}

}  // namespace harnacklab
