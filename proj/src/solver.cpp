#include "harnacklab/solver.hpp"

#include <algorithm>
#include <cmath>

namespace harnacklab {

namespace {

// u^p with fast paths for the common exponents.
inline double pow_p(double u, double p) {
  if (p == 2.0) return u * u;
  if (p == 3.0) return u * u * u;
  return std::pow(u, p);
}

void rhs_into(const ManifoldModel& model, const Array& u, const EquationParams& params,
              Array& out) {
  detail::laplacian_into(model, u, out);
  detail::add_drift_into(model, u, out);
  const double a = params.a, b = params.b, p = params.p;
  for (Eigen::Index k = 0; k < u.size(); ++k)
    out[k] += a * u[k] + b * pow_p(u[k], p);
}

void check_state(const Array& u, double floor, long step, double t) {
  if (!u.allFinite())
    throw StabilityViolation("NaN/Inf detected at step " + std::to_string(step) +
                             ", t = " + std::to_string(t));
  const double lo = u.minCoeff();
  if (lo < floor)
    throw PositivityLost("solution reached " + std::to_string(lo) +
                         " (floor " + std::to_string(floor) + ") at t = " +
                         std::to_string(t));
}

struct Stepper {
  Array k1, k2, k3, k4, tmp;

  explicit Stepper(Eigen::Index n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}

  void rk4(const ManifoldModel& model, const EquationParams& params, Array& u, double dt) {
    rhs_into(model, u, params, k1);
    tmp = u + 0.5 * dt * k1;
    rhs_into(model, tmp, params, k2);
    tmp = u + 0.5 * dt * k2;
    rhs_into(model, tmp, params, k3);
    tmp = u + dt * k3;
    rhs_into(model, tmp, params, k4);
    u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

long pick_stride(long steps, int requested) {
  if (requested > 0) return requested;
  return std::max<long>(1, steps / 400);
}

}  // namespace

EquationParams::EquationParams(double a_, double b_, double p_) : a(a_), b(b_), p(p_) {
  if (!(a >= 0.0)) throw DomainError("reaction rate a must be >= 0");
  if (!(b <= 0.0)) throw DomainError("saturation coefficient b must be <= 0");
  if (!(p > 1.0)) throw DomainError("nonlinearity exponent p must be > 1");
}

double EquationParams::equilibrium() const {
  if (!has_equilibrium())
    throw DomainError("equilibrium (-a/b)^(1/(p-1)) needs a > 0 and b < 0");
  return std::pow(-a / b, 1.0 / (p - 1.0));
}

ScalarField rhs(const ManifoldModel& model, const ScalarField& field,
                const EquationParams& params) {
  check_shape(model, field);
  Array out(field.size());
  rhs_into(model, field.values, params, out);
  return {std::move(out), false};
}

double stable_dt(const ManifoldModel& model, const SolveConfig& config) {
  const double cfl = std::min(config.cfl, 1.0);
  const double h = model.min_spacing();
  return cfl * h * h / (2.0 * model.n);
}

Trajectory solve_parabolic(const ManifoldModel& model, const ScalarField& initial,
                           const EquationParams& params, const SolveConfig& config) {
  check_shape(model, initial);
  if (!(initial.values.minCoeff() > 0.0))
    throw NonPositiveField("initial data must be strictly positive");
  if (!(config.positivity_floor > 0.0))
    throw DomainError("positivity floor must be positive");

  double dt = config.dt;
  long steps;
  if (dt > 0.0) {
    steps = std::max<long>(1, std::lround(std::ceil(config.final_time / dt - 1e-9)));
  } else {
    // CFL-limited step, trimmed so the run lands exactly on final_time;
    // the reaction time scale rarely binds at desk resolutions.
    double limit = stable_dt(model, config);
    const double umax = std::max(initial.values.maxCoeff(),
                                 params.has_equilibrium() ? params.equilibrium() : 0.0);
    const double reaction = params.a + -params.b * params.p * pow_p(umax, params.p - 1.0);
    if (reaction > 0.0) limit = std::min(limit, std::min(config.cfl, 1.0) / reaction);
    steps = std::max<long>(1, std::lround(std::ceil(config.final_time / limit - 1e-9)));
    dt = config.final_time / steps;
  }
  if (steps > config.max_steps)
    throw DomainError("step budget exceeded: run would need " + std::to_string(steps) +
                      " steps");

  Trajectory traj;
  traj.params = params;
  traj.model = &model;
  traj.dt = dt;
  traj.steps = steps;

  const long stride = pick_stride(steps, config.record_stride);
  Array u = initial.values;
  Stepper stepper(u.size());

  traj.times.push_back(0.0);
  traj.fields.push_back(mark_positive(ScalarField{u, false}));

  for (long s = 1; s <= steps; ++s) {
    stepper.rk4(model, params, u, dt);
    const double t = static_cast<double>(s) * dt;
    check_state(u, config.positivity_floor, s, t);
    if (s % stride == 0 || s == steps) {
      traj.times.push_back(t);
      traj.fields.push_back(mark_positive(ScalarField{u, false}));
    }
  }
  return traj;
}

Trajectory continue_parabolic(const Trajectory& start, double extra_time) {
  if (start.fields.empty() || start.model == nullptr)
    throw DomainError("cannot continue an empty trajectory");
  SolveConfig config;
  config.dt = start.dt;
  config.final_time = extra_time;
  Trajectory tail = solve_parabolic(*start.model, start.fields.back(), start.params, config);
  Trajectory merged = start;
  const double t0 = start.times.back();
  for (std::size_t i = 1; i < tail.times.size(); ++i) {
    merged.times.push_back(t0 + tail.times[i]);
    merged.fields.push_back(tail.fields[i]);
  }
  merged.steps += tail.steps;
  return merged;
}

ScalarField solve_elliptic(const ManifoldModel& model, const EquationParams& params,
                           const SolveConfig& config, const ScalarField& initial_guess) {
  check_shape(model, initial_guess);
  if (!(initial_guess.values.minCoeff() > 0.0))
    throw NonPositiveField("initial guess must be strictly positive");

  SolveConfig cfg = config;
  cfg.dt = 0.0;
  const double dt = stable_dt(model, cfg);
  Array u = initial_guess.values;
  Array r(u.size());

  rhs_into(model, u, params, r);
  if (r.abs().maxCoeff() < config.elliptic_tol) return mark_positive(ScalarField{u, false});

  const long check_every = 20;
  for (long it = 1; it <= config.elliptic_max_iters; ++it) {
    // forward-Euler pseudo-time march; the studied regimes are
    // exponentially attracted to the constant steady state
    u += dt * r;
    if (it % check_every == 0) check_state(u, config.positivity_floor, it, it * dt);
    rhs_into(model, u, params, r);
    if (r.abs().maxCoeff() < config.elliptic_tol) {
      check_state(u, config.positivity_floor, it, it * dt);
      return mark_positive(ScalarField{u, false});
    }
  }
  throw NoConvergence("elliptic marching did not reach tolerance " +
                      std::to_string(config.elliptic_tol) + " within " +
                      std::to_string(config.elliptic_max_iters) + " iterations");
}

ConvergenceReport manufactured_convergence(const ManifoldModel& base,
                                           const EquationParams& params,
                                           const ManufacturedSolution& exact,
                                           double final_time, int rungs, double cfl) {
  ConvergenceReport report;
  for (int r = 0; r < rungs; ++r) {
    const int nx = base.res[0] << r;
    const int ny = base.res[1] > 1 ? (base.res[1] << r) : 0;
    const ManifoldModel model = rebuild(base, nx, ny);
    const auto nn = model.num_nodes();

    auto sample = [&](const std::function<double(double, double, double)>& fn, double t,
                      Array& out) {
      for (Eigen::Index k = 0; k < nn; ++k) out[k] = fn(model.xs[k], model.ys[k], t);
    };

    // forcing that makes `exact` solve the forced equation
    Array gx(nn), gy(nn), work(nn);
    auto forcing_into = [&](double t, Array& g) {
      for (Eigen::Index k = 0; k < nn; ++k) {
        const double x = model.xs[k], y = model.ys[k];
        const double ue = exact.u(x, y, t);
        double drift = 0.0;
        if (!model.drift.zero) {
          drift = model.drift.comp[0][k] * exact.grad_x(x, y, t);
          if (model.n == 2 && exact.grad_y)
            drift += model.drift.comp[1][k] * exact.grad_y(x, y, t);
        }
        g[k] = exact.u_t(x, y, t) - exact.lap(x, y, t) - drift - params.a * ue -
               params.b * pow_p(ue, params.p);
      }
    };

    SolveConfig cfg;
    cfg.cfl = cfl;
    const double dt0 = stable_dt(model, cfg);
    const long steps = std::max<long>(1, std::lround(std::ceil(final_time / dt0 - 1e-9)));
    const double dt = final_time / steps;

    Array u(nn);
    sample(exact.u, 0.0, u);
    Array k1(nn), k2(nn), k3(nn), k4(nn), tmp(nn), g(nn);
    auto forced_rhs = [&](const Array& v, double t, Array& out) {
      rhs_into(model, v, params, out);
      forcing_into(t, g);
      out += g;
    };
    for (long s = 0; s < steps; ++s) {
      const double t = s * dt;
      forced_rhs(u, t, k1);
      tmp = u + 0.5 * dt * k1;
      forced_rhs(tmp, t + 0.5 * dt, k2);
      tmp = u + 0.5 * dt * k2;
      forced_rhs(tmp, t + 0.5 * dt, k3);
      tmp = u + dt * k3;
      forced_rhs(tmp, t + dt, k4);
      u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    Array ue(nn);
    sample(exact.u, final_time, ue);
    report.resolutions.push_back(nx);
    report.errors.push_back((u - ue).abs().maxCoeff());
  }

  // least-squares slope of log error against log h
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < report.errors.size(); ++i) {
    if (report.errors[i] <= 0.0) continue;
    const double lx = std::log(1.0 / report.resolutions[i]);
    const double ly = std::log(report.errors[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    ++cnt;
  }
  if (cnt >= 2) report.fitted_order = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  return report;
}

}  // namespace harnacklab
