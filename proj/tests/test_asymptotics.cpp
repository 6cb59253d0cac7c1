#include <doctest.h>

#include <cmath>
#include <numbers>

#include "harnacklab/asymptotics.hpp"

using namespace harnacklab;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

}  // namespace

TEST_CASE("closed-form homogeneous solution") {
  CHECK(ode_closed_form(EquationParams(1, -1, 2), 0.5, std::log(3.0)) ==
        doctest::Approx(0.75).epsilon(1e-14));
  CHECK(ode_closed_form(EquationParams(0, -1, 2), 1.0, 1.0) ==
        doctest::Approx(0.5).epsilon(1e-14));
  for (double t : {0.0, 0.3, 5.0})
    CHECK(ode_closed_form(EquationParams(1, -1, 3), 1.0, t) == doctest::Approx(1.0));
  CHECK(ode_closed_form(EquationParams(0.5, 0, 2), 2.0, 1.0) ==
        doctest::Approx(2.0 * std::exp(0.5)));
  CHECK_THROWS_AS(ode_closed_form(EquationParams(1, -1, 2), -0.5), DomainError);
}

TEST_CASE("closed form satisfies the equation under differentiation") {
  for (const EquationParams& eq :
       {EquationParams(1, -1, 2), EquationParams(2, -0.5, 3), EquationParams(0, -1, 2),
        EquationParams(1, -1, 2.5)}) {
    for (double u0 : {0.2, 0.9, 1.7}) {
      const OdeSolution sol = ode_closed_form(eq, u0);
      for (double t = 0.05; t <= 10.0; t += 0.5) {
        const double eps = 1e-6;
        const double du = (sol(t + eps) - sol(t - eps)) / (2.0 * eps);
        const double u = sol(t);
        const double f = eq.a * u + eq.b * std::pow(u, eq.p);
        CHECK(std::abs(du - f) <= 1e-6 * (1.0 + std::abs(du)));
      }
    }
  }

  // Richardson-extrapolated differentiation pins the canonical cases to
  // rounding level
  auto d6 = [](const OdeSolution& sol, double t, double e) {
    auto d4 = [&](double h) {
      return (8.0 * (sol(t + h) - sol(t - h)) - (sol(t + 2 * h) - sol(t - 2 * h))) /
             (12.0 * h);
    };
    return (16.0 * d4(0.5 * e) - d4(e)) / 15.0;
  };
  for (const EquationParams& eq : {EquationParams(1, -1, 2), EquationParams(0, -1, 2)}) {
    for (double u0 : {0.5, 1.5}) {
      const OdeSolution sol = ode_closed_form(eq, u0);
      for (double t = 0.1; t <= 10.0; t += 0.7) {
        const double u = sol(t);
        const double f = eq.a * u + eq.b * std::pow(u, eq.p);
        CHECK(std::abs(d6(sol, t, 2e-3) - f) < 1e-12);
      }
    }
  }
}

TEST_CASE("closed form cross-checked once against a Runge-Kutta reference") {
  const EquationParams eq(1, -1, 2.4);
  const double u0 = 0.3;
  const OdeSolution sol = ode_closed_form(eq, u0);
  // plain RK4 with a tiny step, used only to certify the formula
  double u = u0, t = 0.0;
  const double dt = 1e-4;
  auto f = [&](double v) { return eq.a * v + eq.b * std::pow(v, eq.p); };
  for (int s = 0; s < 20000; ++s) {
    const double k1 = f(u);
    const double k2 = f(u + 0.5 * dt * k1);
    const double k3 = f(u + 0.5 * dt * k2);
    const double k4 = f(u + dt * k3);
    u += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += dt;
  }
  CHECK(u == doctest::Approx(sol(t)).epsilon(1e-10));
}

TEST_CASE("comparison preserves order and converges to the equilibrium") {
  const EquationParams eq(1, -1, 2);
  const OdeSolution lo = ode_closed_form(eq, 0.2);
  const OdeSolution hi = ode_closed_form(eq, 0.9);
  for (double t = 0.0; t <= 10.0; t += 0.25) CHECK(lo(t) <= hi(t) + 1e-15);

  // every orbit approaches u*, eventually within the linearization envelope
  for (double u0 : {0.05, 0.5, 2.5}) {
    const OdeSolution sol = ode_closed_form(eq, u0);
    const double d20 = std::abs(sol(20.0) - 1.0);
    const double d10 = std::abs(sol(10.0) - 1.0);
    CHECK(d20 < 1e-7);
    CHECK(d20 <= std::exp(-0.5 * (eq.p - 1.0) * eq.a * 10.0) * d10 + 1e-15);
  }
}

TEST_CASE("comparison Cauchy problem") {
  SUBCASE("delta = 0 gives the separable power decay") {
    const double C = 1.5, t0 = 1.0, w0 = 2.0, t1 = 8.0;
    const OdeTrajectory traj = ode_comparison_w(0.0, C, 1, -1, 2, t0, w0, t1);
    CHECK(traj.behavior != OdeBehavior::BlowUp);
    const double expect = w0 * std::pow(t0 / t1, C);
    CHECK(traj.values.back() == doctest::Approx(expect).epsilon(1e-6));
  }
  SUBCASE("above the equilibrium the absolute-value term forces blow-up") {
    const OdeTrajectory traj = ode_comparison_w(0.5, 0.01, 1, -1, 2, 10.0, 1.5, 200.0);
    CHECK(traj.behavior == OdeBehavior::BlowUp);
    CHECK(traj.blowup_time > 10.0);
  }
  SUBCASE("below the equilibrium with large t_start the orbit climbs to u*") {
    const OdeTrajectory traj = ode_comparison_w(0.5, 0.01, 1, -1, 2, 50.0, 0.4, 400.0);
    CHECK(traj.behavior == OdeBehavior::ConvergesToEquilibrium);
  }
}

TEST_CASE("exponential rate fit") {
  SUBCASE("synthetic exact exponential") {
    std::vector<double> t, v;
    for (int i = 0; i <= 200; ++i) {
      t.push_back(0.05 * i);
      v.push_back(1.0 - std::exp(-2.0 * 0.05 * i));
    }
    const RateFit fit = fit_exponential_rate(t, v, 1.0);
    CHECK(fit.rate == doctest::Approx(2.0).epsilon(1e-6));
    CHECK_FALSE(fit.low_confidence);
  }
  SUBCASE("homogeneous logistic toward u*") {
    const EquationParams eq(1, -1, 2);
    const OdeSolution sol = ode_closed_form(eq, 0.5);
    std::vector<double> t, v;
    for (int i = 0; i <= 400; ++i) {
      t.push_back(0.05 * i);
      v.push_back(sol(t.back()));
    }
    const RateFit fit = fit_exponential_rate(t, v, 1.0);
    CHECK(std::abs(fit.rate - 1.0) < 0.02);
  }
  SUBCASE("non-decreasing distance is rejected") {
    std::vector<double> t, v;
    for (int i = 0; i <= 50; ++i) {
      t.push_back(0.1 * i);
      v.push_back(1.0 + 0.1 * i);  // running away from the target 0
    }
    CHECK_THROWS_AS(fit_exponential_rate(t, v, 0.0), NonConvergent);
  }
  SUBCASE("short windows are flagged") {
    std::vector<double> t, v;
    for (int i = 0; i <= 40; ++i) {
      t.push_back(0.01 * i);
      v.push_back(std::exp(-2.0 * 0.01 * i));
    }
    const RateFit fit = fit_exponential_rate(t, v, 0.0);
    CHECK(fit.low_confidence);
  }
}

TEST_CASE("power exponent fit") {
  SUBCASE("u = (1+t)^-1") {
    std::vector<double> t, v;
    for (int i = 0; i <= 600; ++i) {
      const double ti = std::pow(10.0, 5.0 * i / 600.0);  // log-spaced to 1e5
      t.push_back(ti);
      v.push_back(1.0 / (1.0 + ti));
    }
    const RateFit fit = fit_power_exponent(t, v);
    CHECK(std::abs(fit.rate - (-1.0)) < 1e-3);
  }
  SUBCASE("u = (1+2t)^-1/2") {
    std::vector<double> t, v;
    for (int i = 0; i <= 600; ++i) {
      const double ti = std::pow(10.0, 5.0 * i / 600.0);
      t.push_back(ti);
      v.push_back(std::pow(1.0 + 2.0 * ti, -0.5));
    }
    const RateFit fit = fit_power_exponent(t, v);
    CHECK(std::abs(fit.rate - (-0.5)) < 1e-3);
  }
  SUBCASE("constant series is rejected") {
    std::vector<double> t, v;
    for (int i = 1; i <= 50; ++i) {
      t.push_back(i);
      v.push_back(3.0);
    }
    CHECK_THROWS_AS(fit_power_exponent(t, v), NonConvergent);
  }
}

TEST_CASE("long-time suite on recorded runs") {
  SolveConfig cfg;

  SUBCASE("logistic torus run passes trapping, convergence and the inequality") {
    const ManifoldModel model = build_model(ModelKind::FlatTorus2D, kTau, 32);
    const EquationParams eq(1, -1, 2);
    cfg.final_time = 20.0;
    const ScalarField u0 = mark_positive(
        make_field(model, [](double x, double) { return 0.5 + 0.3 * std::sin(x); }));
    const Trajectory traj = solve_parabolic(model, u0, eq, cfg);
    const HarnackParams hp = feasibility_search(Regime::DG1, 3.0, 2.0, 1.0, 0.0);
    const SuiteReport rep = check_liouville_suite(traj, CurvatureSpec{3.0, 0.0}, hp);
    for (const auto& c : rep.checks) {
      if (!c.ran) continue;
      INFO(c.name, " statistic=", c.statistic, " detail=", c.detail);
      CHECK(c.pass);
    }
    CHECK(std::abs(rep.fitted_rate - 1.0) <= 0.1);
  }
  SUBCASE("a = 0 circle run decays with the power exponent") {
    const ManifoldModel model = build_circle(kTau, 96);
    const EquationParams eq(0, -1, 2);
    cfg.final_time = 80.0;
    const ScalarField u0 = mark_positive(
        make_field(model, [](double x, double) { return 0.5 + 0.2 * std::sin(x); }));
    const Trajectory traj = solve_parabolic(model, u0, eq, cfg);
    const HarnackParams hp = feasibility_search(Regime::DL0, 3.0, 2.0, 0.0, 0.0);
    const SuiteReport rep = check_liouville_suite(traj, CurvatureSpec{3.0, 0.0}, hp);
    bool saw_power = false;
    for (const auto& c : rep.checks) {
      if (c.name == "power_decay") {
        saw_power = c.ran;
        CHECK(c.pass);
      }
    }
    CHECK(saw_power);
    CHECK(std::abs(rep.fitted_exponent - (-1.0)) < 0.1);
  }
  SUBCASE("equilibrium initial data passes trivially") {
    const ManifoldModel model = build_circle(kTau, 32);
    const EquationParams eq(1, -1, 2);
    cfg.final_time = 3.0;
    const Trajectory traj = solve_parabolic(model, constant_field(model, 1.0), eq, cfg);
    const HarnackParams hp = feasibility_search(Regime::DL, 3.0, 2.0, 1.0, 0.0);
    const SuiteReport rep = check_liouville_suite(traj, CurvatureSpec{3.0, 0.0}, hp);
    CHECK(rep.all_pass);
  }
}
