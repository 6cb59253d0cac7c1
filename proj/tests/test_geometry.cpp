#include <doctest.h>

#include <cmath>
#include <numbers>

#include "harnacklab/geometry.hpp"

using namespace harnacklab;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

DriftSpec sin_drift(double amp = 1.0) {
  return DriftSpec::circle([amp](double x) { return amp * std::sin(x); },
                           [amp](double x) { return amp * std::cos(x); });
}

double max_abs(const Array& a) { return a.abs().maxCoeff(); }

}  // namespace

TEST_CASE("build_model validates and samples") {
  const ManifoldModel circle = build_circle(kTau, 64);
  CHECK(circle.num_nodes() == 64);
  CHECK(circle.n == 1);
  CHECK(circle.h[0] == doctest::Approx(kTau / 64));

  const ManifoldModel sphere = build_sphere(1.0, 64);
  CHECK(sphere.num_nodes() == 64);
  CHECK(sphere.n == 2);
  CHECK(sphere.xs[0] == doctest::Approx(0.5 * std::numbers::pi / 64));

  // drift samples equal sin of the node coordinates
  const ManifoldModel drifted = build_circle(kTau, 64, sin_drift());
  for (int i = 0; i < 64; ++i)
    CHECK(drifted.drift.comp[0][i] == doctest::Approx(std::sin(drifted.xs[i])));

  CHECK_THROWS_AS(build_circle(kTau, 7), DomainError);
  CHECK_THROWS_AS(build_circle(-1.0, 64), DomainError);
  CHECK_THROWS_AS(build_model(ModelKind::SphereAxisym, 1.0, 64, sin_drift()), DomainError);
}

TEST_CASE("laplacian annihilates constants to machine precision") {
  for (const ManifoldModel& model :
       {build_circle(kTau, 32), build_model(ModelKind::FlatTorus2D, kTau, 16),
        build_sphere(1.0, 32), build_circle(kTau, 32, sin_drift())}) {
    const ScalarField c = constant_field(model, 3.7);
    CHECK(max_abs(laplacian(model, c).values) == 0.0);
    CHECK(max_abs(drift_laplacian(model, c).values) == 0.0);
    CHECK(max_abs(gradient_sq(model, c).values) == 0.0);
  }
}

TEST_CASE("laplacian eigenfunctions with second-order accuracy") {
  SUBCASE("circle cos") {
    double prev_err = 0.0;
    for (int n : {64, 128}) {
      const ManifoldModel model = build_circle(kTau, n);
      const ScalarField u = make_field(model, [](double x, double) { return std::cos(x); });
      const Array err = laplacian(model, u).values + u.values;
      const double e = max_abs(err);
      CHECK(e < 30.0 / (n * n));
      if (prev_err > 0.0) {
        const double factor = prev_err / e;
        CHECK(factor > 3.5);
        CHECK(factor < 4.5);
      }
      prev_err = e;
    }
  }
  SUBCASE("sphere cos(theta) is a degree-1 harmonic") {
    double prev_err = 0.0;
    for (int n : {64, 128}) {
      const ManifoldModel model = build_sphere(1.0, n);
      const ScalarField u =
          make_field(model, [](double th, double) { return std::cos(th); });
      const Array err = laplacian(model, u).values + 2.0 * u.values;
      const double e = max_abs(err);
      CHECK(e < 30.0 / (n * n));
      if (prev_err > 0.0) {
        const double factor = prev_err / e;
        CHECK(factor > 3.5);
        CHECK(factor < 4.5);
      }
      prev_err = e;
    }
  }
}

TEST_CASE("drift laplacian") {
  const ManifoldModel plain = build_circle(kTau, 128);
  const ScalarField u = make_field(plain, [](double x, double) { return std::sin(x); });
  CHECK(max_abs(drift_laplacian(plain, u).values - laplacian(plain, u).values) == 0.0);

  // constant drift c: sin -> -sin + c cos
  const double c = 0.7;
  const ManifoldModel drifted = build_circle(
      kTau, 128, DriftSpec::circle([c](double) { return c; }, [](double) { return 0.0; }));
  const ScalarField us =
      make_field(drifted, [](double x, double) { return std::sin(x); });
  const Array expect = make_field(drifted, [c](double x, double) {
                         return -std::sin(x) + c * std::cos(x);
                       }).values;
  CHECK(max_abs(drift_laplacian(drifted, us).values - expect) < 1e-3);
}

TEST_CASE("gradient squared") {
  const ManifoldModel model = build_circle(kTau, 128);
  const ScalarField u = make_field(model, [](double x, double) { return std::sin(x); });
  const Array expect =
      make_field(model, [](double x, double) { return std::cos(x) * std::cos(x); }).values;
  CHECK(max_abs(gradient_sq(model, u).values - expect) < 1e-3);

  const ManifoldModel sphere = build_sphere(2.0, 64);
  CHECK(max_abs(gradient_sq(sphere, constant_field(sphere, 5.0)).values) == 0.0);
}

TEST_CASE("trace-free Hessian") {
  const ManifoldModel circle = build_circle(kTau, 64);
  const ScalarField u = make_field(circle, [](double x, double) { return std::sin(3 * x); });
  CHECK(max_abs(hessian_traceless_sq(circle, u).values) == 0.0);

  const ManifoldModel torus = build_model(ModelKind::FlatTorus2D, kTau, 64);
  CHECK(max_abs(hessian_traceless_sq(torus, constant_field(torus, 1.0)).values) == 0.0);

  // sin(x): Hessian diag(-sin x, 0), trace-free norm^2 = sin^2(x)/2
  const ScalarField ux = make_field(torus, [](double x, double) { return std::sin(x); });
  const Array expect = make_field(torus, [](double x, double) {
                         return 0.5 * std::sin(x) * std::sin(x);
                       }).values;
  CHECK(max_abs(hessian_traceless_sq(torus, ux).values - expect) < 5e-3);
}

TEST_CASE("Bakry-Emery curvature of the models") {
  const ManifoldModel torus = build_model(ModelKind::FlatTorus2D, kTau, 16);
  CHECK(max_abs(ricci_vm_pointwise(torus, 3.0).values) == 0.0);
  CHECK(curvature_lower_bound(torus, 4.0).K == 0.0);
  CHECK_THROWS_AS(ricci_vm_pointwise(torus, 2.0), DomainError);

  const ManifoldModel sphere = build_sphere(1.0, 32);
  CHECK(max_abs(ricci_vm_pointwise(sphere, 3.0).values - 1.0) == 0.0);
  CHECK(curvature_lower_bound(sphere, 3.0).K == 0.0);

  // circle with V = sin(x) d/dx at m = 3: lowest eigenvalue -cos - sin^2/2
  const ManifoldModel drifted = build_circle(kTau, 64, sin_drift());
  const Array expect = make_field(drifted, [](double x, double) {
                         return -std::cos(x) - 0.5 * std::sin(x) * std::sin(x);
                       }).values;
  CHECK(max_abs(ricci_vm_pointwise(drifted, 3.0).values - expect) < 1e-14);
  CHECK(curvature_lower_bound(drifted, 3.0).K == doctest::Approx(1.0).epsilon(1e-14));

  // with V = 0 the tensor does not depend on m
  const ManifoldModel plain = build_circle(kTau, 32);
  CHECK(max_abs(ricci_vm_pointwise(plain, 2.0).values -
                ricci_vm_pointwise(plain, 17.5).values) == 0.0);

  // drifted torus, V = (A sin x, 0): eigenvalues of diag(-A cos x - A^2 sin^2 x/(m-2), 0)
  const double A = 0.5, m = 4.0;
  const ManifoldModel dtorus = build_torus(
      kTau, kTau, 32, 32,
      DriftSpec::torus([A](double x, double) { return A * std::sin(x); },
                       [](double, double) { return 0.0; },
                       [A](double x, double) { return A * std::cos(x); },
                       [](double, double) { return 0.0; },
                       [](double, double) { return 0.0; },
                       [](double, double) { return 0.0; }));
  const Array lam = ricci_vm_pointwise(dtorus, m).values;
  const Array expect2 = make_field(dtorus, [&](double x, double) {
                          const double a11 =
                              -A * std::cos(x) - A * A * std::sin(x) * std::sin(x) / (m - 2);
                          return std::min(a11, 0.0);
                        }).values;
  CHECK(max_abs(lam - expect2) < 1e-13);
  CHECK(curvature_lower_bound(dtorus, m).K == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("discrete integration by parts") {
  for (const ManifoldModel& model :
       {build_circle(kTau, 48), build_model(ModelKind::FlatTorus2D, kTau, 24),
        build_sphere(1.0, 48)}) {
    const ScalarField u = make_field(model, [](double x, double y) {
      return std::exp(0.3 * std::cos(x) + 0.1 * std::sin(y));
    });
    const ScalarField v = make_field(model, [](double x, double y) {
      return std::cos(2 * x) + 0.2 * y;
    });
    const double lhs = integrate(model, {laplacian(model, u).values * v.values, false});
    const double rhs_ = integrate(model, {u.values * laplacian(model, v).values, false});
    CHECK(lhs == doctest::Approx(rhs_).epsilon(1e-12));
  }
}

TEST_CASE("discrete Bochner residual is O(h^2)") {
  auto residual = [](const ManifoldModel& model, const CoordFn& fn) {
    const ScalarField f = make_field(model, fn);
    const ScalarField g2 = gradient_sq(model, f);
    const ScalarField lap_f = laplacian(model, f);
    const Array bochner = 0.5 * laplacian(model, g2).values -
                          hessian_sq(model, f).values -
                          gradient_inner(model, f, lap_f).values -
                          ricci_vm_quadratic(model, model.n + 1.5, f).values;
    return max_abs(bochner);
  };

  auto check_decay = [&](ModelKind kind, double size, const CoordFn& fn) {
    double prev = 0.0;
    for (int n : {32, 64, 128}) {
      const ManifoldModel model = build_model(kind, size, n);
      const double r = residual(model, fn);
      if (prev > 0.0) CHECK(prev / r > 3.0);
      prev = r;
    }
  };

  // V = 0 models: Ric_V^m(grad f, grad f) reduces to Ric(grad f, grad f)
  check_decay(ModelKind::Circle, kTau,
              [](double x, double) { return std::sin(x) + 0.3 * std::cos(2 * x); });
  check_decay(ModelKind::FlatTorus2D, kTau,
              [](double x, double y) { return std::sin(x) * std::cos(y); });
  check_decay(ModelKind::SphereAxisym, 1.0,
              [](double th, double) { return std::cos(th) + 0.2 * std::cos(2 * th); });
}

TEST_CASE("distance and quadrature") {
  const ManifoldModel circle = build_circle(kTau, 64);
  const Array d = distance_from(circle, 0.0);
  CHECK(d.maxCoeff() == doctest::Approx(std::numbers::pi).epsilon(0.05));
  CHECK(integrate(circle, constant_field(circle, 1.0)) == doctest::Approx(kTau));

  const ManifoldModel sphere = build_sphere(1.0, 64);
  CHECK(integrate(sphere, constant_field(sphere, 1.0)) ==
        doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-3));
  CHECK_THROWS_AS(distance_from(sphere, 1.0), DomainError);

  const ScalarField bad{Array::Zero(10), false};
  CHECK_THROWS_AS(laplacian(circle, bad), ShapeMismatch);
}
