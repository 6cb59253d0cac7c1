#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>

#include "harnacklab/errors.hpp"

namespace harnacklab {

using Array = Eigen::ArrayXd;

enum class ModelKind { Circle, FlatTorus2D, SphereAxisym };

std::string to_string(ModelKind kind);

/// Scalar function of model coordinates. 1D models ignore the second argument.
using CoordFn = std::function<double(double, double)>;

/// Analytic drift field V given by component callables together with their
/// coordinate derivatives. The derivatives feed the closed-form Bakry-Emery
/// curvature of the drifted model, so curvature bounds are exact inputs
/// rather than finite-difference estimates.
struct DriftSpec {
  bool zero = true;
  std::array<CoordFn, 2> component{};                  // V^i(x, y)
  std::array<std::array<CoordFn, 2>, 2> derivative{};  // dV^i/dcoord_j

  static DriftSpec none();
  static DriftSpec circle(std::function<double(double)> v,
                          std::function<double(double)> dv);
  static DriftSpec torus(CoordFn vx, CoordFn vy, CoordFn dvx_dx, CoordFn dvx_dy,
                         CoordFn dvy_dx, CoordFn dvy_dy);
};

/// Drift samples on the grid: component values plus Jacobian entries.
struct DriftField {
  bool zero = true;
  std::array<Array, 2> comp{};
  std::array<std::array<Array, 2>, 2> jac{};
};

/// Real values on a model's grid. `positive` marks fields that have been
/// checked strictly positive (required before logarithms are taken).
struct ScalarField {
  Array values;
  bool positive = false;

  Eigen::Index size() const { return values.size(); }
};

/// Bakry-Emery dimension m and curvature lower-bound magnitude K,
/// as in the hypothesis Ric_V^m >= -K g with m > n and K >= 0.
struct CurvatureSpec {
  double m = 0.0;
  double K = 0.0;
};

/// A discretized model geometry: uniform grid, closed-form metric data,
/// quadrature weights, and a sampled drift field.
///
/// Circle       arclength coordinate x in [0, circumference), periodic.
/// FlatTorus2D  coordinates (x, y) in [0, Lx) x [0, Ly), periodic.
/// SphereAxisym colatitude theta in (0, pi) on a cell-centered grid
///              (theta_j = (j+1/2) h), fields axisymmetric, even
///              reflection across both poles.
struct ManifoldModel {
  ModelKind kind = ModelKind::Circle;
  int n = 1;                         // intrinsic dimension
  DriftSpec spec;                    // kept so the model can be rebuilt finer
  std::array<double, 2> size{};      // circle: {C,0}; torus: {Lx,Ly}; sphere: {r,0}
  std::array<int, 2> res{};          // grid nodes per dimension ({N,1} in 1D)
  std::array<double, 2> h{};         // coordinate spacing per dimension
  Array xs, ys;                      // node coordinates, flattened (i + nx*j)
  Array weights;                     // quadrature weights per node
  Array sin_theta, cot_theta;        // sphere only, at cell centers
  Array sin_face_plus, sin_face_minus;  // sphere only, at cell faces
  DriftField drift;

  Eigen::Index num_nodes() const { return xs.size(); }
  int idx(int i, int j) const { return i + res[0] * j; }
  /// Smallest physical grid spacing (used by CFL restrictions).
  double min_spacing() const;
  /// Largest radius R with B(x0, 3R/2) inside the injectivity scale.
  double injectivity_scale() const;
  /// Largest distance between two points of the model.
  double diameter() const;
};

ManifoldModel build_circle(double circumference, int resolution,
                           const DriftSpec& drift = DriftSpec::none());
ManifoldModel build_torus(double lx, double ly, int nx, int ny,
                          const DriftSpec& drift = DriftSpec::none());
ManifoldModel build_sphere(double radius, int resolution);

/// Dispatching builder; FlatTorus2D becomes the square torus [0,size)^2.
ManifoldModel build_model(ModelKind kind, double size, int resolution,
                          const DriftSpec& drift = DriftSpec::none());

ScalarField constant_field(const ManifoldModel& model, double value);
ScalarField make_field(const ManifoldModel& model, const CoordFn& fn);
/// Validates strict positivity and returns the field with the flag set.
ScalarField mark_positive(ScalarField field);
void check_shape(const ManifoldModel& model, const ScalarField& field);

// Discrete differential operators, centered second order on the uniform grid.
ScalarField laplacian(const ManifoldModel& model, const ScalarField& field);
ScalarField drift_laplacian(const ManifoldModel& model, const ScalarField& field);
ScalarField gradient_sq(const ManifoldModel& model, const ScalarField& field);
/// Pointwise metric inner product of two gradients, <grad a, grad b>.
ScalarField gradient_inner(const ManifoldModel& model, const ScalarField& a,
                           const ScalarField& b);
/// Directional derivative Vf of a field along the model's drift.
ScalarField drift_derivative(const ManifoldModel& model, const ScalarField& field);
/// Squared norm of the trace-free covariant Hessian; identically 0 when n = 1.
ScalarField hessian_traceless_sq(const ManifoldModel& model, const ScalarField& field);
/// Squared norm of the full covariant Hessian.
ScalarField hessian_sq(const ManifoldModel& model, const ScalarField& field);

/// Pointwise smallest eigenvalue of Ric_V^m = Ric - (1/2) L_V g - (m-n)^-1 V# x V#.
ScalarField ricci_vm_pointwise(const ManifoldModel& model, double m);
/// Quadratic form Ric_V^m(grad f, grad f), pointwise.
ScalarField ricci_vm_quadratic(const ManifoldModel& model, double m,
                               const ScalarField& f);
/// K = max(0, -min over the grid of the smallest Ric_V^m eigenvalue).
CurvatureSpec curvature_lower_bound(const ManifoldModel& model, double m);

/// Geodesic distance from the point x0 = (x, y) to every node. On the
/// sphere only the north pole (colatitude 0) is supported, so axisymmetric
/// profiles stay axisymmetric.
Array distance_from(const ManifoldModel& model, double x0, double y0 = 0.0);

/// Quadrature of the field over the model.
double integrate(const ManifoldModel& model, const ScalarField& field);

/// Rebuilds the model at a different resolution (same geometry and drift).
ManifoldModel rebuild(const ManifoldModel& model, int nx, int ny = 0);

namespace detail {
// Allocation-free kernels for the time stepper's inner loop.
void laplacian_into(const ManifoldModel& model, const Array& u, Array& out);
void add_drift_into(const ManifoldModel& model, const Array& u, Array& out);  // out += V.grad(u)
}  // namespace detail

}  // namespace harnacklab
