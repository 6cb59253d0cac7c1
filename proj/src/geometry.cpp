#include "harnacklab/geometry.hpp"

#include <cmath>
#include <numbers>

namespace harnacklab {

namespace {

constexpr double kPi = std::numbers::pi;

int wrap(int i, int n) { return (i % n + n) % n; }

// Even reflection across both poles for the sphere's cell-centered grid.
int reflect(int j, int n) {
  if (j < 0) return -1 - j;
  if (j >= n) return 2 * n - 1 - j;
  return j;
}

double wrap_delta(double d, double period) {
  d = std::fmod(d, period);
  if (d > 0.5 * period) d -= period;
  if (d < -0.5 * period) d += period;
  return d;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Circle: return "circle";
    case ModelKind::FlatTorus2D: return "torus";
    case ModelKind::SphereAxisym: return "sphere";
  }
  return "?";
}

DriftSpec DriftSpec::none() { return DriftSpec{}; }

DriftSpec DriftSpec::circle(std::function<double(double)> v,
                            std::function<double(double)> dv) {
  DriftSpec spec;
  spec.zero = false;
  spec.component[0] = [v](double x, double) { return v(x); };
  spec.derivative[0][0] = [dv](double x, double) { return dv(x); };
  return spec;
}

DriftSpec DriftSpec::torus(CoordFn vx, CoordFn vy, CoordFn dvx_dx, CoordFn dvx_dy,
                           CoordFn dvy_dx, CoordFn dvy_dy) {
  DriftSpec spec;
  spec.zero = false;
  spec.component = {std::move(vx), std::move(vy)};
  spec.derivative[0] = {std::move(dvx_dx), std::move(dvx_dy)};
  spec.derivative[1] = {std::move(dvy_dx), std::move(dvy_dy)};
  return spec;
}

double ManifoldModel::min_spacing() const {
  switch (kind) {
    case ModelKind::Circle: return h[0];
    case ModelKind::FlatTorus2D: return std::min(h[0], h[1]);
    case ModelKind::SphereAxisym: return size[0] * h[0];
  }
  return h[0];
}

double ManifoldModel::injectivity_scale() const {
  switch (kind) {
    case ModelKind::Circle: return 0.5 * size[0];
    case ModelKind::FlatTorus2D: return 0.5 * std::min(size[0], size[1]);
    case ModelKind::SphereAxisym: return kPi * size[0];
  }
  return 0.0;
}

double ManifoldModel::diameter() const {
  switch (kind) {
    case ModelKind::Circle: return 0.5 * size[0];
    case ModelKind::FlatTorus2D: return 0.5 * std::hypot(size[0], size[1]);
    case ModelKind::SphereAxisym: return kPi * size[0];
  }
  return 0.0;
}

namespace {

void sample_drift(ManifoldModel& model, const DriftSpec& spec) {
  model.drift.zero = spec.zero;
  if (spec.zero) return;
  const auto nn = model.num_nodes();
  for (int c = 0; c < model.n; ++c) {
    model.drift.comp[c] = Array::Zero(nn);
    if (spec.component[c]) {
      for (Eigen::Index k = 0; k < nn; ++k)
        model.drift.comp[c][k] = spec.component[c](model.xs[k], model.ys[k]);
    }
    for (int d = 0; d < model.n; ++d) {
      model.drift.jac[c][d] = Array::Zero(nn);
      if (spec.derivative[c][d]) {
        for (Eigen::Index k = 0; k < nn; ++k)
          model.drift.jac[c][d][k] = spec.derivative[c][d](model.xs[k], model.ys[k]);
      }
    }
  }
}

}  // namespace

ManifoldModel build_circle(double circumference, int resolution, const DriftSpec& drift) {
  if (circumference <= 0.0) throw DomainError("circle circumference must be positive");
  if (resolution < 8) throw DomainError("grid resolution must be at least 8 per dimension");
  ManifoldModel model;
  model.kind = ModelKind::Circle;
  model.n = 1;
  model.spec = drift;
  model.size = {circumference, 0.0};
  model.res = {resolution, 1};
  model.h = {circumference / resolution, 0.0};
  model.xs = Array::Zero(resolution);
  model.ys = Array::Zero(resolution);
  for (int i = 0; i < resolution; ++i) model.xs[i] = i * model.h[0];
  model.weights = Array::Constant(resolution, model.h[0]);
  sample_drift(model, drift);
  return model;
}

ManifoldModel build_torus(double lx, double ly, int nx, int ny, const DriftSpec& drift) {
  if (lx <= 0.0 || ly <= 0.0) throw DomainError("torus edge lengths must be positive");
  if (nx < 8 || ny < 8) throw DomainError("grid resolution must be at least 8 per dimension");
  ManifoldModel model;
  model.kind = ModelKind::FlatTorus2D;
  model.n = 2;
  model.spec = drift;
  model.size = {lx, ly};
  model.res = {nx, ny};
  model.h = {lx / nx, ly / ny};
  const Eigen::Index nn = static_cast<Eigen::Index>(nx) * ny;
  model.xs = Array::Zero(nn);
  model.ys = Array::Zero(nn);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      model.xs[model.idx(i, j)] = i * model.h[0];
      model.ys[model.idx(i, j)] = j * model.h[1];
    }
  model.weights = Array::Constant(nn, model.h[0] * model.h[1]);
  sample_drift(model, drift);
  return model;
}

ManifoldModel build_sphere(double radius, int resolution) {
  if (radius <= 0.0) throw DomainError("sphere radius must be positive");
  if (resolution < 8) throw DomainError("grid resolution must be at least 8 per dimension");
  ManifoldModel model;
  model.kind = ModelKind::SphereAxisym;
  model.n = 2;
  model.size = {radius, 0.0};
  model.res = {resolution, 1};
  model.h = {kPi / resolution, 0.0};
  model.xs = Array::Zero(resolution);
  model.ys = Array::Zero(resolution);
  model.sin_theta = Array::Zero(resolution);
  model.cot_theta = Array::Zero(resolution);
  model.sin_face_plus = Array::Zero(resolution);
  model.sin_face_minus = Array::Zero(resolution);
  model.weights = Array::Zero(resolution);
  for (int j = 0; j < resolution; ++j) {
    const double theta = (j + 0.5) * model.h[0];
    model.xs[j] = theta;
    model.sin_theta[j] = std::sin(theta);
    model.cot_theta[j] = std::cos(theta) / model.sin_theta[j];
    model.sin_face_minus[j] = std::sin(j * model.h[0]);
    model.sin_face_plus[j] = std::sin((j + 1) * model.h[0]);
    model.weights[j] = 2.0 * kPi * radius * radius * model.sin_theta[j] * model.h[0];
  }
  // pole faces carry exactly zero flux
  model.sin_face_minus[0] = 0.0;
  model.sin_face_plus[resolution - 1] = 0.0;
  return model;
}

ManifoldModel build_model(ModelKind kind, double size, int resolution,
                          const DriftSpec& drift) {
  switch (kind) {
    case ModelKind::Circle: return build_circle(size, resolution, drift);
    case ModelKind::FlatTorus2D: return build_torus(size, size, resolution, resolution, drift);
    case ModelKind::SphereAxisym:
      if (!drift.zero) throw DomainError("SphereAxisym supports only V = 0");
      return build_sphere(size, resolution);
  }
  throw DomainError("unknown model kind");
}

ScalarField constant_field(const ManifoldModel& model, double value) {
  ScalarField f;
  f.values = Array::Constant(model.num_nodes(), value);
  f.positive = value > 0.0;
  return f;
}

ScalarField make_field(const ManifoldModel& model, const CoordFn& fn) {
  ScalarField f;
  f.values = Array::Zero(model.num_nodes());
  for (Eigen::Index k = 0; k < model.num_nodes(); ++k)
    f.values[k] = fn(model.xs[k], model.ys[k]);
  return f;
}

ScalarField mark_positive(ScalarField field) {
  const double lo = field.values.minCoeff();
  if (!(lo > 0.0))
    throw NonPositiveField("field is not strictly positive (min = " +
                           std::to_string(lo) + ")");
  field.positive = true;
  return field;
}

void check_shape(const ManifoldModel& model, const ScalarField& field) {
  if (field.size() != model.num_nodes())
    throw ShapeMismatch("field size " + std::to_string(field.size()) +
                        " does not match the model grid (" +
                        std::to_string(model.num_nodes()) + " nodes)");
}

namespace {

// First and second coordinate derivatives, periodic or pole-reflected.
void derivs_1d(const ManifoldModel& model, const Array& u, Array* du, Array* d2u) {
  const int n = model.res[0];
  const double h = model.h[0];
  const bool periodic = model.kind != ModelKind::SphereAxisym;
  for (int i = 0; i < n; ++i) {
    const int ip = periodic ? wrap(i + 1, n) : reflect(i + 1, n);
    const int im = periodic ? wrap(i - 1, n) : reflect(i - 1, n);
    if (du) (*du)[i] = (u[ip] - u[im]) / (2.0 * h);
    if (d2u) (*d2u)[i] = (u[ip] - 2.0 * u[i] + u[im]) / (h * h);
  }
}

void partials_torus(const ManifoldModel& model, const Array& u, Array* ux, Array* uy,
                    Array* uxx, Array* uyy, Array* uxy) {
  const int nx = model.res[0], ny = model.res[1];
  const double hx = model.h[0], hy = model.h[1];
  for (int j = 0; j < ny; ++j) {
    const int jp = wrap(j + 1, ny), jm = wrap(j - 1, ny);
    for (int i = 0; i < nx; ++i) {
      const int ip = wrap(i + 1, nx), im = wrap(i - 1, nx);
      const int k = model.idx(i, j);
      if (ux) (*ux)[k] = (u[model.idx(ip, j)] - u[model.idx(im, j)]) / (2.0 * hx);
      if (uy) (*uy)[k] = (u[model.idx(i, jp)] - u[model.idx(i, jm)]) / (2.0 * hy);
      if (uxx)
        (*uxx)[k] = (u[model.idx(ip, j)] - 2.0 * u[k] + u[model.idx(im, j)]) / (hx * hx);
      if (uyy)
        (*uyy)[k] = (u[model.idx(i, jp)] - 2.0 * u[k] + u[model.idx(i, jm)]) / (hy * hy);
      if (uxy)
        (*uxy)[k] = (u[model.idx(ip, jp)] - u[model.idx(im, jp)] - u[model.idx(ip, jm)] +
                     u[model.idx(im, jm)]) /
                    (4.0 * hx * hy);
    }
  }
}

}  // namespace

namespace detail {

void laplacian_into(const ManifoldModel& model, const Array& u, Array& out) {
  switch (model.kind) {
    case ModelKind::Circle: {
      const int n = model.res[0];
      const double inv_h2 = 1.0 / (model.h[0] * model.h[0]);
      for (int i = 0; i < n; ++i) {
        const int ip = wrap(i + 1, n), im = wrap(i - 1, n);
        out[i] = (u[ip] - 2.0 * u[i] + u[im]) * inv_h2;
      }
      break;
    }
    case ModelKind::FlatTorus2D: {
      const int nx = model.res[0], ny = model.res[1];
      const double inv_hx2 = 1.0 / (model.h[0] * model.h[0]);
      const double inv_hy2 = 1.0 / (model.h[1] * model.h[1]);
      for (int j = 0; j < ny; ++j) {
        const int jp = wrap(j + 1, ny), jm = wrap(j - 1, ny);
        for (int i = 0; i < nx; ++i) {
          const int ip = wrap(i + 1, nx), im = wrap(i - 1, nx);
          const int k = model.idx(i, j);
          out[k] = (u[model.idx(ip, j)] - 2.0 * u[k] + u[model.idx(im, j)]) * inv_hx2 +
                   (u[model.idx(i, jp)] - 2.0 * u[k] + u[model.idx(i, jm)]) * inv_hy2;
        }
      }
      break;
    }
    case ModelKind::SphereAxisym: {
      // flux form of (1/sin)(sin u')' / r^2; pole faces have exactly zero flux
      const int n = model.res[0];
      const double h = model.h[0];
      const double r2 = model.size[0] * model.size[0];
      for (int j = 0; j < n; ++j) {
        const int jp = reflect(j + 1, n), jm = reflect(j - 1, n);
        const double flux = model.sin_face_plus[j] * (u[jp] - u[j]) -
                            model.sin_face_minus[j] * (u[j] - u[jm]);
        out[j] = flux / (r2 * model.sin_theta[j] * h * h);
      }
      break;
    }
  }
}

void add_drift_into(const ManifoldModel& model, const Array& u, Array& out) {
  if (model.drift.zero) return;
  if (model.kind == ModelKind::Circle) {
    const int n = model.res[0];
    const double inv_2h = 1.0 / (2.0 * model.h[0]);
    for (int i = 0; i < n; ++i) {
      const int ip = wrap(i + 1, n), im = wrap(i - 1, n);
      out[i] += model.drift.comp[0][i] * (u[ip] - u[im]) * inv_2h;
    }
  } else if (model.kind == ModelKind::FlatTorus2D) {
    const int nx = model.res[0], ny = model.res[1];
    const double inv_2hx = 1.0 / (2.0 * model.h[0]);
    const double inv_2hy = 1.0 / (2.0 * model.h[1]);
    for (int j = 0; j < ny; ++j) {
      const int jp = wrap(j + 1, ny), jm = wrap(j - 1, ny);
      for (int i = 0; i < nx; ++i) {
        const int ip = wrap(i + 1, nx), im = wrap(i - 1, nx);
        const int k = model.idx(i, j);
        out[k] += model.drift.comp[0][k] * (u[model.idx(ip, j)] - u[model.idx(im, j)]) * inv_2hx +
                  model.drift.comp[1][k] * (u[model.idx(i, jp)] - u[model.idx(i, jm)]) * inv_2hy;
      }
    }
  }
}

}  // namespace detail

namespace {

Array laplacian_raw(const ManifoldModel& model, const Array& u) {
  Array out(model.num_nodes());
  detail::laplacian_into(model, u, out);
  return out;
}

Array drift_term_raw(const ManifoldModel& model, const Array& u) {
  Array out = Array::Zero(model.num_nodes());
  detail::add_drift_into(model, u, out);
  return out;
}

}  // namespace

ScalarField laplacian(const ManifoldModel& model, const ScalarField& field) {
  check_shape(model, field);
  return {laplacian_raw(model, field.values), false};
}

ScalarField drift_laplacian(const ManifoldModel& model, const ScalarField& field) {
  check_shape(model, field);
  Array out = laplacian_raw(model, field.values);
  if (!model.drift.zero) out += drift_term_raw(model, field.values);
  return {std::move(out), false};
}

ScalarField drift_derivative(const ManifoldModel& model, const ScalarField& field) {
  check_shape(model, field);
  return {drift_term_raw(model, field.values), false};
}

ScalarField gradient_sq(const ManifoldModel& model, const ScalarField& field) {
  return gradient_inner(model, field, field);
}

ScalarField gradient_inner(const ManifoldModel& model, const ScalarField& a,
                           const ScalarField& b) {
  check_shape(model, a);
  check_shape(model, b);
  const auto nn = model.num_nodes();
  Array out(nn);
  switch (model.kind) {
    case ModelKind::Circle: {
      Array da(nn), db(nn);
      derivs_1d(model, a.values, &da, nullptr);
      derivs_1d(model, b.values, &db, nullptr);
      out = da * db;
      break;
    }
    case ModelKind::FlatTorus2D: {
      Array ax(nn), ay(nn), bx(nn), by(nn);
      partials_torus(model, a.values, &ax, &ay, nullptr, nullptr, nullptr);
      partials_torus(model, b.values, &bx, &by, nullptr, nullptr, nullptr);
      out = ax * bx + ay * by;
      break;
    }
    case ModelKind::SphereAxisym: {
      Array da(nn), db(nn);
      derivs_1d(model, a.values, &da, nullptr);
      derivs_1d(model, b.values, &db, nullptr);
      out = da * db / (model.size[0] * model.size[0]);
      break;
    }
  }
  return {std::move(out), false};
}

ScalarField hessian_traceless_sq(const ManifoldModel& model, const ScalarField& field) {
  check_shape(model, field);
  const auto nn = model.num_nodes();
  switch (model.kind) {
    case ModelKind::Circle:
      // the trace-free part vanishes identically in one dimension
      return {Array::Zero(nn), false};
    case ModelKind::FlatTorus2D: {
      Array uxx(nn), uyy(nn), uxy(nn);
      partials_torus(model, field.values, nullptr, nullptr, &uxx, &uyy, &uxy);
      Array out = 0.5 * (uxx - uyy).square() + 2.0 * uxy.square();
      return {std::move(out), false};
    }
    case ModelKind::SphereAxisym: {
      // orthonormal-frame Hessian of an axisymmetric field:
      //   H_11 = u'' / r^2, H_22 = cot(theta) u' / r^2
      Array du(nn), d2u(nn);
      derivs_1d(model, field.values, &du, &d2u);
      const double r2 = model.size[0] * model.size[0];
      Array h11 = d2u / r2;
      Array h22 = model.cot_theta * du / r2;
      Array out = 0.5 * (h11 - h22).square();
      return {std::move(out), false};
    }
  }
  return {Array::Zero(nn), false};
}

ScalarField hessian_sq(const ManifoldModel& model, const ScalarField& field) {
  check_shape(model, field);
  const auto nn = model.num_nodes();
  switch (model.kind) {
    case ModelKind::Circle: {
      Array d2u(nn);
      derivs_1d(model, field.values, nullptr, &d2u);
      return {d2u.square(), false};
    }
    case ModelKind::FlatTorus2D: {
      Array uxx(nn), uyy(nn), uxy(nn);
      partials_torus(model, field.values, nullptr, nullptr, &uxx, &uyy, &uxy);
      Array out = uxx.square() + uyy.square() + 2.0 * uxy.square();
      return {std::move(out), false};
    }
    case ModelKind::SphereAxisym: {
      Array du(nn), d2u(nn);
      derivs_1d(model, field.values, &du, &d2u);
      const double r2 = model.size[0] * model.size[0];
      Array h11 = d2u / r2;
      Array h22 = model.cot_theta * du / r2;
      Array out = h11.square() + h22.square();
      return {std::move(out), false};
    }
  }
  return {Array::Zero(nn), false};
}

namespace {

void require_m_above_n(const ManifoldModel& model, double m) {
  if (!(m > model.n))
    throw DomainError("Bakry-Emery dimension m must exceed the model dimension n = " +
                      std::to_string(model.n));
}

// Smallest eigenvalue and quadratic form of Ric_V^m per node. The metric is
// the identity in the orthonormal frames used here, so eigenvalues of the
// coefficient matrix are eigenvalues with respect to g.
void ricci_vm_eigen(const ManifoldModel& model, double m, const Array* fx,
                    const Array* fy, Array* lambda_min, Array* quad) {
  const auto nn = model.num_nodes();
  switch (model.kind) {
    case ModelKind::Circle: {
      Array lam;
      if (model.drift.zero) {
        lam = Array::Zero(nn);
      } else {
        lam = -model.drift.jac[0][0] -
              model.drift.comp[0].square() / (m - 1.0);
      }
      if (lambda_min) *lambda_min = lam;
      if (quad) *quad = lam * fx->square();
      return;
    }
    case ModelKind::FlatTorus2D: {
      if (model.drift.zero) {
        if (lambda_min) *lambda_min = Array::Zero(nn);
        if (quad) *quad = Array::Zero(nn);
        return;
      }
      const double c = 1.0 / (m - 2.0);
      Array a11 = -model.drift.jac[0][0] - c * model.drift.comp[0].square();
      Array a22 = -model.drift.jac[1][1] - c * model.drift.comp[1].square();
      Array a12 = -0.5 * (model.drift.jac[0][1] + model.drift.jac[1][0]) -
                  c * model.drift.comp[0] * model.drift.comp[1];
      if (lambda_min) {
        Array mean = 0.5 * (a11 + a22);
        Array disc = (0.5 * (a11 - a22)).square() + a12.square();
        *lambda_min = mean - disc.sqrt();
      }
      if (quad)
        *quad = a11 * fx->square() + 2.0 * a12 * (*fx) * (*fy) + a22 * fy->square();
      return;
    }
    case ModelKind::SphereAxisym: {
      // round metric: Ric = g / r^2, V = 0
      const double lam = 1.0 / (model.size[0] * model.size[0]);
      if (lambda_min) *lambda_min = Array::Constant(nn, lam);
      if (quad) {
        *quad = lam * fx->square();
        if (fy) *quad += lam * fy->square();
      }
      return;
    }
  }
}

}  // namespace

ScalarField ricci_vm_pointwise(const ManifoldModel& model, double m) {
  require_m_above_n(model, m);
  Array lam;
  ricci_vm_eigen(model, m, nullptr, nullptr, &lam, nullptr);
  return {std::move(lam), false};
}

ScalarField ricci_vm_quadratic(const ManifoldModel& model, double m,
                               const ScalarField& f) {
  require_m_above_n(model, m);
  check_shape(model, f);
  const auto nn = model.num_nodes();
  Array fx(nn), fy;
  if (model.kind == ModelKind::FlatTorus2D) {
    fy = Array(nn);
    partials_torus(model, f.values, &fx, &fy, nullptr, nullptr, nullptr);
  } else {
    derivs_1d(model, f.values, &fx, nullptr);
    if (model.kind == ModelKind::SphereAxisym) fx /= model.size[0];
    fy = Array::Zero(nn);
  }
  Array quad;
  ricci_vm_eigen(model, m, &fx, &fy, nullptr, &quad);
  return {std::move(quad), false};
}

CurvatureSpec curvature_lower_bound(const ManifoldModel& model, double m) {
  ScalarField lam = ricci_vm_pointwise(model, m);
  CurvatureSpec spec;
  spec.m = m;
  spec.K = std::max(0.0, -lam.values.minCoeff());
  return spec;
}

Array distance_from(const ManifoldModel& model, double x0, double y0) {
  const auto nn = model.num_nodes();
  Array d(nn);
  switch (model.kind) {
    case ModelKind::Circle:
      for (Eigen::Index k = 0; k < nn; ++k)
        d[k] = std::abs(wrap_delta(model.xs[k] - x0, model.size[0]));
      break;
    case ModelKind::FlatTorus2D:
      for (Eigen::Index k = 0; k < nn; ++k) {
        const double dx = wrap_delta(model.xs[k] - x0, model.size[0]);
        const double dy = wrap_delta(model.ys[k] - y0, model.size[1]);
        d[k] = std::hypot(dx, dy);
      }
      break;
    case ModelKind::SphereAxisym:
      if (x0 != 0.0)
        throw DomainError("sphere distances are supported from the north pole only");
      d = model.size[0] * model.xs;
      break;
  }
  return d;
}

double integrate(const ManifoldModel& model, const ScalarField& field) {
  check_shape(model, field);
  return (model.weights * field.values).sum();
}

ManifoldModel rebuild(const ManifoldModel& model, int nx, int ny) {
  switch (model.kind) {
    case ModelKind::Circle: return build_circle(model.size[0], nx, model.spec);
    case ModelKind::FlatTorus2D:
      return build_torus(model.size[0], model.size[1], nx, ny > 0 ? ny : nx, model.spec);
    case ModelKind::SphereAxisym: return build_sphere(model.size[0], nx);
  }
  throw DomainError("unknown model kind");
}

}  // namespace harnacklab
