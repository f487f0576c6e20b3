#include "ambitflux/flux.hpp"

#include <cmath>
#include <stdexcept>

namespace ambitflux {

TestFunction TestFunction::identity(int d) {
  TestFunction f;
  f.kind_ = Kind::Identity;
  f.d_ = d;
  return f;
}

TestFunction TestFunction::kinetic(int d) {
  TestFunction f;
  f.kind_ = Kind::Kinetic;
  f.d_ = d;
  return f;
}

TestFunction TestFunction::affine(Mat B, Vec c) {
  TestFunction f;
  f.kind_ = Kind::Affine;
  f.d_ = static_cast<int>(c.size());
  f.B_ = std::move(B);
  f.c_ = std::move(c);
  if (f.B_.rows() != f.d_ || f.B_.cols() != f.d_)
    throw std::invalid_argument("TestFunction::affine: B must be d x d");
  return f;
}

Vec TestFunction::value(const Vec& x) const {
  switch (kind_) {
    case Kind::Identity:
      return x;
    case Kind::Kinetic:
      return x.squaredNorm() * x;
    case Kind::Affine:
      return B_ * x + c_;
  }
  return x;
}

Mat TestFunction::jacobian(const Vec& x) const {
  switch (kind_) {
    case Kind::Identity:
      return Mat::Identity(d_, d_);
    case Kind::Kinetic:
      return x.squaredNorm() * Mat::Identity(d_, d_) + 2.0 * (x * x.transpose());
    case Kind::Affine:
      return B_;
  }
  return Mat::Identity(d_, d_);
}

SurfaceWeight SurfaceWeight::normal() {
  SurfaceWeight f;
  f.terms_.push_back({1.0, 0, Vec(), 0, 0});
  return f;
}

SurfaceWeight SurfaceWeight::constant(Vec c) {
  SurfaceWeight f;
  f.terms_.push_back({1.0, 1, std::move(c), 0, 0});
  return f;
}

SurfaceWeight SurfaceWeight::component(int i, int j) {
  SurfaceWeight f;
  f.terms_.push_back({1.0, 2, Vec(), i, j});
  return f;
}

SurfaceWeight SurfaceWeight::scaled_plus(double a, const SurfaceWeight& other, double b) const {
  SurfaceWeight f;
  for (Term t : terms_) {
    t.coef *= a;
    f.terms_.push_back(t);
  }
  for (Term t : other.terms_) {
    t.coef *= b;
    f.terms_.push_back(t);
  }
  return f;
}

Vec SurfaceWeight::value(const Vec& y, const Vec& u) const {
  (void)y;
  Vec acc = Vec::Zero(u.size());
  for (const Term& t : terms_) {
    switch (t.kind) {
      case 0:
        acc += t.coef * u;
        break;
      case 1:
        acc += t.coef * t.cvec;
        break;
      case 2:
        acc[t.j] += t.coef * u[t.i];
        break;
    }
  }
  return acc;
}

Vec z_functional(const IncrementTable& table, const TestFunction& phi, const SurfaceWeight& f,
                 const SurfaceQuadrature& quad) {
  const int n = quad.size();
  const int nt = static_cast<int>(table.times.size());
  if (nt == 0) return Vec();
  if (table.delta.front().cols() != n)
    throw std::invalid_argument("z_functional: table and quadrature node counts differ");
  Vec phi0 = phi.value(table.x0);
  Vec out = Vec::Zero(nt);
  for (int l = 0; l < nt; ++l) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      Vec diff = phi.value(table.x0 + table.delta[l].col(j)) - phi0;
      acc += quad.weights[j] * diff.dot(f.value(quad.nodes.col(j), quad.normals.col(j)));
    }
    out[l] = acc;
  }
  return out;
}

Vec z_functional(FieldRealization& field, const Vec& p0, double r,
                 const std::vector<double>& times, const TestFunction& phi,
                 const SurfaceWeight& f, const SurfaceQuadrature& quad) {
  IncrementTable table = field.increments(p0, r, times, quad);
  return z_functional(table, phi, f, quad);
}

double energy_flux(const IncrementTable& table, const TestFunction& phi,
                   const SurfaceQuadrature& quad, int d) {
  Vec z = z_functional(table, phi, SurfaceWeight::normal(), quad);
  return std::pow(table.r, d - 1) * z[z.size() - 1];
}

double energy_flux(FieldRealization& field, const Vec& p0, double r, const TestFunction& phi,
                   const SurfaceQuadrature& quad) {
  IncrementTable table = field.increments(p0, r, {1.0}, quad);
  return energy_flux(table, phi, quad, field.model().space_dim());
}

double fv_limit_value(const Mat& dx, const Vec& x0, const TestFunction& phi,
                      const SurfaceWeight& f, const SurfaceQuadrature& quad) {
  const int d = static_cast<int>(dx.rows());
  Mat dphi = phi.jacobian(x0);
  // D_X^{(i,j)}(f) = sum_nodes w f^{(i)}(y) (DX y)^{(j)}
  Mat dxf = Mat::Zero(d, d);
  for (int n = 0; n < quad.size(); ++n) {
    Vec fy = f.value(quad.nodes.col(n), quad.normals.col(n));
    Vec dxy = dx * quad.nodes.col(n);
    dxf += quad.weights[n] * (fy * dxy.transpose());
  }
  return (dphi.array() * dxf.array()).sum();
}

Vec taylor_residual(const IncrementTable& table, const TestFunction& phi, const SurfaceWeight& f,
                    const SurfaceQuadrature& quad) {
  const int n = quad.size();
  const int nt = static_cast<int>(table.times.size());
  Vec z_phi = z_functional(table, phi, f, quad);
  Mat dphi = phi.jacobian(table.x0);
  Vec out = Vec::Zero(nt);
  for (int l = 0; l < nt; ++l) {
    double lin = 0.0;
    for (int j = 0; j < n; ++j) {
      Vec fy = f.value(quad.nodes.col(j), quad.normals.col(j));
      // sum_{i,k} Dphi^{(i,k)} f^{(i)}(y) delta^{(k)}
      lin += quad.weights[j] * fy.dot(dphi * table.delta[l].col(j));
    }
    out[l] = std::fabs(z_phi[l] - lin);
  }
  return out;
}

}  // namespace ambitflux
