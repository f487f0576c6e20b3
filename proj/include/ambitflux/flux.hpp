#pragma once

#include <vector>

#include "ambitflux/field.hpp"
#include "ambitflux/geometry.hpp"
#include "ambitflux/types.hpp"

namespace ambitflux {

/// Test-function catalog with analytic Jacobians: identity (growth order 1),
/// kinetic ||x||^2 x (order 3), affine Bx + c (order 1).
class TestFunction {
 public:
  enum class Kind { Identity, Kinetic, Affine };

  static TestFunction identity(int d);
  static TestFunction kinetic(int d);
  static TestFunction affine(Mat B, Vec c);

  Kind kind() const { return kind_; }
  int dim() const { return d_; }
  double growth_order() const { return kind_ == Kind::Kinetic ? 3.0 : 1.0; }
  bool jacobian_constant() const { return kind_ != Kind::Kinetic; }

  Vec value(const Vec& x) const;
  Mat jacobian(const Vec& x) const;

 private:
  Kind kind_ = Kind::Identity;
  int d_ = 2;
  Mat B_;
  Vec c_;
};

/// Surface weight f: M -> R^d; catalog {u_M, constant vectors, e_j (x) e_i u_M
/// components} closed under linear combination.
class SurfaceWeight {
 public:
  struct Term {
    double coef = 1.0;
    int kind = 0;  // 0 normal, 1 constant, 2 component
    Vec cvec;
    int i = 0, j = 0;
  };

  static SurfaceWeight normal();
  static SurfaceWeight constant(Vec c);
  /// f(y) = (u_M(y) . e_i) e_j, the weight appearing in Y(t, e_j (x) e_i u_M).
  static SurfaceWeight component(int i, int j);
  SurfaceWeight scaled_plus(double a, const SurfaceWeight& other, double b) const;

  Vec value(const Vec& y, const Vec& u) const;
  const std::vector<Term>& terms() const { return terms_; }
  bool is_normal() const { return terms_.size() == 1 && terms_[0].kind == 0; }

 private:
  std::vector<Term> terms_;
};

/// Z^{phi,r}(t, f) = sum_j w_j [phi(X(p0 + r t y_j)) - phi(X(p0))] . f(y_j)
/// per time in the table (increments are coupled through the table).
Vec z_functional(const IncrementTable& table, const TestFunction& phi, const SurfaceWeight& f,
                 const SurfaceQuadrature& quad);

Vec z_functional(FieldRealization& field, const Vec& p0, double r,
                 const std::vector<double>& times, const TestFunction& phi,
                 const SurfaceWeight& f, const SurfaceQuadrature& quad);

/// Energy flux E_r = r^{d-1} Z^{phi,r}(1, u_M); shares the Z code path bitwise.
double energy_flux(const IncrementTable& table, const TestFunction& phi,
                   const SurfaceQuadrature& quad, int d);
double energy_flux(FieldRealization& field, const Vec& p0, double r, const TestFunction& phi,
                   const SurfaceQuadrature& quad);

/// The finite-variation limit contraction sum_{i,j} Dphi(x0)^{(i,j)}
/// D_X^{(i,j)}(f, p0) with D_X^{(i,j)} = int_M f(y)' e_i (x) e_j DX y dH(y).
/// Multiplied by t by the caller.
double fv_limit_value(const Mat& dx, const Vec& x0, const TestFunction& phi,
                      const SurfaceWeight& f, const SurfaceQuadrature& quad);

/// |Z^{phi,r}(t,f) - sum_{i,j} Dphi(x0)^{(i,j)} Z^{id,r}(t, f^{(i)} e_j)| per
/// time; identically zero for identity/affine phi.
Vec taylor_residual(const IncrementTable& table, const TestFunction& phi, const SurfaceWeight& f,
                    const SurfaceQuadrature& quad);

}  // namespace ambitflux
