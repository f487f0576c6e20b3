#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ambitflux/levy.hpp"
#include "ambitflux/types.hpp"

namespace ambitflux {

/// Ambit set A: ball or axis-aligned box in R^d, d in {2,3}. Both are gentle
/// sets with exact normals away from box edges/corners.
class AmbitSet {
 public:
  enum class Kind { Ball, Box };

  static AmbitSet ball(Vec center, double radius);
  static AmbitSet box(Vec lo, Vec hi);

  Kind kind() const { return kind_; }
  int dim() const { return d_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

  bool contains(const Vec& q) const;
  double volume() const;
  double boundary_measure() const;  ///< H^{d-1}(dA)
  /// Signed distance convention helper: > 0 outside, < 0 inside (ball exact,
  /// box exact).
  double boundary_offset(const Vec& q) const;
  BoxRegion bounding_box(double margin) const;

 private:
  Kind kind_ = Kind::Ball;
  int d_ = 2;
  Vec center_, lo_, hi_;
  double radius_ = 1.0;
};

/// Affine sphere M = T S^{d-1}, the boundary of the Lipschitz domain
/// D = T(open unit ball). Support function h_M(n) = ||T'n||.
class AffineSphere {
 public:
  explicit AffineSphere(Mat T);

  int dim() const { return d_; }
  const Mat& T() const { return T_; }
  double abs_det() const { return abs_det_; }
  double support(const Vec& n) const { return (T_.transpose() * n).norm(); }
  /// Unit normal direction v(n) = T'n / ||T'n||.
  Vec unit_direction(const Vec& n) const;
  /// Point y = Tz and outward normal u_M(y) for a unit sphere point z.
  Vec point(const Vec& z) const { return T_ * z; }
  Vec outward_normal(const Vec& z) const;
  /// Surface Jacobian of z -> Tz on the sphere: |det T| ||T^{-T} z||.
  double surface_jacobian(const Vec& z) const;
  /// H^{d-1}(T(D_1 cap v(n)^perp)): chord length (d=2) or ellipse area (d=3).
  double plane_section_factor(const Vec& n) const;
  double domain_volume() const;  ///< Leb(D) = |det T| Vol(unit ball)
  double max_singular_value() const { return sigma_max_; }

 private:
  Mat T_, Tinv_t_;
  int d_;
  double abs_det_, sigma_max_;
};

/// Quadrature rule on M: nodes y_j, outward normals u_M(y_j), weights w_j with
/// sum w_j ~ H^{d-1}(M).
struct SurfaceQuadrature {
  Mat nodes;    ///< d x n
  Mat normals;  ///< d x n
  Vec weights;  ///< n
  Mat sphere_points;  ///< d x n preimages z_j on the unit sphere

  int size() const { return static_cast<int>(weights.size()); }
  /// Midpoint rule in angle (d=2, n nodes) or Gauss-Legendre x midpoint
  /// product (d=3, n_polar x n_azimuth nodes).
  static SurfaceQuadrature build(const AffineSphere& M, int n_main, int n_azimuth = 0);
};

/// Quadrature on the boundary of the ambit set, nodes strictly inside faces.
struct BoundaryQuadrature {
  Mat points;   ///< d x n, on dA (A-relative, add p0 for the shifted set)
  Mat normals;  ///< outward n_A
  Vec weights;
  int size() const { return static_cast<int>(weights.size()); }
  static BoundaryQuadrature build(const AmbitSet& A, int n_main, int n_azimuth = 0);
};

double support_function(const AffineSphere& M, const Vec& n);

/// Outward unit normal at x on dA; throws on box edges/corners.
Vec boundary_normal(const AmbitSet& A, const Vec& x);

struct ErosionDilation {
  bool in_erosion = false;   ///< q in A erosion rM
  bool in_dilation = false;  ///< q in A dilation rM
};

/// Exact membership in A erosion rM and A dilation rM (Minkowski, M symmetric).
ErosionDilation erosion_membership(const AmbitSet& A, const AffineSphere& M, double r,
                                   const Vec& q);

/// sum_j w_j f(y_j) for scalar f(y, u).
double surface_integral(const SurfaceQuadrature& quad,
                        const std::function<double(const Vec&, const Vec&)>& f);
Vec surface_integral_vector(const SurfaceQuadrature& quad,
                            const std::function<Vec(const Vec&, const Vec&)>& f);
/// Auto-doubling variant: starts at n0 nodes, doubles until two successive
/// levels agree within rel_tol (relative), throws if cap exceeded.
double surface_integral_adaptive(const AffineSphere& M,
                                 const std::function<double(const Vec&, const Vec&)>& f,
                                 double rel_tol = 1e-8, int n0 = 0);

/// H^{d-1}(D cap {y . n = h_M(n) rho}) = (1-rho^2)^{(d-1)/2} * plane factor.
double hyperplane_section_measure(const AffineSphere& M, const Vec& n, double rho);

/// Independent quadrature route to the section measure: n . int_M u_M(y)
/// 1_{y.n >= h_M(n) rho} dH(y), indicator applied at nodes, straddling cells
/// refined by bisection.
double hyperplane_section_cap_quadrature(const AffineSphere& M, const Vec& n, double rho,
                                         int n_main, int n_azimuth = 0);

/// Cap integrals c_i = int_M f_i(y) 1_{y.n >= level} dH(y) for a vector-valued
/// weight f; indicator applied at nodes, straddling cells refined by bisection.
Vec cap_integral_vector(const AffineSphere& M, const std::function<Vec(const Vec&, const Vec&)>& f,
                        const Vec& n, double level, int n_main, int n_azimuth = 0);

struct ErosionAsymptote {
  double volume = 0.0;           ///< Leb(A \ A erosion rM)
  double slope_estimate = 0.0;   ///< volume / r
  double predicted_slope = 0.0;  ///< int_dA h_M(-n_A)^+ dH
};

/// Kiderlen-Rataj first-order erosion volume; closed-form volume for
/// (ball, T = I) and boxes.
ErosionAsymptote erosion_volume_asymptote(const AmbitSet& A, const AffineSphere& M, double r);

/// max / min of ||v + E z|| over the unit sphere ||z|| = 1 (secular equation).
double max_norm_over_ellipsoid(const Vec& v, const Mat& E);
double min_norm_over_ellipsoid(const Vec& v, const Mat& E);

}  // namespace ambitflux
