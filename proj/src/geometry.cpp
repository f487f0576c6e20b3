#include "ambitflux/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ambitflux {

namespace {

void gauss_legendre(int n, Vec& x, Vec& w) {
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < (n + 1) / 2; ++k) {
    double t = std::cos(kPi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int j = 2; j <= n; ++j) {
        double p = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    x[k] = -t;
    x[n - 1 - k] = t;
    double wk = 2.0 / ((1.0 - t * t) * dp * dp);
    w[k] = wk;
    w[n - 1 - k] = wk;
  }
}

// 4-point Gauss-Legendre for smooth sub-cell integrals.
constexpr double kGl4X[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                             0.8611363115940526};
constexpr double kGl4W[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                             0.3478548451374538};

double unit_ball_volume(int d) { return d == 2 ? kPi : 4.0 * kPi / 3.0; }

// Extremal value of ||v + E z|| over the unit sphere ||z|| = 1 via the secular
// equation of the trust-region subproblem (E square, possibly singular).
double extremal_norm_on_sphere(const Vec& v, const Mat& E, bool want_max) {
  const int d = static_cast<int>(v.size());
  if (E.cwiseAbs().maxCoeff() == 0.0) return v.norm();
  Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec sig = svd.singularValues();
  Vec a = svd.matrixU().transpose() * v;
  Vec c = a.cwiseProduct(sig);
  Vec s2(d);
  for (int i = 0; i < d; ++i) s2[i] = sig[i] * sig[i];
  const double s2_ext = want_max ? s2[0] : s2[d - 1];
  const double scale = std::max(1.0, s2[0] + v.squaredNorm());
  const double tol = 1e-13 * scale;

  auto phi = [&](double lam) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      double den = lam - s2[i];
      if (std::fabs(den) < 1e-300) den = (den >= 0 ? 1e-300 : -1e-300);
      double z = c[i] / den;
      s += z * z;
    }
    return s;
  };
  auto value_at = [&](double lam, double hard_tau) {
    double f = 0.0;
    bool placed = false;
    for (int i = 0; i < d; ++i) {
      double zi;
      if (std::fabs(s2[i] - s2_ext) <= tol && hard_tau >= 0.0) {
        zi = placed ? 0.0 : hard_tau;
        placed = true;
      } else {
        double den = lam - s2[i];
        if (std::fabs(den) < 1e-300) den = (den >= 0 ? 1e-300 : -1e-300);
        zi = c[i] / den;
      }
      double term = a[i] + sig[i] * zi;
      f += term * term;
    }
    return std::sqrt(std::max(f, 0.0));
  };

  double c_ext2 = 0.0;
  for (int i = 0; i < d; ++i)
    if (std::fabs(s2[i] - s2_ext) <= tol) c_ext2 += c[i] * c[i];

  if (c_ext2 <= tol * tol) {
    // Hard case: no load on the extremal singular space.
    double phi0 = 0.0;
    for (int i = 0; i < d; ++i) {
      if (std::fabs(s2[i] - s2_ext) <= tol) continue;
      double z = c[i] / (s2_ext - s2[i]);
      phi0 += z * z;
    }
    if (phi0 <= 1.0) return value_at(s2_ext, std::sqrt(1.0 - phi0));
  }
  double cnorm = std::sqrt(c.squaredNorm());
  double lo, hi;
  if (want_max) {
    lo = s2_ext;
    hi = s2_ext + cnorm + tol;
  } else {
    lo = s2_ext - cnorm - tol;
    hi = s2_ext;
  }
  // Bisection on phi(lam) = 1; phi decreases in lam on the max branch and
  // increases on the min branch.
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    bool above = phi(mid) > 1.0;
    if (want_max ? above : !above)
      lo = mid;
    else
      hi = mid;
  }
  return value_at(0.5 * (lo + hi), -1.0);
}

}  // namespace

double max_norm_over_ellipsoid(const Vec& v, const Mat& E) {
  return extremal_norm_on_sphere(v, E, true);
}
double min_norm_over_ellipsoid(const Vec& v, const Mat& E) {
  return extremal_norm_on_sphere(v, E, false);
}

// ---------------------------------------------------------------------------
// AmbitSet
// ---------------------------------------------------------------------------

AmbitSet AmbitSet::ball(Vec center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("AmbitSet::ball: radius must be > 0");
  int d = static_cast<int>(center.size());
  if (d != 2 && d != 3) throw std::invalid_argument("AmbitSet: d must be 2 or 3");
  AmbitSet a;
  a.kind_ = Kind::Ball;
  a.d_ = d;
  a.center_ = std::move(center);
  a.radius_ = radius;
  return a;
}

AmbitSet AmbitSet::box(Vec lo, Vec hi) {
  int d = static_cast<int>(lo.size());
  if (d != 2 && d != 3) throw std::invalid_argument("AmbitSet: d must be 2 or 3");
  if (hi.size() != lo.size()) throw std::invalid_argument("AmbitSet::box: dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(hi[i] > lo[i])) throw std::invalid_argument("AmbitSet::box: needs nonempty interior");
  AmbitSet a;
  a.kind_ = Kind::Box;
  a.d_ = d;
  a.lo_ = std::move(lo);
  a.hi_ = std::move(hi);
  a.center_ = 0.5 * (a.lo_ + a.hi_);
  return a;
}

bool AmbitSet::contains(const Vec& q) const {
  if (kind_ == Kind::Ball) return (q - center_).norm() <= radius_;
  for (int i = 0; i < d_; ++i)
    if (q[i] < lo_[i] || q[i] > hi_[i]) return false;
  return true;
}

double AmbitSet::volume() const {
  if (kind_ == Kind::Ball) return unit_ball_volume(d_) * std::pow(radius_, d_);
  double v = 1.0;
  for (int i = 0; i < d_; ++i) v *= hi_[i] - lo_[i];
  return v;
}

double AmbitSet::boundary_measure() const {
  if (kind_ == Kind::Ball) return d_ == 2 ? kTwoPi * radius_ : 4.0 * kPi * radius_ * radius_;
  if (d_ == 2) return 2.0 * ((hi_[0] - lo_[0]) + (hi_[1] - lo_[1]));
  double a = hi_[0] - lo_[0], b = hi_[1] - lo_[1], c = hi_[2] - lo_[2];
  return 2.0 * (a * b + a * c + b * c);
}

double AmbitSet::boundary_offset(const Vec& q) const {
  if (kind_ == Kind::Ball) return (q - center_).norm() - radius_;
  bool inside = true;
  double out2 = 0.0, inmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d_; ++i) {
    double below = lo_[i] - q[i], above = q[i] - hi_[i];
    double ex = std::max(below, above);
    if (ex > 0.0) {
      inside = false;
      out2 += ex * ex;
    } else {
      inmin = std::min(inmin, -ex);
    }
  }
  return inside ? -inmin : std::sqrt(out2);
}

BoxRegion AmbitSet::bounding_box(double margin) const {
  BoxRegion r;
  if (kind_ == Kind::Ball) {
    r.lo = center_.array() - (radius_ + margin);
    r.hi = center_.array() + (radius_ + margin);
  } else {
    r.lo = lo_.array() - margin;
    r.hi = hi_.array() + margin;
  }
  return r;
}

// ---------------------------------------------------------------------------
// AffineSphere
// ---------------------------------------------------------------------------

AffineSphere::AffineSphere(Mat T) : T_(std::move(T)) {
  d_ = static_cast<int>(T_.rows());
  if ((d_ != 2 && d_ != 3) || T_.cols() != d_)
    throw std::invalid_argument("AffineSphere: T must be 2x2 or 3x3");
  double det = T_.determinant();
  if (std::fabs(det) < 1e-14) throw std::invalid_argument("AffineSphere: T must be invertible");
  abs_det_ = std::fabs(det);
  Tinv_t_ = T_.inverse().transpose();
  Eigen::JacobiSVD<Mat> svd(T_);
  sigma_max_ = svd.singularValues()[0];
}

Vec AffineSphere::unit_direction(const Vec& n) const {
  Vec v = T_.transpose() * n;
  double nv = v.norm();
  if (nv == 0.0) throw std::invalid_argument("AffineSphere: zero direction");
  return v / nv;
}

Vec AffineSphere::outward_normal(const Vec& z) const {
  Vec u = Tinv_t_ * z;
  return u / u.norm();
}

double AffineSphere::surface_jacobian(const Vec& z) const { return abs_det_ * (Tinv_t_ * z).norm(); }

double AffineSphere::plane_section_factor(const Vec& n) const {
  Vec ups = unit_direction(n);
  if (d_ == 2) {
    Vec w(2);
    w << -ups[1], ups[0];
    return 2.0 * (T_ * w).norm();
  }
  // Orthonormal basis of ups^perp.
  Vec seed = Vec::Zero(3);
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::fabs(ups[i]) < std::fabs(ups[k])) k = i;
  seed[k] = 1.0;
  Vec w1 = seed - seed.dot(ups) * ups;
  w1 /= w1.norm();
  Vec w2 = ups.head<3>().cross(w1.head<3>());
  Vec a = T_ * w1, b = T_ * w2;
  return kPi * (a.head<3>().cross(b.head<3>())).norm();
}

double AffineSphere::domain_volume() const { return abs_det_ * unit_ball_volume(d_); }

double support_function(const AffineSphere& M, const Vec& n) {
  if (std::fabs(n.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("support_function: n must be a unit vector");
  return M.support(n);
}

// ---------------------------------------------------------------------------
// Quadratures
// ---------------------------------------------------------------------------

SurfaceQuadrature SurfaceQuadrature::build(const AffineSphere& M, int n_main, int n_azimuth) {
  SurfaceQuadrature q;
  int d = M.dim();
  if (d == 2) {
    int n = n_main;
    q.nodes.resize(2, n);
    q.normals.resize(2, n);
    q.sphere_points.resize(2, n);
    q.weights.resize(n);
    for (int j = 0; j < n; ++j) {
      double th = kTwoPi * (j + 0.5) / n;
      Vec z(2);
      z << std::cos(th), std::sin(th);
      q.sphere_points.col(j) = z;
      q.nodes.col(j) = M.point(z);
      q.normals.col(j) = M.outward_normal(z);
      q.weights[j] = M.surface_jacobian(z) * kTwoPi / n;
    }
    return q;
  }
  int np = n_main, na = n_azimuth > 0 ? n_azimuth : 2 * n_main;
  Vec gx, gw;
  gauss_legendre(np, gx, gw);
  int n = np * na;
  q.nodes.resize(3, n);
  q.normals.resize(3, n);
  q.sphere_points.resize(3, n);
  q.weights.resize(n);
  int idx = 0;
  for (int i = 0; i < np; ++i) {
    double c = gx[i], s = std::sqrt(std::max(0.0, 1.0 - c * c));
    for (int j = 0; j < na; ++j) {
      double az = kTwoPi * (j + 0.5) / na;
      Vec z(3);
      z << s * std::cos(az), s * std::sin(az), c;
      q.sphere_points.col(idx) = z;
      q.nodes.col(idx) = M.point(z);
      q.normals.col(idx) = M.outward_normal(z);
      q.weights[idx] = gw[i] * (kTwoPi / na) * M.surface_jacobian(z);
      ++idx;
    }
  }
  return q;
}

BoundaryQuadrature BoundaryQuadrature::build(const AmbitSet& A, int n_main, int n_azimuth) {
  BoundaryQuadrature q;
  int d = A.dim();
  if (A.kind() == AmbitSet::Kind::Ball) {
    double R = A.radius();
    if (d == 2) {
      int n = n_main;
      q.points.resize(2, n);
      q.normals.resize(2, n);
      q.weights.resize(n);
      for (int j = 0; j < n; ++j) {
        double th = kTwoPi * (j + 0.5) / n;
        Vec u(2);
        u << std::cos(th), std::sin(th);
        q.points.col(j) = A.center() + R * u;
        q.normals.col(j) = u;
        q.weights[j] = R * kTwoPi / n;
      }
      return q;
    }
    int np = n_main, na = n_azimuth > 0 ? n_azimuth : 2 * n_main;
    Vec gx, gw;
    gauss_legendre(np, gx, gw);
    q.points.resize(3, np * na);
    q.normals.resize(3, np * na);
    q.weights.resize(np * na);
    int idx = 0;
    for (int i = 0; i < np; ++i) {
      double c = gx[i], s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (int j = 0; j < na; ++j) {
        double az = kTwoPi * (j + 0.5) / na;
        Vec u(3);
        u << s * std::cos(az), s * std::sin(az), c;
        q.points.col(idx) = A.center() + R * u;
        q.normals.col(idx) = u;
        q.weights[idx] = R * R * gw[i] * (kTwoPi / na);
        ++idx;
      }
    }
    return q;
  }
  // Box: midpoint nodes strictly inside each face (edges/corners excluded).
  const Vec& lo = A.lo();
  const Vec& hi = A.hi();
  if (d == 2) {
    int n = n_main;
    q.points.resize(2, 4 * n);
    q.normals.resize(2, 4 * n);
    q.weights.resize(4 * n);
    int idx = 0;
    for (int axis = 0; axis < 2; ++axis) {
      int other = 1 - axis;
      double len = hi[other] - lo[other];
      for (int side = 0; side < 2; ++side) {
        double coord = side == 0 ? lo[axis] : hi[axis];
        Vec nrm = Vec::Zero(2);
        nrm[axis] = side == 0 ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j) {
          Vec p(2);
          p[axis] = coord;
          p[other] = lo[other] + (j + 0.5) / n * len;
          q.points.col(idx) = p;
          q.normals.col(idx) = nrm;
          q.weights[idx] = len / n;
          ++idx;
        }
      }
    }
    return q;
  }
  int n = n_main;
  q.points.resize(3, 6 * n * n);
  q.normals.resize(3, 6 * n * n);
  q.weights.resize(6 * n * n);
  int idx = 0;
  for (int axis = 0; axis < 3; ++axis) {
    int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
    double l1 = hi[o1] - lo[o1], l2 = hi[o2] - lo[o2];
    for (int side = 0; side < 2; ++side) {
      double coord = side == 0 ? lo[axis] : hi[axis];
      Vec nrm = Vec::Zero(3);
      nrm[axis] = side == 0 ? -1.0 : 1.0;
      for (int j1 = 0; j1 < n; ++j1)
        for (int j2 = 0; j2 < n; ++j2) {
          Vec p(3);
          p[axis] = coord;
          p[o1] = lo[o1] + (j1 + 0.5) / n * l1;
          p[o2] = lo[o2] + (j2 + 0.5) / n * l2;
          q.points.col(idx) = p;
          q.normals.col(idx) = nrm;
          q.weights[idx] = (l1 / n) * (l2 / n);
          ++idx;
        }
    }
  }
  return q;
}

Vec boundary_normal(const AmbitSet& A, const Vec& x) {
  if (A.kind() == AmbitSet::Kind::Ball) {
    Vec v = x - A.center();
    double nv = v.norm();
    if (std::fabs(nv - A.radius()) > 1e-6 * A.radius())
      throw std::invalid_argument("boundary_normal: point not on the sphere");
    return v / nv;
  }
  const Vec& lo = A.lo();
  const Vec& hi = A.hi();
  int face_axis = -1, face_side = 0, hits = 0;
  for (int i = 0; i < A.dim(); ++i) {
    double scale = hi[i] - lo[i];
    if (std::fabs(x[i] - lo[i]) < 1e-9 * scale) {
      ++hits;
      face_axis = i;
      face_side = -1;
    } else if (std::fabs(x[i] - hi[i]) < 1e-9 * scale) {
      ++hits;
      face_axis = i;
      face_side = 1;
    } else if (x[i] < lo[i] || x[i] > hi[i]) {
      throw std::invalid_argument("boundary_normal: point outside the box");
    }
  }
  if (hits != 1)
    throw std::invalid_argument("boundary_normal: box edge/corner point (normal undefined there)");
  Vec n = Vec::Zero(A.dim());
  n[face_axis] = face_side;
  return n;
}

// ---------------------------------------------------------------------------
// Erosion / dilation membership
// ---------------------------------------------------------------------------

namespace {

// min over p in [lo,hi] of ||S(q - p)||, exact active-set enumeration.
double min_metric_dist_to_box(const Mat& S, const Vec& q, const Vec& lo, const Vec& hi) {
  int d = static_cast<int>(q.size());
  Mat H = S.transpose() * S;
  double best = std::numeric_limits<double>::infinity();
  int patterns = 1;
  for (int i = 0; i < d; ++i) patterns *= 3;
  for (int pat = 0; pat < patterns; ++pat) {
    int code = pat;
    std::vector<int> state(d);  // 0 free, 1 lo, 2 hi
    for (int i = 0; i < d; ++i) {
      state[i] = code % 3;
      code /= 3;
    }
    Vec p(d);
    std::vector<int> free_idx;
    for (int i = 0; i < d; ++i) {
      if (state[i] == 0)
        free_idx.push_back(i);
      else
        p[i] = state[i] == 1 ? lo[i] : hi[i];
    }
    if (!free_idx.empty()) {
      int nf = static_cast<int>(free_idx.size());
      Mat Hff(nf, nf);
      Vec rhs = Vec::Zero(nf);
      for (int a = 0; a < nf; ++a) {
        for (int b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
        double acc = 0.0;
        for (int i = 0; i < d; ++i)
          if (state[i] != 0) acc += H(free_idx[a], i) * (q[i] - p[i]);
        rhs[a] = acc;
      }
      // H_ff (q_f - p_f) = -H_fb (q_b - p_b)  =>  q_f - p_f = -Hff^{-1} rhs
      Vec diff = Hff.ldlt().solve(-rhs);
      bool feasible = true;
      for (int a = 0; a < nf; ++a) {
        int i = free_idx[a];
        p[i] = q[i] - diff[a];
        double slack = 1e-12 * (1.0 + std::fabs(hi[i]) + std::fabs(lo[i]));
        if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) {
          feasible = false;
          break;
        }
        p[i] = std::clamp(p[i], lo[i], hi[i]);
      }
      if (!feasible) continue;
    }
    best = std::min(best, (S * (q - p)).norm());
  }
  return best;
}

double max_metric_dist_to_box_vertices(const Mat& S, const Vec& q, const Vec& lo, const Vec& hi) {
  int d = static_cast<int>(q.size());
  double best = 0.0;
  for (int mask = 0; mask < (1 << d); ++mask) {
    Vec p(d);
    for (int i = 0; i < d; ++i) p[i] = (mask >> i) & 1 ? hi[i] : lo[i];
    best = std::max(best, (S * (q - p)).norm());
  }
  return best;
}

}  // namespace

ErosionDilation erosion_membership(const AmbitSet& A, const AffineSphere& M, double r,
                                   const Vec& q) {
  if (!(r >= 0.0)) throw std::invalid_argument("erosion_membership: r must be >= 0");
  if (M.dim() != A.dim()) throw std::invalid_argument("erosion_membership: dimension mismatch");
  ErosionDilation out;
  if (r == 0.0) {
    out.in_erosion = out.in_dilation = A.contains(q);
    return out;
  }
  if (A.kind() == AmbitSet::Kind::Ball) {
    Vec v = q - A.center();
    out.in_erosion = max_norm_over_ellipsoid(v, r * M.T()) <= A.radius();
    out.in_dilation = min_norm_over_ellipsoid(v, r * M.T()) <= A.radius();
    return out;
  }
  // Box erosion: per-face support offsets (M symmetric).
  out.in_erosion = true;
  for (int i = 0; i < A.dim(); ++i) {
    Vec e = Vec::Zero(A.dim());
    e[i] = 1.0;
    double h = M.support(e);
    if (q[i] < A.lo()[i] + r * h || q[i] > A.hi()[i] - r * h) {
      out.in_erosion = false;
      break;
    }
  }
  // Box dilation: exists z on the unit sphere with q - rTz in the box, i.e.
  // the parallelepiped T^{-1}(q - box) meets the sphere of radius r.
  Mat S = M.T().inverse();
  double dmin = min_metric_dist_to_box(S, q, A.lo(), A.hi());
  double dmax = max_metric_dist_to_box_vertices(S, q, A.lo(), A.hi());
  out.in_dilation = dmin <= r && r <= dmax;
  return out;
}

// ---------------------------------------------------------------------------
// Surface integrals
// ---------------------------------------------------------------------------

double surface_integral(const SurfaceQuadrature& quad,
                        const std::function<double(const Vec&, const Vec&)>& f) {
  double acc = 0.0;
  for (int j = 0; j < quad.size(); ++j) {
    double v = f(quad.nodes.col(j), quad.normals.col(j));
    if (!std::isfinite(v)) throw std::runtime_error("surface_integral: non-finite integrand");
    acc += quad.weights[j] * v;
  }
  return acc;
}

Vec surface_integral_vector(const SurfaceQuadrature& quad,
                            const std::function<Vec(const Vec&, const Vec&)>& f) {
  Vec acc;
  for (int j = 0; j < quad.size(); ++j) {
    Vec v = f(quad.nodes.col(j), quad.normals.col(j));
    if (!v.allFinite()) throw std::runtime_error("surface_integral: non-finite integrand");
    if (acc.size() == 0) acc = Vec::Zero(v.size());
    acc += quad.weights[j] * v;
  }
  return acc;
}

double surface_integral_adaptive(const AffineSphere& M,
                                 const std::function<double(const Vec&, const Vec&)>& f,
                                 double rel_tol, int n0) {
  int n = n0 > 0 ? n0 : (M.dim() == 2 ? 512 : 64);
  double prev = surface_integral(SurfaceQuadrature::build(M, n), f);
  for (int iter = 0; iter < 10; ++iter) {
    n *= 2;
    double cur = surface_integral(SurfaceQuadrature::build(M, n), f);
    if (std::fabs(cur - prev) <= rel_tol * std::max(1.0, std::fabs(cur))) return cur;
    prev = cur;
  }
  throw std::runtime_error("surface_integral_adaptive: did not converge");
}

// ---------------------------------------------------------------------------
// Hyperplane sections and cap quadrature
// ---------------------------------------------------------------------------

double hyperplane_section_measure(const AffineSphere& M, const Vec& n, double rho) {
  if (std::fabs(rho) > 1.0) throw std::invalid_argument("hyperplane_section_measure: |rho| <= 1");
  double phi = std::pow(std::max(0.0, 1.0 - rho * rho), 0.5 * (M.dim() - 1));
  return phi * M.plane_section_factor(n);
}

namespace {

// d=2 cap integral: int f(y,u) 1_{y.n >= level} over one angular cell,
// straddling cells refined by bisection (indicator evaluated at nodes only).
struct CapIntegrator2d {
  const AffineSphere& M;
  const std::function<Vec(const Vec&, const Vec&)>& f;
  const Vec& n;
  double level;

  bool inside(double th) const {
    Vec z(2);
    z << std::cos(th), std::sin(th);
    return (M.point(z)).dot(n) >= level;
  }
  Vec smooth_cell(double a, double b) const {
    Vec acc;
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int g = 0; g < 4; ++g) {
      double th = mid + half * kGl4X[g];
      Vec z(2);
      z << std::cos(th), std::sin(th);
      Vec val = f(M.point(z), M.outward_normal(z)) * M.surface_jacobian(z);
      if (acc.size() == 0) acc = Vec::Zero(val.size());
      acc += kGl4W[g] * val;
    }
    return acc * half;
  }
  Vec cell(double a, double b, int depth, int dim_out) const {
    bool probes_same = true;
    bool first = inside(a);
    for (int k = 1; k <= 4; ++k) {
      if (inside(a + (b - a) * k / 4.0) != first) {
        probes_same = false;
        break;
      }
    }
    if (probes_same) return first ? smooth_cell(a, b) : Vec::Zero(dim_out);
    if (depth >= 48) {
      // interval is at machine resolution; charge half the cell
      return 0.5 * smooth_cell(a, b);
    }
    double mid = 0.5 * (a + b);
    return cell(a, mid, depth + 1, dim_out) + cell(mid, b, depth + 1, dim_out);
  }
};

// d=3 cap integral over the (cos polar, azimuth) grid with quadtree refinement
// of straddling cells.
struct CapIntegrator3d {
  const AffineSphere& M;
  const std::function<Vec(const Vec&, const Vec&)>& f;
  const Vec& n;
  double level;

  Vec sphere_point(double c, double az) const {
    double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    Vec z(3);
    z << s * std::cos(az), s * std::sin(az), c;
    return z;
  }
  bool inside(double c, double az) const { return (M.point(sphere_point(c, az))).dot(n) >= level; }
  Vec value(double c, double az) const {
    Vec z = sphere_point(c, az);
    return f(M.point(z), M.outward_normal(z)) * M.surface_jacobian(z);
  }
  Vec cell(double c0, double c1, double a0, double a1, int depth, int dim_out) const {
    double cm = 0.5 * (c0 + c1), am = 0.5 * (a0 + a1);
    bool first = inside(c0, a0);
    bool same = inside(c0, a1) == first && inside(c1, a0) == first && inside(c1, a1) == first &&
                inside(cm, am) == first;
    double area = (c1 - c0) * (a1 - a0);
    if (same) {
      if (!first) return Vec::Zero(dim_out);
      // midpoint product rule on the smooth part
      Vec acc = Vec::Zero(dim_out);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          acc += value(c0 + (i + 0.5) * 0.5 * (c1 - c0), a0 + (j + 0.5) * 0.5 * (a1 - a0));
      return acc * (0.25 * area);
    }
    if (depth >= 12) {
      if (!inside(cm, am)) return Vec::Zero(dim_out);
      Vec v = value(cm, am);
      return v * area;
    }
    return cell(c0, cm, a0, am, depth + 1, dim_out) + cell(c0, cm, am, a1, depth + 1, dim_out) +
           cell(cm, c1, a0, am, depth + 1, dim_out) + cell(cm, c1, am, a1, depth + 1, dim_out);
  }
};

}  // namespace

Vec cap_integral_vector(const AffineSphere& M, const std::function<Vec(const Vec&, const Vec&)>& f,
                        const Vec& n, double level, int n_main, int n_azimuth) {
  if (M.dim() == 2) {
    CapIntegrator2d ci{M, f, n, level};
    Vec probe = f(M.point(Vec::Ones(2).normalized()), M.outward_normal(Vec::Ones(2).normalized()));
    int dim_out = static_cast<int>(probe.size());
    Vec acc = Vec::Zero(dim_out);
    for (int j = 0; j < n_main; ++j)
      acc += ci.cell(kTwoPi * j / n_main, kTwoPi * (j + 1) / n_main, 0, dim_out);
    return acc;
  }
  int np = n_main, na = n_azimuth > 0 ? n_azimuth : 2 * n_main;
  CapIntegrator3d ci{M, f, n, level};
  Vec z0 = Vec::Ones(3).normalized();
  int dim_out = static_cast<int>(f(M.point(z0), M.outward_normal(z0)).size());
  Vec acc = Vec::Zero(dim_out);
  for (int i = 0; i < np; ++i) {
    double c0 = -1.0 + 2.0 * i / np, c1 = -1.0 + 2.0 * (i + 1) / np;
    for (int j = 0; j < na; ++j)
      acc += ci.cell(c0, c1, kTwoPi * j / na, kTwoPi * (j + 1) / na, 0, dim_out);
  }
  return acc;
}

double hyperplane_section_cap_quadrature(const AffineSphere& M, const Vec& n, double rho,
                                         int n_main, int n_azimuth) {
  double level = M.support(n) * rho;
  auto f = [](const Vec&, const Vec& u) { return Vec(u); };
  Vec v = cap_integral_vector(M, f, n, level, n_main, n_azimuth);
  return v.dot(n);
}

// ---------------------------------------------------------------------------
// Erosion volume asymptotics
// ---------------------------------------------------------------------------

ErosionAsymptote erosion_volume_asymptote(const AmbitSet& A, const AffineSphere& M, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("erosion_volume_asymptote: r must be > 0");
  int d = A.dim();
  ErosionAsymptote out;

  if (A.kind() == AmbitSet::Kind::Ball) {
    Mat diff = M.T() - M.T()(0, 0) * Mat::Identity(d, d);
    if (diff.cwiseAbs().maxCoeff() > 1e-14 * M.T().cwiseAbs().maxCoeff())
      throw std::invalid_argument(
          "erosion_volume_asymptote: closed-form ball volume requires T proportional to I");
    double kappa = std::fabs(M.T()(0, 0));
    double inner = A.radius() - r * kappa;
    if (!(inner > 0.0)) throw std::invalid_argument("erosion_volume_asymptote: eroded set empty");
    out.volume = unit_ball_volume(d) * (std::pow(A.radius(), d) - std::pow(inner, d));
  } else {
    double vol_full = 1.0, vol_inner = 1.0;
    for (int i = 0; i < d; ++i) {
      Vec e = Vec::Zero(d);
      e[i] = 1.0;
      double w = A.hi()[i] - A.lo()[i];
      double wi = w - 2.0 * r * M.support(e);
      if (!(wi > 0.0)) throw std::invalid_argument("erosion_volume_asymptote: eroded set empty");
      vol_full *= w;
      vol_inner *= wi;
    }
    out.volume = vol_full - vol_inner;
  }
  out.slope_estimate = out.volume / r;

  int n = d == 2 ? 512 : 64;
  double prev = 0.0;
  for (int iter = 0;; ++iter) {
    BoundaryQuadrature bq = BoundaryQuadrature::build(A, n);
    double acc = 0.0;
    for (int j = 0; j < bq.size(); ++j)
      acc += bq.weights[j] * std::max(0.0, M.support(-bq.normals.col(j)));
    if (iter > 0 && std::fabs(acc - prev) <= 1e-10 * std::max(1.0, std::fabs(acc))) {
      out.predicted_slope = acc;
      break;
    }
    if (iter >= 8) {
      out.predicted_slope = acc;
      break;
    }
    prev = acc;
    n *= 2;
  }
  return out;
}

}  // namespace ambitflux
