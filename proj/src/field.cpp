#include "ambitflux/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ambitflux {

namespace {

Mat psd_sqrt(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

// Cholesky with escalating diagonal jitter; throws if the matrix resists.
Mat chol_with_jitter(Mat m, const char* what) {
  double scale = std::max(1e-300, m.diagonal().maxCoeff());
  double jitter = 1e-12 * scale;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    m.diagonal().array() += jitter;
    jitter *= 100.0;
  }
  throw std::runtime_error(std::string(what) + ": covariance factorization failed");
}

double lens_overlap(double dist, double R, int d) {
  if (dist >= 2.0 * R) return 0.0;
  if (d == 2) {
    double x = std::clamp(dist / (2.0 * R), 0.0, 1.0);
    return 2.0 * R * R * std::acos(x) - 0.5 * dist * std::sqrt(std::max(0.0, 4.0 * R * R - dist * dist));
  }
  double t = 2.0 * R - dist;
  return kPi * t * t * (dist * dist + 4.0 * dist * R) / (12.0 * std::max(dist, 1e-300)) +
         (dist == 0.0 ? 4.0 / 3.0 * kPi * R * R * R : 0.0);
}

// R2 quasi-random sequence (generalized golden ratio).
Mat r2_sequence(const BoxRegion& region, int n) {
  int d = region.dim();
  double phi = 1.0;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (d + 1));
  Vec alpha(d);
  double g = 1.0 / phi;
  for (int j = 0; j < d; ++j) {
    alpha[j] = g;
    g /= phi;
  }
  Mat pts(d, n);
  Vec x = Vec::Constant(d, 0.5);
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) {
      x[j] += alpha[j];
      x[j] -= std::floor(x[j]);
      pts(j, s) = region.lo[j] + x[j] * (region.hi[j] - region.lo[j]);
    }
  }
  return pts;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

void gauss_legendre_01(int n, Vec& x, Vec& w) {
  // nodes/weights on [0,1]
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
    double wk = 2.0 / ((1.0 - t * t) * dp * dp);
    x[k] = 0.5 * (1.0 - t);
    x[n - 1 - k] = 0.5 * (1.0 + t);
    w[k] = 0.5 * wk;
    w[n - 1 - k] = 0.5 * wk;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// KernelF
// ---------------------------------------------------------------------------

KernelF KernelF::constant(Mat C) {
  KernelF k;
  k.kind_ = Kind::Constant;
  k.C_ = std::move(C);
  return k;
}
KernelF KernelF::bump(Mat C) {
  KernelF k;
  k.kind_ = Kind::Bump;
  k.C_ = std::move(C);
  return k;
}
KernelF KernelF::boundary_vanishing(Mat C) {
  KernelF k;
  k.kind_ = Kind::BoundaryVanishing;
  k.C_ = std::move(C);
  return k;
}
KernelF KernelF::tilted(Mat C, Vec a) {
  KernelF k;
  k.kind_ = Kind::Tilted;
  k.C_ = std::move(C);
  k.a_ = std::move(a);
  return k;
}
KernelF KernelF::bump_tilted(Mat C, Vec a) {
  KernelF k;
  k.kind_ = Kind::BumpTilted;
  k.C_ = std::move(C);
  k.a_ = std::move(a);
  return k;
}

double KernelF::scalar(const Vec& p, const Vec& q) const {
  switch (kind_) {
    case Kind::Constant:
      return 1.0;
    case Kind::Bump:
      return std::exp(-(q - p).squaredNorm());
    case Kind::BoundaryVanishing:
      return 1.0 - (p - q).squaredNorm();
    case Kind::Tilted:
      return 1.0 + a_.dot(q);
    case Kind::BumpTilted:
      return (1.0 + a_.dot(q)) * std::exp(-(q - p).squaredNorm());
  }
  return 0.0;
}

double KernelF::scalar_dp(int k, const Vec& p, const Vec& q) const {
  switch (kind_) {
    case Kind::Constant:
    case Kind::Tilted:
      return 0.0;
    case Kind::Bump:
      return 2.0 * (q[k] - p[k]) * std::exp(-(q - p).squaredNorm());
    case Kind::BoundaryVanishing:
      return 2.0 * (q[k] - p[k]);
    case Kind::BumpTilted:
      return (1.0 + a_.dot(q)) * 2.0 * (q[k] - p[k]) * std::exp(-(q - p).squaredNorm());
  }
  return 0.0;
}

double KernelF::scalar_dq(int k, const Vec& p, const Vec& q) const {
  switch (kind_) {
    case Kind::Constant:
      return 0.0;
    case Kind::Bump:
      return -2.0 * (q[k] - p[k]) * std::exp(-(q - p).squaredNorm());
    case Kind::BoundaryVanishing:
      return -2.0 * (q[k] - p[k]);
    case Kind::Tilted:
      return a_[k];
    case Kind::BumpTilted: {
      double e = std::exp(-(q - p).squaredNorm());
      return a_[k] * e + (1.0 + a_.dot(q)) * (-2.0) * (q[k] - p[k]) * e;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// FieldBasis
// ---------------------------------------------------------------------------

FieldBasis FieldBasis::from_triplet(LevyTriplet t) {
  t.validate();
  FieldBasis b;
  b.kind = Kind::Triplet;
  b.triplet = std::move(t);
  return b;
}

FieldBasis FieldBasis::from_stable(StableSpec s) {
  s.validate();
  FieldBasis b;
  b.kind = Kind::Stable;
  b.stable = std::move(s);
  return b;
}

int FieldBasis::dim() const {
  return kind == Kind::Triplet ? triplet.dim() : stable.dim();
}

// ---------------------------------------------------------------------------
// GaussianFactor
// ---------------------------------------------------------------------------

Mat GaussianFactor::draw(RngStream& rng) const {
  Mat z(n_points, d);
  for (int a = 0; a < n_points; ++a)
    for (int i = 0; i < d; ++i) z(a, i) = rng.next_normal();
  return L_pts * z * R_mark.transpose();
}

// ---------------------------------------------------------------------------
// FieldModel
// ---------------------------------------------------------------------------

FieldModel::FieldModel(AmbitSet shape, KernelF kernel, FieldBasis basis, double max_offset,
                       FieldModelOptions opt)
    : shape_(std::move(shape)), kernel_(std::move(kernel)), basis_(std::move(basis)),
      opt_(opt), max_offset_(max_offset) {
  if (kernel_.rows() != shape_.dim())
    throw std::invalid_argument("FieldModel: kernel rows must equal the space dimension");
  if (kernel_.cols() != basis_.dim())
    throw std::invalid_argument("FieldModel: kernel cols must equal the mark dimension");
  if (!(max_offset_ >= 0.0)) throw std::invalid_argument("FieldModel: max_offset must be >= 0");
  region_ = shape_.bounding_box(max_offset_ + opt_.bounding_margin);

  const int m = mark_dim();
  drift_density_ = Vec::Zero(m);
  sigma_eff_ = Mat::Zero(m, m);

  if (basis_.kind == FieldBasis::Kind::Triplet) {
    const LevyTriplet& t = basis_.triplet;
    drift_density_ = t.gamma;
    sigma_eff_ = t.sigma;
    double vol = region_.volume();
    int n_heavy = 0;
    for (const auto& a : t.nu.atoms)
      if (a.radial.kind == RadialMeasure::Kind::PowerTail) ++n_heavy;
    for (const auto& a : t.nu.atoms) {
      double eps = 0.0;
      if (a.radial.kind == RadialMeasure::Kind::PowerTail) {
        if (opt_.series_eps > 0.0) {
          eps = opt_.series_eps;
        } else {
          // expected explicit count per heavy atom = budget / n_heavy
          double target = opt_.series_budget / n_heavy;
          double aa = a.radial.index;
          eps = std::pow(1.0 + aa * target / (a.weight * a.radial.coef * vol), -1.0 / aa);
        }
      }
      cp_eps_.push_back(eps);
      drift_density_ -= a.weight * a.radial.mean_between(std::min(eps, 1.0), 1.0) * a.direction;
      if (eps > 0.0)
        sigma_eff_ += a.weight * a.radial.second_moment_below(eps) *
                      (a.direction * a.direction.transpose());
    }
  } else if (basis_.stable.alpha == 2.0) {
    sigma_eff_ = basis_.stable.sigma;
  } else {
    const StableSpec& s = basis_.stable;
    double c_alpha = stable_polar_constant(s.alpha);
    double acc = 0.0;
    Vec mean_dir = Vec::Zero(m);
    Mat cov_dir = Mat::Zero(m, m);
    for (const auto& [u, w] : s.spectral) {
      double lam = w / c_alpha;  // polar-decomposition weight
      acc += lam;
      series_atom_cum_.push_back(acc);
      mean_dir += lam * u;
      cov_dir += lam * (u * u.transpose());
    }
    series_rate_ = acc;
    double mu = series_rate_ * region_.volume();
    series_eps_ = opt_.series_eps > 0.0
                      ? opt_.series_eps
                      : std::pow(s.alpha * opt_.series_budget / mu, -1.0 / s.alpha);
    double a = s.alpha;
    // sub-eps remainder: centered Gaussian substitute with the exact
    // covariance density, plus the exact mean compensation (zero when the
    // spectral measure is symmetric)
    sigma_eff_ = cov_dir * (std::pow(series_eps_, 2.0 - a) / (2.0 - a));
    drift_density_ = -mean_dir * (std::pow(series_eps_, 1.0 - a) / (a - 1.0));
  }

  has_gaussian_ = sigma_eff_.cwiseAbs().maxCoeff() > 0.0;
  mark_cov_ = kernel_.matrix() * sigma_eff_ * kernel_.matrix().transpose();

  build_quadrature();
  if (kernel_.is_constant()) {
    drift_const_ = shape_.volume() * (kernel_.matrix() * drift_density_);
    drift_const_valid_ = true;
  } else if (kernel_.translation_invariant()) {
    double s = 0.0;
    Vec p0 = Vec::Zero(space_dim());
    for (int i = 0; i < quad_weights_.size(); ++i)
      s += quad_weights_[i] * kernel_.scalar(p0, Vec(quad_nodes_.col(i)) + p0);
    drift_const_ = s * (kernel_.matrix() * drift_density_);
    drift_const_valid_ = true;
  }

  if (!kernel_.is_constant() && has_gaussian_) {
    qmc_nodes_ = r2_sequence(region_, opt_.cov_qmc_nodes);
    qmc_cell_weight_ = region_.volume() / opt_.cov_qmc_nodes;
  }
}

void FieldModel::build_quadrature() {
  // Product Gauss-Legendre nodes over A (A-absolute coordinates). The catalog
  // kernels are entire, so a fixed spectral rule converges well below 1e-8;
  // the node count doubles once if a probe integral disagrees.
  int n = opt_.drift_quad_nodes;
  auto build = [&](int nn) {
    std::vector<Vec> nodes;
    std::vector<double> weights;
    int d = space_dim();
    Vec gx, gw;
    if (shape_.kind() == AmbitSet::Kind::Box) {
      gauss_legendre_01(nn, gx, gw);
      if (d == 2) {
        for (int i = 0; i < nn; ++i)
          for (int j = 0; j < nn; ++j) {
            Vec p(2);
            p << shape_.lo()[0] + gx[i] * (shape_.hi()[0] - shape_.lo()[0]),
                shape_.lo()[1] + gx[j] * (shape_.hi()[1] - shape_.lo()[1]);
            nodes.push_back(p);
            weights.push_back(gw[i] * gw[j] * shape_.volume());
          }
      } else {
        for (int i = 0; i < nn; ++i)
          for (int j = 0; j < nn; ++j)
            for (int k = 0; k < nn; ++k) {
              Vec p(3);
              p << shape_.lo()[0] + gx[i] * (shape_.hi()[0] - shape_.lo()[0]),
                  shape_.lo()[1] + gx[j] * (shape_.hi()[1] - shape_.lo()[1]),
                  shape_.lo()[2] + gx[k] * (shape_.hi()[2] - shape_.lo()[2]);
              nodes.push_back(p);
              weights.push_back(gw[i] * gw[j] * gw[k] * shape_.volume());
            }
      }
    } else {
      double R = shape_.radius();
      gauss_legendre_01(nn, gx, gw);
      if (d == 2) {
        int na = 2 * nn;
        for (int i = 0; i < nn; ++i) {
          double rho = gx[i] * R;
          for (int j = 0; j < na; ++j) {
            double th = kTwoPi * (j + 0.5) / na;
            Vec p(2);
            p << rho * std::cos(th), rho * std::sin(th);
            nodes.push_back(shape_.center() + p);
            weights.push_back(gw[i] * R * rho * kTwoPi / na);
          }
        }
      } else {
        int np = nn, na = 2 * nn;
        Vec px, pw;
        gauss_legendre_01(np, px, pw);
        for (int i = 0; i < nn; ++i) {
          double rho = gx[i] * R;
          for (int ip = 0; ip < np; ++ip) {
            double c = 2.0 * px[ip] - 1.0, s = std::sqrt(std::max(0.0, 1.0 - c * c));
            for (int j = 0; j < na; ++j) {
              double az = kTwoPi * (j + 0.5) / na;
              Vec p(3);
              p << rho * s * std::cos(az), rho * s * std::sin(az), rho * c;
              nodes.push_back(shape_.center() + p);
              weights.push_back(gw[i] * R * rho * rho * (2.0 * pw[ip]) * kTwoPi / na);
            }
          }
        }
      }
    }
    Mat nm(space_dim(), static_cast<int>(nodes.size()));
    Vec wv(static_cast<int>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      nm.col(static_cast<int>(i)) = nodes[i];
      wv[static_cast<int>(i)] = weights[i];
    }
    quad_nodes_ = nm;
    quad_weights_ = wv;
  };
  build(n);
  if (!kernel_.is_constant()) {
    Vec probe = Vec::Zero(space_dim());
    double s1 = 0.0;
    for (int i = 0; i < quad_weights_.size(); ++i)
      s1 += quad_weights_[i] * kernel_.scalar(probe, Vec(quad_nodes_.col(i)) + probe);
    Mat save_nodes = quad_nodes_;
    Vec save_w = quad_weights_;
    build(2 * n);
    double s2 = 0.0;
    for (int i = 0; i < quad_weights_.size(); ++i)
      s2 += quad_weights_[i] * kernel_.scalar(probe, Vec(quad_nodes_.col(i)) + probe);
    if (std::fabs(s2 - s1) <= 1e-9 * std::max(1.0, std::fabs(s2))) {
      quad_nodes_ = save_nodes;
      quad_weights_ = save_w;
    }
  }
}

Vec FieldModel::drift_integral(const Vec& p) const {
  if (drift_const_valid_) return drift_const_;
  double s = 0.0;
  for (int i = 0; i < quad_weights_.size(); ++i)
    s += quad_weights_[i] * kernel_.scalar(p, Vec(quad_nodes_.col(i)) + p);
  return s * (kernel_.matrix() * drift_density_);
}

Mat FieldModel::gradient_drift_combined(const Vec& p, const Vec& gamma_eff) const {
  int d = space_dim();
  Mat out = Mat::Zero(d, d);
  if (kernel_.is_constant()) return out;
  Vec cg = kernel_.matrix() * gamma_eff;
  for (int k = 0; k < d; ++k) {
    double g = 0.0;
    for (int i = 0; i < quad_weights_.size(); ++i) {
      Vec q = Vec(quad_nodes_.col(i)) + p;
      g += quad_weights_[i] * (kernel_.scalar_dq(k, p, q) + kernel_.scalar_dp(k, p, q));
    }
    out.col(k) = g * cg;
  }
  return out;
}

Mat FieldModel::gradient_drift_row_convention(const Vec& p, const Vec& gamma_eff) const {
  int d = space_dim();
  if (mark_dim() != d)
    throw std::invalid_argument("gamma_index_row convention requires m == d");
  Mat out = Mat::Zero(d, d);
  if (kernel_.is_constant()) return out;
  Vec row_sums = kernel_.matrix().rowwise().sum();
  Vec cg = kernel_.matrix() * gamma_eff;
  for (int k = 0; k < d; ++k) {
    double gq = 0.0, gp = 0.0;
    for (int i = 0; i < quad_weights_.size(); ++i) {
      Vec q = Vec(quad_nodes_.col(i)) + p;
      gq += quad_weights_[i] * kernel_.scalar_dq(k, p, q);
      gp += quad_weights_[i] * kernel_.scalar_dp(k, p, q);
    }
    for (int i = 0; i < d; ++i) out(i, k) = gq * row_sums[i] * gamma_eff[i] + gp * cg[i];
  }
  return out;
}

double FieldModel::scalar_overlap(const Vec& pa, const Vec& pb) const {
  if (kernel_.is_constant()) {
    if (shape_.kind() == AmbitSet::Kind::Ball)
      return lens_overlap((pa - pb).norm(), shape_.radius(), space_dim());
    double v = 1.0;
    for (int i = 0; i < space_dim(); ++i) {
      double w = shape_.hi()[i] - shape_.lo()[i];
      v *= std::max(0.0, w - std::fabs(pa[i] - pb[i]));
    }
    return v;
  }
  double acc = 0.0;
  for (int s = 0; s < qmc_nodes_.cols(); ++s) {
    Vec q = qmc_nodes_.col(s);
    if (!shape_.contains(q - pa) || !shape_.contains(q - pb)) continue;
    acc += kernel_.scalar(pa, q) * kernel_.scalar(pb, q);
  }
  return acc * qmc_cell_weight_;
}

Mat FieldModel::gaussian_cov_block(const Vec& pa, const Vec& pb) const {
  return scalar_overlap(pa, pb) * mark_cov_;
}

std::shared_ptr<const GaussianFactor> FieldModel::gaussian_factor(const Mat& points) const {
  std::uint64_t key = fnv1a(points.data(), sizeof(double) * points.size());
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = factor_cache_.find(key);
    if (it != factor_cache_.end() && it->second->points.size() == points.size() &&
        it->second->points == points)
      return it->second;
  }
  auto f = std::make_shared<GaussianFactor>();
  f->n_points = static_cast<int>(points.cols());
  f->d = space_dim();
  f->points = points;
  Mat O(f->n_points, f->n_points);
  for (int a = 0; a < f->n_points; ++a)
    for (int b = 0; b <= a; ++b) {
      double v = scalar_overlap(points.col(a), points.col(b));
      O(a, b) = v;
      O(b, a) = v;
    }
  f->L_pts = chol_with_jitter(std::move(O), "gaussian_factor");
  f->R_mark = psd_sqrt(mark_cov_);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    factor_cache_[key] = f;
  }
  return f;
}

void FieldModel::check_in_region(const Vec& p) const {
  BoxRegion ab = shape_.bounding_box(0.0);
  for (int i = 0; i < space_dim(); ++i) {
    if (ab.lo[i] + p[i] < region_.lo[i] - 1e-12 || ab.hi[i] + p[i] > region_.hi[i] + 1e-12) {
      std::ostringstream os;
      os << "evaluation offset outside the bounding region: p = (";
      for (int j = 0; j < space_dim(); ++j) os << (j ? ", " : "") << p[j];
      os << "), max offset " << max_offset_;
      throw std::out_of_range(os.str());
    }
  }
}

FieldRealization FieldModel::realize(std::uint64_t master_seed, std::uint64_t replication) const {
  FieldRealization r;
  r.model_ = this;
  r.master_seed_ = master_seed;
  r.replication_ = replication;
  r.gauss_stream_ = RngStream(master_seed, substream(0xB, replication));
  RngStream jump_stream(master_seed, substream(0xA, replication));

  const double vol = region_.volume();
  if (basis_.kind == FieldBasis::Kind::Triplet) {
    const LevyTriplet& t = basis_.triplet;
    double max_eps = 0.0;
    for (std::size_t k = 0; k < t.nu.atoms.size(); ++k) {
      const auto& a = t.nu.atoms[k];
      double eps = cp_eps_[k];
      max_eps = std::max(max_eps, eps);
      double mass = a.weight * a.radial.mass_above(eps);
      if (!(mass > 0.0)) continue;
      long long n = jump_stream.next_poisson(vol * mass);
      for (long long i = 0; i < n; ++i) {
        double s = a.radial.sample_above(eps, jump_stream);
        r.jumps_.push_back({region_.sample(jump_stream), s * a.direction});
      }
    }
    r.truncation_eps_ = max_eps;
  } else if (basis_.stable.alpha < 2.0) {
    const StableSpec& s = basis_.stable;
    double mu = series_rate_ * vol;
    double gamma_arr = 0.0;
    double a = s.alpha;
    for (;;) {
      gamma_arr += jump_stream.next_exponential();
      double size = std::pow(a * gamma_arr / mu, -1.0 / a);
      if (size < series_eps_) break;
      double u = jump_stream.next_double() * series_rate_;
      std::size_t idx =
          std::lower_bound(series_atom_cum_.begin(), series_atom_cum_.end(), u) -
          series_atom_cum_.begin();
      if (idx >= s.spectral.size()) idx = s.spectral.size() - 1;
      r.jumps_.push_back({region_.sample(jump_stream), size * s.spectral[idx].first});
    }
    r.truncation_eps_ = series_eps_;
  }
  r.jump_cx_.reserve(r.jumps_.size());
  for (const auto& j : r.jumps_) r.jump_cx_.push_back(kernel_.matrix() * j.mark);
  return r;
}

// ---------------------------------------------------------------------------
// FieldRealization
// ---------------------------------------------------------------------------

Vec FieldRealization::jump_sum(const Vec& p) const {
  const FieldModel& m = *model_;
  Vec acc = Vec::Zero(m.space_dim());
  for (std::size_t k = 0; k < jumps_.size(); ++k) {
    Vec rel = jumps_[k].location - p;
    if (!m.shape().contains(rel)) continue;
    if (m.kernel().is_constant())
      acc += jump_cx_[k];
    else
      acc += m.kernel().scalar(p, jumps_[k].location) * jump_cx_[k];
  }
  return acc;
}

void FieldRealization::extend_gaussian(const Vec& p, Vec& out) {
  const FieldModel& m = *model_;
  int d = m.space_dim();
  int k = static_cast<int>(gauss_points_.size()) * d;
  Mat c(k, d);
  for (std::size_t a = 0; a < gauss_points_.size(); ++a) {
    Mat blk = m.gaussian_cov_block(gauss_points_[a], p);
    c.block(static_cast<int>(a) * d, 0, d, d) = blk;
  }
  Mat cpp = m.gaussian_cov_block(p, p);
  Mat w;
  if (k > 0)
    w = gauss_chol_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(c);
  else
    w = Mat::Zero(0, d);
  Mat cond = cpp - w.transpose() * w;
  Mat lc = chol_with_jitter(cond, "evaluate");
  Vec xi(d);
  for (int i = 0; i < d; ++i) xi[i] = gauss_stream_.next_normal();
  Vec mean = k > 0 ? Vec(w.transpose() * gauss_white_.head(k)) : Vec(Vec::Zero(d));
  out = mean + lc * xi;

  Mat newL = Mat::Zero(k + d, k + d);
  if (k > 0) newL.topLeftCorner(k, k) = gauss_chol_.topLeftCorner(k, k);
  newL.block(k, 0, d, k) = w.transpose();
  newL.block(k, k, d, d) = lc;
  gauss_chol_ = std::move(newL);
  Vec nw(k + d);
  if (k > 0) nw.head(k) = gauss_white_.head(k);
  nw.tail(d) = xi;
  gauss_white_ = std::move(nw);
  gauss_points_.push_back(p);
  gauss_used_ = true;
}

Vec FieldRealization::evaluate(const Vec& p) {
  const FieldModel& m = *model_;
  m.check_in_region(p);
  Vec x = m.drift_integral(p) + jump_sum(p);
  if (m.has_gaussian()) {
    Vec g;
    extend_gaussian(p, g);
    x += g;
  }
  return x;
}

IncrementTable FieldRealization::increments(const Vec& p0, double r,
                                            const std::vector<double>& times,
                                            const SurfaceQuadrature& quad) {
  const FieldModel& m = *model_;
  if (!(r >= 0.0)) throw std::invalid_argument("increments: r must be >= 0");
  if (m.has_gaussian() && gauss_used_)
    throw std::logic_error("increments: joint Gaussian batch must precede pointwise evaluations");

  const int d = m.space_dim();
  const int n = quad.size();
  const int nt = static_cast<int>(times.size());
  double t_max = 0.0;
  for (double t : times) {
    if (!(t >= 0.0)) throw std::invalid_argument("increments: times must be >= 0");
    t_max = std::max(t_max, t);
  }
  double max_node = 0.0;
  for (int j = 0; j < n; ++j) max_node = std::max(max_node, quad.nodes.col(j).norm());

  Mat points(d, 1 + n * nt);
  points.col(0) = p0;
  for (int l = 0; l < nt; ++l)
    for (int j = 0; j < n; ++j)
      points.col(1 + l * n + j) = p0 + (r * times[l]) * quad.nodes.col(j);
  for (int c = 0; c < points.cols(); ++c) m.check_in_region(points.col(c));

  IncrementTable table;
  table.times = times;
  table.r = r;
  table.delta.assign(nt, Mat::Zero(d, n));

  // drift
  Vec drift0 = m.drift_integral(p0);
  table.x0 = drift0 + jump_sum(p0);
  if (!m.kernel().translation_invariant()) {
    for (int l = 0; l < nt; ++l)
      for (int j = 0; j < n; ++j)
        table.delta[l].col(j) += m.drift_integral(points.col(1 + l * n + j)) - drift0;
  }

  // jumps: constant kernels see only membership flips near the boundary shell
  if (m.kernel().is_constant()) {
    double band = r * t_max * max_node + 1e-12;
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
      const Vec& q = jumps_[k].location;
      Vec rel0 = q - p0;
      if (std::fabs(m.shape().boundary_offset(rel0)) > band) continue;
      bool in0 = m.shape().contains(rel0);
      for (int l = 0; l < nt; ++l)
        for (int j = 0; j < n; ++j) {
          bool in = m.shape().contains(q - points.col(1 + l * n + j));
          if (in != in0) table.delta[l].col(j) += in ? jump_cx_[k] : Vec(-jump_cx_[k]);
        }
    }
  } else {
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
      const Vec& q = jumps_[k].location;
      bool in0 = m.shape().contains(q - p0);
      double s0 = in0 ? m.kernel().scalar(p0, q) : 0.0;
      for (int l = 0; l < nt; ++l)
        for (int j = 0; j < n; ++j) {
          const Vec p = points.col(1 + l * n + j);
          bool in = m.shape().contains(q - p);
          double s = in ? m.kernel().scalar(p, q) : 0.0;
          if (s != s0) table.delta[l].col(j) += (s - s0) * jump_cx_[k];
        }
    }
  }

  // joint Gaussian batch
  if (m.has_gaussian()) {
    auto factor = m.gaussian_factor(points);
    Mat g = factor->draw(gauss_stream_);
    gauss_used_ = true;
    table.x0 += g.row(0).transpose();
    for (int l = 0; l < nt; ++l)
      for (int j = 0; j < n; ++j)
        table.delta[l].col(j) += (g.row(1 + l * n + j) - g.row(0)).transpose();
  }
  return table;
}

Mat FieldRealization::gradient(const Vec& p0) const {
  const FieldModel& m = *model_;
  if (m.basis().kind == FieldBasis::Kind::Stable)
    throw std::invalid_argument("gradient: infinite-variation basis has no DX");
  if (!m.basis().triplet.finite_variation())
    throw std::invalid_argument("gradient: basis is not of finite variation");
  return gradient_terms(p0, m.drift_density());
}

Mat FieldRealization::gradient_terms(const Vec& p0, const Vec& gamma_eff) const {
  const FieldModel& m = *model_;
  const int d = m.space_dim();
  Mat out = m.options().gamma_index_row ? m.gradient_drift_row_convention(p0, gamma_eff)
                                        : m.gradient_drift_combined(p0, gamma_eff);
  for (std::size_t k = 0; k < jumps_.size(); ++k) {
    const Vec& q = jumps_[k].location;
    if (!m.shape().contains(q - p0)) continue;
    for (int kk = 0; kk < d; ++kk)
      out.col(kk) += m.kernel().scalar_dp(kk, p0, q) * jump_cx_[k];
  }
  return out;
}

IncrementTable increments_of(const std::function<Vec(const Vec&)>& field, const Vec& p0, double r,
                             const std::vector<double>& times, const SurfaceQuadrature& quad) {
  IncrementTable table;
  table.times = times;
  table.r = r;
  table.x0 = field(p0);
  int d = static_cast<int>(table.x0.size());
  int n = quad.size();
  table.delta.assign(times.size(), Mat::Zero(d, n));
  for (std::size_t l = 0; l < times.size(); ++l)
    for (int j = 0; j < n; ++j)
      table.delta[l].col(j) =
          field(p0 + (r * times[l]) * quad.nodes.col(j)) - table.x0;
  return table;
}

}  // namespace ambitflux
