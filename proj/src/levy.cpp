#include "ambitflux/levy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ambitflux {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 16-point Gauss-Legendre rule on [-1,1], positive half.
constexpr double kGlX[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                            0.9445750230732326, 0.9894009349916499};
constexpr double kGlW[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                            0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                            0.0622535239386479, 0.0271524594117541};

// Square root factor of a symmetric PSD matrix (eigenvalues clipped at 0).
Mat psd_sqrt(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

// ---------------------------------------------------------------------------
// RadialMeasure
// ---------------------------------------------------------------------------

RadialMeasure RadialMeasure::power_tail(double index, double coef) {
  if (!(index > 0.0 && index < 2.0) || index == 1.0)
    throw std::invalid_argument("power_tail: index must be in (0,2) excluding 1");
  if (!(coef > 0.0)) throw std::invalid_argument("power_tail: coef must be > 0");
  RadialMeasure r;
  r.kind = Kind::PowerTail;
  r.index = index;
  r.coef = coef;
  return r;
}

RadialMeasure RadialMeasure::exponential(double rate, double scale) {
  if (!(rate > 0.0 && scale > 0.0)) throw std::invalid_argument("exponential: rate, scale must be > 0");
  RadialMeasure r;
  r.kind = Kind::Exponential;
  r.rate = rate;
  r.scale = scale;
  return r;
}

RadialMeasure RadialMeasure::point_masses(std::vector<std::pair<double, double>> atoms) {
  for (const auto& [s, w] : atoms)
    if (!(s > 0.0) || !(w >= 0.0)) throw std::invalid_argument("point_masses: sizes > 0, weights >= 0");
  RadialMeasure r;
  r.kind = Kind::Atoms;
  r.atoms = std::move(atoms);
  return r;
}

double RadialMeasure::total_mass() const {
  switch (kind) {
    case Kind::PowerTail:
      return kInf;
    case Kind::Exponential:
      return rate * scale;
    case Kind::Atoms: {
      double m = 0.0;
      for (const auto& [s, w] : atoms) m += w;
      return m;
    }
  }
  return 0.0;
}

double RadialMeasure::mass_above(double eps) const {
  switch (kind) {
    case Kind::PowerTail:
      if (eps >= 1.0) return 0.0;
      if (eps <= 0.0) return kInf;
      return coef * (std::pow(eps, -index) - 1.0) / index;
    case Kind::Exponential:
      return rate * scale * std::exp(-std::max(eps, 0.0) / scale);
    case Kind::Atoms: {
      double m = 0.0;
      for (const auto& [s, w] : atoms)
        if (s > eps) m += w;
      return m;
    }
  }
  return 0.0;
}

double RadialMeasure::mean_between(double lo, double hi) const {
  lo = std::max(lo, 0.0);
  if (hi <= lo) return 0.0;
  switch (kind) {
    case Kind::PowerTail: {
      double a = std::min(lo, 1.0), b = std::min(hi, 1.0);
      if (b <= a) return 0.0;
      if (index > 1.0 && a <= 0.0) return kInf;
      return coef * (std::pow(b, 1.0 - index) - std::pow(a, 1.0 - index)) / (1.0 - index);
    }
    case Kind::Exponential: {
      auto anti = [&](double s) { return -(scale * s + scale * scale) * std::exp(-s / scale); };
      double upper = std::isinf(hi) ? 0.0 : anti(hi);
      return rate * (upper - anti(lo));
    }
    case Kind::Atoms: {
      double m = 0.0;
      for (const auto& [s, w] : atoms)
        if (s > lo && s <= hi) m += w * s;
      return m;
    }
  }
  return 0.0;
}

double RadialMeasure::second_moment_below(double eps) const {
  if (eps <= 0.0) return 0.0;
  switch (kind) {
    case Kind::PowerTail: {
      double b = std::min(eps, 1.0);
      return coef * std::pow(b, 2.0 - index) / (2.0 - index);
    }
    case Kind::Exponential: {
      auto anti = [&](double s) {
        return -(s * s * scale + 2.0 * s * scale * scale + 2.0 * scale * scale * scale) *
               std::exp(-s / scale);
      };
      return rate * (anti(eps) - anti(0.0));
    }
    case Kind::Atoms: {
      double m = 0.0;
      for (const auto& [s, w] : atoms)
        if (s <= eps) m += w * s * s;
      return m;
    }
  }
  return 0.0;
}

bool RadialMeasure::finite_variation() const {
  return kind != Kind::PowerTail || index < 1.0;
}

bool RadialMeasure::admissible() const {
  return kind != Kind::PowerTail || (index > 0.0 && index < 2.0);
}

double RadialMeasure::sample_above(double eps, RngStream& rng) const {
  switch (kind) {
    case Kind::PowerTail: {
      if (eps <= 0.0) throw std::invalid_argument("sample_above: power tail needs eps > 0");
      if (eps >= 1.0) throw std::invalid_argument("sample_above: no power-tail mass above eps >= 1");
      // Inverse CDF of the normalized tail on (eps, 1].
      double u = rng.next_double();
      double t = 1.0 + u * (std::pow(eps, -index) - 1.0);
      return std::pow(t, -1.0 / index);
    }
    case Kind::Exponential:
      return std::max(eps, 0.0) + scale * rng.next_exponential();
    case Kind::Atoms: {
      double total = mass_above(eps);
      if (!(total > 0.0)) throw std::invalid_argument("sample_above: no atom mass above eps");
      double u = rng.next_double() * total;
      double acc = 0.0;
      for (const auto& [s, w] : atoms) {
        if (s <= eps) continue;
        acc += w;
        if (u <= acc) return s;
      }
      return atoms.back().first;
    }
  }
  throw std::logic_error("sample_above: bad kind");
}

Cplx RadialMeasure::compensated_exponent(double theta) const {
  const Cplx i(0.0, 1.0);
  if (theta == 0.0) return Cplx(0.0, 0.0);
  switch (kind) {
    case Kind::Atoms: {
      Cplx acc(0.0, 0.0);
      for (const auto& [s, w] : atoms) {
        Cplx term = std::exp(i * (theta * s)) - 1.0;
        if (s <= 1.0) term -= i * (theta * s);
        acc += w * term;
      }
      return acc;
    }
    case Kind::Exponential: {
      // rate * [ 1/(1/scale - i theta) - scale ] - i theta rate (scale^2 - e^{-1/scale} scale(scale+1))
      Cplx head = rate * (1.0 / (Cplx(1.0 / scale, -theta)) - scale);
      double m01 = scale * scale - std::exp(-1.0 / scale) * scale * (scale + 1.0);
      return head - i * (theta * rate * m01);
    }
    case Kind::PowerTail: {
      // coef * int_0^1 (e^{i theta s} - 1 - i theta s) s^{-1-index} ds.
      double a = index;
      double at = std::fabs(theta);
      double s0 = std::min(1.0, 1.0 / at);
      Cplx acc(0.0, 0.0);
      // Series part on (0, s0]: sum_{n>=2} (i theta)^n / n! * s0^{n-a}/(n-a).
      Cplx pw(1.0, 0.0);  // (i theta s0)^n / n!
      double sa = std::pow(s0, -a);
      Cplx it = i * theta;
      Cplx its0 = it * s0;
      for (int n = 1; n <= 60; ++n) {
        pw *= its0 / static_cast<double>(n);
        if (n >= 2) {
          Cplx term = pw * (sa / (static_cast<double>(n) - a));
          acc += term;
          if (std::abs(term) < 1e-17 * (1.0 + std::abs(acc))) break;
        }
      }
      // Oscillation-resolved Gauss-Legendre panels on (s0, 1].
      if (s0 < 1.0) {
        double h = std::min(kPi / at, 1.0 - s0);
        double lo = s0;
        while (lo < 1.0 - 1e-15) {
          double hi = std::min(lo + h, 1.0);
          double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
          Cplx panel(0.0, 0.0);
          for (int g = 0; g < 8; ++g) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
              double s = mid + sgn * half * kGlX[g];
              Cplx f = (std::exp(i * (theta * s)) - 1.0 - i * (theta * s)) * std::pow(s, -1.0 - a);
              panel += kGlW[g] * f;
            }
          }
          acc += panel * half;
          lo = hi;
        }
      }
      return coef * acc;
    }
  }
  throw std::logic_error("compensated_exponent: bad kind");
}

// ---------------------------------------------------------------------------
// LevyMeasureSpec
// ---------------------------------------------------------------------------

int LevyMeasureSpec::dim() const {
  return atoms.empty() ? 0 : static_cast<int>(atoms.front().direction.size());
}

bool LevyMeasureSpec::finite_variation() const {
  for (const auto& a : atoms)
    if (!a.radial.finite_variation()) return false;
  return true;
}

double LevyMeasureSpec::total_mass_above(double eps) const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.weight * a.radial.mass_above(eps);
  return m;
}

Vec LevyMeasureSpec::mean_below_one() const {
  int m = dim();
  Vec out = Vec::Zero(std::max(m, 0));
  for (const auto& a : atoms) out += a.weight * a.radial.mean_between(0.0, 1.0) * a.direction;
  return out;
}

double LevyMeasureSpec::abs_mean_below(double eps) const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.weight * a.radial.mean_between(0.0, eps);
  return m;
}

Mat LevyMeasureSpec::covariance_below(double eps) const {
  int m = dim();
  Mat out = Mat::Zero(std::max(m, 0), std::max(m, 0));
  for (const auto& a : atoms)
    out += a.weight * a.radial.second_moment_below(eps) * (a.direction * a.direction.transpose());
  return out;
}

void LevyMeasureSpec::validate(int m) const {
  for (const auto& a : atoms) {
    if (static_cast<int>(a.direction.size()) != m)
      throw std::invalid_argument("LevyMeasureSpec: direction dimension mismatch");
    if (std::fabs(a.direction.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("LevyMeasureSpec: directions must be unit vectors");
    if (!(a.weight >= 0.0)) throw std::invalid_argument("LevyMeasureSpec: weights must be >= 0");
    if (!a.radial.admissible())
      throw std::invalid_argument("LevyMeasureSpec: radial family violates int (1^s^2) rho < inf");
  }
}

// ---------------------------------------------------------------------------
// LevyTriplet
// ---------------------------------------------------------------------------

void LevyTriplet::validate() const {
  int m = dim();
  if (m <= 0) throw std::invalid_argument("LevyTriplet: empty drift");
  if (sigma.rows() != m || sigma.cols() != m)
    throw std::invalid_argument("LevyTriplet: sigma dimension mismatch");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + sigma.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("LevyTriplet: sigma must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + sigma.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("LevyTriplet: sigma must be positive semidefinite");
  nu.validate(m);
}

bool LevyTriplet::finite_variation() const {
  return sigma.cwiseAbs().maxCoeff() == 0.0 && nu.finite_variation();
}

bool LevyTriplet::is_gaussian_only() const { return nu.empty(); }

Vec LevyTriplet::fv_drift() const {
  if (!finite_variation())
    throw std::invalid_argument("fv_drift: basis is not of finite variation");
  if (nu.empty()) return gamma;
  return gamma - nu.mean_below_one();
}

LevyTriplet LevyTriplet::gaussian(Vec gamma, Mat sigma) {
  LevyTriplet t;
  t.gamma = std::move(gamma);
  t.sigma = std::move(sigma);
  t.validate();
  return t;
}

LevyTriplet LevyTriplet::drift_only(Vec gamma) {
  int m = static_cast<int>(gamma.size());
  LevyTriplet t;
  t.gamma = std::move(gamma);
  t.sigma = Mat::Zero(m, m);
  t.validate();
  return t;
}

LevyTriplet LevyTriplet::from_measure(Vec gamma, LevyMeasureSpec nu) {
  int m = static_cast<int>(gamma.size());
  LevyTriplet t;
  t.gamma = std::move(gamma);
  t.sigma = Mat::Zero(m, m);
  t.nu = std::move(nu);
  t.validate();
  return t;
}

LevyTriplet LevyTriplet::power_tail_family(int m, double index,
                                           std::vector<std::pair<Vec, double>> dirs,
                                           double coef) {
  LevyTriplet t;
  t.sigma = Mat::Zero(m, m);
  t.gamma = Vec::Zero(m);
  for (auto& [u, w] : dirs) {
    SpectralAtom a;
    a.direction = u;
    a.weight = w;
    a.radial = RadialMeasure::power_tail(index, coef);
    // Strict-stability drift: cancels the r^{(index-1)/index} drift term in the
    // rescaled exponent so the attraction limit is approached at rate r.
    t.gamma += w * coef / (1.0 - index) * u;
    t.nu.atoms.push_back(std::move(a));
  }
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// StableSpec
// ---------------------------------------------------------------------------

int StableSpec::dim() const {
  if (!spectral.empty()) return static_cast<int>(spectral.front().first.size());
  return static_cast<int>(sigma.rows());
}

void StableSpec::validate() const {
  if (!(alpha > 1.0 && alpha <= 2.0))
    throw std::invalid_argument("StableSpec: alpha must be in (1,2] (alpha <= 1 unsupported)");
  if (alpha == 2.0) {
    if (sigma.size() == 0 || sigma.cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument("StableSpec: alpha = 2 requires a nonzero sigma");
  } else {
    if (spectral.empty()) throw std::invalid_argument("StableSpec: alpha < 2 requires spectral atoms");
    if (sigma.size() != 0 && sigma.cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("StableSpec: alpha < 2 requires sigma = 0");
    int m = dim();
    for (const auto& [u, w] : spectral) {
      if (static_cast<int>(u.size()) != m) throw std::invalid_argument("StableSpec: dimension mismatch");
      if (std::fabs(u.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("StableSpec: spectral directions must be unit vectors");
      if (!(w >= 0.0)) throw std::invalid_argument("StableSpec: spectral weights must be >= 0");
    }
  }
}

Vec StableSpec::strict_drift() const {
  int m = dim();
  Vec g = Vec::Zero(m);
  if (alpha == 2.0) return g;
  for (const auto& [u, w] : spectral) g += w * u;
  return g / (1.0 - alpha);
}

double StableSpec::total_spectral_weight() const {
  double s = 0.0;
  for (const auto& [u, w] : spectral) s += w;
  return s;
}

bool StableSpec::symmetric() const {
  Vec m = Vec::Zero(dim());
  for (const auto& [u, w] : spectral) m += w * u;
  return m.norm() <= 1e-12 * std::max(1.0, total_spectral_weight());
}

// ---------------------------------------------------------------------------
// Exponents
// ---------------------------------------------------------------------------

Cplx char_exponent(const LevyTriplet& triplet, const Vec& z) {
  const Cplx i(0.0, 1.0);
  Cplx psi = i * triplet.gamma.dot(z) - Cplx(0.5 * z.dot(triplet.sigma * z), 0.0);
  for (const auto& a : triplet.nu.atoms)
    psi += a.weight * a.radial.compensated_exponent(z.dot(a.direction));
  return psi;
}

Cplx stable_char_exponent(const StableSpec& spec, const Vec& z) {
  spec.validate();
  if (spec.alpha == 2.0) return Cplx(-0.5 * z.dot(spec.sigma * z), 0.0);
  double tn = std::tan(0.5 * kPi * spec.alpha);
  Cplx acc(0.0, 0.0);
  for (const auto& [u, w] : spec.spectral) {
    double zu = z.dot(u);
    double mag = std::pow(std::fabs(zu), spec.alpha);
    double sgn = (zu > 0.0) - (zu < 0.0);
    acc += -w * mag * Cplx(1.0, -sgn * tn);
  }
  return acc;
}

Cplx rescaled_exponent(const LevyTriplet& triplet, double alpha, const Vec& w, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("rescaled_exponent: r must be > 0");
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("rescaled_exponent: alpha in (0,2]");
  Vec z = std::pow(r, -1.0 / alpha) * w;
  return r * char_exponent(triplet, z);
}

double stable_polar_constant(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::invalid_argument("stable_polar_constant: alpha must be in (1,2)");
  return -std::tgamma(-alpha) * std::cos(0.5 * kPi * alpha);
}

StableSpec stable_limit_of(const LevyTriplet& triplet, double alpha) {
  StableSpec s;
  s.alpha = alpha;
  if (alpha == 2.0) {
    if (triplet.sigma.cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument("stable_limit_of: alpha = 2 requires sigma != 0");
    s.sigma = triplet.sigma;
    s.validate();
    return s;
  }
  if (triplet.sigma.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("stable_limit_of: alpha < 2 requires sigma = 0");
  double c_alpha = stable_polar_constant(alpha);
  for (const auto& a : triplet.nu.atoms) {
    if (a.radial.kind != RadialMeasure::Kind::PowerTail ||
        std::fabs(a.radial.index - alpha) > 1e-12)
      throw std::invalid_argument(
          "stable_limit_of: requires power-tail radial families with index = alpha");
    s.spectral.emplace_back(a.direction, c_alpha * a.radial.coef * a.weight);
  }
  s.sigma = Mat::Zero(triplet.dim(), triplet.dim());
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

Vec sample_id_increment(const LevyTriplet& triplet, double volume, RngStream& rng,
                        double truncation_eps) {
  if (!(volume >= 0.0)) throw std::invalid_argument("sample_id_increment: volume must be >= 0");
  int m = triplet.dim();
  if (volume == 0.0) return Vec::Zero(m);
  for (const auto& a : triplet.nu.atoms)
    if (a.radial.kind == RadialMeasure::Kind::PowerTail && a.radial.index >= 1.0)
      throw std::invalid_argument(
          "sample_id_increment: infinite-variation measure outside the catalog; "
          "use the stable sampler instead");

  Vec x = volume * triplet.gamma;
  if (triplet.sigma.cwiseAbs().maxCoeff() != 0.0) {
    Mat root = psd_sqrt(triplet.sigma);
    Vec xi(m);
    for (int i = 0; i < m; ++i) xi[i] = rng.next_normal();
    x += std::sqrt(volume) * (root * xi);
  }
  for (const auto& a : triplet.nu.atoms) {
    double eps = (a.radial.kind == RadialMeasure::Kind::PowerTail) ? truncation_eps : 0.0;
    double mass = a.weight * a.radial.mass_above(eps);
    if (mass > 0.0) {
      long long n = rng.next_poisson(volume * mass);
      double total_size = 0.0;
      for (long long k = 0; k < n; ++k) total_size += a.radial.sample_above(eps, rng);
      x += total_size * a.direction;
    }
    // Cutoff compensation for jump sizes in (eps, 1].
    x -= volume * a.weight * a.radial.mean_between(eps, 1.0) * a.direction;
  }
  return x;
}

Vec sample_stable(const StableSpec& spec, double scale, RngStream& rng) {
  spec.validate();
  if (!(scale >= 0.0)) throw std::invalid_argument("sample_stable: scale must be >= 0");
  int m = spec.dim();
  if (scale == 0.0) return Vec::Zero(m);
  if (spec.alpha == 2.0) {
    Mat root = psd_sqrt(spec.sigma);
    Vec xi(m);
    for (int i = 0; i < m; ++i) xi[i] = rng.next_normal();
    return std::sqrt(scale) * (root * xi);
  }
  Vec x = Vec::Zero(m);
  for (const auto& [u, w] : spec.spectral) {
    if (w == 0.0) continue;
    double c = std::pow(scale * w, 1.0 / spec.alpha);
    x += c * rng.next_stable(spec.alpha, 1.0) * u;
  }
  return x;
}

double BoxRegion::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
  return v;
}

bool BoxRegion::contains(const Vec& q) const {
  for (int i = 0; i < dim(); ++i)
    if (q[i] < lo[i] || q[i] > hi[i]) return false;
  return true;
}

Vec BoxRegion::sample(RngStream& rng) const {
  Vec q(dim());
  for (int i = 0; i < dim(); ++i) q[i] = lo[i] + rng.next_double() * (hi[i] - lo[i]);
  return q;
}

JumpConfiguration sample_poisson_jumps(const BoxRegion& region, const LevyMeasureSpec& nu,
                                       double eps, RngStream& rng) {
  JumpConfiguration cfg;
  cfg.region = region;
  cfg.truncation_level = eps;
  double total = nu.total_mass_above(eps);
  if (std::isinf(total))
    throw std::invalid_argument("sample_poisson_jumps: nu restricted to ||x|| > eps has infinite "
                                "mass; increase eps");
  double vol = region.volume();
  if (!(total > 0.0) || vol == 0.0) return cfg;

  std::vector<double> cum;
  cum.reserve(nu.atoms.size());
  double acc = 0.0;
  for (const auto& a : nu.atoms) {
    acc += a.weight * a.radial.mass_above(eps);
    cum.push_back(acc);
  }
  long long n = rng.next_poisson(vol * total);
  cfg.jumps.reserve(static_cast<std::size_t>(n));
  for (long long k = 0; k < n; ++k) {
    double u = rng.next_double() * total;
    std::size_t idx = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (idx >= nu.atoms.size()) idx = nu.atoms.size() - 1;
    const auto& a = nu.atoms[idx];
    double s = a.radial.sample_above(eps, rng);
    cfg.jumps.push_back({region.sample(rng), s * a.direction});
  }
  return cfg;
}

}  // namespace ambitflux
