#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "ambitflux/levy.hpp"
#include "ambitflux/rng.hpp"

using namespace ambitflux;

namespace {

Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}

Mat m1(double x) {
  Mat m(1, 1);
  m << x;
  return m;
}

LevyTriplet unit_atom_triplet(double gamma0) {
  // nu = delta at x = 1 (rate 1), drift gamma0
  LevyMeasureSpec nu;
  nu.atoms.push_back({v1(1.0), 1.0, RadialMeasure::point_masses({{1.0, 1.0}})});
  return LevyTriplet::from_measure(v1(gamma0), nu);
}

StableSpec symmetric_stable(double alpha, double total_weight = 1.0) {
  StableSpec s;
  s.alpha = alpha;
  s.spectral.emplace_back(v1(1.0), 0.5 * total_weight);
  s.spectral.emplace_back(v1(-1.0), 0.5 * total_weight);
  s.sigma = Mat::Zero(1, 1);
  return s;
}

// Empirical characteristic function of scalar samples.
Cplx ecf(const std::vector<double>& xs, double z) {
  Cplx acc(0, 0);
  for (double x : xs) acc += std::exp(Cplx(0.0, z * x));
  return acc / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("char_exponent: pure Gaussian") {
  LevyTriplet t = LevyTriplet::gaussian(v1(0.0), m1(1.0));
  Cplx psi = char_exponent(t, v1(2.0));
  CHECK(psi.real() == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(psi.imag() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(char_exponent(t, v1(0.0))) == doctest::Approx(0.0));
}

TEST_CASE("char_exponent: point mass at one") {
  LevyTriplet t = unit_atom_triplet(0.0);
  Cplx psi = char_exponent(t, v1(kPi));
  // e^{i pi} - 1 - i pi = -2 - i pi
  CHECK(psi.real() == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(psi.imag() == doctest::Approx(-kPi).epsilon(1e-14));
}

TEST_CASE("char_exponent: symmetry and sign invariants") {
  auto t = LevyTriplet::power_tail_family(
      1, 1.5, {{v1(1.0), 0.5}, {v1(-1.0), 0.5}});
  for (double z : {0.3, 1.0, 2.7, 11.0}) {
    Cplx psi = char_exponent(t, v1(z));
    Cplx psim = char_exponent(t, v1(-z));
    CHECK(psi.real() <= 1e-12);
    CHECK(psim.real() == doctest::Approx(psi.real()).epsilon(1e-10));
    CHECK(psim.imag() == doctest::Approx(-psi.imag()).epsilon(1e-10));
  }
  CHECK(std::abs(char_exponent(t, v1(0.0))) == doctest::Approx(0.0));
}

TEST_CASE("power-tail exponent matches brute-force quadrature") {
  // Independent oracle: raw midpoint quadrature of the compensated integrand
  // on a fine grid (graded near zero by substitution s = x^3).
  RadialMeasure r = RadialMeasure::power_tail(1.5, 1.0);
  for (double theta : {0.7, 4.0, 37.5}) {
    Cplx acc(0, 0);
    const int n = 400000;
    for (int k = 0; k < n; ++k) {
      double x = (k + 0.5) / n;
      double s = x * x * x;
      double jac = 3.0 * x * x;
      double arg = theta * s;
      // cancellation-stable forms of cos(a)-1 and sin(a)-a
      double re = -2.0 * std::sin(0.5 * arg) * std::sin(0.5 * arg);
      double im = std::fabs(arg) < 1e-3
                      ? -arg * arg * arg / 6.0 * (1.0 - arg * arg / 20.0)
                      : std::sin(arg) - arg;
      acc += Cplx(re, im) * std::pow(s, -2.5) * jac / static_cast<double>(n);
    }
    Cplx fast = r.compensated_exponent(theta);
    CHECK(std::abs(fast - acc) < 1e-6 * (1.0 + std::abs(acc)));
  }
}

TEST_CASE("stable_char_exponent: symmetric example and scaling") {
  StableSpec s = symmetric_stable(1.5);
  Cplx psi2 = stable_char_exponent(s, v1(2.0));
  CHECK(psi2.real() == doctest::Approx(-std::pow(2.0, 1.5)).epsilon(1e-14));
  CHECK(psi2.imag() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(stable_char_exponent(s, v1(0.0))) == doctest::Approx(0.0));

  Cplx psi4 = stable_char_exponent(s, v1(4.0));
  CHECK(psi4.real() == doctest::Approx(std::pow(2.0, 1.5) * psi2.real()).epsilon(1e-13));

  // strict stability at several c and alpha, including asymmetric spectra
  for (double alpha : {1.2, 1.5, 1.9}) {
    StableSpec a;
    a.alpha = alpha;
    a.spectral.emplace_back(v1(1.0), 0.8);
    a.spectral.emplace_back(v1(-1.0), 0.2);
    a.sigma = Mat::Zero(1, 1);
    for (double c : {0.5, 2.0, 7.0}) {
      Cplx lhs = stable_char_exponent(a, v1(c * 1.3));
      Cplx rhs = std::pow(c, alpha) * stable_char_exponent(a, v1(1.3));
      CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(rhs));
    }
  }
}

TEST_CASE("stable_char_exponent rejects alpha <= 1") {
  StableSpec s = symmetric_stable(1.5);
  s.alpha = 0.9;
  CHECK_THROWS(stable_char_exponent(s, v1(1.0)));
}

TEST_CASE("rescaled_exponent: Gaussian fixed point") {
  LevyTriplet t = LevyTriplet::gaussian(v1(0.0), m1(1.0));
  for (double r : {1.0, 0.1, 1e-3}) {
    Cplx psi = rescaled_exponent(t, 2.0, v1(2.0), r);
    CHECK(psi.real() == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(psi.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("rescaled_exponent: attraction to the stable limit (one-sided and symmetric)") {
  double alpha = 1.5;
  auto sym = LevyTriplet::power_tail_family(1, alpha, {{v1(1.0), 0.5}, {v1(-1.0), 0.5}});
  auto one = LevyTriplet::power_tail_family(1, alpha, {{v1(1.0), 1.0}});
  for (const auto& t : {sym, one}) {
    StableSpec lim = stable_limit_of(t, alpha);
    for (double w : {0.5, 1.0, 2.0}) {
      Cplx target = stable_char_exponent(lim, v1(w));
      Cplx got = rescaled_exponent(t, alpha, v1(w), 1e-4);
      CHECK(std::abs(got - target) < 0.01 * std::abs(target));
    }
  }
}

TEST_CASE("rescaled_exponent: finite-variation limit i gamma0 . w") {
  LevyTriplet t = unit_atom_triplet(0.0);  // gamma=0, nu=delta_1 => gamma0 = -1
  Vec g0 = t.fv_drift();
  CHECK(g0[0] == doctest::Approx(-1.0));
  Cplx got = rescaled_exponent(t, 1.0, v1(1.0), 1e-4);
  Cplx target(0.0, -1.0);
  CHECK(std::abs(got - target) < 0.01);
}

TEST_CASE("rescaled_exponent error decreases along r") {
  double alpha = 1.5;
  auto t = LevyTriplet::power_tail_family(1, alpha, {{v1(1.0), 0.5}, {v1(-1.0), 0.5}});
  StableSpec lim = stable_limit_of(t, alpha);
  Cplx target = stable_char_exponent(lim, v1(1.0));
  double prev = 1e300;
  for (double r : {1e-1, 1e-2, 1e-3, 1e-4}) {
    double err = std::abs(rescaled_exponent(t, alpha, v1(1.0), r) - target);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("stable_polar_constant agrees with the Gamma closed form") {
  for (double alpha : {1.2, 1.5, 1.8}) {
    double c = stable_polar_constant(alpha);
    CHECK(c > 0.0);
    // int_0^inf (e^{iv}-1-iv) v^{-1-alpha} dv = -C_alpha (1 - i tan(pi alpha/2)):
    // cross-check via the rescaled exponent of the one-sided family at tiny r.
    auto t = LevyTriplet::power_tail_family(1, alpha, {{v1(1.0), 1.0}});
    Cplx got = rescaled_exponent(t, alpha, v1(1.0), 1e-6);
    Cplx expect = -c * Cplx(1.0, -std::tan(0.5 * kPi * alpha));
    CHECK(std::abs(got - expect) < 2e-3 * std::abs(expect));
  }
}

TEST_CASE("sample_id_increment: trivial and moment checks") {
  LevyTriplet g = LevyTriplet::gaussian(v1(0.0), m1(1.0));
  RngStream rng(7, 1);
  CHECK(sample_id_increment(g, 0.0, rng).norm() == 0.0);

  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream s(7, 100 + i);
    double x = sample_id_increment(g, 4.0, s)[0];
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n, var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 3.0 * 2.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(var - 4.0) < 0.05 * 4.0);
}

TEST_CASE("sample_id_increment: compensated compound Poisson counts") {
  // gamma chosen so drift cancels the compensator: gamma = int_{|x|<=1} x nu = 1.
  LevyTriplet t = unit_atom_triplet(1.0);
  const int n = 20000;
  double volume = 2.0;
  double csum = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream s(11, i);
    double x = sample_id_increment(t, volume, s)[0];
    // draw = gamma*vol + (count - vol) ... with gamma=1: draw = count exactly
    csum += x;
  }
  double mean_count = csum / n;
  CHECK(std::fabs(mean_count - volume) < 3.0 * std::sqrt(volume / n));
}

TEST_CASE("sample_id_increment rejects infinite variation") {
  auto t = LevyTriplet::power_tail_family(1, 1.5, {{v1(1.0), 1.0}});
  RngStream rng(1, 1);
  CHECK_THROWS(sample_id_increment(t, 1.0, rng));
}

TEST_CASE("additivity: cell increments compose to the box law") {
  LevyTriplet t = unit_atom_triplet(1.0);
  t.sigma = m1(0.5);
  const double box_volume = 1.5;
  const int k = 4;
  const int n = 100000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    RngStream s(13, i);
    double acc = 0.0;
    for (int c = 0; c < k; ++c) acc += sample_id_increment(t, box_volume / k, s)[0];
    xs[i] = acc;
  }
  for (double z : {0.25, 0.5, 1.0, 1.7, 3.0}) {
    Cplx target = std::exp(box_volume * char_exponent(t, v1(z)));
    CHECK(std::abs(ecf(xs, z) - target) < 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("sample_stable: zero scale, Gaussian branch, ECF") {
  RngStream rng(3, 5);
  StableSpec s2;
  s2.alpha = 2.0;
  s2.sigma = m1(1.0);
  CHECK(sample_stable(s2, 0.0, rng).norm() == 0.0);

  // alpha=2, scale=1: standard normal; KS distance of 1e4 draws < 0.02
  const int n = 10000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    RngStream s(17, i);
    xs[i] = sample_stable(s2, 1.0, s)[0];
  }
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    double F = 0.5 * std::erfc(-xs[i] / std::sqrt(2.0));
    ks = std::max(ks, std::max(std::fabs((i + 1.0) / n - F), std::fabs(F - i * 1.0 / n)));
  }
  CHECK(ks < 0.02);

  // alpha=1.5 symmetric: ECF within 3/sqrt(N) of exp(psi_alpha)
  StableSpec s15 = symmetric_stable(1.5);
  const int m = 100000;
  std::vector<double> ys(m);
  for (int i = 0; i < m; ++i) {
    RngStream s(19, i);
    ys[i] = sample_stable(s15, 1.0, s)[0];
  }
  for (double z : {0.5, 1.0, 2.0}) {
    Cplx target = std::exp(stable_char_exponent(s15, v1(z)));
    CHECK(std::abs(ecf(ys, z) - target) < 3.0 / std::sqrt(static_cast<double>(m)));
  }
}

TEST_CASE("sample_stable: asymmetric ECF") {
  StableSpec s;
  s.alpha = 1.5;
  s.spectral.emplace_back(v1(1.0), 1.0);
  s.sigma = Mat::Zero(1, 1);
  const int m = 100000;
  std::vector<double> ys(m);
  for (int i = 0; i < m; ++i) {
    RngStream r(23, i);
    ys[i] = sample_stable(s, 0.7, r)[0];
  }
  for (double z : {0.5, 1.0, 2.0}) {
    Cplx target = std::exp(0.7 * stable_char_exponent(s, v1(z)));
    CHECK(std::abs(ecf(ys, z) - target) < 3.0 / std::sqrt(static_cast<double>(m)));
  }
}

TEST_CASE("sample_poisson_jumps: moments and independence over disjoint boxes") {
  LevyMeasureSpec nu;
  nu.atoms.push_back({v1(1.0), 1.0, RadialMeasure::point_masses({{1.0, 1.0}})});

  BoxRegion region;
  region.lo = Vec::Zero(2);
  region.hi = Vec::Ones(2) * std::sqrt(3.0);  // volume 3

  LevyMeasureSpec empty_nu;
  RngStream rng0(29, 0);
  CHECK(sample_poisson_jumps(region, empty_nu, 0.0, rng0).jumps.empty());

  const int n = 20000;
  double csum = 0.0;
  double c_left = 0.0, c_right = 0.0, c_lr = 0.0, c_l2 = 0.0, c_r2 = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream s(29, 1 + i);
    auto cfg = sample_poisson_jumps(region, nu, 0.0, s);
    csum += static_cast<double>(cfg.jumps.size());
    double nl = 0, nr = 0;
    for (const auto& j : cfg.jumps) (j.location[0] < 0.5 * region.hi[0] ? nl : nr) += 1.0;
    c_left += nl;
    c_right += nr;
    c_lr += nl * nr;
    c_l2 += nl * nl;
    c_r2 += nr * nr;
  }
  double mean = csum / n;
  CHECK(std::fabs(mean - 3.0) < 3.0 * std::sqrt(3.0 / n));
  double ml = c_left / n, mr = c_right / n;
  double cov = c_lr / n - ml * mr;
  double corr = cov / std::sqrt((c_l2 / n - ml * ml) * (c_r2 / n - mr * mr));
  CHECK(std::fabs(corr) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("poisson sampler over a range of means") {
  for (double mean : {0.3, 7.0, 45.0, 300.0}) {
    const int n = 20000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      RngStream s(31, i);
      double x = static_cast<double>(s.next_poisson(mean));
      s1 += x;
      s2 += x * x;
    }
    double m = s1 / n, v = s2 / n - m * m;
    CHECK(std::fabs(m - mean) < 4.0 * std::sqrt(mean / n));
    CHECK(std::fabs(v - mean) < 0.1 * mean + 4.0 * mean * std::sqrt(2.0 / n));
  }
}

TEST_CASE("levy measure truncation bookkeeping") {
  LevyMeasureSpec nu;
  nu.atoms.push_back({v1(1.0), 1.0, RadialMeasure::power_tail(0.5, 1.0)});
  CHECK(nu.finite_variation());
  // int_0^eps s * s^{-1.5} ds = 2 sqrt(eps)
  CHECK(nu.abs_mean_below(1e-4) == doctest::Approx(2e-2).epsilon(1e-12));
  CHECK(nu.total_mass_above(1e-4) == doctest::Approx((std::pow(1e-4, -0.5) - 1.0) / 0.5));

  auto t = LevyTriplet::power_tail_family(1, 1.5, {{v1(1.0), 1.0}});
  CHECK_FALSE(t.finite_variation());
  CHECK_THROWS(t.fv_drift());
}
