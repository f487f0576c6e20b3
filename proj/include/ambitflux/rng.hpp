#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ambitflux {

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is fully determined by (seed, stream id); draws do not depend on
/// any global state, so replication i can use stream i and results are
/// bit-reproducible no matter how work is scheduled across threads.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<std::uint32_t>(stream);
    ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
  }

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform on [0,1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1).
  double next_open() {
    double u;
    do {
      u = next_double();
    } while (u <= 0.0);
    return u;
  }

  /// Standard normal (Box-Muller, second value cached).
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_open();
    double u2 = next_double();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.28318530717958647692 * u2;
    cached_ = rad * std::sin(ang);
    have_cached_ = true;
    return rad * std::cos(ang);
  }

  double next_exponential() { return -std::log(next_open()); }

  /// Exact Poisson draw for any mean >= 0. Inversion below 30; larger means
  /// split into independent sub-Poisson draws (cost O(mean), exact in law).
  long long next_poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("next_poisson: mean must be >= 0");
    if (mean == 0.0) return 0;
    if (mean <= 30.0) return poisson_inversion(mean);
    long long parts = static_cast<long long>(std::ceil(mean / 24.0));
    double sub = mean / static_cast<double>(parts);
    long long total = 0;
    for (long long i = 0; i < parts; ++i) total += poisson_inversion(sub);
    return total;
  }

  /// Strictly alpha-stable standard variate S_alpha(1, beta, 0), alpha in (1,2):
  /// log-characteristic function -|t|^alpha (1 - i beta sign(t) tan(pi alpha/2)).
  /// Chambers-Mallows-Stuck transformation.
  double next_stable(double alpha, double beta) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("next_stable: alpha must be in (1,2)");
    if (!(beta >= -1.0 && beta <= 1.0)) throw std::invalid_argument("next_stable: beta must be in [-1,1]");
    double v = 3.14159265358979323846 * (next_double() - 0.5);
    double w = next_exponential();
    double th = std::tan(1.57079632679489661923 * alpha);
    double b = std::atan(beta * th) / alpha;
    double s = std::pow(1.0 + beta * beta * th * th, 0.5 / alpha);
    double cv = std::cos(v);
    return s * std::sin(alpha * (v + b)) / std::pow(cv, 1.0 / alpha) *
           std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
  }

 private:
  long long poisson_inversion(double mean) {
    double limit = std::exp(-mean);
    double prod = next_open();
    long long n = 0;
    while (prod > limit) {
      prod *= next_open();
      ++n;
    }
    return n;
  }

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b);
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::uint32_t c0 = ctr_[0], c1 = ctr_[1], c2 = ctr_[2], c3 = ctr_[3];
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c0, hi0, lo0);
      mulhilo(0xCD9E8D57u, c2, hi1, lo1);
      std::uint32_t n0 = hi1 ^ c1 ^ k0;
      std::uint32_t n1 = lo1;
      std::uint32_t n2 = hi0 ^ c3 ^ k1;
      std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_[0] = c0;
    buf_[1] = c1;
    buf_[2] = c2;
    buf_[3] = c3;
    buf_pos_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> ctr_{};
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

/// Stream id for (purpose, replication) pairs; keeps sampler purposes on
/// disjoint stream ranges so adding draws to one purpose never shifts another.
inline std::uint64_t substream(std::uint64_t purpose, std::uint64_t replication) {
  return (purpose << 48) ^ replication;
}

}  // namespace ambitflux
