#pragma once

#include <utility>
#include <vector>

#include "ambitflux/rng.hpp"
#include "ambitflux/types.hpp"

namespace ambitflux {

/// Radial part rho_u of a Levy measure in polar form. Parametric catalog:
///   PowerTail    density coef * s^{-1-index} on (0,1]
///   Exponential  density rate * exp(-s/scale) on (0,inf)
///   Atoms        finite list of (s_j, w_j)
struct RadialMeasure {
  enum class Kind { PowerTail, Exponential, Atoms };

  Kind kind = Kind::Atoms;
  double index = 1.5;  ///< power-tail exponent, in (0,2) excluding 1
  double coef = 1.0;   ///< power-tail density coefficient K
  double rate = 1.0;   ///< exponential density scale factor
  double scale = 1.0;  ///< exponential mean jump size
  std::vector<std::pair<double, double>> atoms;  ///< (size, weight)

  static RadialMeasure power_tail(double index, double coef = 1.0);
  static RadialMeasure exponential(double rate, double scale);
  static RadialMeasure point_masses(std::vector<std::pair<double, double>> atoms);

  /// Total mass rho((0,inf)); may be +inf (power tail).
  double total_mass() const;
  /// rho((eps, inf)).
  double mass_above(double eps) const;
  /// int_{(lo,hi]} s rho(ds).
  double mean_between(double lo, double hi) const;
  /// int_{(0,eps]} s^2 rho(ds).
  double second_moment_below(double eps) const;
  /// int (1 ^ s) rho(ds) < inf ?
  bool finite_variation() const;
  /// int (1 ^ s^2) rho(ds) < inf ?  (Levy-measure admissibility)
  bool admissible() const;
  /// Draw a jump size conditioned on s > eps (requires mass_above(eps) > 0, finite).
  double sample_above(double eps, RngStream& rng) const;
  /// int_0^inf (e^{i theta s} - 1 - i theta s 1_{s<=1}) rho(ds).
  Cplx compensated_exponent(double theta) const;
};

/// One direction of the polar decomposition: weight lambda({u}) plus the
/// radial family attached to u.
struct SpectralAtom {
  Vec direction;  ///< unit vector in R^m
  double weight = 1.0;
  RadialMeasure radial;
};

/// Levy measure nu(B) = sum_k weight_k int 1_B(s u_k) rho_k(ds).
struct LevyMeasureSpec {
  std::vector<SpectralAtom> atoms;

  int dim() const;
  bool empty() const { return atoms.empty(); }
  bool finite_variation() const;
  double total_mass_above(double eps) const;
  /// int_{||x||<=1} x nu(dx), the compensator subtracted in gamma0.
  Vec mean_below_one() const;
  /// int_{||x||<=eps} ||x|| nu(dx) (truncation bias density).
  double abs_mean_below(double eps) const;
  /// int_{||x||<=eps} x x' nu(dx) (small-jump covariance density).
  Mat covariance_below(double eps) const;
  void validate(int m) const;
};

/// Characteristic triplet (gamma, Sigma, nu) of a homogeneous Levy basis,
/// drift in the compensated convention with cutoff ||x|| <= 1.
struct LevyTriplet {
  Vec gamma;
  Mat sigma;
  LevyMeasureSpec nu;

  int dim() const { return static_cast<int>(gamma.size()); }
  void validate() const;
  bool finite_variation() const;
  bool is_gaussian_only() const;
  /// gamma0 = gamma - int_{||x||<=1} x nu(dx); requires finite variation.
  Vec fv_drift() const;

  static LevyTriplet gaussian(Vec gamma, Mat sigma);
  static LevyTriplet drift_only(Vec gamma);
  /// Compound-Poisson style triplet from an atom-list measure.
  static LevyTriplet from_measure(Vec gamma, LevyMeasureSpec nu);
  /// Symmetric power-tail family: atoms at +/- direction pairs, density
  /// coef*s^{-1-index} each, with the strict-stability drift
  /// gamma = sum_k w_k K_k u_k / (1-index) (zero when symmetric).
  static LevyTriplet power_tail_family(int m, double index,
                                       std::vector<std::pair<Vec, double>> dirs,
                                       double coef = 1.0);
};

/// Strictly alpha-stable law, alpha in (1,2]. For alpha < 2 the spectral
/// measure lambda_bar is a finite atom list in the characteristic-function
/// convention psi(z) = -sum w_k |z.u_k|^alpha (1 - i sign(z.u_k) tan(pi alpha/2));
/// for alpha = 2 only sigma is used.
struct StableSpec {
  double alpha = 2.0;
  std::vector<std::pair<Vec, double>> spectral;  ///< (unit direction, weight)
  Mat sigma;

  int dim() const;
  void validate() const;
  /// Triplet-form drift that makes the law strictly stable (metadata):
  /// gamma = int u lambda_bar(du) / (1 - alpha), alpha != 1.
  Vec strict_drift() const;
  double total_spectral_weight() const;
  bool symmetric() const;
};

/// psi(z) per the compensated triplet convention; Re psi <= 0, psi(0) = 0.
Cplx char_exponent(const LevyTriplet& triplet, const Vec& z);

/// psi_alpha(z); the alpha=1 branch is unsupported by contract.
Cplx stable_char_exponent(const StableSpec& spec, const Vec& z);

/// r * psi(r^{-1/alpha} w): converges to psi_alpha(w) under the domain-of-
/// attraction assumption, or to i gamma0 . w in the finite-variation case.
Cplx rescaled_exponent(const LevyTriplet& triplet, double alpha, const Vec& w, double r);

/// Universal constant C_alpha = -Gamma(-alpha) cos(pi alpha / 2) linking the
/// polar-decomposition spectral measure to the characteristic-function one:
/// int_0^inf (e^{iv} - 1 - iv) v^{-1-alpha} dv = -C_alpha (1 - i tan(pi alpha/2)).
double stable_polar_constant(double alpha);

/// Domain-of-attraction map: the stable law that r^{-1/alpha}-rescaled small
/// jumps of `triplet` converge to. Requires power-tail radial families with
/// matching index for alpha < 2 (weights C_alpha * K_k * lambda_k), or
/// sigma != 0 for alpha = 2.
StableSpec stable_limit_of(const LevyTriplet& triplet, double alpha);

/// One increment of the basis over a cell of the given volume: a draw with
/// log-characteristic function volume * psi(z). Catalog: Gaussian, finite
/// activity, or eps-truncated finite-variation measures.
Vec sample_id_increment(const LevyTriplet& triplet, double volume, RngStream& rng,
                        double truncation_eps = 1e-6);

/// Draw with log-characteristic function scale * psi_alpha(z); spectral atoms
/// are sampled by the trigonometric (Chambers-Mallows-Stuck) method and
/// combined along atom directions.
Vec sample_stable(const StableSpec& spec, double scale, RngStream& rng);

/// Axis-aligned box region.
struct BoxRegion {
  Vec lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  bool contains(const Vec& q) const;
  Vec sample(RngStream& rng) const;
};

/// Poisson configuration of jumps of nu restricted to ||x|| > eps on a box.
struct JumpConfiguration {
  struct Jump {
    Vec location;  ///< q_k in R^d
    Vec mark;      ///< x_k in R^m
  };
  std::vector<Jump> jumps;
  BoxRegion region;
  double truncation_level = 0.0;
};

JumpConfiguration sample_poisson_jumps(const BoxRegion& region, const LevyMeasureSpec& nu,
                                       double eps, RngStream& rng);

}  // namespace ambitflux
