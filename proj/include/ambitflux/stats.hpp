#pragma once

#include <string>
#include <vector>

#include "ambitflux/types.hpp"

namespace ambitflux {

/// Monte Carlo sample set with provenance metadata. NaNs are rejected at
/// ingestion.
struct SampleSet {
  std::vector<double> values;
  std::string experiment;
  double r = 0.0;
  double t = 0.0;
  std::uint64_t seed = 0;

  static SampleSet of(std::vector<double> values, std::string experiment = "", double r = 0.0,
                      double t = 0.0, std::uint64_t seed = 0);
  std::size_t size() const { return values.size(); }
};

/// Linear-interpolation quantile (type 7). p in [0,1].
double quantile(std::vector<double> sorted, double p);
double quantile_sorted(const std::vector<double>& sorted, double p);
double interquartile_range(const std::vector<double>& values);
double median(const std::vector<double>& values);

struct KsResult {
  double statistic = 0.0;
  double critical_5 = 0.0;  ///< 5% asymptotic two-sample critical value
  double critical_1 = 0.0;  ///< 1% asymptotic two-sample critical value
  std::size_t n1 = 0, n2 = 0;
  bool below_1pct() const { return statistic < critical_1; }
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F1 - F2| with asymptotic
/// critical values.
KsResult ks_distance(const SampleSet& a, const SampleSet& b);

struct ScalingReport {
  std::vector<double> radii;
  std::vector<double> statistic;  ///< dispersion per radius
  double slope = 0.0;
  double intercept = 0.0;
  double predicted = 0.0;
  std::vector<double> residuals;  ///< log-space fit residuals
};

/// Least-squares slope of log(statistic) against log(r). Statistics must be
/// strictly positive and radii strictly decreasing, at least 3 of them.
ScalingReport scaling_exponent(const std::vector<double>& statistic,
                               const std::vector<double>& radii, double predicted = 0.0);

struct TailIndexResult {
  double estimate = 0.0;
  double std_error = 0.0;
  int k = 0;  ///< number of upper order statistics used
  bool light_tailed = false;
  double estimate_half_k = 0.0;
  double estimate_double_k = 0.0;
};

/// Hill-type tail index on |samples| with k = sqrt(N) order statistics; for
/// alpha-stable input the estimate brackets alpha. Gaussian-like input is
/// flagged light_tailed (estimate drifts upward as k shrinks).
TailIndexResult tail_index(const SampleSet& samples);

struct TrendResult {
  std::vector<double> fractions;  ///< exceedance fraction per radius
  bool pass = false;
  std::string detail;
};

/// Convergence-in-probability verdict: fraction of |deviation| > delta per
/// radius must be nonincreasing (one inversion within binomial noise allowed)
/// and end below 0.1.
TrendResult convergence_in_probability_trend(const std::vector<SampleSet>& deviations_per_radius,
                                             double delta);

}  // namespace ambitflux
