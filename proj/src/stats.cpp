#include "ambitflux/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ambitflux {

SampleSet SampleSet::of(std::vector<double> values, std::string experiment, double r, double t,
                        std::uint64_t seed) {
  for (double v : values)
    if (std::isnan(v)) throw std::invalid_argument("SampleSet: NaN rejected at ingestion");
  SampleSet s;
  s.values = std::move(values);
  s.experiment = std::move(experiment);
  s.r = r;
  s.t = t;
  s.seed = seed;
  return s;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  double pos = p * (sorted.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

double interquartile_range(const std::vector<double>& values) {
  std::vector<double> s(values);
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
}

double median(const std::vector<double>& values) {
  std::vector<double> s(values);
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, 0.5);
}

KsResult ks_distance(const SampleSet& a, const SampleSet& b) {
  if (a.values.empty() || b.values.empty())
    throw std::invalid_argument("ks_distance: empty sample set");
  std::vector<double> x(a.values), y(b.values);
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  KsResult res;
  res.statistic = d;
  double scale = std::sqrt((n1 + n2) / (n1 * n2));
  res.critical_5 = 1.3581 * scale;
  res.critical_1 = 1.6276 * scale;
  res.n1 = x.size();
  res.n2 = y.size();
  return res;
}

ScalingReport scaling_exponent(const std::vector<double>& statistic,
                               const std::vector<double>& radii, double predicted) {
  if (statistic.size() != radii.size() || radii.size() < 3)
    throw std::invalid_argument("scaling_exponent: need >= 3 matching radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] < radii[i - 1]))
      throw std::invalid_argument("scaling_exponent: radii must be strictly decreasing");
  for (double s : statistic)
    if (!(s > 0.0))
      throw std::invalid_argument("scaling_exponent: nonpositive statistic (degenerate experiment)");

  std::size_t n = radii.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::log(radii[i]), y = std::log(statistic[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = n * sxx - sx * sx;
  ScalingReport rep;
  rep.radii = radii;
  rep.statistic = statistic;
  rep.slope = (n * sxy - sx * sy) / denom;
  rep.intercept = (sy - rep.slope * sx) / n;
  rep.predicted = predicted;
  rep.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    rep.residuals[i] = std::log(statistic[i]) - (rep.intercept + rep.slope * std::log(radii[i]));
  return rep;
}

namespace {

double hill_at_k(const std::vector<double>& sorted_abs_desc, int k) {
  // sorted_abs_desc: |x| sorted descending; requires k+1 valid order stats.
  double xk1 = sorted_abs_desc[static_cast<std::size_t>(k)];
  if (!(xk1 > 0.0)) throw std::invalid_argument("tail_index: too few positive exceedances");
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += std::log(sorted_abs_desc[static_cast<std::size_t>(i)] / xk1);
  return static_cast<double>(k) / acc;
}

}  // namespace

TailIndexResult tail_index(const SampleSet& samples) {
  if (samples.size() < 1000) throw std::invalid_argument("tail_index: need N >= 1000");
  std::vector<double> a(samples.values.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::fabs(samples.values[i]);
  std::sort(a.begin(), a.end(), std::greater<double>());
  int k = static_cast<int>(std::sqrt(static_cast<double>(a.size())));
  TailIndexResult res;
  res.k = k;
  res.estimate = hill_at_k(a, k);
  res.std_error = res.estimate / std::sqrt(static_cast<double>(k));
  res.estimate_half_k = hill_at_k(a, std::max(8, k / 2));
  res.estimate_double_k = hill_at_k(a, std::min(static_cast<int>(a.size()) - 1, 2 * k));
  // Light tails push the Hill estimate up as fewer order statistics are used.
  res.light_tailed = res.estimate_half_k > 1.25 * res.estimate_double_k;
  return res;
}

TrendResult convergence_in_probability_trend(const std::vector<SampleSet>& deviations_per_radius,
                                             double delta) {
  if (deviations_per_radius.size() < 3)
    throw std::invalid_argument("convergence_in_probability_trend: need >= 3 radii");
  TrendResult res;
  for (const auto& dev : deviations_per_radius) {
    if (dev.values.empty())
      throw std::invalid_argument("convergence_in_probability_trend: empty deviation set");
    std::size_t exceed = 0;
    for (double v : dev.values)
      if (std::fabs(v) > delta) ++exceed;
    res.fractions.push_back(static_cast<double>(exceed) / static_cast<double>(dev.size()));
  }
  int inversions = 0;
  bool noisy_ok = true;
  for (std::size_t i = 1; i < res.fractions.size(); ++i) {
    double prev = res.fractions[i - 1];
    double cur = res.fractions[i];
    if (cur > prev) {
      ++inversions;
      double n = static_cast<double>(deviations_per_radius[i].size());
      double noise = 3.0 * std::sqrt(std::max(prev * (1.0 - prev), 1.0 / n) / n);
      if (cur > prev + noise) noisy_ok = false;
    }
  }
  bool final_ok = res.fractions.back() < 0.1;
  res.pass = final_ok && inversions <= 1 && noisy_ok;
  std::ostringstream os;
  os << "fractions:";
  for (double f : res.fractions) os << " " << f;
  os << " inversions: " << inversions << " final<0.1: " << (final_ok ? "yes" : "no");
  res.detail = os.str();
  return res;
}

}  // namespace ambitflux
