#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace sdgh {

/// Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  std::size_t successes = 0;
  std::size_t trials = 0;

  /// Half width of the interval, used as "CI" in bound comparisons.
  double half_width() const { return 0.5 * (upper - lower); }
};

inline WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
  WilsonInterval w;
  w.successes = successes;
  w.trials = trials;
  if (trials == 0) return w;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  w.estimate = p;
  w.lower = std::max(0.0, centre - half);
  w.upper = std::min(1.0, centre + half);
  // the endpoints are exact at the extremes; the formula leaves rounding residue
  if (successes == 0) w.lower = 0.0;
  if (successes == trials) w.upper = 1.0;
  return w;
}

struct SampleMoments {
  double mean = 0.0;
  double stddev = 0.0;
  double stderr_mean = 0.0;
  std::size_t count = 0;
};

inline SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments m;
  m.count = xs.size();
  if (xs.empty()) return m;
  // Welford
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : xs) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  m.mean = mean;
  if (k > 1) {
    m.stddev = std::sqrt(m2 / static_cast<double>(k - 1));
    m.stderr_mean = m.stddev / std::sqrt(static_cast<double>(k));
  }
  return m;
}

}  // namespace sdgh
