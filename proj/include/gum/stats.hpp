#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gum {

// Online mean/variance (Welford). Numerically stable for the long
// accumulations the simulator produces.
struct RunningStat {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double std_error() const {
    return n > 0 ? stddev() / std::sqrt(static_cast<double>(n)) : 0.0;
  }
};

// One-sample Kolmogorov-Smirnov statistic against Uniform(0,1).
// Sorts its argument.
inline double ks_statistic_uniform(std::vector<double>& xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double u = std::clamp(xs[i], 0.0, 1.0);
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - u);
    d = std::max(d, u - static_cast<double>(i) / n);
  }
  return d;
}

// Kolmogorov tail Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2); the
// asymptotic p-value of sqrt(n)*D. Series terms shrink fast for x > 0.2.
inline double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// True when a sample is consistent with Uniform(0,1) at the given
// significance level (rejects only if p < significance).
inline bool ks_uniform_ok(std::vector<double> xs, double significance = 0.01) {
  const double d = ks_statistic_uniform(xs);
  const double p = kolmogorov_tail(std::sqrt(static_cast<double>(xs.size())) * d);
  return p >= significance;
}

}  // namespace gum
