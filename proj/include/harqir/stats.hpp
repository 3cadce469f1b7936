#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "harqir/specfun.hpp"

namespace harq {

/// Running mean and variance. `merge` is Chan's pairwise update, so lanes can
/// be combined in a fixed order and give the same result every run.
struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const { return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

/// P(K > t) for the limiting Kolmogorov distribution.
inline double kolmogorov_survival(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 1.0) {
    // Jacobi-transformed series, converges fast for small t.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k < 50; k += 2) cdf += std::exp(-k * k * pi2 / (8.0 * t * t));
    cdf *= std::sqrt(2.0 * std::numbers::pi) / t;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Asymptotic p-value of a one-sample KS statistic d from n points
/// (Stephens' small-sample correction of the argument).
inline double ks_pvalue(double d, std::uint64_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

inline double chi_square_pvalue(double stat, int dof) {
  detail::require(dof >= 1, "chi_square_pvalue: dof must be >= 1");
  return reg_upper_gamma(0.5 * dof, 0.5 * std::max(stat, 0.0));
}

}  // namespace harq
