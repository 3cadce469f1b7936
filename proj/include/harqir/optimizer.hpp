#pragma once

// Throughput-optimal rate under an outage constraint P_out(M; R) <= eps.
// The fits do not depend on the rate, so one LinkAnalyzer serves every
// objective evaluation.

#include <cmath>
#include <string>

#include "harqir/error.hpp"
#include "harqir/metrics.hpp"

namespace harq {

struct RateDesignProblem {
  double epsilon = 0.01;
  double rate_min = 1e-3;
  double rate_max = 20.0;
  double tolerance = 1e-3;

  void validate() const {
    detail::require(epsilon > 0.0 && epsilon <= 1.0, "RateDesignProblem: epsilon must be in (0, 1]");
    detail::require(rate_min > 0.0 && rate_max > rate_min, "RateDesignProblem: need 0 < rate_min < rate_max");
    detail::require(tolerance > 0.0, "RateDesignProblem: tolerance must be > 0");
  }
};

struct RateDesignSolution {
  double rate_opt = 0.0;
  double ltat_opt = 0.0;
  double outage_at_opt = 0.0;
  double avg_transmissions = 1.0;
  double feasible_boundary = 0.0;
};

inline double outage_vs_rate(const LinkAnalyzer& link, double rate) { return link.outage(link.rounds(), rate); }

/// Largest rate on [rate_min, rate_max] (to within `tolerance`) that meets
/// the outage constraint.
inline double feasible_rate_boundary(const RateDesignProblem& p, const LinkAnalyzer& link) {
  p.validate();
  const double p_min = outage_vs_rate(link, p.rate_min);
  if (p_min > p.epsilon)
    throw InfeasibleError("outage " + std::to_string(p_min) + " at the smallest rate already exceeds epsilon = " +
                              std::to_string(p.epsilon),
                          p_min);
  if (outage_vs_rate(link, p.rate_max) <= p.epsilon) return p.rate_max;
  double lo = p.rate_min, hi = p.rate_max;
  while (hi - lo > p.tolerance) {
    const double mid = 0.5 * (lo + hi);
    (outage_vs_rate(link, mid) <= p.epsilon ? lo : hi) = mid;
  }
  return lo;
}

/// Maximizes R (1 - P_out(M)) / N(R) over [rate_min, boundary]: a 256-point
/// scan picks the bracket, golden-section search refines it.
inline RateDesignSolution optimize_rate(const RateDesignProblem& p, const LinkAnalyzer& link) {
  const double boundary = feasible_rate_boundary(p, link);
  auto objective = [&](double r) { return link.metrics(r).ltat; };

  constexpr int scan = 256;
  const double a = p.rate_min;
  const double step = (boundary - a) / (scan - 1);
  int best = 0;
  double best_val = -1.0;
  for (int j = 0; j < scan; ++j) {
    const double v = objective(a + step * j);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  double lo = a + step * std::max(best - 1, 0);
  double hi = std::min(a + step * std::min(best + 1, scan - 1), boundary);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  while (hi - lo > p.tolerance) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = objective(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = objective(x1);
    }
  }
  // The scan point itself or the bracket ends can beat the interior when the
  // maximum sits on the constraint.
  double r_opt = 0.5 * (lo + hi);
  double v_opt = objective(r_opt);
  for (double r : {a + step * best, lo, hi}) {
    const double v = objective(r);
    if (v > v_opt) {
      v_opt = v;
      r_opt = r;
    }
  }
  const auto m = link.metrics(r_opt);
  return {r_opt, m.ltat, m.outage_per_round.back(), m.avg_transmissions, boundary};
}

}  // namespace harq
