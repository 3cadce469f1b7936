#pragma once

// HARQ-IR metrics on top of the per-K fits: outage, average number of
// rounds, long-term average throughput, the fully correlated closed form,
// the sum-of-exponentials outage bounds and the diversity slope.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harqir/channel.hpp"
#include "harqir/error.hpp"
#include "harqir/gammafit.hpp"
#include "harqir/moments.hpp"
#include "harqir/montecarlo.hpp"
#include "harqir/specfun.hpp"

namespace harq {

struct HarqMetrics {
  double rate = 0.0;
  std::vector<double> outage_per_round;  // P_out(1..M)
  double avg_transmissions = 1.0;
  double ltat = 0.0;
  std::vector<std::string> warnings;
};

inline double approx_cdf(const MutualInfoApprox& a, double x) { return a.cdf(x); }
inline double approx_cdf_raw(const MutualInfoApprox& a, double x) { return a.cdf_raw(x); }

inline std::vector<double> outage(std::span<const MutualInfoApprox> per_k, double rate) {
  detail::require(rate > 0.0, "outage: rate must be > 0");
  std::vector<double> out;
  for (const auto& a : per_k) out.push_back(a.cdf(rate));
  return out;
}

/// 1 + sum_{K=1}^{M-1} P_out(K); pass the first M-1 outages.
inline double avg_transmissions(std::span<const double> outages) {
  double n = 1.0;
  for (double p : outages) {
    detail::require(p >= 0.0 && p <= 1.0, "avg_transmissions: outage must be in [0, 1]");
    n += p;
  }
  return n;
}

inline double ltat(double rate, double outage_m, double avg_n) {
  detail::require(rate >= 0.0, "ltat: rate must be >= 0");
  detail::require(outage_m >= 0.0 && outage_m <= 1.0, "ltat: outage must be in [0, 1]");
  detail::require(avg_n >= 1.0, "ltat: average number of rounds must be >= 1");
  return rate * (1.0 - outage_m) / avg_n;
}

/// Outage of a single exponential round with mean SNR mean_snr.
inline double exponential_outage(double mean_snr, double rate) {
  detail::require(mean_snr > 0.0 && rate >= 0.0, "exponential_outage: need mean_snr > 0 and rate >= 0");
  return -std::expm1(-std::expm1(rate * std::numbers::ln2) / mean_snr);
}

/// rho = 1: every round sees the same gain, so I_M = M log2(1 + gamma).
inline double fully_correlated_outage(double two_sigma_sq, double gamma_t, double rate, int rounds) {
  detail::require(two_sigma_sq > 0.0 && gamma_t > 0.0, "fully_correlated_outage: need 2 sigma^2 > 0 and gamma_T > 0");
  detail::require(rate >= 0.0, "fully_correlated_outage: rate must be >= 0");
  detail::require(rounds >= 1, "fully_correlated_outage: M must be >= 1");
  return -std::expm1(-std::expm1(rate / rounds * std::numbers::ln2) / (two_sigma_sq * gamma_t));
}

/// Eigenvalues of F^{1/2} E F^{1/2} with F = diag(2 sigma'^2) and
/// E_kl = |lambda_k lambda_l| (1 on the diagonal); Y = sum gamma_k is a sum
/// of independent exponentials with these means.
inline std::vector<double> sum_exp_scales(const ChannelSpec& spec) {
  spec.validate();
  const int m = spec.rounds;
  Eigen::MatrixXd a(m, m);
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) {
      const double e = k == l ? 1.0 : std::abs(spec.lambda[k] * spec.lambda[l]);
      a(k, l) = std::sqrt(spec.mean_snr(k) * spec.mean_snr(l)) * e;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  std::vector<double> d(solver.eigenvalues().data(), solver.eigenvalues().data() + m);
  for (double v : d)
    if (!(v > 0.0)) throw ConditioningError("sum_exp_scales: correlation matrix is not positive definite");
  return d;
}

struct CdfValue {
  double value = 0.0;
  bool monte_carlo = false;  // series guard tripped, value is an estimate
  double std_error = 0.0;
};

/// F_Y(y) = y^M / (prod delta_k M!) Phi2(1..1; M+1; -y/delta).
inline CdfValue sum_exp_cdf(const ChannelSpec& spec, double y, const SpecfunLimits& limits = {},
                            const SimConfig& fallback = {}) {
  detail::require(y >= 0.0, "sum_exp_cdf: y must be >= 0");
  if (y == 0.0) return {};
  const auto delta = sum_exp_scales(spec);
  const int m = spec.rounds;
  try {
    double log_front = m * std::log(y) - std::lgamma(m + 1.0);
    for (double d : delta) log_front -= std::log(d);
    const double v = std::exp(log_front) * phi2_series(y, delta, limits);
    return {std::clamp(v, 0.0, 1.0), false, 0.0};
  } catch (const DomainError&) {
    struct Acc {
      std::uint64_t n = 0, hits = 0;
      void merge(const Acc& o) {
        n += o.n;
        hits += o.hits;
      }
    };
    const auto acc = run_lanes(
        spec, fallback, [] { return Acc{}; },
        [&](Acc& a, std::uint64_t, std::span<const double> g) {
          double s = 0.0;
          for (double v : g) s += v;
          ++a.n;
          if (s < y) ++a.hits;
        });
    const double p = static_cast<double>(acc.hits) / static_cast<double>(acc.n);
    return {p, true, std::sqrt(p * (1.0 - p) / static_cast<double>(acc.n))};
  }
}

struct OutageBounds {
  CdfValue lower;  // F_Y(M (2^{R/M} - 1))
  CdfValue upper;  // F_Y(2^R - 1)
};

/// P_out(M) is sandwiched because sum log2(1+gamma_k) >= log2(1 + sum gamma_k)
/// and, by concavity, <= M log2(1 + sum gamma_k / M).
inline OutageBounds sum_exp_cdf_bounds(const ChannelSpec& spec, double rate, const SpecfunLimits& limits = {},
                                       const SimConfig& fallback = {}) {
  detail::require(rate > 0.0, "sum_exp_cdf_bounds: rate must be > 0");
  const int m = spec.rounds;
  return {sum_exp_cdf(spec, m * std::expm1(rate / m * std::numbers::ln2), limits, fallback),
          sum_exp_cdf(spec, std::expm1(rate * std::numbers::ln2), limits, fallback)};
}

struct DiversityEstimate {
  double slope = 0.0;
  std::vector<double> snr_db;  // grid points actually used
  std::vector<std::string> warnings;
};

/// Least-squares slope of -log P_out against log gamma_T. Grid points whose
/// outage underflowed or is not finite are dropped with a warning.
inline DiversityEstimate estimate_diversity_order(const std::function<double(double)>& outage_at_db,
                                                  std::span<const double> snr_grid_db) {
  DiversityEstimate est;
  std::vector<double> xs, ys;
  for (double db : snr_grid_db) {
    const double p = outage_at_db(db);
    if (!(p > 1e-300) || !std::isfinite(p)) {
      est.warnings.push_back("outage underflow at " + std::to_string(db) + " dB; point dropped");
      continue;
    }
    est.snr_db.push_back(db);
    xs.push_back(db / 10.0);
    ys.push_back(-std::log10(p));
  }
  if (xs.size() < 2) throw DomainError("estimate_diversity_order: fewer than two usable grid points");
  if (est.snr_db.back() - est.snr_db.front() < 20.0)
    est.warnings.push_back("grid spans less than 20 dB; slope may not be asymptotic");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  est.slope = sxy / sxx;
  return est;
}

struct AnalysisConfig {
  MomentConfig moments;
  int degree_cap = kDegreeCap;
  double epsilon = 0.01;
  // Round 1 is exactly exponential; the mixture fit is poor there.
  bool exact_single_round = true;
  SpecfunLimits limits;
  double monotonicity_slack = 1e-3;
};

/// Per-K fits for one link, reused across rates. Homogeneous links with
/// rho = 1 skip the fits and use the closed form.
class LinkAnalyzer {
public:
  explicit LinkAnalyzer(ChannelSpec spec, AnalysisConfig cfg = {}) : cfg_(cfg), spec_(std::move(spec)) {
    spec_.validate();
    for (int k = 1; k <= spec_.rounds; ++k) {
      MomentEngine engine(spec_, k, cfg_.moments);
      DegreeSelection info;
      fits_.push_back(fit_mutual_info(engine, cfg_.degree_cap, cfg_.epsilon, &info));
      if (info.cap_used < cfg_.degree_cap)
        notes_.push_back("K=" + std::to_string(k) + ": degree cap lowered to " + std::to_string(info.cap_used) +
                         " by the conditioning check");
    }
  }

  static LinkAnalyzer homogeneous(double rho, double gamma_t_db, int rounds, AnalysisConfig cfg = {},
                                  double two_sigma_sq = 1.0) {
    detail::require(rho >= 0.0 && rho <= 1.0, "LinkAnalyzer: rho must be in [0, 1]");
    if (rho < 1.0) return LinkAnalyzer(ChannelSpec::homogeneous(rho, gamma_t_db, rounds, two_sigma_sq), cfg);
    return LinkAnalyzer(gamma_t_db, rounds, two_sigma_sq, cfg);
  }

  bool fully_correlated() const { return fully_correlated_; }
  int rounds() const { return rounds_; }
  const ChannelSpec& spec() const {
    if (fully_correlated_) throw ParameterError("LinkAnalyzer: no ChannelSpec for a fully correlated link");
    return spec_;
  }
  const AnalysisConfig& config() const { return cfg_; }
  const std::vector<std::string>& notes() const { return notes_; }

  const MutualInfoApprox& approx(int k) const {
    detail::require(!fully_correlated_, "LinkAnalyzer: fully correlated links have no fitted approximation");
    detail::require(k >= 1 && k <= rounds_, "LinkAnalyzer::approx: K out of range");
    return fits_[static_cast<std::size_t>(k) - 1];
  }

  double outage(int k, double rate) const {
    detail::require(k >= 1 && k <= rounds_, "LinkAnalyzer::outage: K out of range");
    detail::require(rate >= 0.0, "LinkAnalyzer::outage: rate must be >= 0");
    if (rate == 0.0) return 0.0;
    if (fully_correlated_) return fully_correlated_outage(two_sigma_sq_, db_to_linear(gamma_t_db_), rate, k);
    if (k == 1 && cfg_.exact_single_round) return exponential_outage(spec_.mean_snr(0), rate);
    return fits_[static_cast<std::size_t>(k) - 1].cdf(rate);
  }

  HarqMetrics metrics(double rate) const {
    detail::require(rate > 0.0, "LinkAnalyzer::metrics: rate must be > 0");
    HarqMetrics h;
    h.rate = rate;
    for (int k = 1; k <= rounds_; ++k) {
      h.outage_per_round.push_back(outage(k, rate));
      if (!fully_correlated_ && !(k == 1 && cfg_.exact_single_round)) {
        const double raw = fits_[static_cast<std::size_t>(k) - 1].cdf_raw(rate);
        if (raw < 0.0 || raw > 1.0)
          h.warnings.push_back("K=" + std::to_string(k) + ": raw CDF " + std::to_string(raw) + " clamped to [0,1]");
      }
      if (k >= 2 && h.outage_per_round[static_cast<std::size_t>(k) - 1] >
                        h.outage_per_round[static_cast<std::size_t>(k) - 2] + cfg_.monotonicity_slack)
        h.warnings.push_back("outage increases from K=" + std::to_string(k - 1) + " to K=" + std::to_string(k));
    }
    h.avg_transmissions =
        avg_transmissions(std::span<const double>(h.outage_per_round.data(), h.outage_per_round.size() - 1));
    h.ltat = ltat(rate, h.outage_per_round.back(), h.avg_transmissions);
    return h;
  }

  /// Outage bounds for P_out(M); for rho = 1 both equal the closed form.
  OutageBounds bounds(double rate, const SimConfig& fallback = {}) const {
    if (fully_correlated_) {
      const double p = outage(rounds_, rate);
      return {{p, false, 0.0}, {p, false, 0.0}};
    }
    return sum_exp_cdf_bounds(spec_, rate, cfg_.limits, fallback);
  }

private:
  LinkAnalyzer(double gamma_t_db, int rounds, double two_sigma_sq, AnalysisConfig cfg)
      : cfg_(cfg), fully_correlated_(true), rounds_(rounds), gamma_t_db_(gamma_t_db), two_sigma_sq_(two_sigma_sq) {
    detail::require(rounds >= 1, "LinkAnalyzer: rounds must be >= 1");
    detail::require(two_sigma_sq > 0.0, "LinkAnalyzer: 2 sigma^2 must be > 0");
  }

  AnalysisConfig cfg_;
  ChannelSpec spec_;
  std::vector<MutualInfoApprox> fits_;
  std::vector<std::string> notes_;
  bool fully_correlated_ = false;
  int rounds_ = spec_.rounds;
  double gamma_t_db_ = 0.0;
  double two_sigma_sq_ = 1.0;
};

/// Diversity slope for a homogeneous link. rho < 1 fits both sum-of-exponential
/// bounds (the mixture cannot represent outages of 1e-12 and below), rho = 1
/// uses the closed form.
struct DiversityResult {
  double lower_slope = 0.0;  // from the lower bound on P_out
  double upper_slope = 0.0;  // from the upper bound
  double slope = 0.0;        // reported order: mean of the two
  std::vector<std::string> warnings;
};

inline DiversityResult homogeneous_diversity(double rho, int rounds, double rate, std::span<const double> grid_db,
                                             double two_sigma_sq = 1.0, const SpecfunLimits& limits = {}) {
  DiversityResult r;
  if (rho >= 1.0) {
    const auto e = estimate_diversity_order(
        [&](double db) { return fully_correlated_outage(two_sigma_sq, db_to_linear(db), rate, rounds); }, grid_db);
    r.lower_slope = r.upper_slope = r.slope = e.slope;
    r.warnings = e.warnings;
    return r;
  }
  // Guard-tripping points would fall back to Monte-Carlo, which cannot see
  // these tails; treat them as unusable instead.
  auto bound = [&](double db, bool upper) {
    const auto spec = ChannelSpec::homogeneous(rho, db, rounds, two_sigma_sq);
    const double y = upper ? std::expm1(rate * std::numbers::ln2) : rounds * std::expm1(rate / rounds * std::numbers::ln2);
    try {
      const auto delta = sum_exp_scales(spec);
      double log_front = rounds * std::log(y) - std::lgamma(rounds + 1.0);
      for (double d : delta) log_front -= std::log(d);
      return std::exp(log_front) * phi2_series(y, delta, limits);
    } catch (const DomainError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const auto lo = estimate_diversity_order([&](double db) { return bound(db, false); }, grid_db);
  const auto hi = estimate_diversity_order([&](double db) { return bound(db, true); }, grid_db);
  r.lower_slope = lo.slope;
  r.upper_slope = hi.slope;
  r.slope = 0.5 * (lo.slope + hi.slope);
  r.warnings = lo.warnings;
  r.warnings.insert(r.warnings.end(), hi.warnings.begin(), hi.warnings.end());
  return r;
}

}  // namespace harq
