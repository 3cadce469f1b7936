#pragma once

// Time-correlated Rayleigh link descriptors. Round k has amplitude
// h_k = sigma_k (lambda_k u_0 + sqrt(1 - lambda_k^2) u_k) with a shared u_0,
// so the power gains have correlation lambda_k^2 lambda_l^2.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "harqir/error.hpp"
#include "harqir/specfun.hpp"

namespace harq {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

struct ChannelSpec {
  int rounds = 0;
  std::vector<double> sigma;   // Rayleigh scale, E|h_k|^2 = 2 sigma_k^2
  std::vector<double> lambda;  // |lambda_k| < 1
  std::vector<double> snr_db;  // transmit SNR per round

  ChannelSpec() = default;
  ChannelSpec(std::vector<double> sigma_, std::vector<double> lambda_, std::vector<double> snr_db_)
      : rounds(static_cast<int>(sigma_.size())),
        sigma(std::move(sigma_)),
        lambda(std::move(lambda_)),
        snr_db(std::move(snr_db_)) {
    validate();
  }

  /// Equal correlation rho between every pair of rounds, equal transmit SNR,
  /// and E|h|^2 = two_sigma_sq. Only rho < 1 is representable here; the
  /// fully correlated link goes through fully_correlated_outage.
  static ChannelSpec homogeneous(double rho, double gamma_t_db, int rounds, double two_sigma_sq = 1.0);

  ChannelSpec prefix(int k) const {
    detail::require(k >= 1 && k <= rounds, "ChannelSpec::prefix: K out of range");
    return ChannelSpec({sigma.begin(), sigma.begin() + k}, {lambda.begin(), lambda.begin() + k},
                       {snr_db.begin(), snr_db.begin() + k});
  }

  /// Mean received SNR 2 sigma'_k^2 of round k (0-based).
  double mean_snr(int k) const { return 2.0 * sigma[k] * sigma[k] * db_to_linear(snr_db[k]); }

  void validate() const {
    detail::require(rounds >= 1, "ChannelSpec: at least one round required");
    detail::require(sigma.size() == static_cast<std::size_t>(rounds) &&
                        lambda.size() == sigma.size() && snr_db.size() == sigma.size(),
                    "ChannelSpec: sigma, lambda and snr_db must all have M entries");
    for (int k = 0; k < rounds; ++k) {
      detail::require(sigma[k] > 0.0 && std::isfinite(sigma[k]), "ChannelSpec: sigma_k must be > 0");
      detail::require(std::abs(lambda[k]) < 1.0, "ChannelSpec: |lambda_k| must be < 1");
      detail::require(std::isfinite(snr_db[k]), "ChannelSpec: snr_db must be finite");
    }
  }
};

inline double lambda_from_rho(double rho) {
  detail::require(rho >= 0.0 && rho < 1.0,
                  "lambda_from_rho: rho must be in [0, 1); use the fully correlated path for rho = 1");
  return std::pow(rho, 0.25);
}

inline ChannelSpec ChannelSpec::homogeneous(double rho, double gamma_t_db, int rounds, double two_sigma_sq) {
  detail::require(rounds >= 1, "ChannelSpec::homogeneous: rounds must be >= 1");
  detail::require(two_sigma_sq > 0.0, "ChannelSpec::homogeneous: 2 sigma^2 must be > 0");
  const double lam = lambda_from_rho(rho);
  const auto n = static_cast<std::size_t>(rounds);
  return ChannelSpec(std::vector<double>(n, std::sqrt(0.5 * two_sigma_sq)), std::vector<double>(n, lam),
                     std::vector<double>(n, gamma_t_db));
}

/// rho_{k,l} with rounds numbered 1..M.
inline double correlation_coefficient(const ChannelSpec& spec, int k, int l) {
  detail::require(k >= 1 && k <= spec.rounds && l >= 1 && l <= spec.rounds,
                  "correlation_coefficient: round index out of range");
  if (k == l) return 1.0;
  const double a = spec.lambda[k - 1] * spec.lambda[k - 1];
  const double b = spec.lambda[l - 1] * spec.lambda[l - 1];
  return a * b;
}

inline constexpr double kSpeedOfLight = 299792458.0;

/// Jakes power correlation J0^2(2 pi f_c tau v / c). Speed in m/s.
inline double jakes_correlation(double carrier_hz, double spacing_s, double speed_mps) {
  detail::require(std::isfinite(carrier_hz) && carrier_hz > 0.0, "jakes_correlation: carrier must be > 0");
  detail::require(std::isfinite(spacing_s) && spacing_s > 0.0, "jakes_correlation: spacing must be > 0");
  detail::require(std::isfinite(speed_mps) && speed_mps >= 0.0, "jakes_correlation: speed must be >= 0");
  const double j = bessel_j0(2.0 * std::numbers::pi * carrier_hz * spacing_s * speed_mps / kSpeedOfLight);
  return std::clamp(j * j, 0.0, 1.0);
}

struct EffectiveScale {
  std::vector<double> sigma_prime_sq;  // 2 sigma'_k^2, mean received SNR
  std::vector<double> w;               // 2 sigma'_k^2 (1 - lambda_k^2)
  std::vector<double> varpi;           // c_k / (1 + S)
  std::vector<double> lambda_sq;
  std::vector<double> c;               // lambda_k^2 / (1 - lambda_k^2)
  double S = 0.0;                      // sum of c_k

  int rounds() const { return static_cast<int>(w.size()); }
};

inline EffectiveScale effective_scale(const ChannelSpec& spec) {
  spec.validate();
  EffectiveScale s;
  const auto n = static_cast<std::size_t>(spec.rounds);
  s.sigma_prime_sq.resize(n);
  s.w.resize(n);
  s.varpi.resize(n);
  s.lambda_sq.resize(n);
  s.c.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.sigma_prime_sq[k] = spec.mean_snr(static_cast<int>(k));
    s.lambda_sq[k] = spec.lambda[k] * spec.lambda[k];
    s.w[k] = s.sigma_prime_sq[k] * (1.0 - s.lambda_sq[k]);
    s.c[k] = s.lambda_sq[k] / (1.0 - s.lambda_sq[k]);
    s.S += s.c[k];
  }
  for (std::size_t k = 0; k < n; ++k) s.varpi[k] = s.c[k] / (1.0 + s.S);
  return s;
}

/// Joint density of (gamma_1..gamma_M). Conditioned on the shared component
/// the rounds are independent noncentral exponentials; the remaining
/// one-dimensional mixing integral over t is done with `quad`, or with a
/// composite Gauss-Legendre rule around the integrand peak when that peak is
/// beyond what `quad` resolves (large x with strong correlation).
inline double joint_snr_pdf(const EffectiveScale& scale, std::span<const double> x, const QuadratureRule& quad) {
  const int m = scale.rounds();
  detail::require(static_cast<int>(x.size()) == m, "joint_snr_pdf: x must have M entries");
  double log_front = -std::log1p(scale.S);
  std::vector<double> b(m);
  double root_sum = 0.0;
  for (int k = 0; k < m; ++k) {
    detail::require(x[k] >= 0.0 && std::isfinite(x[k]), "joint_snr_pdf: x_k must be finite and >= 0");
    log_front += -x[k] / scale.w[k] - std::log(scale.w[k]);
    b[k] = x[k] * scale.varpi[k] / scale.w[k];
    root_sum += std::sqrt(b[k]);
  }
  auto log_integrand = [&](double t) {
    double v = 0.0;
    for (double bk : b) v += log_hyp0f1_1(bk * t);
    return v;
  };
  const double peak = root_sum * root_sum;
  if (peak <= 0.4 * quad.max_node()) {
    double sum = 0.0;
    for (int q = 0; q < quad.order; ++q) sum += std::exp(quad.log_weights[q] + log_front + log_integrand(quad.nodes[q]));
    return sum;
  }
  // e^{-t} prod 0F1 behaves like exp(-(sqrt t - sqrt peak)^2), width ~ sqrt(peak) in t.
  static const QuadratureRule panel = gauss_legendre(16);
  const double spread = 12.0 * (std::sqrt(peak) + 1.0) + 40.0;
  const double lo = std::max(0.0, peak - spread);
  const double hi = peak + spread;
  constexpr int panels = 24;
  const double h = (hi - lo) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    for (int q = 0; q < panel.order; ++q) {
      const double t = mid + 0.5 * h * panel.nodes[q];
      sum += 0.5 * h * panel.weights[q] * std::exp(log_front - t + log_integrand(t));
    }
  }
  return sum;
}

}  // namespace harq
