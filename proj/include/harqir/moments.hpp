#pragma once

// Moments M(i) = E[I_K^i] of the accumulated mutual information
// I_K = sum_k log2(1 + gamma_k).
//
// Conditioned on the shared Gaussian component (|u_0|^2 / 2 = s ~ Exp(1)) the
// rounds are independent, and gamma_k / w_k is noncentral with parameter
// a_k = c_k s. So
//
//   M(i) = int_0^inf e^{-s} sum_{i_1+..+i_K = i} i!/prod(i_k!) prod_k mu_k(i_k; c_k s) ds,
//   mu_k(j; a) = int_0^inf e^{-xi} e^{-a} 0F1(;1; a xi) log2^j(1 + w_k xi) dxi.
//
// Putting Gauss-Laguerre on the inner integrals first and t = (1+S)s outside
// gives the textbook N_Q^K cross-sum weighted by Psi2; that literal form is
// moment_direct() and only serves as a cross-check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "harqir/channel.hpp"
#include "harqir/error.hpp"
#include "harqir/specfun.hpp"

namespace harq {

inline constexpr int kMaxCompositionOrder = 10;
inline constexpr int kMaxCompositionParts = 8;

/// All K-tuples of nonnegative integers summing to i, in reverse
/// lexicographic order ((i,0,..), ..., (0,..,i)).
inline std::vector<std::vector<int>> compositions(int i, int k) {
  detail::require(i >= 0 && i <= kMaxCompositionOrder, "compositions: i must be in [0, 10]");
  detail::require(k >= 1 && k <= kMaxCompositionParts, "compositions: K must be in [1, 8]");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(k), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == k - 1) {
      cur[static_cast<std::size_t>(pos)] = left;
      out.push_back(cur);
      return;
    }
    for (int v = left; v >= 0; --v) {
      cur[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, i);
  return out;
}

struct MomentConfig {
  int n_q = 64;          // inner Gauss-Laguerre order
  int n_t = 128;         // outer rule over the shared component
  int max_order = 10;    // moments computed eagerly, 0..max_order
  // Inner integrals whose noncentrality a exceeds this fraction of the
  // largest inner node are done on the Rician amplitude instead, where the
  // integrand is a narrow bump around sqrt(a) that the Laguerre nodes miss.
  double fallback_fraction = 0.45;
  int fallback_order = 96;
};

/// Gamma(zeta, theta) with its moment sequence nu_n = theta^n Gamma(n+zeta)/Gamma(zeta).
struct GammaBasis {
  double zeta = 1.0;
  double theta = 1.0;
  std::vector<long double> nu;

  static GammaBasis make(double zeta, double theta, int max_n = 20) {
    detail::require(zeta > 0.0 && theta > 0.0 && std::isfinite(zeta) && std::isfinite(theta),
                    "GammaBasis: zeta and theta must be positive");
    GammaBasis b;
    b.zeta = zeta;
    b.theta = theta;
    b.nu.resize(static_cast<std::size_t>(max_n) + 1);
    b.nu[0] = 1.0L;
    for (int n = 0; n < max_n; ++n)
      b.nu[static_cast<std::size_t>(n) + 1] =
          b.nu[static_cast<std::size_t>(n)] * static_cast<long double>(theta) * (n + static_cast<long double>(zeta));
    return b;
  }

  double mean() const { return zeta * theta; }
  double variance() const { return zeta * theta * theta; }
};

class MomentEngine {
public:
  MomentEngine(const ChannelSpec& spec, int k, MomentConfig cfg = {})
      : MomentEngine(effective_scale(checked_prefix(spec, k)), cfg) {}

  explicit MomentEngine(EffectiveScale scale, MomentConfig cfg = {}) : scale_(std::move(scale)), cfg_(cfg) {
    detail::require(cfg_.n_q >= 8 && cfg_.n_q <= 256, "MomentEngine: n_q must be in [8, 256]");
    detail::require(cfg_.n_t >= 8 && cfg_.n_t <= 256, "MomentEngine: n_t must be in [8, 256]");
    detail::require(cfg_.max_order >= 2 && cfg_.max_order <= kMaxCompositionOrder,
                    "MomentEngine: max_order must be in [2, 10]");
    detail::require(scale_.rounds() >= 1 && scale_.rounds() <= kMaxCompositionParts,
                    "MomentEngine: K must be in [1, 8]");
    quad_ = gauss_laguerre(cfg_.n_q);
    compute();
  }

  int rounds() const { return scale_.rounds(); }
  int max_order() const { return cfg_.max_order; }
  const EffectiveScale& scale() const { return scale_; }
  const QuadratureRule& quad() const { return quad_; }
  const MomentConfig& config() const { return cfg_; }

  double moment(int i) const {
    detail::require(i >= 0 && i <= cfg_.max_order,
                    "moment: order " + std::to_string(i) + " outside [0, " + std::to_string(cfg_.max_order) + "]");
    return moments_[static_cast<std::size_t>(i)];
  }
  std::span<const double> moments() const { return moments_; }

  /// Literal cross-sum over N_Q^K node tuples with Psi2 weights. Cost grows
  /// as N_Q^K, and Psi2 refuses node tuples whose integrand it cannot
  /// resolve, so this is for small rules and small K.
  double moment_direct(int i, const SpecfunLimits& limits = {}) const {
    detail::require(i >= 0 && i <= 4, "moment_direct: order must be in [0, 4]");
    if (i == 0) return 1.0;
    const int k = rounds();
    const int nq = quad_.order;
    std::vector<std::vector<double>> lg(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(nq)));
    for (int r = 0; r < k; ++r)
      for (int q = 0; q < nq; ++q)
        lg[static_cast<std::size_t>(r)][static_cast<std::size_t>(q)] = std::log2(1.0 + scale_.w[static_cast<std::size_t>(r)] * quad_.nodes[static_cast<std::size_t>(q)]);
    const auto comps = compositions(i, k);
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    std::vector<double> arg(static_cast<std::size_t>(k));
    std::vector<double> comp_sum(comps.size(), 0.0);
    while (true) {
      double w = 1.0;
      for (int r = 0; r < k; ++r) {
        const auto q = static_cast<std::size_t>(idx[static_cast<std::size_t>(r)]);
        w *= quad_.weights[q];
        arg[static_cast<std::size_t>(r)] = scale_.varpi[static_cast<std::size_t>(r)] * quad_.nodes[q];
      }
      if (w > 0.0) {
        const double psi = psi2_integral(arg, limits);
        for (std::size_t c = 0; c < comps.size(); ++c) {
          double p = w * psi;
          for (int r = 0; r < k; ++r)
            p *= std::pow(lg[static_cast<std::size_t>(r)][static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])],
                          comps[c][static_cast<std::size_t>(r)]);
          comp_sum[c] += p;
        }
      }
      int r = 0;
      while (r < k && ++idx[static_cast<std::size_t>(r)] == nq) idx[static_cast<std::size_t>(r++)] = 0;
      if (r == k) break;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < comps.size(); ++c) total += multinomial(i, comps[c]) * comp_sum[c];
    return total / (1.0 + scale_.S);
  }

private:
  static ChannelSpec checked_prefix(const ChannelSpec& spec, int k) {
    detail::require(k >= 1 && k <= spec.rounds, "MomentEngine: K must be in [1, M]");
    return spec.prefix(k);
  }

  static double multinomial(int i, const std::vector<int>& parts) {
    double v = std::tgamma(i + 1.0);
    for (int p : parts) v /= std::tgamma(p + 1.0);
    return v;
  }

  // mu(j; a) for j = 0..max_order, one round.
  void inner_moments(double a, double w, std::span<double> mu) const {
    std::fill(mu.begin(), mu.end(), 0.0);
    const int top = cfg_.max_order;
    if (a <= cfg_.fallback_fraction * quad_.max_node()) {
      for (int q = 0; q < quad_.order; ++q) {
        const double xi = quad_.nodes[static_cast<std::size_t>(q)];
        const double lw = quad_.log_weights[static_cast<std::size_t>(q)] - a + (a > 0.0 ? log_hyp0f1_1(a * xi) : 0.0);
        double p = std::exp(lw);
        const double l = std::log2(1.0 + w * xi);
        for (int j = 0; j <= top; ++j) {
          mu[static_cast<std::size_t>(j)] += p;
          p *= l;
        }
      }
      return;
    }
    // r = sqrt(gamma / w) has density 2r exp(-(r - sqrt a)^2) [e^{-2 r sqrt a} I0(2 r sqrt a)].
    const double ra = std::sqrt(a);
    const double lo = std::max(0.0, ra - 12.0);
    const double hi = ra + 12.0;
    for (int q = 0; q < fallback_.order; ++q) {
      const double r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * fallback_.nodes[static_cast<std::size_t>(q)];
      const double dens = 2.0 * r * std::exp(-(r - ra) * (r - ra)) * bessel_i0_scaled(2.0 * r * ra);
      double p = 0.5 * (hi - lo) * fallback_.weights[static_cast<std::size_t>(q)] * dens;
      const double l = std::log2(1.0 + w * r * r);
      for (int j = 0; j <= top; ++j) {
        mu[static_cast<std::size_t>(j)] += p;
        p *= l;
      }
    }
  }

  void compute() {
    const int k = rounds();
    const int top = cfg_.max_order;
    fallback_ = gauss_legendre(cfg_.fallback_order);
    const auto outer = gauss_laguerre(cfg_.n_t);
    std::vector<std::vector<std::vector<int>>> comps;
    std::vector<std::vector<double>> coef;
    for (int i = 0; i <= top; ++i) {
      comps.push_back(compositions(i, k));
      std::vector<double> cf;
      for (const auto& c : comps.back()) cf.push_back(multinomial(i, c));
      coef.push_back(std::move(cf));
    }
    std::vector<double> acc(static_cast<std::size_t>(top) + 1, 0.0);
    std::vector<std::vector<double>> mu(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(top) + 1));
    for (int t = 0; t < outer.order; ++t) {
      const double s = outer.nodes[static_cast<std::size_t>(t)];
      const double ws = outer.weights[static_cast<std::size_t>(t)];
      if (ws == 0.0) continue;
      for (int r = 0; r < k; ++r)
        inner_moments(scale_.c[static_cast<std::size_t>(r)] * s, scale_.w[static_cast<std::size_t>(r)], mu[static_cast<std::size_t>(r)]);
      for (int i = 1; i <= top; ++i) {
        double sum = 0.0;
        const auto& ci = comps[static_cast<std::size_t>(i)];
        for (std::size_t c = 0; c < ci.size(); ++c) {
          double p = coef[static_cast<std::size_t>(i)][c];
          for (int r = 0; r < k; ++r) p *= mu[static_cast<std::size_t>(r)][static_cast<std::size_t>(ci[c][static_cast<std::size_t>(r)])];
          sum += p;
        }
        acc[static_cast<std::size_t>(i)] += ws * sum;
      }
    }
    moments_.assign(static_cast<std::size_t>(top) + 1, 0.0);
    moments_[0] = 1.0;
    for (int i = 1; i <= top; ++i) moments_[static_cast<std::size_t>(i)] = acc[static_cast<std::size_t>(i)];
  }

  EffectiveScale scale_;
  MomentConfig cfg_;
  QuadratureRule quad_;
  QuadratureRule fallback_;
  std::vector<double> moments_;
};

/// Gamma law with mean m1 and second moment m2.
inline GammaBasis gamma_match(double m1, double m2, int max_n = 20, int quad_order = 0) {
  const double var = m2 - m1 * m1;
  if (!(var > 1e-14 * m2) || !(m1 > 0.0))
    throw ConditioningError("gamma_match: nonpositive variance (M1 = " + std::to_string(m1) + ", M2 = " +
                            std::to_string(m2) + (quad_order ? ", N_Q = " + std::to_string(quad_order) : "") + ")");
  return GammaBasis::make(m1 * m1 / var, var / m1, max_n);
}

/// Gamma law with the same mean and variance as I_K.
inline GammaBasis gamma_match(const MomentEngine& engine, int max_n = 20) {
  return gamma_match(engine.moment(1), engine.moment(2), max_n, engine.quad().order);
}

}  // namespace harq
