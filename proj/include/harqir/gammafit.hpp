#pragma once

// Gamma basis times a polynomial correction, fitted in the basis of monic
// polynomials orthogonal under the Gamma measure.
//
// Everything is computed in the scaled variable u = x / theta, where the
// measure moments are nu'_n = Gamma(n+zeta)/Gamma(zeta), and converted back
// afterwards. The moment double sums cancel heavily (terms ~ zeta^{2n} for a
// result ~ n! zeta^n), so they run in the widest float the compiler offers.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "harqir/error.hpp"
#include "harqir/moments.hpp"
#include "harqir/specfun.hpp"

namespace harq {

inline constexpr int kDegreeCap = 10;

struct OrthoPolyBasis {
  int degree = 0;
  std::vector<std::vector<long double>> coeffs;  // C[n][k], 0 <= k <= n, monic
  std::vector<long double> alpha;                // alpha_0 .. alpha_{N-1}
  std::vector<long double> beta;                 // beta_0 .. beta_{N-1}; beta_0 = 0 is unused
  std::vector<long double> norms;                // D_0 .. D_N
  double orthogonality_residual = 0.0;           // max |<P_n,P_m>| / sqrt(D_n D_m), n != m

  // Same quantities in u = x / theta; what the fit actually uses.
  std::vector<std::vector<wide_real>> scaled_coeffs;
  std::vector<wide_real> scaled_norms;

  long double eval(int n, long double x) const {
    long double v = 0.0L;
    for (int k = n; k >= 0; --k) v = v * x + coeffs[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
    return v;
  }
};

namespace detail {

inline wide_real wabs(wide_real v) { return v < 0 ? -v : v; }

inline std::vector<wide_real> scaled_gamma_moments(double zeta, int top) {
  std::vector<wide_real> nu(static_cast<std::size_t>(top) + 1);
  nu[0] = 1;
  for (int n = 0; n < top; ++n) nu[static_cast<std::size_t>(n) + 1] = nu[static_cast<std::size_t>(n)] * (wide_real(n) + wide_real(zeta));
  return nu;
}

inline wide_real bilinear(const std::vector<wide_real>& a, const std::vector<wide_real>& b,
                          const std::vector<wide_real>& nu, int shift) {
  wide_real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) s += a[i] * b[j] * nu[i + j + static_cast<std::size_t>(shift)];
  return s;
}

}  // namespace detail

/// Monic orthogonal polynomials P_0..P_N for the Gamma(zeta, theta) measure,
/// by the three-term recurrence with alpha_n, beta_n and D_n taken from
/// double sums over the measure moments.
inline OrthoPolyBasis build_ortho_basis(const GammaBasis& basis, int degree, double tolerance = 1e-8) {
  detail::require(degree >= 0 && degree <= kDegreeCap, "build_ortho_basis: degree must be in [0, 10]");
  const auto nu = detail::scaled_gamma_moments(basis.zeta, 2 * degree + 1);
  std::vector<std::vector<wide_real>> c(static_cast<std::size_t>(degree) + 1);
  std::vector<wide_real> alpha(static_cast<std::size_t>(degree), 0), beta(static_cast<std::size_t>(degree), 0),
      norms(static_cast<std::size_t>(degree) + 1, 0);
  c[0] = {wide_real(1)};
  for (int n = 0; n <= degree; ++n) {
    const auto un = static_cast<std::size_t>(n);
    norms[un] = detail::bilinear(c[un], c[un], nu, 0);
    if (!(norms[un] > 0))
      throw ConditioningError("build_ortho_basis: D_" + std::to_string(n) + " is not positive; reduce the degree");
    if (n == degree) break;
    alpha[un] = detail::bilinear(c[un], c[un], nu, 1) / norms[un];
    if (n > 0) beta[un] = norms[un] / norms[un - 1];
    std::vector<wide_real> next(un + 2, 0);
    for (std::size_t k = 0; k <= un + 1; ++k) {
      wide_real v = 0;
      if (k >= 1) v += c[un][k - 1];
      if (k <= un) v -= alpha[un] * c[un][k];
      if (n > 0 && k + 1 <= un) v -= beta[un] * c[un - 1][k];
      next[k] = v;
    }
    c[un + 1] = std::move(next);
  }

  OrthoPolyBasis out;
  out.degree = degree;
  for (int n = 0; n <= degree; ++n)
    for (int m = 0; m < n; ++m) {
      const wide_real g = detail::bilinear(c[static_cast<std::size_t>(n)], c[static_cast<std::size_t>(m)], nu, 0);
      const double r = static_cast<double>(detail::wabs(g)) /
                       std::sqrt(static_cast<double>(norms[static_cast<std::size_t>(n)]) *
                                 static_cast<double>(norms[static_cast<std::size_t>(m)]));
      out.orthogonality_residual = std::max(out.orthogonality_residual, r);
    }
  if (!(out.orthogonality_residual <= tolerance))
    throw ConditioningError("build_ortho_basis: orthogonality residual " + std::to_string(out.orthogonality_residual) +
                            " at degree " + std::to_string(degree) + "; reduce the degree");

  const long double th = basis.theta;
  out.coeffs.resize(static_cast<std::size_t>(degree) + 1);
  for (int n = 0; n <= degree; ++n) {
    auto& row = out.coeffs[static_cast<std::size_t>(n)];
    row.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
      row[static_cast<std::size_t>(k)] =
          static_cast<long double>(c[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]) * std::pow(th, n - k);
    out.norms.push_back(static_cast<long double>(norms[static_cast<std::size_t>(n)]) * std::pow(th, 2 * n));
  }
  for (int n = 0; n < degree; ++n) {
    out.alpha.push_back(static_cast<long double>(alpha[static_cast<std::size_t>(n)]) * th);
    out.beta.push_back(static_cast<long double>(beta[static_cast<std::size_t>(n)]) * th * th);
  }
  out.scaled_coeffs = std::move(c);
  out.scaled_norms = std::move(norms);
  return out;
}

/// Fitted approximation of the law of I_K:
///   F(x) = sum_i kappa_i P(i + zeta, x / theta).
struct MutualInfoApprox {
  GammaBasis basis;
  OrthoPolyBasis ortho;
  int degree = 0;
  std::vector<double> eta;            // eta_0..eta_N, coefficients of P_n(x)
  std::vector<double> kappa;          // kappa_0..kappa_N
  std::vector<double> mse_reduction;  // Delta_1..Delta_N at index n-1
  std::vector<double> moments;        // M(0)..M(N) used for the fit
  double lagrange = 0.0;
  double kappa_sum = 1.0;

  double cdf_raw(double x) const {
    if (!(x > 0.0)) return 0.0;
    double s = 0.0;
    for (int i = 0; i <= degree; ++i)
      s += kappa[static_cast<std::size_t>(i)] * reg_lower_gamma(i + basis.zeta, x / basis.theta);
    return s;
  }
  double cdf(double x) const { return std::clamp(cdf_raw(x), 0.0, 1.0); }

  /// Corrected density phi(x) psi_N(x); may dip slightly below zero in the tails.
  double pdf(double x) const {
    if (!(x > 0.0)) return 0.0;
    const double u = x / basis.theta;
    double s = 0.0;
    for (int i = 0; i <= degree; ++i) {
      const double a = i + basis.zeta;
      s += kappa[static_cast<std::size_t>(i)] * std::exp((a - 1.0) * std::log(u) - u - std::lgamma(a));
    }
    return s / basis.theta;
  }
};

namespace detail {

// Delta_n for n = 1..N together with eta' (scaled coefficients).
struct ScaledFit {
  std::vector<wide_real> eta;
  std::vector<double> delta;
};

inline ScaledFit scaled_fit(std::span<const double> moments, const GammaBasis& basis, const OrthoPolyBasis& ortho) {
  ScaledFit f;
  const int n_top = ortho.degree;
  std::vector<wide_real> m(static_cast<std::size_t>(n_top) + 1);
  for (int k = 0; k <= n_top; ++k)
    m[static_cast<std::size_t>(k)] = wide_real(moments[static_cast<std::size_t>(k)]) /
                                     wide_real(std::pow(static_cast<long double>(basis.theta), k));
  wide_real delta = 0;
  for (int n = 0; n <= n_top; ++n) {
    wide_real b = 0;
    const auto& row = ortho.scaled_coeffs[static_cast<std::size_t>(n)];
    for (int k = 0; k <= n; ++k) b += row[static_cast<std::size_t>(k)] * m[static_cast<std::size_t>(k)];
    const wide_real d = ortho.scaled_norms[static_cast<std::size_t>(n)];
    f.eta.push_back(b / d);
    if (n >= 1) {
      delta += b * b / d;
      f.delta.push_back(static_cast<double>(delta));
    }
  }
  return f;
}

}  // namespace detail

/// Least-squares correction with the normalization constraint. With the
/// orthogonal basis the Gram matrix is diag(D_n), the constraint vector is
/// e_0, and the multiplier comes out as zero.
inline MutualInfoApprox fit_correction(std::span<const double> moments, const GammaBasis& basis,
                                       const OrthoPolyBasis& ortho) {
  const int n_top = ortho.degree;
  detail::require(static_cast<int>(moments.size()) > n_top, "fit_correction: need moments M(0)..M(N)");
  MutualInfoApprox a;
  a.basis = basis;
  a.ortho = ortho;
  a.degree = n_top;
  a.moments.assign(moments.begin(), moments.begin() + n_top + 1);
  const auto f = detail::scaled_fit(moments, basis, ortho);
  const wide_real d0 = ortho.scaled_norms[0];
  a.lagrange = static_cast<double>((ortho.scaled_coeffs[0][0] * wide_real(moments[0]) * d0 - 1) / d0);
  const auto nu = detail::scaled_gamma_moments(basis.zeta, n_top);
  wide_real total = 0;
  for (int i = 0; i <= n_top; ++i) {
    wide_real s = 0;
    for (int n = i; n <= n_top; ++n)
      s += f.eta[static_cast<std::size_t>(n)] * ortho.scaled_coeffs[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)];
    const wide_real kappa = nu[static_cast<std::size_t>(i)] * s;
    a.kappa.push_back(static_cast<double>(kappa));
    total += kappa;
  }
  for (int n = 0; n <= n_top; ++n)
    a.eta.push_back(static_cast<double>(f.eta[static_cast<std::size_t>(n)]) /
                    std::pow(basis.theta, static_cast<double>(n)));
  a.mse_reduction = f.delta;
  a.kappa_sum = static_cast<double>(total);
  if (std::abs(a.kappa_sum - 1.0) > 1e-8)
    throw ConsistencyError("fit_correction: mixture weights sum to " + std::to_string(a.kappa_sum));
  return a;
}

inline MutualInfoApprox fit_correction(const MomentEngine& engine, const GammaBasis& basis, const OrthoPolyBasis& ortho) {
  detail::require(engine.max_order() >= ortho.degree, "fit_correction: engine has too few moments");
  return fit_correction(engine.moments(), basis, ortho);
}

/// Delta_n, the drop in squared error going from degree 0 to degree n.
inline double mse_reduction(const MutualInfoApprox& approx, int n) {
  detail::require(n >= 1 && n <= approx.degree, "mse_reduction: n must be in [1, N]");
  return approx.mse_reduction[static_cast<std::size_t>(n) - 1];
}

struct DegreeSelection {
  int cap_used = kDegreeCap;   // lowered when the basis at the requested cap is ill-conditioned
  std::vector<double> delta;   // Delta_1..Delta_cap
  std::vector<double> ratio;   // r_1..r_cap
};

/// N = smallest n >= 3 with r_n = (Delta_n - Delta_{n-1}) / Delta_n <= eps,
/// else the cap. r_n is taken as 0 when Delta_n = 0.
inline MutualInfoApprox select_degree(std::span<const double> moments, const GammaBasis& basis, int cap = kDegreeCap,
                                      double epsilon = 0.01, DegreeSelection* info = nullptr) {
  detail::require(cap >= 3 && cap <= kDegreeCap, "select_degree: cap must be in [3, 10]");
  detail::require(epsilon > 0.0 && epsilon <= 1.0, "select_degree: epsilon must be in (0, 1]");
  detail::require(static_cast<int>(moments.size()) > cap, "select_degree: need moments up to the cap");
  OrthoPolyBasis full;
  int top = cap;
  for (;; --top) {
    try {
      full = build_ortho_basis(basis, top);
      break;
    } catch (const ConditioningError&) {
      if (top == 3) throw;
    }
  }
  const auto f = detail::scaled_fit(moments, basis, full);
  std::vector<double> ratio(f.delta.size(), 0.0);
  int chosen = top;
  for (int n = 1; n <= top; ++n) {
    const double dn = f.delta[static_cast<std::size_t>(n) - 1];
    const double dp = n >= 2 ? f.delta[static_cast<std::size_t>(n) - 2] : 0.0;
    ratio[static_cast<std::size_t>(n) - 1] = dn == 0.0 ? 0.0 : (dn - dp) / dn;
  }
  for (int n = 3; n <= top; ++n)
    if (ratio[static_cast<std::size_t>(n) - 1] <= epsilon) {
      chosen = n;
      break;
    }
  if (info) {
    info->cap_used = top;
    info->delta = f.delta;
    info->ratio = ratio;
  }
  return fit_correction(moments, basis, build_ortho_basis(basis, chosen));
}

inline MutualInfoApprox select_degree(const MomentEngine& engine, const GammaBasis& basis, int cap = kDegreeCap,
                                      double epsilon = 0.01, DegreeSelection* info = nullptr) {
  return select_degree(engine.moments(), basis, cap, epsilon, info);
}

/// Moments -> Gamma match -> degree selection, the whole pipeline for one K.
inline MutualInfoApprox fit_mutual_info(const MomentEngine& engine, int cap = kDegreeCap, double epsilon = 0.01,
                                        DegreeSelection* info = nullptr) {
  return select_degree(engine, gamma_match(engine, 2 * kDegreeCap + 1), cap, epsilon, info);
}

}  // namespace harq
