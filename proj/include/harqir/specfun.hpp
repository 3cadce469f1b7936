#pragma once

// Scalar special functions and quadrature rules used by the analytic pipeline.
// Everything here is a pure function of its arguments.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "harqir/error.hpp"

namespace harq {

// Widest floating type available; used where sums cancel badly.
#if defined(__SIZEOF_FLOAT128__) && !defined(HARQIR_NO_FLOAT128)
using wide_real = __float128;
#else
using wide_real = long double;
#endif

/// Gauss rule for a fixed weight function. `log_weights` is kept alongside
/// `weights` because the outermost Laguerre weights underflow double for large
/// orders while their logarithms stay representable.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> log_weights;

  double max_node() const { return nodes.back(); }

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (int q = 0; q < order; ++q) sum += weights[q] * f(nodes[q]);
    return sum;
  }
};

/// Tunable guard constants. The defaults are conservative for double precision.
struct SpecfunLimits {
  // psi2_integral: the integrand peak (sum sqrt a_k)^2 must lie below this
  // fraction of the largest node of the Laguerre rule used.
  double psi2_peak_fraction = 0.4;
  // phi2_series: y * sum(1/delta_k) above this loses too much to cancellation.
  double phi2_max_argument = 30.0;
};

namespace detail {

struct ScaledLaguerre {
  double pn = 1.0;       // L_n(x) * exp(-log_scale)
  double pnm1 = 0.0;     // L_{n-1}(x) * exp(-log_scale)
  double log_scale = 0;  //
  double sum_sq = 0.0;   // sum_{k<n} L_k(x)^2 * exp(-2 log_scale)
};

// Three-term recurrence for the (orthonormal) Laguerre polynomials with
// periodic rescaling so that nodes near 1000 do not overflow.
inline ScaledLaguerre scaled_laguerre(int n, double x) {
  constexpr double big = 1e100;
  constexpr double inv_big = 1e-100;
  const double log_big = 100.0 * std::numbers::ln10;
  ScaledLaguerre r;
  double pm1 = 0.0;
  double p = 1.0;
  for (int k = 0; k < n; ++k) {
    r.sum_sq += p * p;
    const double next = ((2.0 * k + 1.0 - x) * p - k * pm1) / (k + 1.0);
    pm1 = p;
    p = next;
    if (std::abs(p) > big) {
      p *= inv_big;
      pm1 *= inv_big;
      r.sum_sq *= inv_big * inv_big;
      r.log_scale += log_big;
    }
  }
  r.pn = p;
  r.pnm1 = pm1;
  return r;
}

// Power series of 0F1(;1;z) = sum z^k/(k!)^2.
inline double hyp0f1_series(double z) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 1000; ++k) {
    term *= z / (double(k) * double(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Asymptotic series sum_k ((2k-1)!!)^2 / (k! (8x)^k), truncated at its
// smallest term; I0(x) = e^x / sqrt(2 pi x) * this.
inline double i0_asymptotic_sum(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * x);
    if (next > term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

constexpr double kSeriesLimit = 100.0;  // switch point for 0F1(;1;z)

// Neumaier's variant of compensated summation.
template <class T = double>
class CompensatedSum {
public:
  void add(T v) {
    const T t = sum_ + v;
    if ((sum_ < 0 ? -sum_ : sum_) >= (v < 0 ? -v : v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

private:
  T sum_ = 0;
  T comp_ = 0;
};

}  // namespace detail

/// Gauss-Laguerre rule for the weight e^{-x} on [0, inf): exact for
/// polynomials of degree <= 2*order - 1. Nodes come from the Jacobi matrix
/// eigenvalues and are then Newton-polished; weights are Christoffel numbers
/// 1 / sum_k L_k(x_q)^2.
inline QuadratureRule gauss_laguerre(int order) {
  detail::require(order >= 1 && order <= 256,
                  "gauss_laguerre: order must be in [1, 256], got " + std::to_string(order));
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  if (order == 1) {
    rule.nodes[0] = 1.0;
  } else {
    Eigen::VectorXd diag(order);
    Eigen::VectorXd sub(order - 1);
    for (int k = 0; k < order; ++k) diag[k] = 2.0 * k + 1.0;
    for (int k = 1; k < order; ++k) sub[k - 1] = k;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    for (int q = 0; q < order; ++q) rule.nodes[q] = solver.eigenvalues()[q];
  }
  rule.weights.resize(order);
  rule.log_weights.resize(order);
  for (int q = 0; q < order; ++q) {
    double x = rule.nodes[q];
    for (int it = 0; it < 20; ++it) {
      const auto l = detail::scaled_laguerre(order, x);
      const double dx = x * l.pn / (order * (l.pn - l.pnm1));
      x -= dx;
      if (std::abs(dx) <= 4.0 * std::numeric_limits<double>::epsilon() * x) break;
    }
    const auto l = detail::scaled_laguerre(order, x);
    rule.nodes[q] = x;
    rule.log_weights[q] = -(std::log(l.sum_sq) + 2.0 * l.log_scale);
    rule.weights[q] = std::exp(rule.log_weights[q]);
  }
  return rule;
}

/// Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(int order) {
  detail::require(order >= 1 && order <= 1024, "gauss_legendre: order out of range");
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  rule.log_weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) p0 = 1.0;
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // ascending order
    rule.nodes[order - 1 - i] = x;
    rule.weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  for (int i = 0; i < order; ++i) rule.log_weights[i] = std::log(rule.weights[i]);
  return rule;
}

/// 0F1(;1;z) = I0(2 sqrt z). Series below z = 100, Bessel asymptotics above.
inline double hyp0f1_1(double z) {
  if (!(z >= 0.0)) throw ParameterError("hyp0f1_1: argument must be >= 0");
  if (std::isinf(z)) return z;
  if (z <= detail::kSeriesLimit) return detail::hyp0f1_series(z);
  const double x = 2.0 * std::sqrt(z);
  return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * detail::i0_asymptotic_sum(x);
}

/// log 0F1(;1;z), usable far beyond the overflow point of hyp0f1_1.
inline double log_hyp0f1_1(double z) {
  if (!(z >= 0.0)) throw ParameterError("log_hyp0f1_1: argument must be >= 0");
  if (z <= detail::kSeriesLimit) return std::log(detail::hyp0f1_series(z));
  const double x = 2.0 * std::sqrt(z);
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(detail::i0_asymptotic_sum(x));
}

/// e^{-x} I0(x) for x >= 0.
inline double bessel_i0_scaled(double x) {
  if (!(x >= 0.0)) throw ParameterError("bessel_i0_scaled: argument must be >= 0");
  if (x <= 20.0) return std::exp(-x) * detail::hyp0f1_series(0.25 * x * x);
  return detail::i0_asymptotic_sum(x) / std::sqrt(2.0 * std::numbers::pi * x);
}

inline double bessel_j0(double x) {
  if (!std::isfinite(x)) throw ParameterError("bessel_j0: argument must be finite");
  return std::cyl_bessel_j(0.0, std::abs(x));
}

namespace detail {

struct IncompleteGamma {
  double p;
  double q;
};

inline IncompleteGamma incomplete_gamma(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("incomplete gamma: a must be > 0");
  if (!(x >= 0.0)) throw ParameterError("incomplete gamma: x must be >= 0");
  if (x == 0.0) return {0.0, 1.0};
  if (std::isinf(x)) return {1.0, 0.0};
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < 100000; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-17) break;
    }
    const double p = std::min(1.0, sum * std::exp(log_prefix));
    return {p, 1.0 - p};
  }
  // Modified Lentz evaluation of the continued fraction for Q.
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::clamp(std::exp(log_prefix) * h, 0.0, 1.0);
  return {1.0 - q, q};
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double reg_lower_gamma(double a, double x) { return detail::incomplete_gamma(a, x).p; }

/// Q(a, x) = 1 - P(a, x), accurate in the upper tail.
inline double reg_upper_gamma(double a, double x) { return detail::incomplete_gamma(a, x).q; }

/// Psi2^{(K)}(1; 1,...,1; a_1,...,a_K) = int_0^inf e^{-t} prod_k 0F1(;1;a_k t) dt,
/// evaluated with the supplied Laguerre rule in log space.
inline double psi2_integral(std::span<const double> a, const QuadratureRule& rule,
                            const SpecfunLimits& limits = {}) {
  if (a.empty()) throw ParameterError("psi2_integral: need at least one argument");
  double root_sum = 0.0;
  for (double v : a) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParameterError("psi2_integral: arguments must be finite and >= 0");
    root_sum += std::sqrt(v);
  }
  if (root_sum == 0.0) return 1.0;
  const double peak = root_sum * root_sum;
  if (peak > limits.psi2_peak_fraction * rule.max_node())
    throw DomainError("psi2_integral: integrand peak at t = " + std::to_string(peak) +
                      " lies outside the resolved range of the quadrature rule");
  detail::CompensatedSum<> sum;
  for (int q = 0; q < rule.order; ++q) {
    double log_term = rule.log_weights[q];
    for (double v : a) log_term += log_hyp0f1_1(v * rule.nodes[q]);
    sum.add(std::exp(log_term));
  }
  return sum.value();
}

namespace detail {
inline const QuadratureRule& psi2_rule() {
  static const QuadratureRule rule = gauss_laguerre(128);
  return rule;
}
}  // namespace detail

inline double psi2_integral(std::span<const double> a, const SpecfunLimits& limits = {}) {
  return psi2_integral(a, detail::psi2_rule(), limits);
}

/// Phi2^{(M)}(1,...,1; M+1; -y/delta_1, ..., -y/delta_M) by its multiple
/// power series, grouped in shells of equal total degree L. Inside a shell all
/// terms share the sign (-1)^L, so each shell is the complete homogeneous
/// symmetric polynomial h_L(y/delta) / (M+1)_L, built by an O(M) recurrence.
/// Near the guard the shells reach ~1e10 while the sum is ~1e-2, so the
/// recurrence and the sum run in wide_real.
inline double phi2_series(double y, std::span<const double> delta, const SpecfunLimits& limits = {}) {
  if (!(y > 0.0) || !std::isfinite(y)) throw ParameterError("phi2_series: y must be > 0");
  if (delta.empty()) throw ParameterError("phi2_series: need at least one delta");
  const std::size_t m = delta.size();
  std::vector<wide_real> x(m);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (!(delta[k] > 0.0)) throw ParameterError("phi2_series: delta_k must be > 0");
    x[k] = wide_real(y) / wide_real(delta[k]);
    total += y / delta[k];
  }
  if (total > limits.phi2_max_argument)
    throw DomainError("phi2_series: y * sum(1/delta) = " + std::to_string(total) +
                      " exceeds the convergence guard");

  // shell[j] = h_L(x_1..x_j) / (M+1)_L for the current L; shell[0] = 0 for L > 0.
  std::vector<wide_real> shell(m + 1, wide_real(1));
  shell[0] = 0;
  detail::CompensatedSum<wide_real> sum;
  sum.add(1);
  int small_run = 0;
  const auto mp1 = static_cast<double>(m + 1);
  for (int L = 1; L < 5000; ++L) {
    wide_real prev = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      prev = prev + x[j - 1] * shell[j] / wide_real(mp1 + L - 1.0);
      shell[j] = prev;
    }
    const wide_real term = (L % 2 == 0) ? shell[m] : -shell[m];
    sum.add(term);
    small_run = static_cast<double>(shell[m]) < 1e-14 ? small_run + 1 : 0;
    if (L >= 8 && small_run >= 3) break;
  }
  return static_cast<double>(sum.value());
}

}  // namespace harq
