#pragma once

// Monte-Carlo oracle for the correlated Rayleigh link.
//
// The sample budget is split over a fixed number of lanes; lane i draws from
// mt19937_64 seeded with seed_seq{seed_lo, seed_hi, i}. Per-lane accumulators
// are merged in lane order, so results depend on (seed, samples, lanes) only,
// never on how many threads ran the lanes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "harqir/channel.hpp"
#include "harqir/error.hpp"
#include "harqir/stats.hpp"

namespace harq {

inline constexpr const char* kRngName = "mt19937_64+std::normal_distribution";

struct SimConfig {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 0x5eed;
  std::uint64_t batch = 4096;
  int lanes = 8;
  int jobs = 1;                          // threads; does not change results
  std::uint64_t cdf_cap = 1'000'000;     // retained samples in EmpiricalCdf

  void validate() const {
    detail::require(samples >= 1, "SimConfig: samples must be >= 1");
    detail::require(batch >= 1, "SimConfig: batch must be >= 1");
    detail::require(lanes >= 1 && lanes <= 4096, "SimConfig: lanes must be in [1, 4096]");
    detail::require(jobs >= 1, "SimConfig: jobs must be >= 1");
    detail::require(cdf_cap >= 1, "SimConfig: cdf_cap must be >= 1");
  }
};

struct EmpiricalEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

/// Draws (gamma_1..gamma_M) from the common-component construction.
class SnrSampler {
public:
  explicit SnrSampler(const ChannelSpec& spec) {
    spec.validate();
    for (int k = 0; k < spec.rounds; ++k) {
      const double lam = spec.lambda[k];
      common_.push_back(lam);
      own_.push_back(std::sqrt(1.0 - lam * lam));
      gain_.push_back(spec.sigma[k] * spec.sigma[k] * db_to_linear(spec.snr_db[k]));
    }
  }

  int rounds() const { return static_cast<int>(gain_.size()); }

  template <class Rng>
  void draw(Rng& rng, std::span<double> gamma) {
    const double u0r = normal_(rng);
    const double u0i = normal_(rng);
    for (std::size_t k = 0; k < gain_.size(); ++k) {
      const double re = common_[k] * u0r + own_[k] * normal_(rng);
      const double im = common_[k] * u0i + own_[k] * normal_(rng);
      gamma[k] = gain_[k] * (re * re + im * im);
    }
  }

private:
  std::vector<double> common_, own_, gain_;
  std::normal_distribution<double> normal_;
};

namespace detail {

inline std::mt19937_64 lane_rng(std::uint64_t seed, int lane) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(lane)};
  return std::mt19937_64(seq);
}

inline std::uint64_t lane_samples(const SimConfig& cfg, int lane) {
  const auto l = static_cast<std::uint64_t>(cfg.lanes);
  return cfg.samples / l + (static_cast<std::uint64_t>(lane) < cfg.samples % l ? 1 : 0);
}

template <class Visit>
void run_one_lane(const ChannelSpec& spec, const SimConfig& cfg, int lane, Visit&& visit) {
  auto rng = lane_rng(cfg.seed, lane);
  SnrSampler sampler(spec);
  const std::size_t m = static_cast<std::size_t>(spec.rounds);
  const std::uint64_t n = lane_samples(cfg, lane);
  std::vector<double> buf(static_cast<std::size_t>(std::min<std::uint64_t>(cfg.batch, std::max<std::uint64_t>(n, 1))) * m);
  std::uint64_t index = 0;
  while (index < n) {
    const std::uint64_t chunk = std::min<std::uint64_t>(cfg.batch, n - index);
    for (std::uint64_t j = 0; j < chunk; ++j) sampler.draw(rng, std::span<double>(buf.data() + j * m, m));
    for (std::uint64_t j = 0; j < chunk; ++j)
      visit(index + j, std::span<const double>(buf.data() + j * m, m));
    index += chunk;
  }
}

}  // namespace detail

/// Runs every lane with its own accumulator from `make()`, then folds them in
/// lane order with `Acc::merge`. visit(acc, local_index, gamma).
template <class MakeAcc, class Visit>
auto run_lanes(const ChannelSpec& spec, const SimConfig& cfg, MakeAcc&& make, Visit&& visit) {
  cfg.validate();
  using Acc = decltype(make());
  std::vector<Acc> accs;
  accs.reserve(static_cast<std::size_t>(cfg.lanes));
  for (int l = 0; l < cfg.lanes; ++l) accs.push_back(make());
  auto work = [&](int lane) {
    Acc& acc = accs[static_cast<std::size_t>(lane)];
    detail::run_one_lane(spec, cfg, lane,
                         [&](std::uint64_t i, std::span<const double> g) { visit(acc, i, g); });
  };
  const int threads = std::min(cfg.jobs, cfg.lanes);
  if (threads <= 1) {
    for (int l = 0; l < cfg.lanes; ++l) work(l);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int l = next++; l < cfg.lanes; l = next++) work(l);
      });
    for (auto& th : pool) th.join();
  }
  Acc total = std::move(accs[0]);
  for (std::size_t l = 1; l < accs.size(); ++l) total.merge(accs[l]);
  return total;
}

/// Streams every realization, lane by lane, into f(gamma).
template <class F>
void sample_snr_rounds(const ChannelSpec& spec, const SimConfig& cfg, F&& f) {
  cfg.validate();
  for (int l = 0; l < cfg.lanes; ++l)
    detail::run_one_lane(spec, cfg, l, [&](std::uint64_t, std::span<const double> g) { f(g); });
}

namespace detail {

inline double accumulated_mi(std::span<const double> g, int k) {
  double s = 0.0;
  for (int j = 0; j < k; ++j) s += std::log2(1.0 + g[j]);
  return s;
}

struct CountAcc {
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
  void merge(const CountAcc& o) {
    n += o.n;
    hits += o.hits;
  }
};

struct MomentAcc {
  std::vector<RunningStats> order;
  void merge(const MomentAcc& o) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i].merge(o.order[i]);
  }
};

}  // namespace detail

inline EmpiricalEstimate empirical_outage(const ChannelSpec& spec, double rate, int k, const SimConfig& cfg) {
  detail::require(k >= 1 && k <= spec.rounds, "empirical_outage: K must be in [1, M]");
  detail::require(rate > 0.0, "empirical_outage: rate must be > 0");
  const auto acc = run_lanes(
      spec, cfg, [] { return detail::CountAcc{}; },
      [&](detail::CountAcc& a, std::uint64_t, std::span<const double> g) {
        ++a.n;
        if (detail::accumulated_mi(g, k) < rate) ++a.hits;
      });
  const double p = static_cast<double>(acc.hits) / static_cast<double>(acc.n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(acc.n)), acc.n};
}

/// Sample moments of I_K, orders 0..max_order (order 0 is exactly 1).
inline std::vector<EmpiricalEstimate> empirical_mutual_info_moments(const ChannelSpec& spec, int k, int max_order,
                                                                    const SimConfig& cfg) {
  detail::require(k >= 1 && k <= spec.rounds, "empirical_mutual_info_moments: K must be in [1, M]");
  detail::require(max_order >= 0 && max_order <= 6, "empirical_mutual_info_moments: max_order must be <= 6");
  const auto acc = run_lanes(
      spec, cfg, [&] { return detail::MomentAcc{std::vector<RunningStats>(static_cast<std::size_t>(max_order))}; },
      [&](detail::MomentAcc& a, std::uint64_t, std::span<const double> g) {
        const double x = detail::accumulated_mi(g, k);
        double p = 1.0;
        for (auto& st : a.order) {
          p *= x;
          st.add(p);
        }
      });
  std::vector<EmpiricalEstimate> out;
  out.push_back({1.0, 0.0, cfg.samples});
  for (const auto& st : acc.order) out.push_back({st.mean, st.std_error(), st.count});
  return out;
}

/// Empirical CDF over retained samples. Above `cdf_cap` realizations every
/// stride-th sample of each lane is kept.
class EmpiricalCdf {
public:
  EmpiricalCdf() = default;
  EmpiricalCdf(std::vector<double> samples, std::uint64_t drawn) : x_(std::move(samples)), drawn_(drawn) {
    std::sort(x_.begin(), x_.end());
  }

  double operator()(double v) const {
    if (x_.empty()) return 0.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), v);
    return static_cast<double>(it - x_.begin()) / static_cast<double>(x_.size());
  }

  std::size_t size() const { return x_.size(); }
  std::uint64_t drawn() const { return drawn_; }
  std::span<const double> samples() const { return x_; }

  /// sup |F_n - F| for a continuous F.
  template <class F>
  double ks_distance(F&& cdf) const {
    const double n = static_cast<double>(x_.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double f = cdf(x_[i]);
      d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
  }

private:
  std::vector<double> x_;
  std::uint64_t drawn_ = 0;
};

inline EmpiricalCdf empirical_cdf(const ChannelSpec& spec, int k, const SimConfig& cfg) {
  detail::require(k >= 1 && k <= spec.rounds, "empirical_cdf: K must be in [1, M]");
  cfg.validate();
  const std::uint64_t stride = (cfg.samples + cfg.cdf_cap - 1) / cfg.cdf_cap;
  struct Keep {
    std::vector<double> v;
    void merge(const Keep& o) { v.insert(v.end(), o.v.begin(), o.v.end()); }
  };
  auto acc = run_lanes(
      spec, cfg, [] { return Keep{}; },
      [&](Keep& a, std::uint64_t i, std::span<const double> g) {
        if (i % stride == 0) a.v.push_back(detail::accumulated_mi(g, k));
      });
  return EmpiricalCdf(std::move(acc.v), cfg.samples);
}

/// Fixed-bin streaming CDF for sample sizes where keeping every point is
/// wasteful. Exact at bin edges.
class HistogramCdf {
public:
  HistogramCdf() = default;
  HistogramCdf(double hi, std::size_t bins) : hi_(hi), counts_(bins + 1, 0) {
    detail::require(hi > 0.0 && bins >= 1, "HistogramCdf: need hi > 0 and bins >= 1");
  }

  void add(double x) {
    const std::size_t bins = counts_.size() - 1;
    const double pos = x / hi_ * static_cast<double>(bins);
    const std::size_t j = pos >= static_cast<double>(bins) ? bins : static_cast<std::size_t>(std::max(pos, 0.0));
    ++counts_[j];
    ++total_;
  }

  void merge(const HistogramCdf& o) {
    for (std::size_t j = 0; j < counts_.size(); ++j) counts_[j] += o.counts_[j];
    total_ += o.total_;
  }

  std::uint64_t count() const { return total_; }
  std::size_t bins() const { return counts_.size() - 1; }
  double edge(std::size_t j) const { return hi_ * static_cast<double>(j) / static_cast<double>(bins()); }

  /// F_n at bin edges, linear in between.
  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    const double pos = x / hi_ * static_cast<double>(bins());
    std::uint64_t below = 0;
    const std::size_t j = static_cast<std::size_t>(std::min(pos, static_cast<double>(bins())));
    for (std::size_t i = 0; i < j; ++i) below += counts_[i];
    double f = static_cast<double>(below);
    if (j < bins()) f += (pos - static_cast<double>(j)) * static_cast<double>(counts_[j]);
    return f / static_cast<double>(total_);
  }

  struct Ks {
    double distance = 0.0;     // max over bin edges
    double upper_bound = 0.0;  // allows for the unknown placement inside each bin
  };

  template <class F>
  Ks ks_distance(F&& cdf) const {
    Ks ks;
    const double n = static_cast<double>(total_);
    double fn_prev = 0.0;
    double f_prev = cdf(0.0);
    std::uint64_t cum = 0;
    for (std::size_t j = 0; j < bins(); ++j) {
      cum += counts_[j];
      const double fn = static_cast<double>(cum) / n;
      const double f = cdf(edge(j + 1));
      ks.distance = std::max(ks.distance, std::abs(fn - f));
      ks.upper_bound = std::max({ks.upper_bound, fn - f_prev, f - fn_prev});
      fn_prev = fn;
      f_prev = f;
    }
    ks.upper_bound = std::max({ks.upper_bound, ks.distance, 1.0 - f_prev});
    return ks;
  }

private:
  double hi_ = 1.0;
  std::vector<std::uint64_t> counts_{0, 0};
  std::uint64_t total_ = 0;
};

/// Everything the oracle checks need about I_1..I_M from a single pass.
struct MutualInfoScan {
  std::vector<HistogramCdf> cdf;                     // per K
  std::vector<std::vector<RunningStats>> moments;    // per K, orders 1..max_order

  void merge(const MutualInfoScan& o) {
    for (std::size_t k = 0; k < cdf.size(); ++k) {
      cdf[k].merge(o.cdf[k]);
      for (std::size_t i = 0; i < moments[k].size(); ++i) moments[k][i].merge(o.moments[k][i]);
    }
  }

  EmpiricalEstimate moment(int k, int order) const {
    if (order == 0) return {1.0, 0.0, cdf[static_cast<std::size_t>(k - 1)].count()};
    const auto& st = moments[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(order - 1)];
    return {st.mean, st.std_error(), st.count};
  }
};

inline MutualInfoScan scan_mutual_info(const ChannelSpec& spec, const SimConfig& cfg, int max_order = 4,
                                       std::size_t bins = 1 << 16) {
  detail::require(max_order >= 0 && max_order <= 6, "scan_mutual_info: max_order must be <= 6");
  std::vector<double> hi(static_cast<std::size_t>(spec.rounds));
  double acc = 0.0;
  for (int k = 0; k < spec.rounds; ++k) {
    // P(gamma > 60 mean) = e^{-60}: nothing lands in the overflow bin in practice.
    acc += std::log2(1.0 + 60.0 * spec.mean_snr(k));
    hi[static_cast<std::size_t>(k)] = acc;
  }
  auto make = [&] {
    MutualInfoScan s;
    for (int k = 0; k < spec.rounds; ++k) {
      s.cdf.emplace_back(hi[static_cast<std::size_t>(k)], bins);
      s.moments.emplace_back(static_cast<std::size_t>(max_order));
    }
    return s;
  };
  return run_lanes(spec, cfg, make, [&](MutualInfoScan& s, std::uint64_t, std::span<const double> g) {
    double x = 0.0;
    for (int k = 0; k < spec.rounds; ++k) {
      x += std::log2(1.0 + g[static_cast<std::size_t>(k)]);
      s.cdf[static_cast<std::size_t>(k)].add(x);
      double p = 1.0;
      for (auto& st : s.moments[static_cast<std::size_t>(k)]) {
        p *= x;
        st.add(p);
      }
    }
  });
}

struct HarqRunEstimate {
  EmpiricalEstimate avg_transmissions;
  EmpiricalEstimate ltat;
  EmpiricalEstimate outage;  // P(I_M < rate)
};

/// One message per realization: stop at the first K with I_K >= rate, or at M.
/// The throughput is the renewal-reward ratio (delivered bits)/(rounds used).
inline HarqRunEstimate empirical_harq_run(const ChannelSpec& spec, double rate, const SimConfig& cfg) {
  detail::require(rate > 0.0, "empirical_harq_run: rate must be > 0");
  struct Acc {
    // Integer sums: exact and associative.
    std::uint64_t n = 0, ok = 0, rounds = 0, rounds_sq = 0, ok_rounds = 0;
    void merge(const Acc& o) {
      n += o.n;
      ok += o.ok;
      rounds += o.rounds;
      rounds_sq += o.rounds_sq;
      ok_rounds += o.ok_rounds;
    }
  };
  const int m = spec.rounds;
  const auto acc = run_lanes(
      spec, cfg, [] { return Acc{}; },
      [&](Acc& a, std::uint64_t, std::span<const double> g) {
        double x = 0.0;
        int used = m;
        bool decoded = false;
        for (int k = 0; k < m; ++k) {
          x += std::log2(1.0 + g[static_cast<std::size_t>(k)]);
          if (x >= rate) {
            used = k + 1;
            decoded = true;
            break;
          }
        }
        const auto u = static_cast<std::uint64_t>(used);
        ++a.n;
        a.rounds += u;
        a.rounds_sq += u * u;
        if (decoded) {
          ++a.ok;
          a.ok_rounds += u;
        }
      });
  const double n = static_cast<double>(acc.n);
  const double mean_n = static_cast<double>(acc.rounds) / n;
  const double var_n = static_cast<double>(acc.rounds_sq) / n - mean_n * mean_n;
  const double p_ok = static_cast<double>(acc.ok) / n;
  HarqRunEstimate out;
  out.avg_transmissions = {mean_n, std::sqrt(std::max(var_n, 0.0) / n), acc.n};
  out.outage = {1.0 - p_ok, std::sqrt(p_ok * (1.0 - p_ok) / n), acc.n};
  // Delta method for the ratio of means: residual e_i = rate*s_i - L*n_i.
  const double ltat = rate * static_cast<double>(acc.ok) / static_cast<double>(acc.rounds);
  const double e2 = (rate * rate * static_cast<double>(acc.ok) - 2.0 * rate * ltat * static_cast<double>(acc.ok_rounds) +
                     ltat * ltat * static_cast<double>(acc.rounds_sq)) / n;
  out.ltat = {ltat, std::sqrt(std::max(e2, 0.0) / n) / mean_n, acc.n};
  return out;
}

/// Checks that the sampler reproduces the model: Rayleigh marginals (KS),
/// pairwise power correlation lambda_k^2 lambda_l^2, and, for M >= 2, a
/// 2-D histogram of (gamma_1, gamma_2) against joint_snr_pdf.
struct SamplerValidation {
  struct Marginal {
    int round = 0;
    double ks = 0.0;
    double pvalue = 0.0;
  };
  struct Pair {
    int k = 0, l = 0;
    double expected = 0.0, estimate = 0.0, std_error = 0.0;
  };
  std::vector<Marginal> marginals;
  std::vector<Pair> pairs;
  double chi2 = std::numeric_limits<double>::quiet_NaN();
  int chi2_dof = 0;
  double chi2_pvalue = std::numeric_limits<double>::quiet_NaN();

  bool marginals_ok(double alpha = 0.01) const {
    return std::all_of(marginals.begin(), marginals.end(), [&](const Marginal& m) { return m.pvalue > alpha; });
  }
  bool pairs_ok(double z = 3.0) const {
    return std::all_of(pairs.begin(), pairs.end(), [&](const Pair& p) {
      return std::abs(p.estimate - p.expected) <= z * p.std_error;
    });
  }
  bool joint_ok(double alpha = 0.001) const { return chi2_dof == 0 || chi2_pvalue > alpha; }
  bool passed() const { return marginals_ok() && pairs_ok() && joint_ok(); }
};

inline SamplerValidation validate_sampler(const ChannelSpec& spec, const SimConfig& cfg) {
  cfg.validate();
  detail::require(cfg.samples >= 1000 && cfg.samples <= 20'000'000,
                  "validate_sampler: samples must be in [1e3, 2e7]");
  const auto m = static_cast<std::size_t>(spec.rounds);
  const std::size_t n = static_cast<std::size_t>(cfg.samples);
  std::vector<double> g;
  g.reserve(n * m);
  sample_snr_rounds(spec, cfg, [&](std::span<const double> x) { g.insert(g.end(), x.begin(), x.end()); });

  SamplerValidation out;
  std::vector<double> col(n);
  for (std::size_t k = 0; k < m; ++k) {
    const double snr = db_to_linear(spec.snr_db[k]);
    const double s2 = spec.sigma[k] * spec.sigma[k];
    for (std::size_t i = 0; i < n; ++i) col[i] = std::sqrt(g[i * m + k] / snr);
    std::sort(col.begin(), col.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = -std::expm1(-col[i] * col[i] / (2.0 * s2));
      d = std::max({d, double(i + 1) / double(n) - f, f - double(i) / double(n)});
    }
    out.marginals.push_back({static_cast<int>(k) + 1, d, ks_pvalue(d, n)});
  }

  // Pearson correlation of power gains; SE from the spread over 100 blocks.
  auto pearson = [&](std::size_t k, std::size_t l, std::size_t b, std::size_t e) {
    RunningStats sk, sl;
    for (std::size_t i = b; i < e; ++i) {
      sk.add(g[i * m + k]);
      sl.add(g[i * m + l]);
    }
    double cov = 0.0;
    for (std::size_t i = b; i < e; ++i) cov += (g[i * m + k] - sk.mean) * (g[i * m + l] - sl.mean);
    cov /= static_cast<double>(e - b - 1);
    return cov / std::sqrt(sk.variance() * sl.variance());
  };
  constexpr std::size_t blocks = 100;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = k + 1; l < m; ++l) {
      RunningStats bs;
      for (std::size_t b = 0; b < blocks; ++b) bs.add(pearson(k, l, b * n / blocks, (b + 1) * n / blocks));
      out.pairs.push_back({static_cast<int>(k) + 1, static_cast<int>(l) + 1,
                           correlation_coefficient(spec, static_cast<int>(k) + 1, static_cast<int>(l) + 1),
                           pearson(k, l, 0, n), bs.std_error()});
    }

  if (m >= 2) {
    // Equal-probability marginal bins up to the 0.9 quantile, one more bin to
    // the 0.999 quantile, and a single catch-all cell for the rest.
    const auto two = spec.prefix(2);
    const auto scale = effective_scale(two);
    const auto quad = gauss_laguerre(128);
    const auto gl = gauss_legendre(8);
    std::vector<std::vector<double>> edges(2);
    for (int k = 0; k < 2; ++k) {
      const double mean = scale.sigma_prime_sq[static_cast<std::size_t>(k)];
      for (int j = 0; j < 10; ++j) edges[k].push_back(-mean * std::log1p(-j / 10.0));
      edges[k].push_back(-mean * std::log(1e-3));
    }
    constexpr int nb = 10;
    std::vector<std::uint64_t> observed(nb * nb + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x1 = g[i * m], x2 = g[i * m + 1];
      if (x1 >= edges[0].back() || x2 >= edges[1].back()) {
        ++observed[nb * nb];
        continue;
      }
      const auto b1 = std::upper_bound(edges[0].begin(), edges[0].end(), x1) - edges[0].begin() - 1;
      const auto b2 = std::upper_bound(edges[1].begin(), edges[1].end(), x2) - edges[1].begin() - 1;
      ++observed[static_cast<std::size_t>(b1 * nb + b2)];
    }
    double chi2 = 0.0;
    double covered = 0.0;
    for (int a = 0; a < nb; ++a)
      for (int b = 0; b < nb; ++b) {
        const double lo1 = edges[0][a], hi1 = edges[0][a + 1];
        const double lo2 = edges[1][b], hi2 = edges[1][b + 1];
        double p = 0.0;
        for (int i = 0; i < gl.order; ++i)
          for (int j = 0; j < gl.order; ++j) {
            const double xy[2] = {0.5 * (lo1 + hi1) + 0.5 * (hi1 - lo1) * gl.nodes[i],
                                  0.5 * (lo2 + hi2) + 0.5 * (hi2 - lo2) * gl.nodes[j]};
            p += gl.weights[i] * gl.weights[j] * joint_snr_pdf(scale, xy, quad);
          }
        p *= 0.25 * (hi1 - lo1) * (hi2 - lo2);
        covered += p;
        const double e = p * static_cast<double>(n);
        const double o = static_cast<double>(observed[static_cast<std::size_t>(a * nb + b)]);
        chi2 += (o - e) * (o - e) / e;
      }
    const double e_rest = std::max(1.0 - covered, 0.0) * static_cast<double>(n);
    const double o_rest = static_cast<double>(observed[nb * nb]);
    if (e_rest > 0.0) chi2 += (o_rest - e_rest) * (o_rest - e_rest) / e_rest;
    out.chi2 = chi2;
    out.chi2_dof = nb * nb;
    out.chi2_pvalue = chi_square_pvalue(chi2, out.chi2_dof);
  }
  return out;
}

}  // namespace harq
