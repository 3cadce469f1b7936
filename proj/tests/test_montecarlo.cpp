#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <vector>

#include "harqir/montecarlo.hpp"
#include "harqir/stats.hpp"

using namespace harq;

namespace {

SimConfig cfg(std::uint64_t samples, std::uint64_t seed = 0x5eed) {
  SimConfig c;
  c.samples = samples;
  c.seed = seed;
  return c;
}

// Pearson correlation of gamma_1 and gamma_2 with a batch-means standard error.
struct PairCorr {
  double rho = 0.0, se = 0.0;
};

PairCorr pair_correlation(const ChannelSpec& spec, const SimConfig& c) {
  constexpr int blocks = 100;
  std::vector<std::vector<double>> a(blocks), b(blocks);
  std::uint64_t i = 0;
  const std::uint64_t per = c.samples / blocks + 1;
  sample_snr_rounds(spec, c, [&](std::span<const double> g) {
    a[i / per].push_back(g[0]);
    b[i / per].push_back(g[1]);
    ++i;
  });
  auto corr = [](const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t j = 0; j < x.size(); ++j) mx += x[j], my += y[j];
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      sxy += (x[j] - mx) * (y[j] - my);
      sxx += (x[j] - mx) * (x[j] - mx);
      syy += (y[j] - my) * (y[j] - my);
    }
    return sxy / std::sqrt(sxx * syy);
  };
  RunningStats st;
  std::vector<double> all_a, all_b;
  for (int k = 0; k < blocks; ++k) {
    if (a[k].empty()) continue;
    st.add(corr(a[k], b[k]));
    all_a.insert(all_a.end(), a[k].begin(), a[k].end());
    all_b.insert(all_b.end(), b[k].begin(), b[k].end());
  }
  return {corr(all_a, all_b), st.std_error()};
}

}  // namespace

TEST(SimConfig, Validation) {
  SimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.samples = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = SimConfig{};
  c.lanes = 0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Sampler, IndependentRoundsAreUncorrelated) {
  const ChannelSpec s({std::sqrt(0.5), std::sqrt(0.5)}, {0.0, 0.0}, {0.0, 0.0});
  const auto r = pair_correlation(s, cfg(1'000'000));
  EXPECT_LE(std::abs(r.rho), 3 * r.se);
}

TEST(Sampler, HalfCorrelationReproduced) {
  const auto s = ChannelSpec::homogeneous(0.5, 0.0, 2);
  const auto r = pair_correlation(s, cfg(1'000'000));
  EXPECT_LE(std::abs(r.rho - 0.5), 3 * r.se) << r.rho << " +- " << r.se;
}

TEST(Sampler, MeanSnrPerRound) {
  const ChannelSpec s({0.6, 1.3, 0.9}, {0.4, 0.7, 0.2}, {1.0, -3.0, 6.0});
  std::vector<RunningStats> st(3);
  sample_snr_rounds(s, cfg(1'000'000), [&](std::span<const double> g) {
    for (int k = 0; k < 3; ++k) st[k].add(g[k]);
  });
  for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(st[k].mean - s.mean_snr(k)), 3 * st[k].std_error()) << k;
}

TEST(Sampler, ValidationTripleAtOneMillion) {
  for (double rho : {0.0, 0.5, 0.9}) {
    const auto v = validate_sampler(ChannelSpec::homogeneous(rho, 5.0, 3), cfg(1'000'000));
    EXPECT_TRUE(v.marginals_ok()) << rho;
    EXPECT_TRUE(v.pairs_ok()) << rho;
    EXPECT_TRUE(v.joint_ok()) << rho << " chi2 p=" << v.chi2_pvalue;
    EXPECT_EQ(v.chi2_dof, 100);
  }
}

TEST(Sampler, ValidationDetectsWrongCorrelation) {
  // Samples drawn at rho = 0.5 checked against a spec that claims rho = 0.3.
  auto truth = ChannelSpec::homogeneous(0.5, 0.0, 2);
  const auto r = pair_correlation(truth, cfg(1'000'000));
  EXPECT_GT(std::abs(r.rho - 0.3), 10 * r.se);
}

TEST(EmpiricalOutage, ZeroRateAndSingleRoundClosedForm) {
  const auto s = ChannelSpec::homogeneous(0.0, 0.0, 1);
  EXPECT_EQ(empirical_outage(s, 1e-12, 1, cfg(100'000)).value, 0.0);
  const auto e = empirical_outage(s, 2.0, 1, cfg(1'000'000));
  EXPECT_LE(std::abs(e.value - (1 - std::exp(-3.0))), 3 * e.std_error);
  EXPECT_GT(e.std_error, 0.0);
}

TEST(EmpiricalMoments, SingleRoundMeanAgainstQuadrature) {
  boost::math::quadrature::exp_sinh<double> es;
  const double ref = es.integrate([](double x) { return std::exp(-x) * std::log2(1 + x); });
  EXPECT_NEAR(ref, 0.860347382270886, 1e-12);
  const auto m = empirical_mutual_info_moments(ChannelSpec::homogeneous(0.0, 0.0, 1), 1, 2, cfg(1'000'000));
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].value, 1.0);
  EXPECT_LE(std::abs(m[1].value - ref), 3 * m[1].std_error);
  for (const auto& e : m) EXPECT_GE(e.std_error, 0.0);
  EXPECT_THROW(empirical_mutual_info_moments(ChannelSpec::homogeneous(0.0, 0.0, 1), 1, 7, cfg(10)), ParameterError);
}

TEST(EmpiricalCdfTest, LimitsAndMonotone) {
  const auto c = empirical_cdf(ChannelSpec::homogeneous(0.5, 5.0, 2), 2, cfg(50'000));
  const auto x = c.samples();
  EXPECT_EQ(c(x.front() - 1e-9), 0.0);
  EXPECT_EQ(c(x.back()), 1.0);
  double prev = 0.0;
  for (double v = 0.0; v < 12.0; v += 0.01) {
    EXPECT_GE(c(v), prev);
    prev = c(v);
  }
}

TEST(EmpiricalCdfTest, ThinnedAboveCap) {
  SimConfig c = cfg(200'000);
  c.cdf_cap = 50'000;
  const auto e = empirical_cdf(ChannelSpec::homogeneous(0.0, 5.0, 2), 2, c);
  EXPECT_EQ(e.drawn(), 200'000u);
  EXPECT_LE(e.size(), 50'000u + static_cast<std::size_t>(c.lanes));
}

TEST(EmpiricalCdfTest, TwoSeedsAgree) {
  const auto s = ChannelSpec::homogeneous(0.0, 5.0, 2);
  const auto a = empirical_cdf(s, 2, cfg(1'000'000, 1));
  const auto b = empirical_cdf(s, 2, cfg(1'000'000, 2));
  // Two-sample KS: reject at alpha = 0.001 above 1.95 sqrt(2/n).
  const double d = a.ks_distance([&](double x) { return b(x); });
  EXPECT_LE(d, 1.95 * std::sqrt(2.0 / 1e6));
}

TEST(HistogramCdfTest, ExactAtBinEdges) {
  const auto s = ChannelSpec::homogeneous(0.3, 5.0, 2);
  const auto scan = scan_mutual_info(s, cfg(100'000), 2, 4096);
  SimConfig keep = cfg(100'000);
  keep.cdf_cap = 100'000;
  const auto exact = empirical_cdf(s, 2, keep);
  const auto& h = scan.cdf[1];
  for (std::size_t j = 0; j <= h.bins(); j += 97) EXPECT_DOUBLE_EQ(h(h.edge(j)), exact(h.edge(j))) << j;
  // Scan moments agree with the dedicated estimator bit for bit.
  const auto m = empirical_mutual_info_moments(s, 2, 2, cfg(100'000));
  EXPECT_DOUBLE_EQ(scan.moment(2, 1).value, m[1].value);
}

TEST(HarqRun, LowRateAndSingleRound) {
  const auto s = ChannelSpec::homogeneous(0.5, 5.0, 4);
  const auto r = empirical_harq_run(s, 1e-9, cfg(100'000));
  EXPECT_EQ(r.avg_transmissions.value, 1.0);
  EXPECT_NEAR(r.ltat.value, 1e-9, 1e-15);
  const auto one = empirical_harq_run(ChannelSpec::homogeneous(0.5, 5.0, 1), 2.0, cfg(100'000));
  EXPECT_EQ(one.avg_transmissions.value, 1.0);
  EXPECT_EQ(one.avg_transmissions.std_error, 0.0);
}

TEST(HarqRun, RenewalRewardMatchesRatioOfEstimates) {
  const auto s = ChannelSpec::homogeneous(0.5, 3.0, 4);
  const double rate = 2.0;
  const auto r = empirical_harq_run(s, rate, cfg(1'000'000));
  const double ratio = rate * (1 - r.outage.value) / r.avg_transmissions.value;
  EXPECT_LE(std::abs(r.ltat.value - ratio), 3 * r.ltat.std_error);
  // Outage after M from the run equals the dedicated estimator on the same stream.
  const auto p = empirical_outage(s, rate, 4, cfg(1'000'000));
  EXPECT_DOUBLE_EQ(p.value, r.outage.value);
}

TEST(HarqRun, IndependentChannelThroughputNearPublishedValue) {
  const auto r = empirical_harq_run(ChannelSpec::homogeneous(0.0, 7.0, 4), 2.0, cfg(1'000'000));
  EXPECT_NEAR(r.ltat.value, 1.30, 0.05 * 1.30);
}

TEST(Reproducibility, SameSeedSameBits) {
  const auto s = ChannelSpec::homogeneous(0.5, 5.0, 3);
  const auto a = empirical_mutual_info_moments(s, 3, 4, cfg(200'000, 42));
  const auto b = empirical_mutual_info_moments(s, 3, 4, cfg(200'000, 42));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value, b[i].value);
    EXPECT_EQ(a[i].std_error, b[i].std_error);
  }
  const auto c = empirical_mutual_info_moments(s, 3, 4, cfg(200'000, 43));
  EXPECT_NE(a[1].value, c[1].value);
}

TEST(Reproducibility, ThreadCountDoesNotChangeResults) {
  const auto s = ChannelSpec::homogeneous(0.5, 5.0, 3);
  SimConfig one = cfg(300'001, 9);
  SimConfig many = one;
  many.jobs = 4;
  const auto a = empirical_harq_run(s, 2.0, one);
  const auto b = empirical_harq_run(s, 2.0, many);
  EXPECT_EQ(a.ltat.value, b.ltat.value);
  EXPECT_EQ(a.avg_transmissions.value, b.avg_transmissions.value);
  const auto ma = empirical_mutual_info_moments(s, 2, 3, one);
  const auto mb = empirical_mutual_info_moments(s, 2, 3, many);
  for (std::size_t i = 0; i < ma.size(); ++i) EXPECT_EQ(ma[i].value, mb[i].value);
}

TEST(Stats, RunningStatsMergeMatchesSinglePass) {
  RunningStats all, a, b;
  for (int i = 0; i < 1000; ++i) {
    const double x = std::sin(i * 0.7) * 3 + i * 1e-3;
    all.add(x);
    (i < 400 ? a : b).add(x);
  }
  a.merge(b);
  EXPECT_EQ(a.count, all.count);
  EXPECT_NEAR(a.mean, all.mean, 1e-13);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-12);
}

TEST(Stats, PValues) {
  EXPECT_NEAR(kolmogorov_survival(1.3581), 0.05, 1e-3);
  EXPECT_NEAR(chi_square_pvalue(3.841, 1), 0.05, 1e-3);
  EXPECT_NEAR(chi_square_pvalue(124.342, 100), 0.05, 1e-3);
}
