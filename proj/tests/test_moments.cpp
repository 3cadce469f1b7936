#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "harqir/moments.hpp"
#include "harqir/montecarlo.hpp"

using namespace harq;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// E[log2(1 + g)^j] for g exponential with the given mean, by adaptive quadrature.
double exp_log_moment(double mean, int j) {
  boost::math::quadrature::exp_sinh<double> es;
  return es.integrate([&](double x) { return std::exp(-x) * std::pow(std::log2(1 + mean * x), j); });
}

}  // namespace

TEST(Compositions, SmallCases) {
  const auto z = compositions(0, 3);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0], (std::vector<int>{0, 0, 0}));
  const auto c = compositions(2, 2);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], (std::vector<int>{2, 0}));
  EXPECT_EQ(c[1], (std::vector<int>{1, 1}));
  EXPECT_EQ(c[2], (std::vector<int>{0, 2}));
}

TEST(Compositions, CountsAndUniqueness) {
  for (int i = 0; i <= 10; ++i)
    for (int k = 1; k <= 8; ++k) {
      const auto c = compositions(i, k);
      EXPECT_EQ(c.size(), static_cast<std::size_t>(boost::math::binomial_coefficient<double>(i + k - 1, k - 1)));
      std::set<std::vector<int>> seen(c.begin(), c.end());
      EXPECT_EQ(seen.size(), c.size());
      for (const auto& t : c) {
        int s = 0;
        for (int v : t) {
          EXPECT_GE(v, 0);
          s += v;
        }
        EXPECT_EQ(s, i);
      }
    }
  // Brute-force nested loops for i = 4, K = 4.
  int n = 0;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c) ++n;
  EXPECT_EQ(n, 35);
  EXPECT_EQ(compositions(4, 4).size(), 35u);
}

TEST(Compositions, Guards) {
  EXPECT_THROW(compositions(11, 2), ParameterError);
  EXPECT_THROW(compositions(2, 9), ParameterError);
  EXPECT_THROW(compositions(-1, 2), ParameterError);
  EXPECT_THROW(compositions(2, 0), ParameterError);
}

TEST(Moments, ZerothIsOne) {
  const MomentEngine e(ChannelSpec::homogeneous(0.5, 5.0, 3), 3);
  EXPECT_EQ(e.moment(0), 1.0);
  EXPECT_EQ(e.moment_direct(0), 1.0);
}

TEST(Moments, SingleIndependentRoundAgainstQuadrature) {
  const MomentEngine e(ChannelSpec::homogeneous(0.0, 0.0, 1), 1);
  EXPECT_NEAR(e.moment(1), 0.860347382270886, 1e-9);
  for (int j = 1; j <= 6; ++j) EXPECT_LE(rel(e.moment(j), exp_log_moment(1.0, j)), 1e-8) << j;
}

// With lambda -> 0 the rounds are independent: M(i) factorizes over the
// multinomial expansion into one-dimensional expectations.
TEST(Moments, IndependenceFactorization) {
  const ChannelSpec s({0.5, 0.8, 1.1}, {0.0, 0.0, 0.0}, {3.0, 0.0, -2.0});
  const MomentEngine e(s, 3);
  std::vector<std::vector<double>> m1d(3);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j <= 4; ++j) m1d[k].push_back(j == 0 ? 1.0 : exp_log_moment(s.mean_snr(k), j));
  for (int i = 1; i <= 4; ++i) {
    double ref = 0.0;
    for (const auto& c : compositions(i, 3)) {
      double t = std::tgamma(i + 1.0);
      for (int k = 0; k < 3; ++k) t *= m1d[k][c[k]] / std::tgamma(c[k] + 1.0);
      ref += t;
    }
    EXPECT_LE(rel(e.moment(i), ref), 1e-6) << i;
  }
}

TEST(Moments, DirectCrossSumAgreesWithFactorizedRoute) {
  // Same inner rule on both routes: keep the Rician fallback out of it.
  MomentConfig cfg;
  cfg.n_q = 16;
  cfg.fallback_fraction = 1e9;
  for (int k : {1, 2, 3}) {
    const MomentEngine e(ChannelSpec::homogeneous(0.5, 3.0, k), k, cfg);
    for (int i = 1; i <= 4; ++i) EXPECT_LE(rel(e.moment_direct(i), e.moment(i)), 1e-10) << k << " " << i;
  }
}

TEST(Moments, NondecreasingInMeanSnr) {
  for (double rho : {0.0, 0.5, 0.9}) {
    const auto base = ChannelSpec::homogeneous(rho, 5.0, 3);
    const MomentEngine e0(base, 3);
    for (int k = 0; k < 3; ++k) {
      auto up = base;
      up.snr_db[k] += 0.5;
      const MomentEngine e1(up, 3);
      for (int i = 1; i <= 4; ++i) EXPECT_GT(e1.moment(i), e0.moment(i)) << rho << " " << k << " " << i;
    }
  }
}

TEST(Moments, JensenStrict) {
  for (double rho : {0.0, 0.3, 0.8})
    for (int k = 1; k <= 4; ++k) {
      const MomentEngine e(ChannelSpec::homogeneous(rho, 5.0, 4), k);
      EXPECT_GT(e.moment(2), e.moment(1) * e.moment(1));
    }
}

TEST(Moments, StableUnderQuadratureRefinement) {
  const auto s = ChannelSpec::homogeneous(0.8, 10.0, 4);
  const MomentEngine a(s, 4);
  MomentConfig fine;
  fine.n_q = 128;
  fine.n_t = 200;
  const MomentEngine b(s, 4, fine);
  for (int i = 1; i <= 10; ++i) EXPECT_LE(rel(a.moment(i), b.moment(i)), 1e-5) << i;
}

TEST(Moments, MatchMonteCarloAtHalfCorrelationFourRounds) {
  const auto s = ChannelSpec::homogeneous(0.5, linear_to_db(5.0), 4);
  const MomentEngine e(s, 4);
  SimConfig c;
  c.samples = 2'000'000;
  const auto mc = empirical_mutual_info_moments(s, 4, 4, c);
  for (int i = 1; i <= 4; ++i) EXPECT_LE(std::abs(e.moment(i) - mc[i].value), 3 * mc[i].std_error) << i;
}

TEST(Moments, EngineGuards) {
  const auto s = ChannelSpec::homogeneous(0.5, 5.0, 2);
  EXPECT_THROW(MomentEngine(s, 3), ParameterError);
  MomentConfig bad;
  bad.n_q = 4;
  EXPECT_THROW(MomentEngine(s, 2, bad), ParameterError);
  const MomentEngine e(s, 2);
  EXPECT_THROW(e.moment(11), ParameterError);
  EXPECT_THROW(e.moment_direct(5), ParameterError);
}

TEST(GammaMatch, SyntheticMoments) {
  const auto g = gamma_match(2.0, 5.0);
  EXPECT_DOUBLE_EQ(g.zeta, 4.0);
  EXPECT_DOUBLE_EQ(g.theta, 0.5);
  EXPECT_THROW(gamma_match(2.0, 4.0), ConditioningError);
  EXPECT_THROW(gamma_match(2.0, 3.0), ConditioningError);
}

TEST(GammaMatch, RoundTripAndMomentSequence) {
  const MomentEngine e(ChannelSpec::homogeneous(0.5, 5.0, 4), 4);
  const auto g = gamma_match(e);
  EXPECT_LE(rel(g.mean(), e.moment(1)), 1e-12);
  EXPECT_LE(rel(g.variance() + g.mean() * g.mean(), e.moment(2)), 1e-12);
  EXPECT_EQ(g.nu[0], 1.0L);
  for (std::size_t n = 0; n + 1 < g.nu.size(); ++n) {
    EXPECT_GT(g.nu[n], 0.0L);
    EXPECT_NEAR(static_cast<double>(g.nu[n + 1] / g.nu[n]), g.theta * (n + g.zeta), 1e-12 * g.theta * (n + g.zeta));
  }
}
