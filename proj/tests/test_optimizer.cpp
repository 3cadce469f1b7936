#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "harqir/optimizer.hpp"

using namespace harq;

namespace {

RateDesignProblem problem(double eps) {
  RateDesignProblem p;
  p.epsilon = eps;
  return p;
}

}  // namespace

TEST(OutageVsRate, LimitsAndMonotone) {
  const auto link = LinkAnalyzer::homogeneous(0.5, 10.0, 4);
  EXPECT_EQ(outage_vs_rate(link, 0.0), 0.0);
  EXPECT_LT(outage_vs_rate(link, 1e-3), 1e-6);
  EXPECT_NEAR(outage_vs_rate(link, 60.0), 1.0, 1e-9);
  double prev = 0.0;
  for (double r = 0.01; r <= 20.0; r += 0.01) {
    const double p = outage_vs_rate(link, r);
    EXPECT_GE(p, prev) << r;
    prev = p;
  }
}

TEST(Boundary, InactiveConstraintReturnsUpperEnd) {
  const auto link = LinkAnalyzer::homogeneous(0.5, 10.0, 4);
  RateDesignProblem p = problem(0.5);
  p.rate_max = 3.0;
  EXPECT_EQ(feasible_rate_boundary(p, link), 3.0);
}

TEST(Boundary, BisectionBracketsTheConstraint) {
  for (double rho : {0.0, 0.5, 0.9})
    for (double eps : {0.01, 0.05, 0.1}) {
      const auto link = LinkAnalyzer::homogeneous(rho, 8.0, 3);
      const auto p = problem(eps);
      const double b = feasible_rate_boundary(p, link);
      EXPECT_LE(outage_vs_rate(link, b), eps);
      EXPECT_GT(outage_vs_rate(link, b + p.tolerance), eps);
    }
}

TEST(Boundary, BoundaryAtTenDb) {
  const auto link = LinkAnalyzer::homogeneous(0.5, 10.0, 4);
  EXPECT_NEAR(feasible_rate_boundary(problem(0.01), link), 3.87, 0.05 * 3.87);
  EXPECT_NEAR(feasible_rate_boundary(problem(0.1), link), 6.57, 0.05 * 6.57);
}

TEST(Boundary, MonotoneInTargetSnrAndCorrelation) {
  double prev = 0.0;
  const auto link = LinkAnalyzer::homogeneous(0.5, 6.0, 4);
  for (double eps : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}) {
    const double b = feasible_rate_boundary(problem(eps), link);
    EXPECT_GE(b, prev) << eps;
    prev = b;
  }
  prev = 0.0;
  for (double db = 0.0; db <= 10.0; db += 1.0) {
    const double b = feasible_rate_boundary(problem(0.01), LinkAnalyzer::homogeneous(0.5, db, 4));
    EXPECT_GE(b, prev) << db;
    prev = b;
  }
  prev = 1e9;
  for (double rho : {0.0, 0.3, 0.6, 0.9, 1.0}) {
    const double b = feasible_rate_boundary(problem(0.01), LinkAnalyzer::homogeneous(rho, 6.0, 4));
    EXPECT_LE(b, prev) << rho;
    prev = b;
  }
}

TEST(Boundary, InfeasibleReportsMinimalOutage) {
  const auto link = LinkAnalyzer::homogeneous(0.5, 0.0, 1);
  RateDesignProblem p = problem(1e-6);
  p.rate_min = 1.0;
  try {
    feasible_rate_boundary(p, link);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::infeasible);
    EXPECT_NEAR(e.min_outage(), 1.0 - std::exp(-1.0), 1e-12);
  }
  EXPECT_THROW(optimize_rate(p, link), InfeasibleError);
}

TEST(Problem, Validation) {
  const auto link = LinkAnalyzer::homogeneous(0.5, 0.0, 1);
  EXPECT_THROW(feasible_rate_boundary(problem(0.0), link), ParameterError);
  RateDesignProblem p;
  p.rate_min = 0.0;
  EXPECT_THROW(feasible_rate_boundary(p, link), ParameterError);
  p.rate_min = 2.0;
  p.rate_max = 1.0;
  EXPECT_THROW(feasible_rate_boundary(p, link), ParameterError);
}

TEST(Optimize, SingleRoundMatchesBruteForce) {
  // eps = 1: R e^{-(2^R - 1)} at 2 sigma'^2 = 1.
  const auto link = LinkAnalyzer::homogeneous(0.0, 0.0, 1);
  const auto s = optimize_rate(problem(1.0), link);
  double best_r = 0.0, best_v = -1.0;
  for (int i = 1; i <= 200000; ++i) {
    const double r = 1e-4 * i;
    const double v = r * std::exp(-std::expm1(r * std::numbers::ln2));
    if (v > best_v) {
      best_v = v;
      best_r = r;
    }
  }
  EXPECT_NEAR(s.rate_opt, best_r, 1e-3);
  // Rate resolution 1e-3: the value can only be off at second order.
  EXPECT_NEAR(s.ltat_opt, best_v, 1e-6);
  EXPECT_LE(s.ltat_opt, best_v + 1e-12);
}

TEST(Optimize, BeatsRandomFeasibleRates) {
  for (double rho : {0.0, 0.5, 0.9}) {
    const auto link = LinkAnalyzer::homogeneous(rho, 5.0, 4);
    const auto p = problem(0.05);
    const auto s = optimize_rate(p, link);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(p.rate_min, s.feasible_boundary);
    for (int t = 0; t < 200; ++t) EXPECT_GE(s.ltat_opt, link.metrics(u(rng)).ltat - 1e-12);
  }
}

TEST(Optimize, ConstraintNeverViolated) {
  for (double rho : {0.0, 0.5, 0.9, 1.0})
    for (double db : {0.0, 5.0, 10.0})
      for (double eps : {0.01, 0.1}) {
        const auto s = optimize_rate(problem(eps), LinkAnalyzer::homogeneous(rho, db, 4));
        EXPECT_LE(s.outage_at_opt, eps);
        EXPECT_LE(s.rate_opt, s.feasible_boundary);
        EXPECT_GT(s.ltat_opt, 0.0);
      }
}

TEST(Optimize, RateGainFromZeroToTenDb) {
  const auto lo = optimize_rate(problem(0.01), LinkAnalyzer::homogeneous(0.5, 0.0, 4));
  const auto hi = optimize_rate(problem(0.01), LinkAnalyzer::homogeneous(0.5, 10.0, 4));
  EXPECT_NEAR(hi.rate_opt - lo.rate_opt, 3.2, 0.3);
}

TEST(Optimize, BeatsConstantRateBaseline) {
  const double base = optimize_rate(problem(0.01), LinkAnalyzer::homogeneous(0.5, 0.0, 4)).rate_opt;
  for (double db = 0.0; db <= 10.0; db += 1.0) {
    const auto link = LinkAnalyzer::homogeneous(0.5, db, 4);
    const auto s = optimize_rate(problem(0.01), link);
    const double ltat_base = link.metrics(base).ltat;
    EXPECT_GE(s.ltat_opt, ltat_base - 1e-12) << db;
    if (db == 10.0) EXPECT_GT(s.ltat_opt, ltat_base + 0.1);
  }
}
