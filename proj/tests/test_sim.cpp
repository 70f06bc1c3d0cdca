#include "lmdiv/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

namespace lmdiv {
namespace {

TEST(Summarize, Examples) {
  const auto a = summarize({1, 2, 3});
  EXPECT_EQ(a.mean, 2.0);
  EXPECT_EQ(a.median, 2.0);
  EXPECT_EQ(a.std, 1.0);
  EXPECT_FALSE(a.degenerate);
  const auto b = summarize({5});
  EXPECT_EQ(b.mean, 5.0);
  EXPECT_EQ(b.median, 5.0);
  EXPECT_EQ(b.std, 0.0);
  EXPECT_TRUE(b.degenerate);
  EXPECT_EQ(summarize({4, 1, 3, 2}).median, 2.0);
  EXPECT_THROW(summarize({}), std::invalid_argument);
}

/// Midpoint rule in t = log x with 10^6 cells.
double riemann_l1(const ParametricFamily& a, const ParametricFamily& b) {
  const int m = 1000000;
  const double t0 = std::log(1e-10), t1 = std::log(1e8);
  const double h = (t1 - t0) / m;
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = std::exp(t0 + (i + 0.5) * h);
    s += std::abs(a.density(x) - b.density(x)) * x;
  }
  return s * h;
}

TEST(L1Distance, MatchesRiemannOracle) {
  const auto a = ParametricFamily::gpd(3, 0.7), b = ParametricFamily::gpd(3.8, 0.55);
  EXPECT_NEAR(l1_density_distance(a, b), riemann_l1(a, b), 1e-4);
  const auto w = ParametricFamily::weibull(3, 0.4);
  EXPECT_NEAR(l1_density_distance(b, w), riemann_l1(b, w), 1e-4);
  const auto c = ParametricFamily::gpd(2, -0.4);
  EXPECT_NEAR(l1_density_distance(a, c), riemann_l1(a, c), 1e-4);
}

TEST(L1Distance, Properties) {
  const auto a = ParametricFamily::gpd(3, 0.7);
  EXPECT_EQ(l1_density_distance(a, a), 0.0);
  const auto b = ParametricFamily::gpd(3.5, 0.2);
  EXPECT_NEAR(l1_density_distance(a, b), l1_density_distance(b, a), 1e-14);
  // disjoint-ish laws approach the total variation bound
  const double far = l1_density_distance(ParametricFamily::gpd(1e-3, -1.0), ParametricFamily::gpd(1e3, -1.0));
  EXPECT_LE(far, 2.0);
  EXPECT_GT(far, 1.99);
  for (double nu : {-0.5, 0.0, 0.3, 0.9}) {
    const double d = l1_density_distance(ParametricFamily::gpd(3, nu), ParametricFamily::weibull(3, 0.4));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(Scenario, PresetsAndOutliers) {
  const auto c2 = scenario_preset(2, 30);
  EXPECT_EQ(c2.outlier_count(), 3u);
  EXPECT_EQ(scenario_preset(2, 100).outlier_count(), 10u);
  EXPECT_EQ(scenario_preset(1).outlier_count(), 0u);
  EXPECT_EQ(scenario_preset(4).family, FamilyKind::weibull);
  EXPECT_THROW(scenario_preset(5), std::invalid_argument);
  std::mt19937_64 rng(1);
  const auto x = draw_scenario_sample(c2, rng);
  EXPECT_EQ(x.n(), 30u);
  EXPECT_EQ(std::count(x.values().begin(), x.values().end(), 300.0), 3);
  auto bad = scenario_preset(1);
  bad.estimators = {"gmm"};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Scenario, ReplicateSeedsDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m : {1ULL, 2ULL}) {
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(replicate_seed(m, i));
  }
  EXPECT_EQ(seen.size(), 2000u);
}

TEST(Scenario, ZeroReplicates) {
  auto c = scenario_preset(1);
  c.replicates = 0;
  const auto s = run_scenario(c);
  EXPECT_TRUE(s.records.empty());
  ASSERT_EQ(s.estimators.size(), 5u);
  EXPECT_FALSE(s.estimators[0].sigma.has_value());
  EXPECT_EQ(s.estimators[0].failures, 0u);
}

TEST(Scenario, DeterministicAcrossThreadCounts) {
  auto c = scenario_preset(2, 30);
  c.replicates = 12;
  c.seed = 42;
  c.threads = 1;
  const auto a = run_scenario(c);
  c.threads = 3;
  const auto b = run_scenario(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].failed, b.records[i].failed);
    if (a.records[i].failed) continue;
    EXPECT_EQ(a.records[i].sigma, b.records[i].sigma);
    EXPECT_EQ(a.records[i].nu, b.records[i].nu);
    EXPECT_EQ(a.records[i].l1, b.records[i].l1);
  }
  for (std::size_t k = 0; k < a.estimators.size(); ++k) {
    if (!a.estimators[k].sigma) continue;
    EXPECT_EQ(a.estimators[k].sigma->mean, b.estimators[k].sigma->mean);
    EXPECT_EQ(a.estimators[k].nu->median, b.estimators[k].nu->median);
    EXPECT_EQ(a.estimators[k].mean_l1, b.estimators[k].mean_l1);
  }
}

TEST(Scenario, SmallRunIsSensible) {
  auto c = scenario_preset(1, 100);
  c.replicates = 40;
  c.seed = 3;
  c.estimators = {"chi2", "lmom", "mle"};
  const auto s = run_scenario(c);
  for (const auto& e : s.estimators) {
    ASSERT_TRUE(e.nu.has_value()) << e.estimator;
    EXPECT_NEAR(e.nu->mean, 0.6, 0.2) << e.estimator;
    EXPECT_GT(*e.mean_l1, 0.0);
    EXPECT_LT(*e.mean_l1, 0.5);
  }
  std::ostringstream os;
  write_replicates_csv(os, s);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("replicate,estimator,sigma,nu,l1,failed,boundary,message\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 40 * 3);
}

TEST(Scenario, DensityCurveGrid) {
  auto c = scenario_preset(4, 30);
  c.replicates = 4;
  c.estimators = {"lmom"};
  const auto s = run_scenario(c);
  const auto curves = density_curves(s, 50);
  ASSERT_EQ(curves.size(), 2u);
  EXPECT_EQ(curves[0].label, "truth");
  const auto truth = c.truth();
  EXPECT_NEAR(curves[0].x.front(), truth.quantile(0.001), 1e-12 * truth.quantile(0.001));
  EXPECT_NEAR(curves[0].x.back(), truth.quantile(0.999), 1e-9 * truth.quantile(0.999));
  EXPECT_EQ(curves[1].x.size(), 50u);
}

}  // namespace
}  // namespace lmdiv
