#include "lmdiv/models.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <random>

namespace lmdiv {
namespace {

using Vec = Eigen::VectorXd;

TEST(GpdMap, Examples) {
  const auto l = gpd_lmoment_map(3, 0.7);
  EXPECT_NEAR(l[0], 7.69231, 1e-5);
  EXPECT_NEAR(l[1] / l[0], 0.73913, 1e-5);
  EXPECT_NEAR(l[2] / l[0], 0.60474, 1e-5);
  EXPECT_DOUBLE_EQ(gpd_lmoment_map(4, 0.0)[0], 2.0);
  const auto a = gpd_lmoment_map(1.5, 0.3), b = gpd_lmoment_map(4.5, 0.3);
  for (int r = 0; r < 3; ++r) EXPECT_NEAR(b[r], 3 * a[r], 1e-14);
  EXPECT_THROW(gpd_lmoment_map(1, 1.0), std::domain_error);
}

TEST(GpdMap, MatchesQuadrature) {
  for (double nu : {-2.0, -0.5, 0.0, 0.1, 0.4, 0.7, 0.85}) {
    const auto lam = population_lmoments(ParametricFamily::gpd(3, nu), 4);
    const auto m = gpd_lmoment_map(3, nu);
    for (int r = 2; r <= 4; ++r) EXPECT_NEAR(lam(r), m[r - 2], 1e-6 * (1 + std::abs(m[r - 2]))) << nu;
  }
}

TEST(WeibullMap, Examples) {
  EXPECT_NEAR(weibull_lmoment_map(5, 1.0)[0], 2.5, 1e-14);
  const auto e = weibull_lmoment_map(1, 1.0);
  EXPECT_NEAR(e[1] / e[0], 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(e[2] / e[0], 1.0 / 6.0, 1e-14);
  const auto a = weibull_lmoment_map(1, 0.4), b = weibull_lmoment_map(3, 0.4);
  for (int r = 0; r < 3; ++r) EXPECT_NEAR(b[r], 3 * a[r], 1e-12 * std::abs(b[r]));
  EXPECT_THROW(weibull_lmoment_map(1, 0.0), std::domain_error);
  EXPECT_THROW(weibull_lmoment_map(-1, 1.0), std::domain_error);
}

TEST(WeibullMap, MatchesQuadrature) {
  for (double nu : {0.4, 0.8, 1.0, 2.0, 5.0}) {
    const auto lam = population_lmoments(ParametricFamily::weibull(3, nu), 4);
    const auto m = weibull_lmoment_map(3, nu);
    for (int r = 2; r <= 4; ++r) EXPECT_NEAR(lam(r), m[r - 2], 1e-6 * (1 + std::abs(m[r - 2]))) << nu;
  }
}

TEST(Jacobian, AnalyticMatchesFiniteDifferences) {
  for (const auto& model : {gpd_l234_model(), weibull_l234_model()}) {
    const std::vector<Vec> grid = model.name() == "gpd-l234"
                                      ? std::vector<Vec>{Eigen::Vector2d(3, 0.7), Eigen::Vector2d(1, -0.5),
                                                         Eigen::Vector2d(10, 0.1), Eigen::Vector2d(0.5, 0.0)}
                                      : std::vector<Vec>{Eigen::Vector2d(3, 0.4), Eigen::Vector2d(1, 1.0),
                                                         Eigen::Vector2d(2, 3.0), Eigen::Vector2d(7, 0.2)};
    for (const auto& th : grid) {
      const auto an = model.jacobian(th);
      const auto fd = model.finite_difference_jacobian(th);
      EXPECT_FALSE(fd.one_sided);
      for (Eigen::Index i = 0; i < an.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < an.matrix.cols(); ++j) {
          EXPECT_NEAR(an.matrix(i, j), fd.matrix(i, j), 1e-5 * (1 + std::abs(an.matrix(i, j))))
              << model.name() << " " << th.transpose();
        }
      }
    }
  }
}

TEST(Jacobian, GpdSigmaColumn) {
  const auto j = gpd_lmoment_jacobian(3, 0.7);
  EXPECT_NEAR(j(0, 0), 1.0 / (0.3 * 1.3), 1e-14);
  // map linear in sigma: sigma-column is independent of sigma
  const auto j2 = gpd_lmoment_jacobian(9, 0.7);
  EXPECT_NEAR((j.col(0) - j2.col(0)).norm(), 0.0, 1e-14);
  const auto m = gpd_l234_model();
  EXPECT_NEAR(m.jacobian(Eigen::Vector2d(3, 0.7)).matrix(0, 0), -j(0, 0), 1e-14);
}

TEST(Jacobian, OneSidedAtBoundary) {
  const auto m = gpd_l234_model();
  const auto r = m.finite_difference_jacobian(Eigen::Vector2d(2.0, 0.99));
  EXPECT_TRUE(r.one_sided);
  EXPECT_TRUE(r.matrix.allFinite());
}

TEST(Model, TargetIsNegatedMap) {
  const auto m = gpd_l234_model();
  const Vec th = Eigen::Vector2d(3, 0.2);
  EXPECT_EQ(m.target(th), -m.moment_map(th));
  EXPECT_EQ(m.constraints(), 3u);
  EXPECT_EQ(m.basis().orders(), (std::vector<int>{2, 3, 4}));
}

TEST(Model, ChiSquareVanishesAtSampleLmoments) {
  // For the empirical quantile, int K dF_n^{-1} = m_n = -(l_2, l_3, l_4).
  std::mt19937_64 rng(5);
  const auto x = SortedSample(ParametricFamily::gpd(3, 0.3).sample(200, rng));
  const auto l = sample_lmoments_v(x, 4);
  Vec mn = Vec::Zero(3);
  const auto basis = PolyBasis({2, 3, 4});
  for (std::size_t i = 0; i + 1 < x.n(); ++i) mn += basis((i + 1.0) / x.n()) * x.spacings()[i];
  for (int r = 2; r <= 4; ++r) EXPECT_NEAR(mn[r - 2], -l(r), 1e-12);
}

TEST(Model, StartRules) {
  std::mt19937_64 rng(9);
  const auto g = SortedSample(ParametricFamily::gpd(3, 0.3).sample(5000, rng));
  const auto sg = gpd_l234_model().start(g);
  ASSERT_TRUE(sg.has_value());
  EXPECT_NEAR((*sg)[0], 3.0, 0.3);
  EXPECT_NEAR((*sg)[1], 0.3, 0.06);
  const auto w = SortedSample(ParametricFamily::weibull(2, 1.7).sample(5000, rng));
  const auto sw = weibull_l234_model().start(w);
  ASSERT_TRUE(sw.has_value());
  EXPECT_NEAR((*sw)[0], 2.0, 0.15);
  EXPECT_NEAR((*sw)[1], 1.7, 0.2);
}

TEST(Model, MakeModelByName) {
  EXPECT_EQ(make_model("gpd-l234").name(), "gpd-l234");
  EXPECT_EQ(make_model("weibull-l234").name(), "weibull-l234");
  EXPECT_EQ(make_model("orderstat3").dim(), 1);
  EXPECT_THROW(make_model("gev"), std::invalid_argument);
}

TEST(OrderStat, Kernels) {
  const auto p1 = order_stat_kernel(1, 3), p2 = order_stat_kernel(2, 3), p3 = order_stat_kernel(3, 3);
  for (double u : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(p1(u), 3 * (1 - u) * (1 - u), 1e-15);
    EXPECT_NEAR(p2(u), 6 * u * (1 - u), 1e-15);
    EXPECT_NEAR(p3(u), 3 * u * u, 1e-15);
  }
  using boost::math::quadrature::gauss;
  for (int j = 1; j <= 3; ++j) {
    const auto p = order_stat_kernel(j, 3);
    const double mass = gauss<double, 10>::integrate([&](double u) { return p(u); }, 0.0, 1.0);
    EXPECT_NEAR(mass, 1.0, 1e-14);
  }
}

TEST(OrderStat, UniformMembership) {
  using boost::math::quadrature::gauss;
  const double expected[] = {0.25, 0.5, 0.75};  // Beta(j, 4-j) means
  for (int j = 1; j <= 3; ++j) {
    const auto p = order_stat_kernel(j, 3);
    const double mean = gauss<double, 10>::integrate([&](double u) { return u * p(u); }, 0.0, 1.0);
    EXPECT_NEAR(mean, expected[j - 1], 1e-14);
  }
  // Rows vanish at both ends and uniform(0,1) satisfies the model at nu = 1/4.
  const auto m = order_stat_model_3(0.5, 0.25);
  const auto& b = m.basis();
  EXPECT_LE(b(0.0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(b(1.0).cwiseAbs().maxCoeff(), 1e-15);
  for (double u : {0.1, 0.6}) {
    EXPECT_NEAR(b(u)[0], -3 * u * (1 - u) * (1 - u), 1e-15);
    EXPECT_NEAR(b(u)[1], -3 * u * u * (1 - u), 1e-15);
  }
  // int R dQ with Q(u) = u is int R du
  Vec integral(2);
  for (int j = 0; j < 2; ++j) {
    integral[j] = gauss<double, 10>::integrate([&](double u) { return b(u)[j]; }, 0.0, 1.0);
  }
  EXPECT_NEAR((integral - m.target(Eigen::VectorXd::Constant(1, 0.25))).norm(), 0.0, 1e-15);
  EXPECT_THROW(order_stat_model_3(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(order_stat_model_3(0.0, -1.0), std::invalid_argument);
}

TEST(Sampler, MeanLmomentsWithinMonteCarloError) {
  for (const auto& f : {ParametricFamily::gpd(3, 0.1), ParametricFamily::weibull(3, 0.8)}) {
    std::mt19937_64 rng(2024);
    const int reps = 500, n = 2000;
    Eigen::MatrixXd l(reps, 3);
    for (int k = 0; k < reps; ++k) {
      const auto v = sample_lmoments_v(SortedSample(f.sample(n, rng)), 4);
      l.row(k) << v(2), v(3), v(4);
    }
    const Eigen::RowVectorXd mean = l.colwise().mean();
    const Eigen::RowVectorXd sd =
        ((l.rowwise() - mean).array().square().colwise().sum() / (reps - 1)).sqrt();
    const auto truth = f.kind() == FamilyKind::gpd ? gpd_lmoment_map(f.sigma(), f.nu())
                                                   : weibull_lmoment_map(f.sigma(), f.nu());
    for (int r = 0; r < 3; ++r) {
      EXPECT_LT(std::abs(mean[r] - truth[r]), 3 * sd[r] / std::sqrt(reps)) << f.name() << " r=" << r + 2;
    }
  }
}

}  // namespace
}  // namespace lmdiv
