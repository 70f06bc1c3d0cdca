#include "lmdiv/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lmdiv {
namespace {

TEST(TanhSinh, Polynomial) {
  const double v = tanh_sinh_unit_scalar([](double u, double) { return u * u * u; });
  EXPECT_NEAR(v, 0.25, 1e-13);
}

TEST(TanhSinh, EndpointSingularities) {
  // int_0^1 u^-1/2 = 2 and int_0^1 (1-u)^-0.9 = 10, the latter only via the tail argument.
  EXPECT_NEAR(tanh_sinh_unit_scalar([](double u, double) { return 1.0 / std::sqrt(u); }), 2.0, 1e-10);
  EXPECT_NEAR(tanh_sinh_unit_scalar([](double, double t) { return std::pow(t, -0.9); }), 10.0, 1e-8);
}

TEST(TanhSinh, LogSingularity) {
  EXPECT_NEAR(tanh_sinh_unit_scalar([](double, double t) { return -std::log(t); }), 1.0, 1e-12);
}

TEST(TanhSinh, VectorValued) {
  auto f = [](double u, double) {
    Eigen::VectorXd v(2);
    v << 1.0, u;
    return v;
  };
  const auto r = tanh_sinh_unit(f, 2);
  EXPECT_NEAR(r[0], 1.0, 1e-14);
  EXPECT_NEAR(r[1], 0.5, 1e-14);
}

TEST(TanhSinh, ReportsNonConvergence) {
  TanhSinhConfig cfg;
  cfg.max_level = 2;
  cfg.min_level = 1;
  cfg.rel_tol = 1e-15;
  cfg.abs_tol = 0.0;
  try {
    tanh_sinh_unit_scalar([](double, double t) { return std::pow(t, -0.999); }, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.estimate(), 0.0);
    EXPECT_GT(e.error_bound(), 0.0);
  }
}

TEST(TanhSinh, FixedRuleWeightsSumToOne) {
  const auto rule = tanh_sinh_rule(6);
  EXPECT_NEAR(rule.weight.sum(), 1.0, 1e-12);
  for (Eigen::Index i = 0; i < rule.u.size(); ++i) {
    EXPECT_GT(rule.u[i], 0.0);
    EXPECT_GT(rule.tail[i], 0.0);
    EXPECT_NEAR(rule.u[i] + rule.tail[i], 1.0, 1e-15);
  }
}

}  // namespace
}  // namespace lmdiv
