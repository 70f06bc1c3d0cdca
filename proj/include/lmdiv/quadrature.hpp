#pragma once

/**
 * @file quadrature.hpp
 * @brief Tanh-sinh integration on (0,1) that hands the integrand both u and 1-u.
 *
 * Quantile functions of heavy-tailed laws are only accurate near u = 1 when
 * evaluated from the upper tail probability, so the integrand receives the pair
 * (u, tail) with tail = 1 - u computed without cancellation.
 */

#include "lmdiv/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace lmdiv {

struct TanhSinhConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_level = 9;
  int min_level = 3;
  double t_max = 6.5;
};

namespace detail {

struct TanhSinhNode {
  double u;
  double tail;
  double weight;  // without the step h
};

inline TanhSinhNode tanh_sinh_node(double t) {
  const double s = std::numbers::pi / 2.0 * std::sinh(t);
  const double e_minus = std::exp(-2.0 * s);
  const double e_plus = std::exp(2.0 * s);
  const double u = 1.0 / (1.0 + e_minus);
  const double tail = 1.0 / (1.0 + e_plus);
  const double sech = 1.0 / std::cosh(s);
  const double w = std::numbers::pi / 4.0 * std::cosh(t) * sech * sech;
  return {u, tail, w};
}

}  // namespace detail

/**
 * Integrate a vector-valued f(u, tail) over (0,1).
 *
 * Levels halve the step and only add the new odd nodes. Nodes whose u or tail
 * underflow to zero, or whose weight vanishes, are dropped. Throws
 * NumericalError when the level cap is hit before the tolerance is met.
 */
template <class F>
Eigen::VectorXd tanh_sinh_unit(F&& f, Eigen::Index dim, const TanhSinhConfig& cfg = {}) {
  auto accumulate = [&](double t, Eigen::VectorXd& acc) {
    const auto node = detail::tanh_sinh_node(t);
    if (node.u <= 0.0 || node.tail <= 0.0 || node.weight == 0.0 || !std::isfinite(node.weight)) {
      return;
    }
    acc.noalias() += node.weight * f(node.u, node.tail);
  };

  double h = 1.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  accumulate(0.0, sum);
  for (double t = h; t <= cfg.t_max; t += h) {
    accumulate(t, sum);
    accumulate(-t, sum);
  }
  Eigen::VectorXd estimate = h * sum;
  double last_diff = 0.0;

  for (int level = 1; level <= cfg.max_level; ++level) {
    h /= 2.0;
    for (double t = h; t <= cfg.t_max; t += 2.0 * h) {
      accumulate(t, sum);
      accumulate(-t, sum);
    }
    Eigen::VectorXd next = h * sum;
    last_diff = (next - estimate).lpNorm<Eigen::Infinity>();
    estimate = std::move(next);
    if (!estimate.allFinite()) {
      throw NumericalError("tanh-sinh: non-finite integrand");
    }
    if (level >= cfg.min_level &&
        last_diff <= cfg.rel_tol * estimate.lpNorm<Eigen::Infinity>() + cfg.abs_tol) {
      return estimate;
    }
  }
  throw NumericalError("tanh-sinh: tolerance not reached", estimate.lpNorm<Eigen::Infinity>(),
                       last_diff);
}

template <class F>
double tanh_sinh_unit_scalar(F&& f, const TanhSinhConfig& cfg = {}) {
  auto vf = [&](double u, double tail) {
    Eigen::VectorXd v(1);
    v[0] = f(u, tail);
    return v;
  };
  return tanh_sinh_unit(vf, 1, cfg)[0];
}

/// Nodes and weights (step included) of one fixed tanh-sinh level on (0,1).
struct TanhSinhRule {
  Eigen::VectorXd u;
  Eigen::VectorXd tail;
  Eigen::VectorXd weight;
};

inline TanhSinhRule tanh_sinh_rule(int level, double t_max = 6.5) {
  const double h = std::ldexp(1.0, -level);
  std::vector<detail::TanhSinhNode> nodes;
  const auto n_half = static_cast<long>(std::floor(t_max / h));
  for (long k = -n_half; k <= n_half; ++k) {
    const auto node = detail::tanh_sinh_node(static_cast<double>(k) * h);
    if (node.u <= 0.0 || node.tail <= 0.0 || node.weight == 0.0) continue;
    nodes.push_back(node);
  }
  TanhSinhRule rule;
  const auto m = static_cast<Eigen::Index>(nodes.size());
  rule.u.resize(m);
  rule.tail.resize(m);
  rule.weight.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    rule.u[i] = nodes[static_cast<std::size_t>(i)].u;
    rule.tail[i] = nodes[static_cast<std::size_t>(i)].tail;
    rule.weight[i] = h * nodes[static_cast<std::size_t>(i)].weight;
  }
  return rule;
}

}  // namespace lmdiv
