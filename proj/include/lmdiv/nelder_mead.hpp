#pragma once

/**
 * @file nelder_mead.hpp
 * @brief Derivative-free simplex minimization inside a coordinate box.
 *
 * Trial points are clamped onto the box. Non-finite objective values are
 * treated as +inf, so infeasible regions simply repel the simplex.
 */

#include "lmdiv/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace lmdiv {

struct NelderMeadConfig {
  int max_evals = 4000;
  double f_tol = 1e-13;  ///< absolute spread of simplex values (added to rel * |f_best|)
  double f_rel = 1e-12;
  double x_tol = 1e-10;  ///< simplex diameter relative to 1 + |x_best|
  double initial_step = 0.1;
  int restarts = 1;  ///< fresh simplexes built around the best point after convergence
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd simplex_step(const Eigen::VectorXd& x, const ParameterBox& box, double frac) {
  Eigen::VectorXd step(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double width = box.hi[j] - box.lo[j];
    double s = std::abs(x[j]) > 1e-8 ? frac * std::abs(x[j]) : 0.25 * frac * std::min(1.0, width);
    s = std::min(s, 0.25 * width);
    // step away from whichever face is closer
    step[j] = (box.hi[j] - x[j] >= x[j] - box.lo[j]) ? s : -s;
  }
  return step;
}

}  // namespace detail

inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& fn,
                                    const Eigen::VectorXd& x0, const ParameterBox& box,
                                    const NelderMeadConfig& cfg = {}) {
  const Eigen::Index d = x0.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  NelderMeadResult res;

  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = fn(x);
    return std::isfinite(v) ? v : kInf;
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1));
  std::vector<double> vals(static_cast<std::size_t>(d + 1));
  std::vector<std::size_t> order(pts.size());

  Eigen::VectorXd best = box.clamp(x0);
  double best_val = eval(best);

  for (int round = 0; round <= cfg.restarts; ++round) {
    const Eigen::VectorXd step = detail::simplex_step(best, box, cfg.initial_step);
    pts[0] = best;
    vals[0] = best_val;
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd p = best;
      p[j] += step[j];
      pts[static_cast<std::size_t>(j + 1)] = box.clamp(p);
      vals[static_cast<std::size_t>(j + 1)] = eval(pts[static_cast<std::size_t>(j + 1)]);
    }

    bool converged = false;
    while (res.evaluations < cfg.max_evals) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      const std::size_t lo = order.front(), hi = order.back(), second = order[order.size() - 2];

      double diam = 0.0;
      for (const auto& p : pts) diam = std::max(diam, (p - pts[lo]).lpNorm<Eigen::Infinity>());
      const bool flat = std::isfinite(vals[hi]) &&
                        vals[hi] - vals[lo] <= cfg.f_tol + cfg.f_rel * std::abs(vals[lo]);
      if (flat && diam <= cfg.x_tol * (1.0 + pts[lo].lpNorm<Eigen::Infinity>())) {
        converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i != hi) centroid += pts[i];
      }
      centroid /= static_cast<double>(d);

      const Eigen::VectorXd xr = box.clamp(centroid + (centroid - pts[hi]));
      const double fr = eval(xr);
      if (fr < vals[lo]) {
        const Eigen::VectorXd xe = box.clamp(centroid + 2.0 * (centroid - pts[hi]));
        const double fe = eval(xe);
        if (fe < fr) {
          pts[hi] = xe;
          vals[hi] = fe;
        } else {
          pts[hi] = xr;
          vals[hi] = fr;
        }
        continue;
      }
      if (fr < vals[second]) {
        pts[hi] = xr;
        vals[hi] = fr;
        continue;
      }
      const bool outside = fr < vals[hi];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (pts[hi] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : vals[hi])) {
        pts[hi] = xc;
        vals[hi] = fc;
        continue;
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i == lo) continue;
        pts[i] = pts[lo] + 0.5 * (pts[i] - pts[lo]);
        vals[i] = eval(pts[i]);
      }
    }

    const auto it = std::min_element(vals.begin(), vals.end());
    const auto idx = static_cast<std::size_t>(it - vals.begin());
    const bool improved = vals[idx] < best_val;
    if (vals[idx] <= best_val) {
      best = pts[idx];
      best_val = vals[idx];
    }
    res.converged = converged;
    if (!converged || (!improved && round > 0)) break;
  }

  res.x = best;
  res.value = best_val;
  return res;
}

}  // namespace lmdiv
