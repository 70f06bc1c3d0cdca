#pragma once

/**
 * @file lmoments.hpp
 * @brief Sample, population and discrete L-moments and their asymptotic covariance.
 *
 * Sample L-moments of order r >= 2 are computed from spacings,
 * l_r = -sum_i K_r(i/n) (x_{i+1:n} - x_{i:n}), which is the exact integral of
 * the empirical quantile function against L_{r-1}. Because only spacings enter,
 * shifting the data leaves these orders untouched bit for bit whenever the
 * shifted spacings are themselves exact.
 */

#include "lmdiv/errors.hpp"
#include "lmdiv/poly.hpp"
#include "lmdiv/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmdiv {

/// Ordered observations and their spacings.
class SortedSample {
 public:
  explicit SortedSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) throw std::invalid_argument("sample needs at least 2 observations");
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("sample contains NaN or Inf");
    }
    std::stable_sort(values_.begin(), values_.end());
    spacings_.resize(values_.size() - 1);
    for (std::size_t i = 0; i + 1 < values_.size(); ++i) spacings_[i] = values_[i + 1] - values_[i];
  }

  std::size_t n() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  /// spacings()[i-1] = x_{i+1:n} - x_{i:n}, i = 1..n-1.
  const std::vector<double>& spacings() const { return spacings_; }
  double mean() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

 private:
  std::vector<double> values_;
  std::vector<double> spacings_;
};

enum class LmomentKind { population, v_statistic, u_statistic, discrete };

/// lambda_1..lambda_m, accessed by order.
struct LmomentVector {
  std::vector<double> values;
  LmomentKind kind = LmomentKind::population;

  int max_order() const { return static_cast<int>(values.size()); }
  double operator()(int r) const {
    if (r < 1 || r > max_order()) throw std::out_of_range("L-moment order " + std::to_string(r));
    return values[static_cast<std::size_t>(r - 1)];
  }
};

struct LmomentRatios {
  std::optional<double> gini;  ///< lambda_2 / lambda_1 when lambda_1 != 0
  std::vector<double> tau;     ///< tau[r-3] = lambda_r / lambda_2, r >= 3

  double operator()(int r) const {
    if (r < 3 || r - 3 >= static_cast<int>(tau.size())) {
      throw std::out_of_range("L-moment ratio order " + std::to_string(r));
    }
    return tau[static_cast<std::size_t>(r - 3)];
  }
};

namespace detail {

inline void check_max_order(int max_order) {
  if (max_order < 1 || max_order > kMaxOrder) {
    throw std::invalid_argument("L-moment order " + std::to_string(max_order) +
                                " outside supported range 1.." + std::to_string(kMaxOrder));
  }
}

/// -sum_i K_r(grid_i) gap_i, skipping zero gaps.
inline double spacing_integral(const Polynomial& k_r, const std::vector<double>& grid,
                               const std::vector<double>& gaps) {
  double s = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (gaps[i] != 0.0) s += k_r(grid[i]) * gaps[i];
  }
  return -s;
}

/**
 * -sum_i K_r(i/n) gap_i with K_r(i/n) = N(i) / (n^r d) for the integer
 * numerators N(i) = sum_k c_k i^k n^(r-k). When all N(i) and n^r d are exact
 * doubles the sum is a compensated dot product followed by one division;
 * otherwise nullopt.
 */
inline std::optional<double> exact_uniform_spacing_integral(const Polynomial& k_r, std::size_t n,
                                                            const std::vector<double>& gaps) {
  const auto& c = k_r.coefficients();
  const int r = static_cast<int>(c.size()) - 1;
  double cmax = 1.0;
  for (double a : c) cmax = std::max(cmax, std::abs(a));
  constexpr double kExact = 9007199254740992.0;  // 2^53
  if (r * std::log2(static_cast<double>(n)) + std::log2(cmax * k_r.divisor() * (r + 1)) > 120.0) {
    return std::nullopt;
  }
  using Wide = __int128;
  std::vector<Wide> npow(static_cast<std::size_t>(r + 1));
  npow[0] = 1;
  for (int k = 1; k <= r; ++k) npow[static_cast<std::size_t>(k)] = npow[static_cast<std::size_t>(k - 1)] * static_cast<Wide>(n);
  const Wide denom = npow[static_cast<std::size_t>(r)] * static_cast<Wide>(k_r.divisor());
  if (static_cast<double>(denom) >= kExact) return std::nullopt;

  double s = 0.0, comp = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = gaps[i - 1];
    if (gap == 0.0) continue;
    Wide num = 0, ipow = 1;
    for (int k = 0; k <= r; ++k) {
      num += static_cast<Wide>(static_cast<long long>(c[static_cast<std::size_t>(k)])) * ipow *
             npow[static_cast<std::size_t>(r - k)];
      ipow *= static_cast<Wide>(i);
    }
    const double nd = static_cast<double>(num);
    if (std::abs(nd) >= kExact) return std::nullopt;
    const auto [p, pe] = two_prod(nd, gap);
    const auto [t, te] = two_sum(s, p);
    s = t;
    comp += pe + te;
  }
  return -(s + comp) / static_cast<double>(denom);
}

inline std::vector<double> uniform_grid(std::size_t n) {
  std::vector<double> g(n - 1);
  for (std::size_t i = 1; i < n; ++i) g[i - 1] = static_cast<double>(i) / static_cast<double>(n);
  return g;
}

}  // namespace detail

/// Plug-in (V-statistic) sample L-moments l_1..l_maxOrder.
inline LmomentVector sample_lmoments_v(const SortedSample& x, int max_order) {
  detail::check_max_order(max_order);
  LmomentVector out;
  out.kind = LmomentKind::v_statistic;
  out.values.push_back(x.mean());
  std::vector<double> grid;
  for (int r = 2; r <= max_order; ++r) {
    const Polynomial k_r = integrated_legendre_poly(r);
    if (auto v = detail::exact_uniform_spacing_integral(k_r, x.n(), x.spacings())) {
      out.values.push_back(*v);
      continue;
    }
    if (grid.empty()) grid = detail::uniform_grid(x.n());
    out.values.push_back(detail::spacing_integral(k_r, grid, x.spacings()));
  }
  return out;
}

/**
 * Unbiased (U-statistic) sample L-moments through probability weighted moments
 * b_k = n^-1 sum_i C(i-1,k)/C(n-1,k) x_{i:n} and l_{r+1} = sum_k p*_{r,k} b_k.
 */
inline LmomentVector sample_lmoments_u(const SortedSample& x, int max_order) {
  detail::check_max_order(max_order);
  const std::size_t n = x.n();
  if (n < static_cast<std::size_t>(max_order)) {
    throw std::invalid_argument("U-statistic of order " + std::to_string(max_order) +
                                " needs at least that many observations");
  }
  const auto& v = x.values();
  std::vector<double> b(static_cast<std::size_t>(max_order), 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    double ratio = 1.0;  // C(i-1,k)/C(n-1,k)
    for (int k = 0; k < max_order; ++k) {
      if (k > 0) {
        ratio *= static_cast<double>(static_cast<long>(i) - k) /
                 static_cast<double>(static_cast<long>(n) - k);
      }
      if (ratio == 0.0) break;
      b[static_cast<std::size_t>(k)] += ratio * v[i - 1];
    }
  }
  for (auto& bk : b) bk /= static_cast<double>(n);

  LmomentVector out;
  out.kind = LmomentKind::u_statistic;
  for (int r = 0; r < max_order; ++r) {
    double s = 0.0;
    for (int k = 0; k <= r; ++k) {
      const auto p = detail::binomial(r, k) * detail::binomial(r + k, k);
      s += (((r - k) % 2 == 0) ? 1.0 : -1.0) * static_cast<double>(p) * b[static_cast<std::size_t>(k)];
    }
    out.values.push_back(s);
  }
  return out;
}

/// Anything exposing quantile(u, tail) with tail = 1 - u.
template <class Q>
concept TailQuantile = requires(const Q& q, double u) {
  { q.quantile(u, u) } -> std::convertible_to<double>;
};

/// Adapter for a plain callable t -> F^{-1}(t).
struct QuantileFunction {
  std::function<double(double)> fn;
  double quantile(double u, double /*tail*/) const { return fn(u); }
};

/// Right-continuous step quantile: value x_i on (P_{i-1}, P_i].
struct StepQuantile {
  std::vector<double> support;
  std::vector<double> cumulative;  ///< P_1..P_m with P_m = 1
};

/// lambda_r = int_0^1 F^{-1}(u) L_{r-1}(u) du by tanh-sinh quadrature.
template <TailQuantile Q>
LmomentVector population_lmoments(const Q& q, int max_order, const TanhSinhConfig& cfg = {}) {
  detail::check_max_order(max_order);
  std::vector<Polynomial> legendre;
  for (int r = 0; r < max_order; ++r) legendre.push_back(shifted_legendre_poly(r));
  auto integrand = [&](double u, double tail) {
    const double x = q.quantile(u, tail);
    Eigen::VectorXd v(max_order);
    for (int r = 0; r < max_order; ++r) v[r] = x * legendre[static_cast<std::size_t>(r)](u);
    return v;
  };
  const Eigen::VectorXd lam = tanh_sinh_unit(integrand, max_order, cfg);
  LmomentVector out;
  out.kind = LmomentKind::population;
  out.values.assign(lam.data(), lam.data() + lam.size());
  return out;
}

inline LmomentVector discrete_lmoments(const std::vector<double>& support,
                                       const std::vector<double>& weights, int max_order);

/// Exact piecewise integration for a step quantile; no quadrature involved.
inline LmomentVector population_lmoments(const StepQuantile& q, int max_order) {
  if (q.cumulative.size() != q.support.size() || q.support.empty()) {
    throw std::invalid_argument("step quantile: support and cumulative sizes differ");
  }
  std::vector<double> w(q.support.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = q.cumulative[i] - prev;
    prev = q.cumulative[i];
  }
  auto out = discrete_lmoments(q.support, w, max_order);
  out.kind = LmomentKind::population;
  return out;
}

inline LmomentRatios lmoment_ratios(const LmomentVector& lm) {
  if (lm.max_order() < 2) throw std::invalid_argument("ratios need at least two L-moments");
  const double l2 = lm(2);
  if (l2 == 0.0) throw std::domain_error("L-moment ratio undefined: lambda_2 = 0");
  LmomentRatios out;
  if (lm(1) != 0.0) out.gini = l2 / lm(1);
  for (int r = 3; r <= lm.max_order(); ++r) out.tau.push_back(lm(r) / l2);
  return out;
}

namespace detail {

inline void check_weights(const std::vector<double>& support, const std::vector<double>& w) {
  if (support.empty() || support.size() != w.size()) {
    throw std::invalid_argument("discrete law: support and weights must be non-empty and aligned");
  }
  double total = 0.0;
  for (double a : w) {
    if (!(a >= 0.0)) throw std::invalid_argument("discrete law: negative weight");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("discrete law: weights sum to " + std::to_string(total));
  }
  if (!std::is_sorted(support.begin(), support.end())) {
    throw std::invalid_argument("discrete law: support must be nondecreasing");
  }
}

}  // namespace detail

/**
 * L-moments of the discrete law sum_i pi_i delta_{x_i}. With equal weights
 * this reproduces sample_lmoments_v on the same points bit for bit.
 */
inline LmomentVector discrete_lmoments(const std::vector<double>& support,
                                       const std::vector<double>& weights, int max_order) {
  detail::check_max_order(max_order);
  detail::check_weights(support, weights);
  if (support.size() == 1) {
    LmomentVector out{std::vector<double>(static_cast<std::size_t>(max_order), 0.0),
                      LmomentKind::discrete};
    out.values[0] = support[0];
    return out;
  }
  const bool uniform =
      std::all_of(weights.begin(), weights.end(), [&](double a) { return a == weights.front(); });
  if (uniform) {
    auto out = sample_lmoments_v(SortedSample(support), max_order);
    out.kind = LmomentKind::discrete;
    return out;
  }
  std::vector<double> grid(support.size() - 1);
  std::vector<double> gaps(support.size() - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < support.size(); ++i) {
    acc += weights[i];
    grid[i] = std::min(acc, 1.0);
    gaps[i] = support[i + 1] - support[i];
  }
  LmomentVector out;
  out.kind = LmomentKind::discrete;
  double mean = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) mean += weights[i] * support[i];
  out.values.push_back(mean);
  for (int r = 2; r <= max_order; ++r) {
    out.values.push_back(detail::spacing_integral(integrated_legendre_poly(r), grid, gaps));
  }
  return out;
}

/**
 * Weight profile w_i^(r) = K_r(P_i) - K_r(P_{i-1}) so that lambda_r = sum_i w_i^(r) x_i.
 * Row r-1 holds order r; order 1 holds the probabilities themselves.
 */
inline Eigen::MatrixXd discrete_lmoment_weights(const std::vector<double>& weights, int max_order) {
  detail::check_max_order(max_order);
  const auto m = static_cast<Eigen::Index>(weights.size());
  std::vector<double> cum(weights.size() + 1, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) cum[i + 1] = std::min(cum[i] + weights[i], 1.0);
  cum.back() = 1.0;
  const bool uniform =
      std::all_of(weights.begin(), weights.end(), [&](double a) { return a == weights.front(); });
  if (uniform) {
    for (std::size_t i = 0; i < cum.size(); ++i) {
      cum[i] = static_cast<double>(i) / static_cast<double>(weights.size());
    }
  }
  Eigen::MatrixXd w(max_order, m);
  for (Eigen::Index i = 0; i < m; ++i) w(0, i) = weights[static_cast<std::size_t>(i)];
  for (int r = 2; r <= max_order; ++r) {
    const auto k = integrated_legendre_poly(r);
    for (Eigen::Index i = 0; i < m; ++i) {
      w(r - 1, i) = k(cum[static_cast<std::size_t>(i) + 1]) - k(cum[static_cast<std::size_t>(i)]);
    }
  }
  return w;
}

/// Laws usable by the covariance quadratures: quantile density q(u) = dQ/du.
template <class D>
concept QuantileDensityLaw = requires(const D& d, double u) {
  { d.quantile_density(u, u) } -> std::convertible_to<double>;
};

struct CovarianceQuadConfig {
  int min_level = 4;
  int max_level = 7;
  double rel_tol = 1e-7;
  double truncation = 1e-100;  ///< drop nodes where u(1-u) falls below this
};

/**
 * C_jk = iint [min(F(x),F(y)) - F(x)F(y)] a_j(F(x)) a_k(F(y)) dx dy for the
 * given weight polynomials a_j, computed in quantile coordinates
 * (dx = q(u) du) on the triangle u < v mapped as u = v s.
 */
template <QuantileDensityLaw D>
Eigen::MatrixXd quantile_functional_covariance(const D& law, const std::vector<Polynomial>& a,
                                               const CovarianceQuadConfig& cfg = {}) {
  const auto m = static_cast<Eigen::Index>(a.size());
  if (m == 0) throw std::invalid_argument("covariance needs at least one weight function");

  auto eval_level = [&](int level) {
    const TanhSinhRule rule = tanh_sinh_rule(level);
    const Eigen::Index nodes = rule.u.size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd av(m), au(m);
    for (Eigen::Index iv = 0; iv < nodes; ++iv) {
      const double v = rule.u[iv];
      const double tv = rule.tail[iv];
      if (v * tv < cfg.truncation) continue;
      const double qv = law.quantile_density(v, tv);
      for (Eigen::Index j = 0; j < m; ++j) av[j] = a[static_cast<std::size_t>(j)](v);
      const double outer_w = rule.weight[iv] * v * tv * qv * v;  // (1-v) q(v) and du = v ds
      Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index is = 0; is < nodes; ++is) {
        const double u = v * rule.u[is];
        const double tu = tv + v * rule.tail[is];
        if (u * tu < cfg.truncation) continue;
        const double w = rule.weight[is] * rule.u[is] * law.quantile_density(u, tu);
        for (Eigen::Index j = 0; j < m; ++j) au[j] = a[static_cast<std::size_t>(j)](u);
        inner.noalias() += w * au * av.transpose();
      }
      acc.noalias() += outer_w * inner;
    }
    // acc = iint_{u<v} a(u) a(v)^T u (1-v) q(u) q(v); add the mirrored term.
    return Eigen::MatrixXd(acc + acc.transpose());
  };

  Eigen::MatrixXd prev = eval_level(cfg.min_level);
  double diff = 0.0;
  for (int level = cfg.min_level + 1; level <= cfg.max_level; ++level) {
    Eigen::MatrixXd cur = eval_level(level);
    if (!cur.allFinite()) throw NumericalError("covariance quadrature: non-finite value");
    diff = (cur - prev).norm();
    if (diff <= cfg.rel_tol * cur.norm()) return cur;
    prev = std::move(cur);
  }
  throw NumericalError("covariance quadrature: tolerance not reached", prev.norm(), diff);
}

/// Asymptotic covariance of sqrt(n)(l - lambda) for orders 1..max_order.
template <QuantileDensityLaw D>
Eigen::MatrixXd lambda_covariance(const D& law, int max_order, const CovarianceQuadConfig& cfg = {}) {
  detail::check_max_order(max_order);
  std::vector<Polynomial> a;
  for (int r = 1; r <= max_order; ++r) a.push_back(shifted_legendre_poly(r - 1));
  return quantile_functional_covariance(law, a, cfg);
}

/// Asymptotic covariance of sqrt(n)(m_n - m) for a constraint basis (rows' derivatives).
template <QuantileDensityLaw D>
Eigen::MatrixXd stigler_covariance(const D& law, const PolyBasis& basis,
                                   const CovarianceQuadConfig& cfg = {}) {
  return quantile_functional_covariance(law, basis.derivative_rows(), cfg);
}

/// Omega = int K(F(x)) K(F(x))^T dx = int_0^1 K(u) K(u)^T q(u) du.
template <QuantileDensityLaw D>
Eigen::MatrixXd omega_population(const D& law, const PolyBasis& basis, const TanhSinhConfig& cfg = {}) {
  const auto p = static_cast<Eigen::Index>(basis.size());
  auto integrand = [&](double u, double tail) {
    Eigen::VectorXd k(p);
    // K vanishes at both ends faster than q can blow up; skip nodes where q would overflow.
    if (u * tail < 1e-150) return Eigen::VectorXd(Eigen::VectorXd::Zero(p * p));
    for (Eigen::Index j = 0; j < p; ++j) k[j] = basis.rows()[static_cast<std::size_t>(j)](u);
    const Eigen::MatrixXd kk = law.quantile_density(u, tail) * (k * k.transpose());
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(kk.data(), p * p));
  };
  const Eigen::VectorXd flat = tanh_sinh_unit(integrand, p * p, cfg);
  Eigen::MatrixXd omega = Eigen::Map<const Eigen::MatrixXd>(flat.data(), p, p);
  return 0.5 * (omega + omega.transpose());
}

}  // namespace lmdiv
