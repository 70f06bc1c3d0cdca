#pragma once

/**
 * @file poly.hpp
 * @brief Shifted Legendre polynomials L_r on [0,1] and their integrals K_r.
 *
 * L_r(t) = sum_{k=0}^r (-1)^{r-k} C(r,k) C(r+k,k) t^k, so every coefficient is
 * an integer. For r <= 20 the largest coefficient is below 2^53 and the table
 * is exact in double precision. K_r(t) = int_0^t L_{r-1}(u) du is stored as
 * (L_r - L_{r-2}) / (2(2r-1)), which keeps integer coefficients and makes
 * K_r(0) = K_r(1) = 0 hold exactly for r >= 2.
 *
 * Evaluation uses compensated Horner (error-free TwoSum/TwoProd), which keeps
 * the alternating high-order expansions accurate to a few ulps on [0,1].
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lmdiv {

/// Highest polynomial order supported by the coefficient tables.
inline constexpr int kMaxOrder = 20;

namespace detail {

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::int64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // exact: result * (n - k + i) is divisible by i at every step
    result = result * (n - k + i) / i;
  }
  return result;
}

struct TwoTerm {
  double value;
  double error;
};

inline TwoTerm two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

inline TwoTerm two_prod(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

/// Compensated Horner on ascending coefficients.
inline double compensated_horner(std::span<const double> coeffs, double x) {
  if (coeffs.empty()) return 0.0;
  double s = coeffs.back();
  double c = 0.0;
  for (std::size_t i = coeffs.size() - 1; i-- > 0;) {
    const TwoTerm p = two_prod(s, x);
    const TwoTerm t = two_sum(p.value, coeffs[i]);
    s = t.value;
    c = c * x + (p.error + t.error);
  }
  return s + c;
}

inline void check_unit(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::domain_error("polynomial argument outside [0,1]: " + std::to_string(t));
  }
}

inline void check_order(int r, int min_order) {
  if (r < min_order || r > kMaxOrder) {
    throw std::invalid_argument("unsupported polynomial order " + std::to_string(r) +
                                " (supported: " + std::to_string(min_order) + ".." +
                                std::to_string(kMaxOrder) + ")");
  }
}

}  // namespace detail

/// Polynomial with ascending coefficients and a common divisor:
/// p(t) = sum_k coeffs[k] t^k / divisor.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs, double divisor = 1.0)
      : coeffs_(std::move(coeffs)), divisor_(divisor) {}

  double operator()(double t) const { return detail::compensated_horner(coeffs_, t) / divisor_; }

  Polynomial derivative() const {
    if (coeffs_.size() <= 1) return Polynomial({0.0}, 1.0);
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) d[k - 1] = static_cast<double>(k) * coeffs_[k];
    return Polynomial(std::move(d), divisor_);
  }

  int degree() const { return coeffs_.empty() ? 0 : static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  double divisor() const { return divisor_; }

 private:
  std::vector<double> coeffs_{0.0};
  double divisor_ = 1.0;
};

namespace detail {

inline std::vector<double> legendre_integer_coeffs(int r) {
  std::vector<double> c(static_cast<std::size_t>(r) + 1);
  for (int k = 0; k <= r; ++k) {
    const std::int64_t mag = binomial(r, k) * binomial(r + k, k);
    c[static_cast<std::size_t>(k)] = static_cast<double>(((r - k) % 2 == 0) ? mag : -mag);
  }
  return c;
}

}  // namespace detail

/// L_r as a polynomial object, 0 <= r <= kMaxOrder.
inline Polynomial shifted_legendre_poly(int r) {
  detail::check_order(r, 0);
  return Polynomial(detail::legendre_integer_coeffs(r));
}

/// K_r as a polynomial object, 2 <= r <= kMaxOrder.
inline Polynomial integrated_legendre_poly(int r) {
  detail::check_order(r, 2);
  std::vector<double> hi = detail::legendre_integer_coeffs(r);
  const std::vector<double> lo = detail::legendre_integer_coeffs(r - 2);
  for (std::size_t k = 0; k < lo.size(); ++k) hi[k] -= lo[k];
  return Polynomial(std::move(hi), 2.0 * (2.0 * r - 1.0));
}

inline double shifted_legendre(int r, double t) {
  detail::check_unit(t);
  return shifted_legendre_poly(r)(t);
}

/// K_r(t). K_1 is never needed: L-moment models are shift invariant.
inline double integrated_legendre(int r, double t) {
  detail::check_unit(t);
  return integrated_legendre_poly(r)(t);
}

/**
 * Stack of constraint polynomials t -> K(t) used by every dual computation.
 *
 * The usual instance holds K_r for a set of L-moment orders; models built from
 * order-statistic contrasts supply their own rows. Every row must vanish at 0
 * and at 1 so that the induced constraint only sees spacings.
 */
class PolyBasis {
 public:
  PolyBasis() = default;

  explicit PolyBasis(std::vector<int> orders) : orders_(std::move(orders)) {
    if (orders_.empty()) throw std::invalid_argument("PolyBasis needs at least one order");
    rows_.reserve(orders_.size());
    for (int r : orders_) {
      rows_.push_back(integrated_legendre_poly(r));
      labels_.push_back("K" + std::to_string(r));
    }
    finish();
  }

  /// Orders lo..hi inclusive.
  static PolyBasis range(int lo, int hi) {
    std::vector<int> o;
    for (int r = lo; r <= hi; ++r) o.push_back(r);
    return PolyBasis(std::move(o));
  }

  /// Arbitrary rows; each must vanish at both endpoints.
  static PolyBasis from_rows(std::vector<Polynomial> rows, std::vector<std::string> labels) {
    if (rows.empty() || rows.size() != labels.size()) {
      throw std::invalid_argument("PolyBasis::from_rows: rows and labels must be non-empty and aligned");
    }
    for (const auto& p : rows) {
      if (std::abs(p(0.0)) > 1e-12 || std::abs(p(1.0)) > 1e-12) {
        throw std::invalid_argument("constraint row does not vanish at 0 and 1");
      }
    }
    PolyBasis b;
    b.rows_ = std::move(rows);
    b.labels_ = std::move(labels);
    b.finish();
    return b;
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<int>& orders() const { return orders_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Polynomial>& rows() const { return rows_; }
  /// Row derivatives; for Legendre rows these are L_{r-1}.
  const std::vector<Polynomial>& derivative_rows() const { return derivs_; }
  bool is_legendre() const { return !orders_.empty(); }

  Eigen::VectorXd operator()(double t) const {
    detail::check_unit(t);
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t j = 0; j < rows_.size(); ++j) v[static_cast<Eigen::Index>(j)] = rows_[j](t);
    return v;
  }

  Eigen::VectorXd derivative(double t) const {
    detail::check_unit(t);
    Eigen::VectorXd v(static_cast<Eigen::Index>(derivs_.size()));
    for (std::size_t j = 0; j < derivs_.size(); ++j) v[static_cast<Eigen::Index>(j)] = derivs_[j](t);
    return v;
  }

 private:
  void finish() {
    derivs_.clear();
    for (const auto& p : rows_) derivs_.push_back(p.derivative());
  }

  std::vector<int> orders_;
  std::vector<Polynomial> rows_;
  std::vector<Polynomial> derivs_;
  std::vector<std::string> labels_;
};

inline Eigen::VectorXd constraint_vector(const PolyBasis& basis, double t) { return basis(t); }

}  // namespace lmdiv
