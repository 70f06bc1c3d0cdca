#pragma once

/**
 * @file models.hpp
 * @brief Semiparametric linear quantile models: parameter boxes, constraint
 * rows and the maps theta -> lambda(theta) for the GPD, Weibull and
 * three-point order-statistic models.
 *
 * Every model pairs constraint rows R_j (vanishing at 0 and 1) with a moment
 * map mu(theta) such that a law G belongs to the model iff
 * int_0^1 R_j'(u) G^{-1}(u) du = mu_j(theta). Integrating by parts gives
 * int R_j dG^{-1} = -mu_j(theta), which is the target the dual consumes.
 * For the L-moment models R_j = K_r and mu = (lambda_2, ..., lambda_l).
 */

#include "lmdiv/distributions.hpp"
#include "lmdiv/lmoments.hpp"
#include "lmdiv/poly.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmdiv {

struct ParameterBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Eigen::VectorXd& theta) const {
    return ((theta.array() >= lo.array()) && (theta.array() <= hi.array())).all();
  }
  Eigen::VectorXd clamp(const Eigen::VectorXd& theta) const {
    return theta.cwiseMax(lo).cwiseMin(hi);
  }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
  /// Coordinates within rel * (1 + |face|) of a face.
  std::vector<bool> near_boundary(const Eigen::VectorXd& theta, double rel = 1e-6) const {
    std::vector<bool> out(static_cast<std::size_t>(dim()));
    for (Eigen::Index j = 0; j < dim(); ++j) {
      out[static_cast<std::size_t>(j)] = theta[j] - lo[j] <= rel * (1.0 + std::abs(lo[j])) ||
                                         hi[j] - theta[j] <= rel * (1.0 + std::abs(hi[j]));
    }
    return out;
  }
};

struct JacobianResult {
  Eigen::MatrixXd matrix;
  bool one_sided = false;  ///< finite differences had to step inward at a face
};

class SplqModel {
 public:
  using Map = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using JacobianMap = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
  using StartRule = std::function<std::optional<Eigen::VectorXd>(const SortedSample&)>;
  using LawMap = std::function<ParametricFamily(const Eigen::VectorXd&)>;

  SplqModel(std::string name, std::vector<std::string> param_names, ParameterBox box,
            PolyBasis basis, Map moment_map)
      : name_(std::move(name)),
        param_names_(std::move(param_names)),
        box_(std::move(box)),
        basis_(std::move(basis)),
        moment_map_(std::move(moment_map)) {
    if (static_cast<Eigen::Index>(param_names_.size()) != box_.dim()) {
      throw std::invalid_argument("model: parameter names and box dimension differ");
    }
  }

  SplqModel& with_jacobian(JacobianMap j) {
    jacobian_ = std::move(j);
    return *this;
  }
  SplqModel& with_start(StartRule s) {
    start_ = std::move(s);
    return *this;
  }
  SplqModel& with_law(LawMap l) {
    law_ = std::move(l);
    return *this;
  }
  SplqModel& with_box(ParameterBox b) {
    if (b.dim() != box_.dim()) throw std::invalid_argument("model: box dimension mismatch");
    box_ = std::move(b);
    return *this;
  }

  const std::string& name() const { return name_; }
  Eigen::Index dim() const { return box_.dim(); }
  const std::vector<std::string>& param_names() const { return param_names_; }
  const ParameterBox& box() const { return box_; }
  const PolyBasis& basis() const { return basis_; }
  std::size_t constraints() const { return basis_.size(); }

  /// mu(theta); for L-moment models the reported (lambda_2, ..., lambda_l).
  Eigen::VectorXd moment_map(const Eigen::VectorXd& theta) const { return moment_map_(theta); }
  /// f(theta) = -mu(theta), the right-hand side of int K dG^{-1} = f.
  Eigen::VectorXd target(const Eigen::VectorXd& theta) const { return -moment_map_(theta); }

  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  /// Jacobian of the target map f (analytic when available, else central differences).
  JacobianResult jacobian(const Eigen::VectorXd& theta) const {
    if (jacobian_) return {-jacobian_(theta), false};
    return finite_difference_jacobian(theta);
  }

  /// Central differences with step 1e-6 (1 + |theta_j|); one-sided at the box faces.
  JacobianResult finite_difference_jacobian(const Eigen::VectorXd& theta) const {
    const auto p = static_cast<Eigen::Index>(constraints());
    JacobianResult out;
    out.matrix.resize(p, dim());
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const double h = 1e-6 * (1.0 + std::abs(theta[j]));
      Eigen::VectorXd up = theta, dn = theta;
      up[j] += h;
      dn[j] -= h;
      const bool up_ok = up[j] <= box_.hi[j];
      const bool dn_ok = dn[j] >= box_.lo[j];
      if (up_ok && dn_ok) {
        out.matrix.col(j) = (target(up) - target(dn)) / (2.0 * h);
      } else if (up_ok) {
        out.matrix.col(j) = (target(up) - target(theta)) / h;
        out.one_sided = true;
      } else {
        out.matrix.col(j) = (target(theta) - target(dn)) / h;
        out.one_sided = true;
      }
    }
    return out;
  }

  std::optional<Eigen::VectorXd> start(const SortedSample& x) const {
    if (!start_) return std::nullopt;
    auto s = start_(x);
    if (s && !(s->allFinite() && box_.contains(*s))) return std::nullopt;
    return s;
  }

  bool has_law() const { return static_cast<bool>(law_); }
  ParametricFamily law(const Eigen::VectorXd& theta) const {
    if (!law_) throw std::logic_error("model '" + name_ + "' has no parametric law");
    return law_(theta);
  }

 private:
  std::string name_;
  std::vector<std::string> param_names_;
  ParameterBox box_;
  PolyBasis basis_;
  Map moment_map_;
  JacobianMap jacobian_;
  StartRule start_;
  LawMap law_;
};

// ---------------------------------------------------------------------------
// GPD

/// (lambda_2, lambda_3, lambda_4) of GPD(sigma, nu); requires nu < 1.
inline Eigen::Vector3d gpd_lmoment_map(double sigma, double nu) {
  if (!(sigma > 0.0)) throw std::domain_error("GPD scale must be positive");
  if (!(nu < 1.0)) throw std::domain_error("GPD L-moments do not exist for nu >= 1");
  const double l2 = sigma / ((1.0 - nu) * (2.0 - nu));
  const double t3 = (1.0 + nu) / (3.0 - nu);
  const double t4 = (1.0 + nu) * (2.0 + nu) / ((3.0 - nu) * (4.0 - nu));
  return {l2, l2 * t3, l2 * t4};
}

/// d(lambda_2, lambda_3, lambda_4) / d(sigma, nu).
inline Eigen::Matrix<double, 3, 2> gpd_lmoment_jacobian(double sigma, double nu) {
  if (!(nu < 1.0)) throw std::domain_error("GPD L-moments do not exist for nu >= 1");
  const double c = 1.0 / ((1.0 - nu) * (2.0 - nu));
  const double l2 = sigma * c;
  const double dl2 = l2 * (1.0 / (1.0 - nu) + 1.0 / (2.0 - nu));
  const double t3 = (1.0 + nu) / (3.0 - nu);
  const double dt3 = 4.0 / ((3.0 - nu) * (3.0 - nu));
  const double num = nu * nu + 3.0 * nu + 2.0;
  const double den = nu * nu - 7.0 * nu + 12.0;
  const double t4 = num / den;
  const double dt4 = ((2.0 * nu + 3.0) * den - num * (2.0 * nu - 7.0)) / (den * den);
  Eigen::Matrix<double, 3, 2> j;
  j << c, dl2, c * t3, dl2 * t3 + l2 * dt3, c * t4, dl2 * t4 + l2 * dt4;
  return j;
}

/// Inverts tau_4 and lambda_2 of the GPD; nullopt when the inversion is undefined.
inline std::optional<Eigen::Vector2d> gpd_from_l2_tau4(double l2, double tau4) {
  if (!std::isfinite(l2) || !std::isfinite(tau4) || tau4 == 1.0) return std::nullopt;
  const double disc = tau4 * tau4 + 98.0 * tau4 + 1.0;
  if (disc < 0.0) return std::nullopt;
  const double nu = (7.0 * tau4 + 3.0 - std::sqrt(disc)) / (2.0 * (tau4 - 1.0));
  const double sigma = l2 * (1.0 - nu) * (2.0 - nu);
  if (!std::isfinite(nu) || !(sigma > 0.0)) return std::nullopt;
  return Eigen::Vector2d(sigma, nu);
}

inline ParameterBox gpd_default_box() {
  return {Eigen::Vector2d(1e-3, -5.0), Eigen::Vector2d(1e3, 0.99)};
}

inline SplqModel gpd_l234_model() {
  SplqModel m("gpd-l234", {"sigma", "nu"}, gpd_default_box(), PolyBasis({2, 3, 4}),
              [](const Eigen::VectorXd& th) -> Eigen::VectorXd { return gpd_lmoment_map(th[0], th[1]); });
  m.with_jacobian([](const Eigen::VectorXd& th) -> Eigen::MatrixXd {
     return gpd_lmoment_jacobian(th[0], th[1]);
   })
      .with_start([](const SortedSample& x) -> std::optional<Eigen::VectorXd> {
        const auto l = sample_lmoments_v(x, 4);
        if (l(2) <= 0.0) return std::nullopt;
        auto s = gpd_from_l2_tau4(l(2), l(4) / l(2));
        if (!s) return std::nullopt;
        return Eigen::VectorXd(*s);
      })
      .with_law([](const Eigen::VectorXd& th) { return ParametricFamily::gpd(th[0], th[1]); });
  return m;
}

// ---------------------------------------------------------------------------
// Weibull

/// (lambda_2, lambda_3, lambda_4) of Weibull(sigma, nu).
inline Eigen::Vector3d weibull_lmoment_map(double sigma, double nu) {
  if (!(sigma > 0.0) || !(nu > 0.0)) throw std::domain_error("Weibull parameters must be positive");
  const double s = 1.0 / nu;
  const double a2 = -std::expm1(-s * std::log(2.0));
  const double a3 = -std::expm1(-s * std::log(3.0));
  const double a4 = -std::expm1(-s * std::log(4.0));
  const double l2 = sigma * a2 * std::tgamma(1.0 + s);
  return {l2, l2 * (3.0 - 2.0 * a3 / a2), l2 * (6.0 + (5.0 * a4 - 10.0 * a3) / a2)};
}

inline Eigen::Matrix<double, 3, 2> weibull_lmoment_jacobian(double sigma, double nu) {
  if (!(sigma > 0.0) || !(nu > 0.0)) throw std::domain_error("Weibull parameters must be positive");
  const double s = 1.0 / nu;
  const double ds = -1.0 / (nu * nu);
  auto a = [&](double j) { return -std::expm1(-s * std::log(j)); };
  auto da = [&](double j) { return std::log(j) * std::exp(-s * std::log(j)); };  // d a_j / ds
  const double a2 = a(2), a3 = a(3), a4 = a(4);
  const double d2 = da(2), d3 = da(3), d4 = da(4);
  const double g = std::tgamma(1.0 + s);
  const double dg = g * boost::math::digamma(1.0 + s);
  const double c = a2 * g;  // lambda_2 / sigma
  const double dc = d2 * g + a2 * dg;
  const double r3 = 3.0 - 2.0 * a3 / a2;
  const double dr3 = -2.0 * (d3 * a2 - a3 * d2) / (a2 * a2);
  const double q4 = 5.0 * a4 - 10.0 * a3;
  const double r4 = 6.0 + q4 / a2;
  const double dr4 = ((5.0 * d4 - 10.0 * d3) * a2 - q4 * d2) / (a2 * a2);
  Eigen::Matrix<double, 3, 2> j;
  j << c, sigma * dc * ds, c * r3, sigma * (dc * r3 + c * dr3) * ds, c * r4,
      sigma * (dc * r4 + c * dr4) * ds;
  return j;
}

inline ParameterBox weibull_default_box() {
  return {Eigen::Vector2d(1e-3, 0.05), Eigen::Vector2d(1e3, 20.0)};
}

inline SplqModel weibull_l234_model() {
  SplqModel m("weibull-l234", {"sigma", "nu"}, weibull_default_box(), PolyBasis({2, 3, 4}),
              [](const Eigen::VectorXd& th) -> Eigen::VectorXd { return weibull_lmoment_map(th[0], th[1]); });
  m.with_jacobian([](const Eigen::VectorXd& th) -> Eigen::MatrixXd {
     return weibull_lmoment_jacobian(th[0], th[1]);
   })
      .with_start([](const SortedSample& x) -> std::optional<Eigen::VectorXd> {
        // tau_3 decreases in nu; bisect it inside the default box.
        const auto l = sample_lmoments_v(x, 3);
        if (l(2) <= 0.0) return std::nullopt;
        const double t3 = l(3) / l(2);
        auto tau3 = [](double nu) {
          const auto v = weibull_lmoment_map(1.0, nu);
          return v[1] / v[0];
        };
        double lo = 0.05, hi = 20.0;
        if (t3 >= tau3(lo) || t3 <= tau3(hi)) return std::nullopt;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          (tau3(mid) > t3 ? lo : hi) = mid;
        }
        const double nu = 0.5 * (lo + hi);
        return Eigen::Vector2d(l(2) / weibull_lmoment_map(1.0, nu)[0], nu);
      })
      .with_law([](const Eigen::VectorXd& th) { return ParametricFamily::weibull(th[0], th[1]); });
  return m;
}

// ---------------------------------------------------------------------------
// Order statistics

/// P_{j:r}(u) = r! / ((j-1)! (r-j)!) u^{j-1} (1-u)^{r-j}, the density of U_{j:r}.
inline Polynomial order_stat_kernel(int j, int r) {
  if (r < 1 || r > kMaxOrder || j < 1 || j > r) {
    throw std::invalid_argument("order statistic kernel needs 1 <= j <= r <= " + std::to_string(kMaxOrder));
  }
  std::vector<double> c(static_cast<std::size_t>(r), 0.0);
  const double lead = static_cast<double>(r * detail::binomial(r - 1, j - 1));
  for (int k = 0; k <= r - j; ++k) {
    const double term = static_cast<double>(detail::binomial(r - j, k)) * ((k % 2 == 0) ? 1.0 : -1.0);
    c[static_cast<std::size_t>(j - 1 + k)] = lead * term;
  }
  return Polynomial(std::move(c));
}

namespace detail {

/// Antiderivative from 0 of p (ascending coefficients, divisor 1).
inline Polynomial antiderivative(const Polynomial& p) {
  const auto& c = p.coefficients();
  std::vector<double> out(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) out[k + 1] = c[k] / static_cast<double>(k + 1);
  return Polynomial(std::move(out), p.divisor());
}

inline Polynomial difference(const Polynomial& a, const Polynomial& b) {
  if (a.divisor() != b.divisor()) throw std::invalid_argument("polynomial divisors differ");
  auto ca = a.coefficients();
  const auto& cb = b.coefficients();
  if (cb.size() > ca.size()) ca.resize(cb.size(), 0.0);
  for (std::size_t k = 0; k < cb.size(); ++k) ca[k] -= cb[k];
  return Polynomial(std::move(ca), a.divisor());
}

}  // namespace detail

inline ParameterBox order_stat_default_box() {
  return {Eigen::VectorXd::Constant(1, 1e-8), Eigen::VectorXd::Constant(1, 1e8)};
}

/**
 * Three-point order statistic model E[X_{1:3}] = theta - nu, E[X_{2:3}] = theta,
 * E[X_{3:3}] = theta + nu, kept in its shift-invariant form: the free
 * parameter is nu and the rows integrate P_{2:3} - P_{1:3} and P_{3:3} - P_{2:3}.
 * theta is not identified by spacings; since the three expectations sum to
 * 3 E[X], it is reported as the sample mean. The arguments fix the nominal
 * point used to validate the spread.
 */
inline SplqModel order_stat_model_3(double theta = 0.0, double nu = 1.0) {
  if (!std::isfinite(theta)) throw std::invalid_argument("order statistic model: theta must be finite");
  if (!(nu > 0.0)) throw std::invalid_argument("order statistic model: nu must be positive");
  const auto p1 = order_stat_kernel(1, 3), p2 = order_stat_kernel(2, 3), p3 = order_stat_kernel(3, 3);
  auto basis = PolyBasis::from_rows(
      {detail::antiderivative(detail::difference(p2, p1)), detail::antiderivative(detail::difference(p3, p2))},
      {"X2:3-X1:3", "X3:3-X2:3"});
  SplqModel m("orderstat3", {"nu"}, order_stat_default_box(), std::move(basis),
              [](const Eigen::VectorXd& th) -> Eigen::VectorXd { return Eigen::Vector2d(th[0], th[0]); });
  m.with_jacobian([](const Eigen::VectorXd&) -> Eigen::MatrixXd { return Eigen::Vector2d(1.0, 1.0); })
      .with_start([b = m.basis()](const SortedSample& x) -> std::optional<Eigen::VectorXd> {
        Eigen::VectorXd mn = Eigen::VectorXd::Zero(2);
        for (std::size_t i = 0; i + 1 < x.n(); ++i) {
          mn += b(static_cast<double>(i + 1) / static_cast<double>(x.n())) * x.spacings()[i];
        }
        const double nu0 = -0.5 * mn.sum();
        if (!(nu0 > 0.0)) return std::nullopt;
        return Eigen::VectorXd::Constant(1, nu0);
      });
  return m;
}

/// Models by configuration name: gpd-l234, weibull-l234, orderstat3.
inline SplqModel make_model(const std::string& name) {
  if (name == "gpd-l234") return gpd_l234_model();
  if (name == "weibull-l234") return weibull_l234_model();
  if (name == "orderstat3") return order_stat_model_3();
  throw std::invalid_argument("unknown model '" + name + "' (expected gpd-l234, weibull-l234 or orderstat3)");
}

}  // namespace lmdiv
