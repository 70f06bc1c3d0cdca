#pragma once

/**
 * @file estimator.hpp
 * @brief Minimum-divergence estimation over a model, its asymptotic
 * covariance, the S_n confidence statistic and the classical GPD estimators
 * (L-moment method, moment method, maximum likelihood).
 */

#include "lmdiv/dual.hpp"
#include "lmdiv/errors.hpp"
#include "lmdiv/models.hpp"
#include "lmdiv/nelder_mead.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lmdiv {

// ---------------------------------------------------------------------------
// Report types

enum class Plugin { parametric, empirical };

inline std::string to_string(Plugin p) { return p == Plugin::parametric ? "parametric" : "empirical"; }

/// Sigma, Omega, J_0 and the derived blocks M, H, P at a parameter value.
struct AsymptoticBlocks {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd omega;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd m;
  Eigen::MatrixXd h;
  Eigen::MatrixXd p;
  Eigen::MatrixXd cov_theta;  ///< H Sigma H^T / n
  Eigen::MatrixXd cov_xi;     ///< P Sigma P^T / n
  double omega_condition = 0.0;
  double jacobian_condition = 0.0;
  bool one_sided_jacobian = false;
  Plugin plugin = Plugin::parametric;
};

struct ConfidenceStat {
  double statistic = 0.0;
  int df = 0;          ///< degrees of freedom used for the p-value (rank of the middle matrix)
  int nominal_df = 0;  ///< number of constraint components
  int rank = 0;
  double p_value = 1.0;
  bool pseudo_inverse = false;
};

struct FitReport {
  std::string method;
  std::string model;
  std::string divergence;
  std::vector<std::string> param_names;
  Eigen::VectorXd theta;
  Eigen::VectorXd xi;
  double criterion = std::numeric_limits<double>::infinity();
  DualStatus inner_status = DualStatus::max_iter;
  int outer_evaluations = 0;
  int inner_failures = 0;
  int starts = 0;
  bool outer_converged = false;
  bool failed = false;
  std::string message;
  std::vector<bool> boundary;
  std::optional<double> location;  ///< reported location for models that do not identify it
  std::optional<AsymptoticBlocks> asymptotics;
  std::optional<ConfidenceStat> test;

  bool on_boundary() const {
    for (bool b : boundary) {
      if (b) return true;
    }
    return false;
  }
};

struct FitConfig {
  NelderMeadConfig outer;
  DualConfig inner;
  bool use_box_center = true;
};

// ---------------------------------------------------------------------------
// Divergence fit

/// D(theta) for a fixed skeleton; +inf where the target is unreachable or undefined.
class DivergenceCriterion {
 public:
  DivergenceCriterion(std::shared_ptr<const DualSkeleton> sk, const SplqModel& model, Divergence div,
                      DualConfig inner = {})
      : sk_(std::move(sk)), model_(model), div_(div), inner_(inner) {}

  DualSolution solve(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd f = model_.target(theta);
    if (!f.allFinite()) throw std::domain_error("model target is not finite");
    return solve_dual(DualProblem(sk_, f, div_), inner_);
  }

  double operator()(const Eigen::VectorXd& theta) const {
    try {
      const auto s = solve(theta);
      if (s.status == DualStatus::max_iter) ++failures_;
      return s.criterion();
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  int failures() const { return failures_; }

 private:
  std::shared_ptr<const DualSkeleton> sk_;
  const SplqModel& model_;
  Divergence div_;
  DualConfig inner_;
  mutable int failures_ = 0;
};

/**
 * theta_hat = argmin_theta sup_xi { xi^T f(theta) - sum psi(xi^T K_i) D_i }.
 * Nelder-Mead runs from the model's start rule and from the box center; the
 * best end point wins and xi_hat comes from a final inner solve there.
 */
inline FitReport fit_divergence(const SortedSample& x, const SplqModel& model, const Divergence& div,
                                const FitConfig& cfg = {}) {
  if (x.n() < model.constraints() + 1) {
    throw std::invalid_argument("fit: sample size must exceed the number of constraints");
  }
  auto sk = std::make_shared<const DualSkeleton>(x, model.basis());
  DivergenceCriterion crit(sk, model, div, cfg.inner);

  FitReport rep;
  rep.method = "divergence";
  rep.model = model.name();
  rep.divergence = div.name();
  rep.param_names = model.param_names();

  std::vector<Eigen::VectorXd> starts;
  if (auto s = model.start(x)) starts.push_back(*s);
  if (cfg.use_box_center) starts.push_back(model.box().center());

  NelderMeadResult best;
  for (const auto& s : starts) {
    const auto r = nelder_mead(std::cref(crit), s, model.box(), cfg.outer);
    ++rep.starts;
    rep.outer_evaluations += r.evaluations;
    if (r.value < best.value) best = r;
  }
  rep.inner_failures = crit.failures();
  if (model.name() == "orderstat3") rep.location = x.mean();

  if (!std::isfinite(best.value)) {
    rep.failed = true;
    rep.message = "no start reached a finite divergence";
    if (!starts.empty()) rep.theta = starts.front();
    return rep;
  }

  rep.theta = best.x;
  rep.outer_converged = best.converged;
  rep.boundary = model.box().near_boundary(rep.theta);
  const auto fin = crit.solve(rep.theta);
  rep.xi = fin.xi;
  rep.criterion = fin.criterion();
  rep.inner_status = fin.status;
  if (fin.status != DualStatus::converged) {
    rep.message = "inner solve at the optimum ended with status " + to_string(fin.status);
  } else if (rep.on_boundary()) {
    rep.message = "estimate pinned at the parameter box";
  }
  return rep;
}

/// Gradient of D(theta) through the envelope theorem, J_f(theta)^T xi*(theta).
inline Eigen::VectorXd envelope_gradient(const SplqModel& model, const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& xi) {
  return model.jacobian(theta).matrix.transpose() * xi;
}

// ---------------------------------------------------------------------------
// Transport (quadratic Wasserstein) fit

struct TransportReport {
  Eigen::VectorXd theta;
  double cost = std::numeric_limits<double>::infinity();
  bool monotone = false;
  int evaluations = 0;
  bool failed = false;
};

inline TransportReport fit_transport(const SortedSample& x, const SplqModel& model, const FitConfig& cfg = {}) {
  auto cost = [&](const Eigen::VectorXd& th) {
    try {
      return wasserstein_fit_inner(x, model.basis(), model.target(th)).cost;
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  std::vector<Eigen::VectorXd> starts;
  if (auto s = model.start(x)) starts.push_back(*s);
  if (cfg.use_box_center) starts.push_back(model.box().center());
  TransportReport rep;
  NelderMeadResult best;
  for (const auto& s : starts) {
    const auto r = nelder_mead(cost, s, model.box(), cfg.outer);
    rep.evaluations += r.evaluations;
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value)) {
    rep.failed = true;
    return rep;
  }
  rep.theta = best.x;
  const auto t = wasserstein_fit_inner(x, model.basis(), model.target(best.x));
  rep.cost = t.cost;
  rep.monotone = t.monotone;
  return rep;
}

// ---------------------------------------------------------------------------
// Asymptotics

/**
 * Sigma_n for the empirical cdf: F_n = i/n on [x_(i), x_(i+1)), so the double
 * integral collapses to sum_{i,j} (min(u_i,u_j) - u_i u_j) g_i g_j^T with
 * g_i = K'(i/n) D_i. Evaluated in O(n p^2) with prefix sums.
 */
inline Eigen::MatrixXd stigler_covariance_empirical(const SortedSample& x, const PolyBasis& basis) {
  const auto p = static_cast<Eigen::Index>(basis.size());
  const double n = static_cast<double>(x.n());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd prefix = Eigen::VectorXd::Zero(p);  // sum_{i<=j} u_i g_i
  for (std::size_t i = 0; i + 1 < x.n(); ++i) {
    const double d = x.spacings()[i];
    if (d == 0.0) continue;
    const double u = static_cast<double>(i + 1) / n;
    const Eigen::VectorXd g = basis.derivative(u) * d;
    prefix += u * g;
    // pairs (i', i) with i' <= i contribute u_i' (1 - u_i); the diagonal is added twice below
    s.noalias() += (1.0 - u) * (prefix * g.transpose() + g * prefix.transpose());
    s.noalias() -= u * (1.0 - u) * (g * g.transpose());
  }
  return 0.5 * (s + s.transpose());
}

/// M, H, P and the covariance blocks from Sigma, Omega and J_0.
inline AsymptoticBlocks asymptotic_blocks(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& omega,
                                          const Eigen::MatrixXd& jac, std::size_t n) {
  AsymptoticBlocks b;
  b.sigma = sigma;
  b.omega = omega;
  b.jacobian = jac;

  const Eigen::JacobiSVD<Eigen::MatrixXd> so(omega);
  const auto& ov = so.singularValues();
  b.omega_condition = ov.minCoeff() > 0.0 ? ov.maxCoeff() / ov.minCoeff() : std::numeric_limits<double>::infinity();
  const Eigen::JacobiSVD<Eigen::MatrixXd> sj(jac);
  const auto& jv = sj.singularValues();
  b.jacobian_condition = jv.minCoeff() > 0.0 ? jv.maxCoeff() / jv.minCoeff() : std::numeric_limits<double>::infinity();
  if (!(b.omega_condition < 1e13) || !(b.jacobian_condition < 1e10)) {
    std::ostringstream os;
    os << "asymptotic covariance: Omega condition " << b.omega_condition << ", J_0 condition "
       << b.jacobian_condition;
    throw EstimationError(os.str());
  }

  const Eigen::LDLT<Eigen::MatrixXd> oi(omega);
  const Eigen::MatrixXd oinv_j = oi.solve(jac);
  Eigen::MatrixXd info = jac.transpose() * oinv_j;
  info = (0.5 * (info + info.transpose())).eval();
  b.m = info.ldlt().solve(Eigen::MatrixXd::Identity(jac.cols(), jac.cols()));
  b.m = (0.5 * (b.m + b.m.transpose())).eval();
  b.h = b.m * oinv_j.transpose();
  Eigen::MatrixXd oinv = oi.solve(Eigen::MatrixXd::Identity(omega.rows(), omega.cols()));
  oinv = (0.5 * (oinv + oinv.transpose())).eval();
  b.p = oinv - oinv_j * b.m * oinv_j.transpose();
  b.p = (0.5 * (b.p + b.p.transpose())).eval();

  const double nn = static_cast<double>(n);
  b.cov_theta = b.h * sigma * b.h.transpose() / nn;
  b.cov_theta = (0.5 * (b.cov_theta + b.cov_theta.transpose())).eval();
  b.cov_xi = b.p * sigma * b.p.transpose() / nn;
  b.cov_xi = (0.5 * (b.cov_xi + b.cov_xi.transpose())).eval();
  return b;
}

/// Blocks with Sigma and Omega from the fitted parametric law at theta.
inline AsymptoticBlocks asymptotic_covariance(const Eigen::VectorXd& theta, const SplqModel& model, std::size_t n,
                                              const CovarianceQuadConfig& quad = {}) {
  const ParametricFamily law = model.law(theta);
  const auto jac = model.jacobian(theta);
  auto b = asymptotic_blocks(stigler_covariance(law, model.basis(), quad), omega_population(law, model.basis()),
                             jac.matrix, n);
  b.one_sided_jacobian = jac.one_sided;
  b.plugin = Plugin::parametric;
  return b;
}

/// Blocks with Sigma_n and Omega_n from the empirical cdf of the sample.
inline AsymptoticBlocks asymptotic_covariance_empirical(const SortedSample& x, const Eigen::VectorXd& theta,
                                                        const SplqModel& model) {
  const auto jac = model.jacobian(theta);
  auto b = asymptotic_blocks(stigler_covariance_empirical(x, model.basis()), omega_empirical(x, model.basis()),
                             jac.matrix, x.n());
  b.one_sided_jacobian = jac.one_sided;
  b.plugin = Plugin::empirical;
  return b;
}

/**
 * S_n = n xi^T (P Sigma P^T)^{-1} xi. P has rank l - 1 - d, so the middle
 * matrix is normally singular; the pseudo-inverse is then used and the
 * chi-square degrees of freedom follow its rank.
 */
inline ConfidenceStat confidence_stat(const Eigen::VectorXd& xi, const Eigen::MatrixXd& p,
                                      const Eigen::MatrixXd& sigma, std::size_t n) {
  Eigen::MatrixXd mid = p * sigma * p.transpose();
  mid = (0.5 * (mid + mid.transpose())).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mid);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * top;

  ConfidenceStat out;
  out.nominal_df = static_cast<int>(xi.size());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (top > 0.0 && ev[i] > tol) {
      inv[i] = 1.0 / ev[i];
      ++out.rank;
    }
  }
  out.pseudo_inverse = out.rank < ev.size();
  out.df = out.rank;
  const Eigen::VectorXd z = es.eigenvectors().transpose() * xi;
  out.statistic = static_cast<double>(n) * z.dot(inv.cwiseProduct(z));
  if (out.rank == 0 || out.statistic <= 0.0) {
    out.statistic = std::max(out.statistic, 0.0);
    out.p_value = 1.0;
  } else {
    out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.df), out.statistic));
  }
  return out;
}

/// Fills the asymptotic blocks and S_n of a finished divergence fit.
inline void attach_asymptotics(FitReport& rep, const SortedSample& x, const SplqModel& model,
                               Plugin plugin = Plugin::parametric) {
  if (rep.failed) throw EstimationError("cannot compute asymptotics of a failed fit");
  rep.asymptotics = (plugin == Plugin::parametric && model.has_law())
                        ? asymptotic_covariance(rep.theta, model, x.n())
                        : asymptotic_covariance_empirical(x, rep.theta, model);
  rep.test = confidence_stat(rep.xi, rep.asymptotics->p, rep.asymptotics->sigma, x.n());
}

// ---------------------------------------------------------------------------
// Classical GPD estimators

struct ClassicalFit {
  std::string method;
  Eigen::Vector2d theta;  ///< (sigma, nu)
  bool boundary = false;
  int evaluations = 0;
};

inline ClassicalFit fit_lmoment_method_gpd(const SortedSample& x) {
  const auto l = sample_lmoments_v(x, 4);
  const double tau4 = l(2) > 0.0 ? l(4) / l(2) : std::numeric_limits<double>::quiet_NaN();
  const auto th = gpd_from_l2_tau4(l(2), tau4);
  if (!th) {
    std::ostringstream os;
    os << "L-moment method: tau_4 = " << tau4 << " cannot be inverted";
    throw EstimationError(os.str());
  }
  return {"lmom", *th, false, 0};
}

/// Skewness of GPD(., nu), finite for nu < 1/3.
inline double gpd_skewness(double nu) {
  return 2.0 * (1.0 + nu) * std::sqrt(1.0 - 2.0 * nu) / (1.0 - 3.0 * nu);
}

/// Inverts variance and skewness of the GPD; nu is bracketed in (-5, 1/3).
inline Eigen::Vector2d gpd_from_var_skew(double var, double skew) {
  constexpr double lo = -5.0, hi = 1.0 / 3.0 - 1e-6;
  if (!(var > 0.0) || !std::isfinite(skew) || skew <= gpd_skewness(lo) || skew >= gpd_skewness(hi)) {
    std::ostringstream os;
    os << "moment method: skewness " << skew << " outside the GPD range";
    throw EstimationError(os.str());
  }
  auto g = [&](double nu) { return gpd_skewness(nu) - skew; };
  const auto r = boost::math::tools::bisect(g, lo, hi, boost::math::tools::eps_tolerance<double>(52));
  const double nu = 0.5 * (r.first + r.second);
  return {std::sqrt(var * (1.0 - nu) * (1.0 - nu) * (1.0 - 2.0 * nu)), nu};
}

/// Variance with divisor n - 1 and skewness m_3 / m_2^{3/2} with divisor n.
inline ClassicalFit fit_moment_method_gpd(const SortedSample& x) {
  const double n = static_cast<double>(x.n());
  const double mean = x.mean();
  double m2 = 0.0, m3 = 0.0;
  for (double v : x.values()) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double var = m2 / (n - 1.0);
  const double skew = m2 > 0.0 ? (m3 / n) / std::pow(m2 / n, 1.5) : std::numeric_limits<double>::quiet_NaN();
  return {"moment", gpd_from_var_skew(var, skew), false, 0};
}

inline double gpd_negative_loglik(const SortedSample& x, double sigma, double nu) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (!(sigma > 0.0) || !std::isfinite(nu)) return kInf;
  if (nu < 0.0 && x.values().back() >= -sigma / nu) return kInf;
  const ParametricFamily law = ParametricFamily::gpd(sigma, nu);
  double s = 0.0;
  for (double v : x.values()) s -= law.log_density(v);
  return std::isnan(s) ? kInf : s;
}

struct MleConfig {
  ParameterBox box{Eigen::Vector2d(1e-8, -1.0), Eigen::Vector2d(1e8, 10.0)};
  std::optional<double> fixed_nu;
  NelderMeadConfig nm;
};

/// GPD maximum likelihood with location 0; starts from the moment and L-moment estimates.
inline ClassicalFit fit_mle_gpd(const SortedSample& x, const MleConfig& cfg = {}) {
  if (x.values().front() < 0.0) throw std::invalid_argument("GPD MLE: observations must be nonnegative");
  const double xmax = x.values().back();
  if (!(xmax > 0.0)) throw EstimationError("GPD MLE: all observations are zero");

  ClassicalFit out;
  out.method = "mle";
  if (cfg.fixed_nu) {
    const double nu = *cfg.fixed_nu;
    ParameterBox b1{Eigen::VectorXd::Constant(1, cfg.box.lo[0]), Eigen::VectorXd::Constant(1, cfg.box.hi[0])};
    const double s0 = nu < 0.0 ? std::max(x.mean(), -1.1 * nu * xmax) : x.mean();
    const auto r = nelder_mead([&](const Eigen::VectorXd& s) { return gpd_negative_loglik(x, s[0], nu); },
                               Eigen::VectorXd::Constant(1, s0), b1, cfg.nm);
    out.theta = Eigen::Vector2d(r.x[0], nu);
    out.evaluations = r.evaluations;
    return out;
  }

  std::vector<Eigen::VectorXd> starts;
  auto repair = [&](Eigen::Vector2d th) {
    th = cfg.box.clamp(th);
    if (th[1] < 0.0) th[0] = std::max(th[0], -1.05 * th[1] * xmax);
    return Eigen::VectorXd(th);
  };
  try {
    starts.push_back(repair(fit_moment_method_gpd(x).theta));
  } catch (const EstimationError&) {
  }
  try {
    starts.push_back(repair(fit_lmoment_method_gpd(x).theta));
  } catch (const EstimationError&) {
  }
  starts.push_back(repair(Eigen::Vector2d(x.mean(), 0.0)));

  auto nll = [&](const Eigen::VectorXd& th) { return gpd_negative_loglik(x, th[0], th[1]); };
  NelderMeadResult best;
  for (const auto& s : starts) {
    const auto r = nelder_mead(nll, s, cfg.box, cfg.nm);
    out.evaluations += r.evaluations;
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value)) throw EstimationError("GPD MLE: likelihood is not finite at any start");
  out.theta = best.x;
  // likelihood pushed to the support edge or the box
  const double edge = out.theta[1] < 0.0 ? -out.theta[0] / out.theta[1] : std::numeric_limits<double>::infinity();
  const auto nb = cfg.box.near_boundary(out.theta);
  out.boundary = nb[0] || nb[1] || (edge - xmax) <= 1e-6 * xmax;
  return out;
}

}  // namespace lmdiv
