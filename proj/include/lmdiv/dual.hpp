#pragma once

/**
 * @file dual.hpp
 * @brief The inner problem for fixed theta: maximize
 *   xi^T f - sum_i psi(xi^T K_i) D_i,  K_i = K(i/n), D_i = x_{i+1:n} - x_{i:n},
 * plus the chi-square closed form, a primal oracle over spacings and the
 * quadratic transport projection.
 *
 * Nodes with a zero spacing carry no mass: they are dropped when the skeleton
 * is built, so they neither contribute to sums nor restrict the domain.
 */

#include "lmdiv/divergence.hpp"
#include "lmdiv/lmoments.hpp"
#include "lmdiv/poly.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmdiv {

/// Sample-dependent part of every dual problem; shared across theta values.
class DualSkeleton {
 public:
  DualSkeleton(const SortedSample& x, PolyBasis basis) : basis_(std::move(basis)), n_(x.n()) {
    const auto p = static_cast<Eigen::Index>(basis_.size());
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < x.spacings().size(); ++i) {
      if (x.spacings()[i] > 0.0) keep.push_back(i);
    }
    nodes_.resize(p, static_cast<Eigen::Index>(keep.size()));
    spacings_.resize(static_cast<Eigen::Index>(keep.size()));
    grid_.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const double t = static_cast<double>(keep[k] + 1) / static_cast<double>(n_);
      grid_[col] = t;
      nodes_.col(col) = basis_(t);
      spacings_[col] = x.spacings()[keep[k]];
    }
    m_n_ = nodes_ * spacings_;
    omega_ = nodes_ * spacings_.asDiagonal() * nodes_.transpose();
    omega_ = (0.5 * (omega_ + omega_.transpose())).eval();
  }

  const PolyBasis& basis() const { return basis_; }
  std::size_t n() const { return n_; }
  Eigen::Index dim() const { return nodes_.rows(); }
  /// Number of positive-spacing nodes.
  Eigen::Index active() const { return nodes_.cols(); }
  /// K(i/n) for the active nodes, one column each.
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& spacings() const { return spacings_; }
  /// i/n of the active nodes.
  const Eigen::VectorXd& grid() const { return grid_; }
  /// m_n = sum_i K(i/n) D_i.
  const Eigen::VectorXd& m_n() const { return m_n_; }
  /// Omega_n = sum_i K(i/n) K(i/n)^T D_i.
  const Eigen::MatrixXd& omega() const { return omega_; }

 private:
  PolyBasis basis_;
  std::size_t n_;
  Eigen::MatrixXd nodes_;
  Eigen::VectorXd spacings_;
  Eigen::VectorXd grid_;
  Eigen::VectorXd m_n_;
  Eigen::MatrixXd omega_;
};

inline Eigen::VectorXd empirical_constraint_moments(const SortedSample& x, const PolyBasis& basis) {
  return DualSkeleton(x, basis).m_n();
}

inline Eigen::MatrixXd omega_empirical(const SortedSample& x, const PolyBasis& basis) {
  return DualSkeleton(x, basis).omega();
}

class DualProblem {
 public:
  DualProblem(std::shared_ptr<const DualSkeleton> skeleton, Eigen::VectorXd f, Divergence div)
      : sk_(std::move(skeleton)), f_(std::move(f)), div_(div) {
    if (f_.size() != sk_->dim()) throw std::invalid_argument("dual problem: target dimension mismatch");
  }
  DualProblem(const SortedSample& x, const PolyBasis& basis, Eigen::VectorXd f, Divergence div)
      : DualProblem(std::make_shared<const DualSkeleton>(x, basis), std::move(f), div) {}

  const DualSkeleton& skeleton() const { return *sk_; }
  const Eigen::VectorXd& target() const { return f_; }
  const Divergence& divergence() const { return div_; }

  /// Node arguments xi^T K_i; throws std::domain_error when one leaves dom psi.
  Eigen::VectorXd arguments(const Eigen::VectorXd& xi) const {
    Eigen::VectorXd t = sk_->nodes().transpose() * xi;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!div_.in_psi_domain(t[i])) {
        throw std::domain_error("dual: node " + std::to_string(i) + " outside the domain of psi");
      }
    }
    return t;
  }

  double objective(const Eigen::VectorXd& xi) const {
    const Eigen::VectorXd t = arguments(xi);
    double s = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) s += div_.psi(t[i]) * sk_->spacings()[i];
    return xi.dot(f_) - s;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& xi) const {
    const Eigen::VectorXd t = arguments(xi);
    Eigen::VectorXd w(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) w[i] = div_.psi_prime(t[i]) * sk_->spacings()[i];
    return f_ - sk_->nodes() * w;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& xi) const {
    const Eigen::VectorXd t = arguments(xi);
    Eigen::VectorXd w(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) w[i] = div_.psi_second(t[i]) * sk_->spacings()[i];
    Eigen::MatrixXd h = -(sk_->nodes() * w.asDiagonal() * sk_->nodes().transpose());
    return 0.5 * (h + h.transpose());
  }

 private:
  std::shared_ptr<const DualSkeleton> sk_;
  Eigen::VectorXd f_;
  Divergence div_;
};

inline Eigen::VectorXd dual_gradient(const DualProblem& p, const Eigen::VectorXd& xi) { return p.gradient(xi); }
inline double dual_objective(const DualProblem& p, const Eigen::VectorXd& xi) { return p.objective(xi); }
inline Eigen::MatrixXd dual_hessian(const DualProblem& p, const Eigen::VectorXd& xi) { return p.hessian(xi); }

enum class DualStatus { converged, max_iter, infeasible_direction };

inline std::string to_string(DualStatus s) {
  switch (s) {
    case DualStatus::converged: return "converged";
    case DualStatus::max_iter: return "maxIter";
    case DualStatus::infeasible_direction: return "infeasibleDirection";
  }
  return "unknown";
}

struct DualSolution {
  Eigen::VectorXd xi;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  DualStatus status = DualStatus::max_iter;

  /// Criterion seen by the outer search: +inf when the target is unreachable.
  double criterion() const {
    return status == DualStatus::infeasible_direction ? std::numeric_limits<double>::infinity() : value;
  }
};

struct DualConfig {
  int max_iter = 200;
  double grad_tol = 1e-9;  ///< scaled by 1 + ||f||
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  double domain_margin = 1e-12;
  double unbounded_value = 1e12;
};

namespace detail {

inline bool strictly_inside(const Divergence& d, const Eigen::VectorXd& t, double margin) {
  const Interval dom = d.psi_domain();
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t[i] > dom.lo + margin && t[i] < dom.hi - margin)) return false;
  }
  return true;
}

/// Newton direction for the concave objective: solve (-H) d = g.
inline Eigen::VectorXd ascent_direction(const Eigen::MatrixXd& neg_h, const Eigen::VectorXd& g) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
    Eigen::VectorXd d = ldlt.solve(g);
    if (d.allFinite()) return d;
  }
  const double scale = std::max(1.0, neg_h.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd reg = neg_h;
  for (double eps = 1e-12; eps <= 1.0; eps *= 100.0) {
    reg.diagonal() = neg_h.diagonal().array() + eps * scale;
    Eigen::LDLT<Eigen::MatrixXd> r(reg);
    if (r.info() == Eigen::Success && (r.vectorD().array() > 0.0).all()) return r.solve(g);
  }
  return g;
}

}  // namespace detail

/**
 * Damped Newton ascent from xi = 0. Steps are halved until every active node
 * stays inside dom psi by the margin and the Armijo condition holds.
 */
inline DualSolution solve_dual(const DualProblem& p, const DualConfig& cfg = {}) {
  const auto& sk = p.skeleton();
  const auto& div = p.divergence();
  const Eigen::VectorXd& f = p.target();
  const double tol = cfg.grad_tol * (1.0 + f.norm());

  DualSolution sol;
  sol.xi = Eigen::VectorXd::Zero(sk.dim());
  sol.value = 0.0;
  Eigen::VectorXd t = Eigen::VectorXd::Zero(sk.active());

  for (int it = 0; it <= cfg.max_iter; ++it) {
    Eigen::VectorXd w1(t.size()), w2(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      w1[i] = div.psi_prime(t[i]) * sk.spacings()[i];
      w2[i] = div.psi_second(t[i]) * sk.spacings()[i];
    }
    const Eigen::VectorXd g = f - sk.nodes() * w1;
    sol.grad_norm = g.lpNorm<Eigen::Infinity>();
    sol.iterations = it;
    if (sol.grad_norm <= tol) {
      sol.status = DualStatus::converged;
      return sol;
    }
    if (it == cfg.max_iter) break;

    Eigen::MatrixXd neg_h = sk.nodes() * w2.asDiagonal() * sk.nodes().transpose();
    neg_h = (0.5 * (neg_h + neg_h.transpose())).eval();
    const Eigen::VectorXd d = detail::ascent_direction(neg_h, g);
    const Eigen::VectorXd td = sk.nodes().transpose() * d;
    const double slope = g.dot(d);

    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, alpha *= cfg.backtrack) {
      const Eigen::VectorXd t_new = t + alpha * td;
      if (!detail::strictly_inside(div, t_new, cfg.domain_margin)) continue;
      double s = 0.0;
      for (Eigen::Index i = 0; i < t_new.size(); ++i) s += div.psi(t_new[i]) * sk.spacings()[i];
      const Eigen::VectorXd xi_new = sol.xi + alpha * d;
      const double v_new = xi_new.dot(f) - s;
      if (!std::isfinite(v_new)) continue;
      if (v_new >= sol.value + cfg.armijo * alpha * slope) {
        sol.xi = xi_new;
        sol.value = v_new;
        t = t_new;
        accepted = true;
        break;
      }
    }
    if (sol.value > cfg.unbounded_value) {
      sol.status = DualStatus::infeasible_direction;
      sol.iterations = it + 1;
      return sol;
    }
    if (!accepted) {
      // No ascent left at working precision: converged if the step is already negligible.
      sol.status = (std::abs(slope) <= 1e-20 * (1.0 + std::abs(sol.value))) ? DualStatus::converged
                                                                            : DualStatus::max_iter;
      return sol;
    }
  }
  sol.status = DualStatus::max_iter;
  return sol;
}

struct Chi2ClosedForm {
  double value;
  Eigen::VectorXd xi;
};

/// xi* = Omega_n^{-1} (f - m_n), value = (f - m_n)^T Omega_n^{-1} (f - m_n) / 2.
inline Chi2ClosedForm chi2_value_closed_form(const DualSkeleton& sk, const Eigen::VectorXd& f) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sk.omega());
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    throw std::domain_error("chi2 closed form: Omega_n is singular");
  }
  const Eigen::VectorXd r = f - sk.m_n();
  Eigen::VectorXd xi = ldlt.solve(r);
  return {0.5 * r.dot(xi), std::move(xi)};
}

inline Chi2ClosedForm chi2_value_closed_form(const SortedSample& x, const PolyBasis& basis,
                                             const Eigen::VectorXd& f) {
  return chi2_value_closed_form(DualSkeleton(x, basis), f);
}

struct PrimalSolution {
  double value;
  Eigen::VectorXd spacings;  ///< candidate spacings s_i, zero where the data spacing is zero
  Eigen::VectorXd xi;        ///< multiplier recovered from the KKT system
  int iterations;
};

/**
 * Oracle: minimize sum_i phi(s_i / D_i) D_i subject to sum_i K_i s_i = f by
 * infeasible-start Newton on the KKT system, in the ratios z_i = s_i / D_i.
 */
inline PrimalSolution primal_bruteforce(const SortedSample& x, const PolyBasis& basis,
                                        const Eigen::VectorXd& f, const Divergence& div) {
  if (x.n() > 50) throw std::invalid_argument("primal oracle is limited to n <= 50");
  const DualSkeleton sk(x, basis);
  const Eigen::MatrixXd a = sk.nodes() * sk.spacings().asDiagonal();  // p x m
  const Eigen::VectorXd& dlt = sk.spacings();
  const Eigen::Index m = sk.active(), p = sk.dim();
  if (m == 0) throw std::domain_error("primal oracle: all spacings are zero");
  {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < p) throw std::domain_error("primal oracle: constraint rows are rank deficient");
  }
  const Interval dom = div.phi_domain();

  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  auto grad = [&](const Eigen::VectorXd& zz) {
    Eigen::VectorXd g(m);
    for (Eigen::Index i = 0; i < m; ++i) g[i] = div.phi_prime(zz[i]) * dlt[i];
    return g;
  };
  auto residual = [&](const Eigen::VectorXd& zz, const Eigen::VectorXd& ww) {
    Eigen::VectorXd r(m + p);
    r.head(m) = grad(zz) + a.transpose() * ww;
    r.tail(p) = a * zz - f;
    return r.norm();
  };
  const double scale = 1.0 + f.norm() + dlt.sum();
  int it = 0;
  for (; it < 500; ++it) {
    const Eigen::VectorXd g = grad(z);
    Eigen::VectorXd hdiag(m);
    for (Eigen::Index i = 0; i < m; ++i) hdiag[i] = div.phi_second(z[i]) * dlt[i];
    const Eigen::VectorXd rp = f - a * z;
    const double r0 = residual(z, w);
    if (r0 <= 1e-14 * scale) break;
    // Schur complement: (A D^-1 A^T) w_new = -A D^-1 g - rp
    const Eigen::MatrixXd adi = a * hdiag.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd s = adi * a.transpose();
    const Eigen::VectorXd w_new = s.ldlt().solve(-adi * g - rp);
    const Eigen::VectorXd dz = hdiag.cwiseInverse().asDiagonal() * (-g - a.transpose() * w_new);
    const Eigen::VectorXd dw = w_new - w;
    double step = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 80; ++bt, step *= 0.5) {
      const Eigen::VectorXd zn = z + step * dz;
      if (!((zn.array() > dom.lo).all() && (zn.array() < dom.hi).all())) continue;
      const Eigen::VectorXd wn = w + step * dw;
      if (residual(zn, wn) <= (1.0 - 0.01 * step) * r0) {
        z = zn;
        w = wn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (residual(z, w) > 1e-8 * scale) {
    throw std::runtime_error("primal oracle did not converge (infeasible target?)");
  }
  double value = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) value += div.phi(z[i]) * dlt[i];

  Eigen::VectorXd s_full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.n() - 1));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i + 1 < x.n(); ++i) {
    if (x.spacings()[i] > 0.0) {
      s_full[static_cast<Eigen::Index>(i)] = z[k] * dlt[k];
      ++k;
    }
  }
  return {value, s_full, -w, it};
}

struct TransportFit {
  double cost;
  Eigen::VectorXd y;
  Eigen::VectorXd multiplier;
  bool monotone;
  double lagrangian_residual;
};

/**
 * Projection of the sample onto {y : sum_i K(i/n)(y_{i+1} - y_i) = f} in the
 * metric (1/n) sum (x_i - y_i)^2, solved through its KKT system. Monotonicity
 * of y is reported, not enforced.
 */
inline TransportFit wasserstein_fit_inner(const SortedSample& x, const PolyBasis& basis,
                                          const Eigen::VectorXd& f) {
  const std::size_t n = x.n();
  const auto p = static_cast<Eigen::Index>(basis.size());
  if (f.size() != p) throw std::invalid_argument("transport fit: target dimension mismatch");
  const double nd = static_cast<double>(n);
  // column j (0-based) multiplies y_{j+1}: K(j/n) - K((j+1)/n)
  Eigen::MatrixXd b(p, static_cast<Eigen::Index>(n));
  Eigen::VectorXd prev = basis(0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::VectorXd next = basis(static_cast<double>(j + 1) / nd);
    b.col(static_cast<Eigen::Index>(j)) = prev - next;
    prev = next;
  }
  const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.values().data(), static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd bbt = b * b.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(bbt);
  if (lu.rank() < p) throw std::domain_error("transport fit: constraint rows are rank deficient");
  const Eigen::VectorXd mu = (2.0 / nd) * lu.solve(b * xv - f);
  TransportFit out;
  out.multiplier = mu;
  out.y = xv - (nd / 2.0) * b.transpose() * mu;
  out.cost = (xv - out.y).squaredNorm() / nd;
  out.monotone = true;
  for (Eigen::Index i = 1; i < out.y.size(); ++i) {
    if (out.y[i] < out.y[i - 1]) out.monotone = false;
  }
  out.lagrangian_residual = ((2.0 / nd) * (out.y - xv) + b.transpose() * mu).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace lmdiv
