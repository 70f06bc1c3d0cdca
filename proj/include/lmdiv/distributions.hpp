#pragma once

/**
 * @file distributions.hpp
 * @brief Generalized Pareto and Weibull laws with location fixed at 0.
 *
 * GPD(σ, ν): F(x) = 1 - (1 + νx/σ)^(-1/ν), heavy tailed for ν > 0, support
 * [0, -σ/ν] for ν < 0. Weibull(σ, ν): F(x) = 1 - exp(-(x/σ)^ν).
 */

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmdiv {

enum class FamilyKind { gpd, weibull };

inline std::string family_name(FamilyKind k) { return k == FamilyKind::gpd ? "gpd" : "weibull"; }

inline FamilyKind parse_family(const std::string& name) {
  if (name == "gpd") return FamilyKind::gpd;
  if (name == "weibull") return FamilyKind::weibull;
  throw std::invalid_argument("unknown family '" + name + "' (expected gpd or weibull)");
}

/// Uniform draw strictly inside (0,1) on a 2^-53 grid.
inline double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

class ParametricFamily {
 public:
  ParametricFamily(FamilyKind kind, double sigma, double nu) : kind_(kind), sigma_(sigma), nu_(nu) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("scale must be positive and finite");
    }
    if (!std::isfinite(nu) || (kind == FamilyKind::weibull && !(nu > 0.0))) {
      throw std::invalid_argument("invalid shape for " + family_name(kind));
    }
  }

  static ParametricFamily gpd(double sigma, double nu) { return {FamilyKind::gpd, sigma, nu}; }
  static ParametricFamily weibull(double sigma, double nu) {
    return {FamilyKind::weibull, sigma, nu};
  }

  FamilyKind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  double nu() const { return nu_; }
  std::string name() const { return family_name(kind_); }

  /// Right end of the support (infinite unless GPD with ν < 0).
  double upper_bound() const {
    if (kind_ == FamilyKind::gpd && nu_ < 0.0) return -sigma_ / nu_;
    return std::numeric_limits<double>::infinity();
  }

  double log_density(double x) const {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    if (x < 0.0 || x > upper_bound()) return kNegInf;
    if (kind_ == FamilyKind::gpd) {
      if (nu_ == 0.0) return -std::log(sigma_) - x / sigma_;
      const double z = nu_ * x / sigma_;
      if (nu_ == -1.0) return -std::log(sigma_);
      return -std::log(sigma_) - (1.0 / nu_ + 1.0) * std::log1p(z);
    }
    const double z = x / sigma_;
    if (z == 0.0) {
      if (nu_ < 1.0) return std::numeric_limits<double>::infinity();
      if (nu_ == 1.0) return -std::log(sigma_);
      return kNegInf;
    }
    return std::log(nu_ / sigma_) + (nu_ - 1.0) * std::log(z) - std::pow(z, nu_);
  }

  double density(double x) const { return std::exp(log_density(x)); }

  double survival(double x) const {
    if (x <= 0.0) return 1.0;
    if (x >= upper_bound()) return 0.0;
    if (kind_ == FamilyKind::gpd) {
      if (nu_ == 0.0) return std::exp(-x / sigma_);
      return std::exp(-std::log1p(nu_ * x / sigma_) / nu_);
    }
    return std::exp(-std::pow(x / sigma_, nu_));
  }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= upper_bound()) return 1.0;
    if (kind_ == FamilyKind::gpd) {
      if (nu_ == 0.0) return -std::expm1(-x / sigma_);
      return -std::expm1(-std::log1p(nu_ * x / sigma_) / nu_);
    }
    return -std::expm1(-std::pow(x / sigma_, nu_));
  }

  /// Quantile given both u and tail = 1 - u; the smaller one drives accuracy.
  double quantile(double u, double tail) const {
    if (kind_ == FamilyKind::gpd) {
      const double log_tail = u < 0.5 ? std::log1p(-u) : std::log(tail);
      if (nu_ == 0.0) return -sigma_ * log_tail;
      return sigma_ * std::expm1(-nu_ * log_tail) / nu_;
    }
    const double e = u < 0.5 ? -std::log1p(-u) : -std::log(tail);
    return sigma_ * std::pow(e, 1.0 / nu_);
  }

  double quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("quantile level outside [0,1]");
    if (u == 0.0) return 0.0;
    if (u == 1.0) return upper_bound();
    return quantile(u, 1.0 - u);
  }

  /// dQ/du at (u, tail = 1 - u).
  double quantile_density(double u, double tail) const {
    if (kind_ == FamilyKind::gpd) {
      const double log_tail = u < 0.5 ? std::log1p(-u) : std::log(tail);
      return sigma_ * std::exp(-(nu_ + 1.0) * log_tail);
    }
    const double e = u < 0.5 ? -std::log1p(-u) : -std::log(tail);
    return sigma_ / nu_ * std::pow(e, 1.0 / nu_ - 1.0) / tail;
  }

  /// Inverse-cdf sampler; consumes exactly n draws from rng.
  std::vector<double> sample(std::size_t n, std::mt19937_64& rng) const {
    std::vector<double> out(n);
    for (auto& x : out) {
      const double u = uniform_open(rng);
      x = quantile(u, 1.0 - u);
    }
    return out;
  }

 private:
  FamilyKind kind_;
  double sigma_;
  double nu_;
};

}  // namespace lmdiv
