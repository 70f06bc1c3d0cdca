#pragma once

/**
 * @file divergence.hpp
 * @brief Power divergences phi_gamma and their convex conjugates psi.
 *
 * phi_gamma(x) = (x^g - g x + g - 1) / (g (g - 1)), with the limits
 * x log x - x + 1 (g -> 1, "kl") and -log x + x - 1 (g -> 0, "klm").
 * For a = 1 + (g - 1) t > 0 the conjugate is psi(t) = (a^(g/(g-1)) - 1) / g,
 * psi'(t) = a^(1/(g-1)) and psi''(t) = a^((2-g)/(g-1)).
 *
 * phi returns +inf off its domain; psi and its derivatives throw
 * std::domain_error off theirs.
 */

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace lmdiv {

struct Interval {
  double lo;
  double hi;
  bool contains_open(double t) const { return t > lo && t < hi; }
};

class Divergence {
 public:
  enum class Family { chi2, kl, klm, power };

  static Divergence chi2() { return Divergence(Family::chi2, 2.0); }
  static Divergence kl() { return Divergence(Family::kl, 1.0); }
  static Divergence klm() { return Divergence(Family::klm, 0.0); }

  /// Power member; gamma near 0, 1 or equal to 2 maps onto the closed-form branches.
  static Divergence power(double gamma) {
    if (!std::isfinite(gamma)) throw std::invalid_argument("power divergence: gamma must be finite");
    if (std::abs(gamma) < 1e-6) return klm();
    if (std::abs(gamma - 1.0) < 1e-6) return kl();
    if (gamma == 2.0) return chi2();
    return Divergence(Family::power, gamma);
  }

  /// Accepts chi2, kl, klm and power:<gamma>.
  static Divergence parse(const std::string& name) {
    if (name == "chi2") return chi2();
    if (name == "kl") return kl();
    if (name == "klm") return klm();
    const std::string prefix = "power:";
    if (name.rfind(prefix, 0) == 0) {
      const std::string arg = name.substr(prefix.size());
      std::size_t used = 0;
      double g = 0.0;
      try {
        g = std::stod(arg, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != arg.size()) {
        throw std::invalid_argument("power divergence: cannot parse gamma from '" + name + "'");
      }
      return power(g);
    }
    throw std::invalid_argument("unknown divergence '" + name +
                                "' (expected chi2, kl, klm or power:<gamma>)");
  }

  Family family() const { return family_; }
  double gamma() const { return gamma_; }

  std::string name() const {
    switch (family_) {
      case Family::chi2: return "chi2";
      case Family::kl: return "kl";
      case Family::klm: return "klm";
      case Family::power: break;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "power:%.17g", gamma_);
    return buf;
  }

  /// Closure of the domain of phi.
  Interval phi_domain() const {
    if (family_ == Family::chi2) return {-kInf, kInf};
    return {0.0, kInf};
  }

  /// Open domain of psi.
  Interval psi_domain() const {
    switch (family_) {
      case Family::chi2:
      case Family::kl: return {-kInf, kInf};
      case Family::klm: return {-kInf, 1.0};
      case Family::power: break;
    }
    const double edge = 1.0 / (1.0 - gamma_);  // a = 0
    return gamma_ > 1.0 ? Interval{edge, kInf} : Interval{-kInf, edge};
  }

  bool in_psi_domain(double t) const { return psi_domain().contains_open(t); }

  double phi(double x) const {
    if (std::isnan(x)) return kInf;
    switch (family_) {
      case Family::chi2: return 0.5 * (x - 1.0) * (x - 1.0);
      case Family::kl:
        if (x < 0.0) return kInf;
        if (x == 0.0) return 1.0;
        return x * std::log(x) - x + 1.0;
      case Family::klm:
        if (x <= 0.0) return kInf;
        return -std::log(x) + x - 1.0;
      case Family::power: break;
    }
    if (x < 0.0 || (x == 0.0 && gamma_ < 0.0)) return kInf;
    const double g = gamma_;
    return (std::pow(x, g) - g * x + g - 1.0) / (g * (g - 1.0));
  }

  double phi_prime(double x) const {
    check_phi_interior(x);
    switch (family_) {
      case Family::chi2: return x - 1.0;
      case Family::kl: return std::log(x);
      case Family::klm: return 1.0 - 1.0 / x;
      case Family::power: break;
    }
    return (std::pow(x, gamma_ - 1.0) - 1.0) / (gamma_ - 1.0);
  }

  double phi_second(double x) const {
    check_phi_interior(x);
    switch (family_) {
      case Family::chi2: return 1.0;
      case Family::kl: return 1.0 / x;
      case Family::klm: return 1.0 / (x * x);
      case Family::power: break;
    }
    return std::pow(x, gamma_ - 2.0);
  }

  double psi(double t) const {
    check_psi(t);
    switch (family_) {
      case Family::chi2: return 0.5 * t * t + t;
      case Family::kl: return std::expm1(t);
      case Family::klm: return -std::log1p(-t);
      case Family::power: break;
    }
    const double a = 1.0 + (gamma_ - 1.0) * t;
    return std::expm1(gamma_ / (gamma_ - 1.0) * std::log(a)) / gamma_;
  }

  double psi_prime(double t) const {
    check_psi(t);
    switch (family_) {
      case Family::chi2: return t + 1.0;
      case Family::kl: return std::exp(t);
      case Family::klm: return 1.0 / (1.0 - t);
      case Family::power: break;
    }
    const double a = 1.0 + (gamma_ - 1.0) * t;
    return std::pow(a, 1.0 / (gamma_ - 1.0));
  }

  double psi_second(double t) const {
    check_psi(t);
    switch (family_) {
      case Family::chi2: return 1.0;
      case Family::kl: return std::exp(t);
      case Family::klm: {
        const double d = 1.0 - t;
        return 1.0 / (d * d);
      }
      case Family::power: break;
    }
    const double a = 1.0 + (gamma_ - 1.0) * t;
    return std::pow(a, (2.0 - gamma_) / (gamma_ - 1.0));
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  Divergence(Family f, double g) : family_(f), gamma_(g) {}

  void check_psi(double t) const {
    if (!in_psi_domain(t)) {
      throw std::domain_error("psi argument " + std::to_string(t) + " outside the domain of " + name());
    }
  }

  void check_phi_interior(double x) const {
    const auto d = phi_domain();
    if (!(x > d.lo && x < d.hi)) {
      throw std::domain_error("phi derivative at " + std::to_string(x) + " outside the domain of " + name());
    }
  }

  Family family_;
  double gamma_;
};

}  // namespace lmdiv
