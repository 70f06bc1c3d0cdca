#pragma once

#include <stdexcept>
#include <string>

namespace lmdiv {

/// Raised when an iterative numerical procedure (quadrature, root finding,
/// outer/inner optimization) cannot deliver a result within tolerance.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double estimate = 0.0,
                          double error_bound = 0.0)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

/// Raised by estimators whose closed-form inversion is undefined on the data.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lmdiv
