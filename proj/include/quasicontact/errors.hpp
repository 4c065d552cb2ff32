#pragma once

#include <stdexcept>
#include <string>

namespace qc {

/// Input with the wrong length or dimension for the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that violates a model assumption (positivity, normalization, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative method that did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Operation that requires kappa * r == 1 was called off-critical.
class CriticalityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Momentum p = 0 (or a mode where 2 - 2 Re alpha_hat(p) <= 0) was requested.
class SingularModeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Explicit time step outside the stability region of the integrator.
class StabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Estimator queried on a sample with no particles.
class EmptySampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qc
