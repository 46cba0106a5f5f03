#pragma once

#include <stdexcept>
#include <string>

namespace pocbounds {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid user-supplied parameters or malformed input documents.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// A required symbol is missing from a theta layout, or layouts disagree.
class LayoutError : public ValidationError {
 public:
  explicit LayoutError(const std::string& msg) : ValidationError(msg) {}
};

/// Numerical degeneracy: assumptions of the asymptotic theory are violated.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

/// Denominator component at or below the positivity floor.
class DegenerateDenominatorError : public NumericalError {
 public:
  DegenerateDenominatorError(const std::string& component, double value,
                             double floor)
      : NumericalError("denominator component '" + component + "' = " +
                       std::to_string(value) + " is at or below the floor " +
                       std::to_string(floor)),
        component_(component) {}

  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

/// Tied optimizers: the endpoint is not differentiable here. Use the
/// generalized gradients / numerical delta method instead.
class NonSmoothEndpointError : public NumericalError {
 public:
  explicit NonSmoothEndpointError(const std::string& msg)
      : NumericalError(msg) {}
};

/// Empty arm or zero-size sample.
class InsufficientDataError : public ValidationError {
 public:
  explicit InsufficientDataError(const std::string& msg)
      : ValidationError(msg) {}
};

/// Covariance matrix has an eigenvalue below the PSD slack.
class NotPsdError : public NumericalError {
 public:
  explicit NotPsdError(const std::string& msg) : NumericalError(msg) {}
};

/// Too many perturbed draws violated the denominator floor.
class NearBoundaryError : public NumericalError {
 public:
  explicit NearBoundaryError(const std::string& msg) : NumericalError(msg) {}
};

/// Theta violates the consistency constraints linking experimental and
/// observational probabilities; no causal model can produce it.
class InfeasibleThetaError : public NumericalError {
 public:
  explicit InfeasibleThetaError(const std::string& msg)
      : NumericalError(msg) {}
};

}  // namespace pocbounds
