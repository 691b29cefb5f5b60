#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace talbot {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Grid too coarse for the requested spectral truncation.
class UndersamplingError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Truncation too large to be recovered from the given grid without aliasing.
class AliasingError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Generic numerical failure (eigensolver, non-finite values, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A fixed-point iteration did not reach its tolerance.
class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> residuals)
      : NumericError(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residual_history() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// Oscillatory quadrature could not meet its tolerance.
class QuadratureError : public NumericError {
 public:
  QuadratureError(const std::string& what, double residual)
      : NumericError(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A fit-based estimator has too little data to be defined.
class EstimatorUndefined : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace talbot
