#pragma once

#include <stdexcept>
#include <string>

namespace lel {

/// Input or configuration rejected by a contract check (CLI exit code 1).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file or document could not be parsed; the message names the field or row.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A similarity metric is undefined for the input (for example a constant series).
class UndefinedMetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A numerical procedure failed to produce an answer (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No steady state exists for the requested motor loading.
class NoEquilibriumError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : NumericalError(what), iterations_(iterations), residual_(residual) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace lel
