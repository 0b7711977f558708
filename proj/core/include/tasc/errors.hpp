#ifndef TASC_ERRORS_HPP
#define TASC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tasc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV, JSON). `row()` is the 0-based data row, or -1.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& what, long row = -1)
      : Error(what), row_(row) {}
  long row() const noexcept { return row_; }

private:
  long row_;
};

/// Invalid configuration or argument combination.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A matrix that must be inverted is singular or badly conditioned.
/// `step()` is the time index where it happened, or -1 outside a pass.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what, long step = -1)
      : Error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
        step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

/// Every EM restart failed.
class FitError : public Error {
public:
  using Error::Error;
};

/// An optimisation routine failed to meet its contract.
class SolverError : public Error {
public:
  explicit SolverError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

}  // namespace tasc

#endif  // TASC_ERRORS_HPP
