#pragma once

#include <stdexcept>
#include <string>

namespace selinf {

/// Base class for all library errors; CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad user input (missing column, non-numeric cell, invalid flag value).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-convergence, rank deficiency, infeasibility.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Truncation region whose total Gaussian mass underflows even in log space.
/// Carries the log-mass estimate so callers can report how degenerate the
/// conditioning event is.
class DegenerateRegionError : public NumericalError {
 public:
  DegenerateRegionError(const std::string& msg, double log_mass)
      : NumericalError(msg), log_mass_(log_mass) {}
  double log_mass() const { return log_mass_; }

 private:
  double log_mass_;
};

/// Tie in an argmax that would make a selection event ill-defined.
class TieError : public Error {
 public:
  using Error::Error;
};

}  // namespace selinf
