#pragma once

#include <stdexcept>
#include <string>

namespace sbf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration or parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line and column of the fault.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Adaptive integration could not proceed; time_reached is the last accepted time.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time_reached)
      : Error(what + " (time reached " + std::to_string(time_reached) + " s)"), time_reached_(time_reached) {}
  double time_reached() const { return time_reached_; }

 private:
  double time_reached_;
};

class NonUniqueSteadyStateError : public Error {
 public:
  NonUniqueSteadyStateError(const std::string& what, int null_dimension)
      : Error(what), null_dimension_(null_dimension) {}
  int null_dimension() const { return null_dimension_; }

 private:
  int null_dimension_;
};

/// Background exceeds signal, or other estimator precondition failures.
class EstimationError : public Error {
 public:
  using Error::Error;
};

class FitDegenerateError : public Error {
 public:
  using Error::Error;
};

class IncompleteBudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbf
