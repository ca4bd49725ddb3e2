#ifndef CAPWATT_ERRORS_HPP
#define CAPWATT_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace capwatt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector lengths or layer widths that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Nonfinite intermediate value; `stage` is the link stage or epoch where it appeared.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int stage) : Error(what), stage_(stage) {}
  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

class PumpTargetUnreachable : public Error {
 public:
  PumpTargetUnreachable(const std::string& what, int edfa_index)
      : Error(what), edfa_index_(edfa_index) {}
  int edfa_index() const noexcept { return edfa_index_; }

 private:
  int edfa_index_;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver exhausted its budget. Carries the best iterate seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best, double deviation)
      : Error(what), best_(std::move(best)), deviation_(deviation) {}
  const std::vector<double>& best_iterate() const noexcept { return best_; }
  double deviation() const noexcept { return deviation_; }

 private:
  std::vector<double> best_;
  double deviation_;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace capwatt

#endif  // CAPWATT_ERRORS_HPP
