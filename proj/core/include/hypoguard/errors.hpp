#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace hypoguard {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (logit of 1, negative pad, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Bad input data: malformed files, invariant-violating records, degenerate samples.
class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateDimensionError : public DataError {
 public:
  DegenerateDimensionError(std::size_t dimension, const std::string& what)
      : DataError(what), dimension_(dimension) {}
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Linear algebra failure (singular or indefinite matrix).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations. Carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::MatrixXd last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  const Eigen::MatrixXd& last_iterate() const noexcept { return last_iterate_; }

 private:
  Eigen::MatrixXd last_iterate_;
};

/// ODE state became non-finite or left the admissible region.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(const std::string& what, double time_min)
      : Error(what), time_min_(time_min) {}
  double time_min() const noexcept { return time_min_; }

 private:
  double time_min_;
};

/// Cross-entropy update with no elite probability mass.
class NoEliteMassError : public Error {
 public:
  using Error::Error;
};

/// Every cross-entropy iteration stalled.
class TrainingFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace hypoguard
