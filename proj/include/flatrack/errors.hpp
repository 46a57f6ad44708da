#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flatrack {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (non-square matrix, mismatched blocks, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A matrix or map that must be inverted is (numerically) singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Intermediate results violate a structural identity that must hold.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

/// An iterative method stopped before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<std::complex<double>> best_iterate)
      : Error(what), best_iterate_(std::move(best_iterate)) {}

  const std::vector<std::complex<double>>& best_iterate() const noexcept { return best_iterate_; }

 private:
  std::vector<std::complex<double>> best_iterate_;
};

/// Configuration rejected; carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& item : items) {
      out += " ";
      out += item;
      out += ";";
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace flatrack
