#pragma once

#include <stdexcept>
#include <string>

namespace svp {

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver hit its sweep cap before reaching the tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration would exceed the configured candidate budget.
class GuardExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svp
