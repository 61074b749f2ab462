#pragma once

#include <stdexcept>
#include <string>

namespace capx {

// Malformed or inconsistent user data (dimensions, parameter ranges).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation does not hold (e.g. x not in X).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// The operation is not available for this variant (no prox, not separable, ...).
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A value was +inf or NaN where a finite number is required.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A certificate produced internally failed its own check.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonconvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace capx
