#pragma once

#include <cmath>
#include <limits>
#include <ostream>

#include "capx/errors.hpp"

namespace capx {

// A value in (-inf, +inf]. -inf and NaN are rejected.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  ExtendedReal(double v) : value_(v) {  // NOLINT(implicit)
    if (std::isnan(v)) throw EvaluationError("ExtendedReal: NaN");
    if (v == -std::numeric_limits<double>::infinity())
      throw EvaluationError("ExtendedReal: -inf is outside (-inf, +inf]");
  }

  static ExtendedReal infinity() { return ExtendedReal(std::numeric_limits<double>::infinity()); }

  bool is_finite() const { return std::isfinite(value_); }
  bool is_infinite() const { return !is_finite(); }
  double value() const { return value_; }

  // Finite value or EvaluationError.
  double finite(const char* what = "value") const {
    if (!is_finite()) throw EvaluationError(std::string(what) + " is +inf");
    return value_;
  }

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) { return ExtendedReal(a.value_ + b.value_); }
  friend bool operator==(ExtendedReal a, ExtendedReal b) { return a.value_ == b.value_; }
  friend bool operator<(ExtendedReal a, ExtendedReal b) { return a.value_ < b.value_; }
  friend bool operator<=(ExtendedReal a, ExtendedReal b) { return a.value_ <= b.value_; }
  friend bool operator>(ExtendedReal a, ExtendedReal b) { return a.value_ > b.value_; }
  friend bool operator>=(ExtendedReal a, ExtendedReal b) { return a.value_ >= b.value_; }
  friend std::ostream& operator<<(std::ostream& os, ExtendedReal a) {
    return a.is_finite() ? (os << a.value_) : (os << "+inf");
  }

 private:
  double value_ = 0.0;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace capx
