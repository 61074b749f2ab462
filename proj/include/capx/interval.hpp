#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>

#include "capx/extended_real.hpp"

namespace capx {

// Closed interval [lo, hi] with possibly infinite ends; may be empty.
struct Interval {
  double lo = 1.0;
  double hi = 0.0;

  static Interval empty() { return {1.0, 0.0}; }
  static Interval point(double v) { return {v, v}; }
  static Interval real_line() { return {-kInf, kInf}; }

  bool is_empty() const { return !(lo <= hi); }
  bool is_point() const { return lo == hi; }
  bool contains(double v, double tol = 0.0) const { return !is_empty() && v >= lo - tol && v <= hi + tol; }
  double clamp(double v) const { return std::min(std::max(v, lo), hi); }
  double distance(double v) const {
    if (is_empty()) return kInf;
    if (v < lo) return lo - v;
    if (v > hi) return v - hi;
    return 0.0;
  }
  double length() const { return is_empty() ? 0.0 : hi - lo; }

  // a * I for a >= 0.
  Interval scaled(double a) const {
    if (is_empty()) return *this;
    auto mul = [a](double v) { return (a == 0.0) ? 0.0 : a * v; };
    return {mul(lo), mul(hi)};
  }
  Interval shifted(double b) const { return is_empty() ? *this : Interval{lo + b, hi + b}; }
  Interval intersect(const Interval& o) const { return {std::max(lo, o.lo), std::min(hi, o.hi)}; }

  friend bool operator==(const Interval& a, const Interval& b) {
    if (a.is_empty() && b.is_empty()) return true;
    return a.lo == b.lo && a.hi == b.hi;
  }
  friend std::ostream& operator<<(std::ostream& os, const Interval& I) {
    if (I.is_empty()) return os << "{}";
    return os << "[" << I.lo << ", " << I.hi << "]";
  }
};

}  // namespace capx
