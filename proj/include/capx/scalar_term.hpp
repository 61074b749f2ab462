#pragma once

#include <functional>
#include <string>
#include <vector>

#include "capx/errors.hpp"
#include "capx/interval.hpp"

namespace capx {

// Numerically stable logistic 1 / (1 + e^{-x}).
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// max{0, g} + (1/theta) log(1 + exp(-theta |g|)).
inline double softplus(double theta, double gamma) {
  if (!(theta > 0.0)) throw InputError("softplus: theta must be > 0");
  return std::max(0.0, gamma) + std::log1p(std::exp(-theta * std::abs(gamma))) / theta;
}

inline double softplus_derivative(double theta, double gamma) {
  if (!(theta > 0.0)) throw InputError("softplus: theta must be > 0");
  return logistic(theta * gamma);
}

// One branch of a 1-D subdifferential graph. Affine pieces cover horizontal
// rays/segments, points (degenerate z) and sloped lines; vertical pieces sit
// at a single z; curve pieces are smooth nondecreasing graphs (sample only).
struct GraphPiece {
  enum class Kind { affine, vertical, curve };
  Kind kind = Kind::affine;
  Interval z;
  Interval v;
  double offset = 0.0;
  double slope = 0.0;
  std::function<double(double)> curve;

  static GraphPiece affine(Interval zr, double off, double sl) {
    GraphPiece p;
    p.kind = Kind::affine;
    p.z = zr;
    p.offset = off;
    p.slope = sl;
    auto at = [&](double zz) { return std::isfinite(zz) ? off + sl * zz : (sl == 0.0 ? off : (zz * sl > 0 ? kInf : -kInf)); };
    p.v = {std::min(at(zr.lo), at(zr.hi)), std::max(at(zr.lo), at(zr.hi))};
    return p;
  }
  static GraphPiece vertical(double z0, Interval vr) {
    GraphPiece p;
    p.kind = Kind::vertical;
    p.z = Interval::point(z0);
    p.v = vr;
    return p;
  }
  static GraphPiece make_curve(Interval zr, Interval vr, std::function<double(double)> f) {
    GraphPiece p;
    p.kind = Kind::curve;
    p.z = zr;
    p.v = vr;
    p.curve = std::move(f);
    return p;
  }

  double value_at(double zz) const { return kind == Kind::curve ? curve(zz) : offset + slope * zz; }
};

struct SubdifferentialGraph1D {
  std::vector<GraphPiece> pieces;

  bool contains(double z, double v, double tol = 1e-12) const {
    for (const auto& p : pieces) {
      if (!p.z.contains(z, tol)) continue;
      if (p.kind == GraphPiece::Kind::vertical) {
        if (p.v.contains(v, tol)) return true;
      } else if (std::abs(p.value_at(p.z.clamp(z)) - v) <= tol * (1.0 + std::abs(v))) {
        return true;
      }
    }
    return false;
  }
  bool has_curves() const {
    for (const auto& p : pieces)
      if (p.kind == GraphPiece::Kind::curve) return true;
    return false;
  }
};

// Scalar building block of separable outer functions, h(z) = sum_i phi_i(z_i).
// Parameter meaning by kind:
//   linear:             a z
//   hinge:              a max{0, z - b}
//   softplus:           a psi_c(z - b)
//   zero_indicator:     iota_{0}(z)
//   nonpos_indicator:   iota_{(-inf,0]}(z)
//   quadratic:          a z + (b/2) z^2
//   squared_hinge:      b max{0, z}^2
//   absolute:           b |z|
//   log_barrier:        -(1/b) ln(-z)
//   squared_distance:   b (z - a)^2
// Every non-indicator term is multiplied by scale > 0.
struct ScalarTerm {
  enum class Kind {
    linear,
    hinge,
    softplus,
    zero_indicator,
    nonpos_indicator,
    quadratic,
    squared_hinge,
    absolute,
    log_barrier,
    squared_distance
  };
  Kind kind = Kind::linear;
  double a = 0.0, b = 0.0, c = 0.0;
  double scale = 1.0;

  static ScalarTerm make(Kind k, double a_ = 0.0, double b_ = 0.0, double c_ = 0.0) {
    ScalarTerm t;
    t.kind = k;
    t.a = a_;
    t.b = b_;
    t.c = c_;
    return t;
  }

  bool is_indicator() const { return kind == Kind::zero_indicator || kind == Kind::nonpos_indicator; }
  bool real_valued() const { return !is_indicator() && kind != Kind::log_barrier; }
  bool smooth() const {
    switch (kind) {
      case Kind::linear:
      case Kind::softplus:
      case Kind::quadratic:
      case Kind::squared_hinge:
      case Kind::log_barrier:
      case Kind::squared_distance:
        return true;
      default:
        return false;
    }
  }
  bool has_prox() const { return kind != Kind::log_barrier; }

  // s * phi with the convention 0 * phi = indicator of cl dom phi.
  ScalarTerm scaled(double s) const {
    if (!(s >= 0.0)) throw InputError("scalar term: negative scale");
    ScalarTerm t = *this;
    if (is_indicator()) return t;
    if (s == 0.0) {
      if (kind == Kind::log_barrier) return make(Kind::nonpos_indicator);
      return make(Kind::linear, 0.0);
    }
    t.scale *= s;
    return t;
  }

  double value(double z) const {
    switch (kind) {
      case Kind::zero_indicator:
        return z == 0.0 ? 0.0 : kInf;
      case Kind::nonpos_indicator:
        return z <= 0.0 ? 0.0 : kInf;
      case Kind::log_barrier:
        if (!(z < -1e-12)) return kInf;
        return scale * (-std::log(-z) / b);
      default:
        return scale * raw_value(z);
    }
  }

  Interval subdiff(double z) const {
    switch (kind) {
      case Kind::linear:
        return Interval::point(scale * a);
      case Kind::hinge:
        if (z < b) return Interval::point(0.0);
        if (z > b) return Interval::point(scale * a);
        return Interval{0.0, scale * a};
      case Kind::softplus:
        return Interval::point(scale * a * logistic(c * (z - b)));
      case Kind::zero_indicator:
        return z == 0.0 ? Interval::real_line() : Interval::empty();
      case Kind::nonpos_indicator:
        if (z < 0.0) return Interval::point(0.0);
        if (z == 0.0) return Interval{0.0, kInf};
        return Interval::empty();
      case Kind::quadratic:
        return Interval::point(scale * (a + b * z));
      case Kind::squared_hinge:
        return Interval::point(scale * 2.0 * b * std::max(0.0, z));
      case Kind::absolute:
        if (z > 0.0) return Interval::point(scale * b);
        if (z < 0.0) return Interval::point(-scale * b);
        return Interval{-scale * b, scale * b};
      case Kind::log_barrier:
        if (!(z < -1e-12)) return Interval::empty();
        return Interval::point(scale / (b * (-z)));
      case Kind::squared_distance:
        return Interval::point(scale * 2.0 * b * (z - a));
    }
    return Interval::empty();
  }

  double derivative(double z) const {
    if (!smooth()) throw CapabilityError("scalar term is not differentiable");
    const Interval I = subdiff(z);
    if (I.is_empty()) throw EvaluationError("derivative outside the domain");
    return I.lo;
  }

  double second_derivative(double z) const {
    switch (kind) {
      case Kind::linear:
        return 0.0;
      case Kind::softplus: {
        const double s = logistic(c * (z - b));
        return scale * a * c * s * (1.0 - s);
      }
      case Kind::quadratic:
        return scale * b;
      case Kind::squared_hinge:
        return z > 0.0 ? scale * 2.0 * b : 0.0;
      case Kind::log_barrier:
        if (!(z < -1e-12)) throw EvaluationError("second derivative outside the domain");
        return scale / (b * z * z);
      case Kind::squared_distance:
        return scale * 2.0 * b;
      default:
        throw CapabilityError("scalar term is not twice differentiable");
    }
  }

  // argmin_w  phi(w) + (w - z)^2 / (2 s)
  double prox(double z, double s) const {
    if (!(s > 0.0)) throw InputError("prox: step must be > 0");
    const double t = s * scale;
    switch (kind) {
      case Kind::linear:
        return z - t * a;
      case Kind::hinge:
        if (z <= b) return z;
        if (z - t * a > b) return z - t * a;
        return b;
      case Kind::softplus:
        return softplus_prox(z, t);
      case Kind::zero_indicator:
        return 0.0;
      case Kind::nonpos_indicator:
        return std::min(z, 0.0);
      case Kind::quadratic:
        return (z - t * a) / (1.0 + t * b);
      case Kind::squared_hinge:
        return z <= 0.0 ? z : z / (1.0 + 2.0 * t * b);
      case Kind::absolute: {
        const double k = t * b;
        if (z > k) return z - k;
        if (z < -k) return z + k;
        return 0.0;
      }
      case Kind::log_barrier:
        throw CapabilityError("log-barrier has no closed-form prox");
      case Kind::squared_distance:
        return (z + 2.0 * t * b * a) / (1.0 + 2.0 * t * b);
    }
    return z;
  }

  SubdifferentialGraph1D graph() const {
    SubdifferentialGraph1D g;
    const Interval R = Interval::real_line();
    const double s = scale;
    switch (kind) {
      case Kind::linear:
        g.pieces.push_back(GraphPiece::affine(R, s * a, 0.0));
        break;
      case Kind::hinge:
        if (a == 0.0) {
          g.pieces.push_back(GraphPiece::affine(R, 0.0, 0.0));
        } else {
          g.pieces.push_back(GraphPiece::affine({-kInf, b}, 0.0, 0.0));
          g.pieces.push_back(GraphPiece::vertical(b, {0.0, s * a}));
          g.pieces.push_back(GraphPiece::affine({b, kInf}, s * a, 0.0));
        }
        break;
      case Kind::softplus: {
        const double al = s * a, tau = b, th = c;
        g.pieces.push_back(
            GraphPiece::make_curve(R, {0.0, al}, [al, tau, th](double z) { return al * logistic(th * (z - tau)); }));
        break;
      }
      case Kind::zero_indicator:
        g.pieces.push_back(GraphPiece::vertical(0.0, R));
        break;
      case Kind::nonpos_indicator:
        g.pieces.push_back(GraphPiece::affine({-kInf, 0.0}, 0.0, 0.0));
        g.pieces.push_back(GraphPiece::vertical(0.0, {0.0, kInf}));
        break;
      case Kind::quadratic:
        g.pieces.push_back(GraphPiece::affine(R, s * a, s * b));
        break;
      case Kind::squared_hinge:
        g.pieces.push_back(GraphPiece::affine({-kInf, 0.0}, 0.0, 0.0));
        g.pieces.push_back(GraphPiece::affine({0.0, kInf}, 0.0, s * 2.0 * b));
        break;
      case Kind::absolute:
        if (b == 0.0) {
          g.pieces.push_back(GraphPiece::affine(R, 0.0, 0.0));
        } else {
          g.pieces.push_back(GraphPiece::affine({-kInf, 0.0}, -s * b, 0.0));
          g.pieces.push_back(GraphPiece::vertical(0.0, {-s * b, s * b}));
          g.pieces.push_back(GraphPiece::affine({0.0, kInf}, s * b, 0.0));
        }
        break;
      case Kind::log_barrier: {
        const double th = b;
        g.pieces.push_back(GraphPiece::make_curve({-kInf, 0.0}, {0.0, kInf},
                                                  [s, th](double z) { return z < 0.0 ? s / (th * (-z)) : kInf; }));
        break;
      }
      case Kind::squared_distance:
        g.pieces.push_back(GraphPiece::affine(R, -s * 2.0 * b * a, s * 2.0 * b));
        break;
    }
    return g;
  }

 private:
  double raw_value(double z) const {
    switch (kind) {
      case Kind::linear:
        return a * z;
      case Kind::hinge:
        return a * std::max(0.0, z - b);
      case Kind::softplus:
        return a * softplus(c, z - b);
      case Kind::quadratic:
        return a * z + 0.5 * b * z * z;
      case Kind::squared_hinge: {
        const double p = std::max(0.0, z);
        return b * p * p;
      }
      case Kind::absolute:
        return b * std::abs(z);
      case Kind::squared_distance:
        return b * (z - a) * (z - a);
      default:
        return kInf;
    }
  }

  // Root of w - z + t a logistic(c (w - b)) on [z - t a, z]: safeguarded Newton.
  double softplus_prox(double z, double t) const {
    double lo = z - t * a, hi = z;
    if (lo == hi) return z;
    double w = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double sg = logistic(c * (w - b));
      const double f = w - z + t * a * sg;
      if (f > 0.0) hi = w;
      else lo = w;
      const double df = 1.0 + t * a * c * sg * (1.0 - sg);
      double wn = w - f / df;
      if (!(wn > lo && wn < hi)) wn = 0.5 * (lo + hi);
      if (std::abs(wn - w) <= 1e-16 * (1.0 + std::abs(w)) || hi - lo <= 1e-16 * (1.0 + std::abs(w))) return wn;
      w = wn;
    }
    return w;
  }
};

}  // namespace capx
