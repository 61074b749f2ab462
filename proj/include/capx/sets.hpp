#pragma once

#include <string>
#include <variant>

#include "capx/errors.hpp"
#include "capx/linalg.hpp"

namespace capx {

// Nonempty closed convex subset of R^n: whole space, box, ball, or a finite
// intersection of halfspaces {x : A x <= b}.
class ClosedSet {
 public:
  struct WholeSpace {
    Index dim;
  };
  struct Box {
    Vector lower, upper;  // entries may be +-inf
  };
  struct Ball {
    Vector center;
    double radius;
  };
  struct Halfspaces {
    Matrix normals;  // row i is a_i
    Vector offsets;  // a_i . x <= b_i
  };
  using Representation = std::variant<WholeSpace, Box, Ball, Halfspaces>;

  static ClosedSet whole_space(Index n) {
    if (n < 1) throw InputError("whole space: dimension must be >= 1");
    return ClosedSet(WholeSpace{n});
  }
  static ClosedSet box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.size() < 1) throw InputError("box: bound dimensions differ");
    for (Index i = 0; i < lower.size(); ++i) {
      if (std::isnan(lower(i)) || std::isnan(upper(i))) throw InputError("box: NaN bound");
      if (lower(i) > upper(i)) throw InputError("box: empty, lower(" + std::to_string(i) + ") > upper");
      if (lower(i) == kInf || upper(i) == -kInf) throw InputError("box: empty, infinite bound on wrong side");
    }
    return ClosedSet(Box{std::move(lower), std::move(upper)});
  }
  static ClosedSet ball(Vector center, double radius) {
    if (center.size() < 1) throw InputError("ball: empty center");
    if (!center.allFinite() || !std::isfinite(radius) || radius < 0.0)
      throw InputError("ball: radius must be finite and >= 0");
    return ClosedSet(Ball{std::move(center), radius});
  }
  static ClosedSet halfspaces(Matrix normals, Vector offsets) {
    if (normals.rows() != offsets.size() || normals.cols() < 1)
      throw InputError("halfspaces: normals/offsets dimension mismatch");
    if (!normals.allFinite() || !offsets.allFinite()) throw InputError("halfspaces: non-finite data");
    ClosedSet s(Halfspaces{std::move(normals), std::move(offsets)});
    const auto& h = std::get<Halfspaces>(s.rep_);
    for (Index i = 0; i < h.normals.rows(); ++i)
      if (h.normals.row(i).squaredNorm() == 0.0 && h.offsets(i) < 0.0)
        throw InputError("halfspaces: empty (0 . x <= negative)");
    bool converged = false;
    const Vector p = project_halfspaces(h, Vector::Zero(h.normals.cols()), 20000, &converged);
    if (max_violation(h, p) > 1e-8) throw InputError("halfspaces: intersection is empty");
    return s;
  }

  Index dimension() const {
    return std::visit(
        [](const auto& r) -> Index {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, WholeSpace>) return r.dim;
          else if constexpr (std::is_same_v<T, Box>) return r.lower.size();
          else if constexpr (std::is_same_v<T, Ball>) return r.center.size();
          else return r.normals.cols();
        },
        rep_);
  }

  const Representation& representation() const { return rep_; }
  std::string kind_name() const {
    static const char* names[] = {"whole_space", "box", "ball", "halfspaces"};
    return names[rep_.index()];
  }
  bool is_whole_space() const { return std::holds_alternative<WholeSpace>(rep_); }

  Vector project(const Vector& x) const {
    check_dim(x, "project");
    return std::visit(
        [&](const auto& r) -> Vector {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, WholeSpace>) {
            return x;
          } else if constexpr (std::is_same_v<T, Box>) {
            return x.cwiseMax(r.lower).cwiseMin(r.upper);
          } else if constexpr (std::is_same_v<T, Ball>) {
            const Vector d = x - r.center;
            const double nd = d.norm();
            if (nd <= r.radius) return x;
            return r.center + (r.radius / nd) * d;
          } else {
            return project_halfspaces(r, x, 200000, nullptr);
          }
        },
        rep_);
  }

  bool contains(const Vector& x, double tol = 1e-10) const {
    if (x.size() != dimension()) return false;
    return std::visit(
        [&](const auto& r) -> bool {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, WholeSpace>) {
            return x.allFinite();
          } else if constexpr (std::is_same_v<T, Box>) {
            for (Index i = 0; i < x.size(); ++i)
              if (!(x(i) >= r.lower(i) - tol && x(i) <= r.upper(i) + tol)) return false;
            return true;
          } else if constexpr (std::is_same_v<T, Ball>) {
            return (x - r.center).norm() <= r.radius + tol;
          } else {
            return max_violation(r, x) <= tol;
          }
        },
        rep_);
  }

  // dist(g, N_X(x)); +inf when x is not in X.
  ConeDistance normal_cone_distance(const Vector& x, const Vector& g) const {
    check_dim(x, "normal_cone_distance");
    check_dim(g, "normal_cone_distance");
    if (!contains(x, 1e-9)) return {kInf, true};
    return std::visit(
        [&](const auto& r) -> ConeDistance {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, WholeSpace>) {
            return {g.norm(), true};
          } else if constexpr (std::is_same_v<T, Box>) {
            Vector e(g.size());
            for (Index i = 0; i < g.size(); ++i) {
              const bool at_lo = x(i) <= r.lower(i) + active_tol(r.lower(i));
              const bool at_hi = x(i) >= r.upper(i) - active_tol(r.upper(i));
              if (at_lo && at_hi) e(i) = 0.0;
              else if (at_lo) e(i) = std::max(0.0, g(i));
              else if (at_hi) e(i) = std::max(0.0, -g(i));
              else e(i) = g(i);
            }
            return {e.norm(), true};
          } else if constexpr (std::is_same_v<T, Ball>) {
            if (r.radius == 0.0) return {0.0, true};
            const Vector d = x - r.center;
            if (d.norm() < r.radius - active_tol(r.radius)) return {g.norm(), true};
            return distance_to_cone({d}, g);
          } else {
            std::vector<Vector> gens;
            for (Index i = 0; i < r.normals.rows(); ++i) {
              const double slack = r.offsets(i) - r.normals.row(i).dot(x);
              if (slack <= active_tol(r.offsets(i)) * std::max(1.0, r.normals.row(i).norm()))
                gens.push_back(r.normals.row(i).transpose());
            }
            return distance_to_cone(gens, g);
          }
        },
        rep_);
  }

 private:
  explicit ClosedSet(Representation r) : rep_(std::move(r)) {}

  static double active_tol(double bound) { return 1e-9 * (1.0 + (std::isfinite(bound) ? std::abs(bound) : 0.0)); }

  void check_dim(const Vector& x, const char* op) const {
    if (x.size() != dimension())
      throw InputError(std::string(op) + ": expected dimension " + std::to_string(dimension()) + ", got " +
                       std::to_string(x.size()));
  }

  static double max_violation(const Halfspaces& h, const Vector& x) {
    double v = 0.0;
    for (Index i = 0; i < h.normals.rows(); ++i) {
      const double nrm = h.normals.row(i).norm();
      if (nrm == 0.0) continue;
      v = std::max(v, (h.normals.row(i).dot(x) - h.offsets(i)) / nrm);
    }
    return v;
  }

  // Hildreth's dual coordinate ascent; converges to the projection.
  static Vector project_halfspaces(const Halfspaces& h, const Vector& p, int max_sweeps, bool* converged) {
    const Index k = h.normals.rows();
    Vector x = p;
    if (max_violation(h, x) <= 0.0) {
      if (converged) *converged = true;
      return x;
    }
    Vector lam = Vector::Zero(k);
    Vector n2(k);
    for (Index i = 0; i < k; ++i) n2(i) = h.normals.row(i).squaredNorm();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double change = 0.0;
      for (Index i = 0; i < k; ++i) {
        if (n2(i) == 0.0) continue;
        const double r = (h.normals.row(i).dot(x) - h.offsets(i)) / n2(i);
        const double nl = std::max(0.0, lam(i) + r);
        const double d = nl - lam(i);
        if (d != 0.0) {
          x.noalias() -= d * h.normals.row(i).transpose();
          lam(i) = nl;
          change = std::max(change, std::abs(d) * std::sqrt(n2(i)));
        }
      }
      if (change <= 1e-15 * (1.0 + x.norm()) && max_violation(h, x) <= 1e-12) {
        if (converged) *converged = true;
        return x;
      }
    }
    if (converged) *converged = false;
    return x;
  }

  Representation rep_;
};

inline Vector project(const ClosedSet& X, const Vector& x) { return X.project(x); }

// ||x - proj_X(x + w)||; zero exactly when w lies in N_X(x).
inline double normal_cone_residual(const ClosedSet& X, const Vector& x, const Vector& w) {
  if (x.size() != X.dimension() || w.size() != X.dimension())
    throw InputError("normal_cone_residual: dimension mismatch");
  if ((x - X.project(x)).norm() > 1e-10) throw PreconditionError("normal_cone_residual: x is not in X");
  return (x - X.project(x + w)).norm();
}

}  // namespace capx
