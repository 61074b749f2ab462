#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "capx/extended_real.hpp"

namespace capx {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// max{|a|, |b|, |c|} used throughout for (x, y, z) triples.
inline double max3(double a, double b, double c) { return std::max(a, std::max(b, c)); }

inline bool all_finite(const Vector& v) { return v.allFinite(); }

namespace detail {

inline constexpr int kMaxEnumeratedGenerators = 10;

// Euclidean projection of v onto the unit simplex (sort based).
inline Vector project_simplex(const Vector& v) {
  const Index k = v.size();
  std::vector<double> s(v.data(), v.data() + k);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, t = 0.0;
  for (Index i = 0; i < k; ++i) {
    cum += s[i];
    const double cand = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - cand > 0.0) t = cand;
  }
  return (v.array() - t).max(0.0).matrix();
}

inline Matrix columns_of(const std::vector<Vector>& pts, const std::vector<int>& idx) {
  Matrix G(pts.front().size(), static_cast<Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) G.col(static_cast<Index>(j)) = pts[idx[j]];
  return G;
}

}  // namespace detail

struct HullProjection {
  Vector point;
  Vector weights;
  bool exact = true;
};

// Nearest point of conv{pts} to q. Exact by enumeration of affine hulls of
// subsets for small point sets; accelerated projected gradient otherwise.
inline HullProjection project_onto_hull(const std::vector<Vector>& pts, const Vector& q) {
  const int k = static_cast<int>(pts.size());
  HullProjection best;
  if (k == 0) {
    best.point = Vector::Constant(q.size(), kInf);
    best.exact = false;
    return best;
  }
  if (k <= detail::kMaxEnumeratedGenerators) {
    double best_d = kInf;
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
      std::vector<int> idx;
      for (int j = 0; j < k; ++j)
        if (mask & (1u << j)) idx.push_back(j);
      const Vector& base = pts[idx[0]];
      Vector w = Vector::Zero(k);
      Vector p = base;
      if (idx.size() > 1) {
        Matrix D(q.size(), static_cast<Index>(idx.size() - 1));
        for (size_t j = 1; j < idx.size(); ++j) D.col(static_cast<Index>(j - 1)) = pts[idx[j]] - base;
        const Vector c = D.completeOrthogonalDecomposition().solve(q - base);
        const double w0 = 1.0 - c.sum();
        if (w0 < -1e-12 || (c.array() < -1e-12).any()) continue;
        w(idx[0]) = w0;
        for (size_t j = 1; j < idx.size(); ++j) w(idx[j]) = c(static_cast<Index>(j - 1));
        p = base + D * c;
      } else {
        w(idx[0]) = 1.0;
      }
      const double d = (q - p).norm();
      if (d < best_d) {
        best_d = d;
        best.point = p;
        best.weights = w;
      }
    }
    return best;
  }
  // Large point sets: FISTA over the simplex of weights.
  Matrix G(q.size(), k);
  for (int j = 0; j < k; ++j) G.col(j) = pts[j];
  const double L = std::max(1e-300, G.jacobiSvd().singularValues()(0) * G.jacobiSvd().singularValues()(0));
  Vector w = Vector::Constant(k, 1.0 / k), yv = w;
  double t = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const Vector grad = G.transpose() * (G * yv - q);
    const Vector wn = detail::project_simplex(yv - grad / L);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yv = wn + ((t - 1.0) / tn) * (wn - w);
    const double change = (wn - w).lpNorm<Eigen::Infinity>();
    w = wn;
    t = tn;
    if (change < 1e-15) break;
  }
  best.weights = w;
  best.point = G * w;
  best.exact = false;
  return best;
}

inline double distance_to_hull(const std::vector<Vector>& pts, const Vector& q) {
  if (pts.empty()) return kInf;
  return (q - project_onto_hull(pts, q).point).norm();
}

struct ConeDistance {
  double distance = 0.0;
  bool exact = true;
};

// dist(g, cone{gens}) where cone means nonnegative combinations.
inline ConeDistance distance_to_cone(const std::vector<Vector>& gens, const Vector& g) {
  const int k = static_cast<int>(gens.size());
  ConeDistance out{g.norm(), true};
  if (k == 0) return out;
  if (k <= detail::kMaxEnumeratedGenerators) {
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
      std::vector<int> idx;
      for (int j = 0; j < k; ++j)
        if (mask & (1u << j)) idx.push_back(j);
      const Matrix G = detail::columns_of(gens, idx);
      const Vector c = G.completeOrthogonalDecomposition().solve(g);
      if ((c.array() < -1e-12).any()) continue;
      out.distance = std::min(out.distance, (g - G * c).norm());
    }
    return out;
  }
  Matrix G(g.size(), k);
  for (int j = 0; j < k; ++j) G.col(j) = gens[j];
  const auto sv = G.jacobiSvd().singularValues();
  const double L = std::max(1e-300, sv(0) * sv(0));
  Vector c = Vector::Zero(k);
  for (int it = 0; it < 20000; ++it) {
    const Vector cn = (c - G.transpose() * (G * c - g) / L).cwiseMax(0.0);
    const double change = (cn - c).lpNorm<Eigen::Infinity>();
    c = cn;
    if (change < 1e-15) break;
  }
  out.distance = (g - G * c).norm();
  out.exact = false;
  return out;
}

}  // namespace capx
