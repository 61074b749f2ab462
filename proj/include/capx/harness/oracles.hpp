#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "capx/harness/config.hpp"

namespace capx::harness {

// Plain (non-accelerated) primal-dual hybrid gradient on
//   min_{x in X} h(Ax + b),
// an independent reference for affine problems.
struct DirectSolve {
  Vector x, y;
  std::size_t iterations = 0;
  bool converged = false;
};

inline DirectSolve direct_splitting_solve(const ClosedSet& X, const OuterFunction& h, const Matrix& A, const Vector& b,
                                          const Vector& x0, double tol = 1e-13, std::size_t max_iter = 2000000) {
  if (A.rows() != h.dimension() || A.cols() != X.dimension() || b.size() != A.rows())
    throw InputError("direct_splitting_solve: dimension mismatch");
  double L = Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
  if (L == 0.0) L = 1.0;
  const double tau = 0.99 / L, sig = 0.99 / L;
  DirectSolve out;
  Vector x = X.project(x0), y = Vector::Zero(A.rows());
  for (std::size_t k = 1; k <= max_iter; ++k) {
    const Vector xn = X.project(x - tau * (A.transpose() * y));
    const Vector v = y + sig * (A * (2.0 * xn - x));
    // prox of sig (h(. + b))^* through Moreau
    const Vector yn = v - sig * (h.prox(v / sig + b, 1.0 / sig) - b);
    const double dx = (xn - x).norm(), dy = (yn - y).norm();
    x = xn;
    y = yn;
    out.iterations = k;
    if (dx <= tol * (1.0 + x.norm()) && dy <= tol * (1.0 + y.norm())) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.y = y;
  return out;
}

// Grid points k * step (k integer) inside [lo, hi], formed as k / (1/step)
// when 1/step is integral so that e.g. 0.5 is hit exactly.
inline std::vector<double> grid_points(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw InputError("grid_points: need step > 0 and hi >= lo");
  const double inv = 1.0 / step;
  const bool integral = std::abs(inv - std::round(inv)) < 1e-9 * inv;
  const auto k0 = static_cast<long long>(std::ceil(lo / step - 1e-9));
  const auto k1 = static_cast<long long>(std::floor(hi / step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<size_t>(k1 - k0 + 1));
  for (long long k = k0; k <= k1; ++k) out.push_back(integral ? k / std::round(inv) : k * step);
  return out;
}

// First minimizer of a 1-D extended-real function over a grid.
inline double grid_argmin(const std::function<ExtendedReal(double)>& f, const std::vector<double>& grid,
                          double* value = nullptr) {
  double best = kInf, arg = std::nan("");
  for (double x : grid) {
    const ExtendedReal v = f(x);
    if (v.is_finite() && v.value() < best) {
      best = v.value();
      arg = x;
    }
  }
  if (value) *value = best;
  return arg;
}

inline Matrix random_matrix(CounterRng& rng, Index r, Index c, double s) {
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = rng.uniform(-s, s);
  return M;
}

inline Vector random_vector(CounterRng& rng, Index n, double s) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-s, s);
  return v;
}

inline Index random_index(CounterRng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Symmetric, possibly indefinite, piece 1/2 x'Qx + q'x + c.
inline QuadraticForm random_quadratic(CounterRng& rng, Index n) {
  const Matrix B = random_matrix(rng, n, n, 1.0);
  return QuadraticForm::make(0.5 * (B + B.transpose()), random_vector(rng, n, 1.0), rng.uniform(-1.0, 1.0));
}

// Network with widths n0, w1, w2 (two layers), widths <= max_width.
inline Network random_two_layer(CounterRng& rng, Index max_width) {
  const std::vector<Index> w{random_index(rng, 1, max_width), random_index(rng, 1, max_width),
                             random_index(rng, 1, max_width)};
  return random_network(w, 1.0, rng);
}

// Outer functions with a prox, covering every real-valued separable variant,
// the support function and one homotopy member.
inline std::vector<OuterFunction> property_outer_catalogue(CounterRng& rng) {
  std::vector<OuterFunction> hs;
  const Index m = 3;
  const Vector a = random_vector(rng, m, 1.0).cwiseAbs() + Vector::Constant(m, 0.1);
  const Vector t = random_vector(rng, m, 1.0);
  hs.push_back(OuterFunction::goal(a, t));
  hs.push_back(OuterFunction::softplus_goal(a, t, 5.0));
  hs.push_back(OuterFunction::linear(random_vector(rng, m, 2.0)));
  hs.push_back(OuterFunction::support({Vector::Unit(m, 0), Vector::Unit(m, 1), Vector::Constant(m, 1.0 / 3.0)}));
  hs.push_back(OuterFunction::augmented_lagrangian(random_vector(rng, m - 1, 1.0), 3.0));
  hs.push_back(OuterFunction::quadratic_penalty(m, 4.0));
  hs.push_back(OuterFunction::exact_penalty(m, 2.5));
  hs.push_back(OuterFunction::squared_distance(t, a));
  hs.push_back(OuterFunction::homotopy(OuterFunction::goal(a.head(m - 1), t.head(m - 1)), 0.3));
  hs.push_back(OuterFunction::equality_indicator(m, true));
  hs.push_back(OuterFunction::inequality_indicator(m, true));
  return hs;
}

struct PropertyResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
};

inline PropertyResult property_subgradient_inequality(std::uint64_t key, std::size_t cases) {
  CounterRng rng(key);
  PropertyResult r{"subgradient_inequality"};
  const auto hs = property_outer_catalogue(rng);
  for (const auto& h : hs) {
    if (!h.real_valued()) continue;
    for (std::size_t k = 0; k < cases; ++k) {
      const Vector z = random_vector(rng, h.dimension(), 3.0), w = random_vector(rng, h.dimension(), 3.0);
      const Vector g = h.subgradient(z);
      const double lhs = h.value(w).value(), rhs = h.value(z).value() + g.dot(w - z);
      ++r.cases;
      if (lhs < rhs - 1e-9 * (1.0 + std::abs(rhs))) ++r.violations;
    }
  }
  return r;
}

// (v1 - v2)(z1 - z2) >= 0 over points of each 1-D graph.
inline PropertyResult property_graph_monotonicity(std::uint64_t key, std::size_t cases) {
  CounterRng rng(key);
  PropertyResult r{"graph_monotonicity"};
  const auto hs = property_outer_catalogue(rng);
  for (const auto& h : hs) {
    if (!h.separable()) continue;
    for (Index i = 0; i < h.dimension(); ++i) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t k = 0; k < cases; ++k) {
        const double z = rng.uniform() < 0.1 ? 0.0 : rng.uniform(-3.0, 3.0);
        const Interval I = h.subdiff_1d(i, z);
        if (I.is_empty()) continue;
        for (double v : {I.lo, I.hi})
          if (std::isfinite(v)) pts.emplace_back(z, v);
        if (std::isfinite(I.lo) && std::isfinite(I.hi)) pts.emplace_back(z, 0.5 * (I.lo + I.hi));
      }
      for (size_t p = 0; p < pts.size(); ++p)
        for (size_t q = p + 1; q < pts.size(); q += 7) {
          ++r.cases;
          if ((pts[p].second - pts[q].second) * (pts[p].first - pts[q].first) < -1e-12) ++r.violations;
        }
    }
  }
  return r;
}

// p = prox(z, t) satisfies (z - p) / t in dh(p).
inline PropertyResult property_prox_optimality(std::uint64_t key, std::size_t cases) {
  CounterRng rng(key);
  PropertyResult r{"prox_optimality"};
  const auto hs = property_outer_catalogue(rng);
  for (const auto& h : hs) {
    if (!h.has_prox()) continue;
    for (std::size_t k = 0; k < cases; ++k) {
      const Vector z = random_vector(rng, h.dimension(), 3.0);
      const double t = std::exp(rng.uniform(-3.0, 2.0));
      const Vector p = h.prox(z, t);
      ++r.cases;
      if (!(h.subdiff_distance(p, (z - p) / t).distance <= 1e-8 * (1.0 + z.norm() / t))) ++r.violations;
    }
  }
  return r;
}

inline PropertyResult property_projection_lipschitz(std::uint64_t key, std::size_t cases) {
  CounterRng rng(key);
  PropertyResult r{"projection_lipschitz"};
  const Index n = 3;
  Matrix N = random_matrix(rng, 4, n, 1.0);
  std::vector<ClosedSet> sets{ClosedSet::whole_space(n),
                              ClosedSet::box(Vector::Constant(n, -1.0), Vector::Constant(n, 2.0)),
                              ClosedSet::box(Vector::Constant(n, -kInf), Vector::Constant(n, 0.5)),
                              ClosedSet::ball(random_vector(rng, n, 1.0), 1.5),
                              ClosedSet::halfspaces(N, Vector::Constant(4, 1.0))};
  for (const auto& X : sets)
    for (std::size_t k = 0; k < cases; ++k) {
      const Vector a = random_vector(rng, n, 4.0), b = random_vector(rng, n, 4.0);
      const Vector pa = X.project(a), pb = X.project(b);
      ++r.cases;
      if ((pa - pb).norm() > (a - b).norm() * (1.0 + 1e-9) + 1e-9) ++r.violations;
      if (!X.contains(pa, 1e-8)) ++r.violations;
    }
  return r;
}

// Central differences against jacobian() for the smooth inner variants.
inline PropertyResult property_jacobian_fd(std::uint64_t key, std::size_t cases) {
  CounterRng rng(key);
  PropertyResult r{"jacobian_finite_difference"};
  const Index n = 3;
  std::vector<InnerMapping> maps;
  maps.push_back(InnerMapping::affine(random_matrix(rng, 2, n, 1.0), random_vector(rng, 2, 1.0)));
  maps.push_back(InnerMapping::quadratic_array({random_quadratic(rng, n), random_quadratic(rng, n)}));
  maps.push_back(InnerMapping::min_smooth(
      {{random_quadratic(rng, n), random_quadratic(rng, n), random_quadratic(rng, n)}, {random_quadratic(rng, n)}},
      4.0));
  maps.push_back(InnerMapping::sample_average({random_quadratic(rng, n)}, {random_quadratic(rng, n)},
                                              SampleDistribution::uniform, rng.next_u64(), 25));
  maps.push_back(InnerMapping::feed_forward({random_network({n, 5, 2}, 1.0, rng)}, {ActivationKind::softplus, 3.0}));
  for (const auto& F : maps)
    for (std::size_t k = 0; k < cases; ++k) {
      const Vector x = random_vector(rng, n, 2.0);
      const Matrix J = F.jacobian(x);
      Matrix Jfd(J.rows(), J.cols());
      const double e = 1e-6;
      for (Index j = 0; j < n; ++j) {
        Vector xp = x, xm = x;
        xp(j) += e;
        xm(j) -= e;
        Jfd.col(j) = (F.eval(xp) - F.eval(xm)) / (2.0 * e);
      }
      ++r.cases;
      if ((J - Jfd).cwiseAbs().maxCoeff() > 1e-5 * (1.0 + J.cwiseAbs().maxCoeff())) ++r.violations;
    }
  return r;
}

// Same seed -> identical draws; distinct named streams -> distinct draws.
inline PropertyResult property_sample_average_determinism(std::uint64_t seed, std::size_t cases) {
  PropertyResult r{"sample_average_determinism"};
  CounterRng rng(mix64(seed));
  const auto base = random_quadratic(rng, 2), pert = random_quadratic(rng, 2);
  for (std::size_t k = 0; k < cases; ++k) {
    const std::uint64_t key = stream_key(seed, "property", "sample/" + std::to_string(k));
    const std::size_t N = 1 + k % 50;
    for (auto d : {SampleDistribution::two_point, SampleDistribution::uniform}) {
      const InnerMapping a = InnerMapping::sample_average({base}, {pert}, d, key, N);
      const InnerMapping b = InnerMapping::sample_average({base}, {pert}, d, key, N);
      const auto& sa = std::get<InnerMapping::SampleAverage>(a.variant());
      const auto& sb = std::get<InnerMapping::SampleAverage>(b.variant());
      ++r.cases;
      if (sa.samples != sb.samples || sa.sample_mean != sb.sample_mean) ++r.violations;
      const InnerMapping c = a.resample(N, stream_key(seed, "property", "other/" + std::to_string(k)));
      const auto& sc = std::get<InnerMapping::SampleAverage>(c.variant());
      // uniform draws from different streams coincide with probability 0
      if (d == SampleDistribution::uniform) {
        ++r.cases;
        if (sc.samples == sa.samples) ++r.violations;
      }
    }
  }
  return r;
}

inline std::vector<PropertyResult> run_property_suites(std::uint64_t seed, std::size_t cases) {
  auto key = [&](const char* s) { return stream_key(seed, "property", s); };
  return {property_subgradient_inequality(key("subgradient"), cases),
          property_graph_monotonicity(key("monotone"), cases),
          property_prox_optimality(key("prox"), cases),
          property_projection_lipschitz(key("projection"), cases),
          property_jacobian_fd(key("jacobian"), cases),
          property_sample_average_determinism(seed, cases)};
}

}  // namespace capx::harness
