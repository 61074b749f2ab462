#pragma once

#include <optional>
#include <string>
#include <vector>

#include "capx/inner.hpp"
#include "capx/outer.hpp"
#include "capx/sets.hpp"

namespace capx {

// phi(x) = iota_X(x) + h(F(x))
struct CompositeProblem {
  ClosedSet X;
  OuterFunction h;
  InnerMapping F;

  CompositeProblem(ClosedSet X_, OuterFunction h_, InnerMapping F_)
      : X(std::move(X_)), h(std::move(h_)), F(std::move(F_)) {
    if (F.input_dim() != X.dimension())
      throw InputError("problem: F expects dimension " + std::to_string(F.input_dim()) + " but X has dimension " +
                       std::to_string(X.dimension()));
    if (F.output_dim() != h.dimension())
      throw InputError("problem: F has " + std::to_string(F.output_dim()) + " components but h expects " +
                       std::to_string(h.dimension()));
  }

  Index n() const { return X.dimension(); }
  Index m() const { return h.dimension(); }
};

struct StationarityTriple {
  Vector x, y, z;
};

// Distances from 0 to the three blocks of S(x, y, z).
struct ResidualTriple {
  double u_norm = 0.0;
  double v_dist = 0.0;
  double w_dist = 0.0;
  double combined = 0.0;
  bool v_exact = true;
  bool w_exact = true;
};

inline ExtendedReal eval_phi(const CompositeProblem& P, const Vector& x) {
  if (x.size() != P.n())
    throw InputError("eval_phi: expected dimension " + std::to_string(P.n()) + ", got " + std::to_string(x.size()));
  if (!P.X.contains(x, 1e-10)) return ExtendedReal::infinity();
  return P.h.value(P.F.eval(x));
}

// dist(0, sum_i y_i con df_i(x) + N_X(x)). Exact for smooth F; for nonsmooth F
// the minimum over hull vertex combinations is returned and flagged.
inline ConeDistance multiplier_residual(const ClosedSet& X, const JacobianElement& je, const Vector& x,
                                        const Vector& y, const Vector& shift) {
  const Index m = y.size();
  std::vector<Index> multi;
  for (Index i = 0; i < m; ++i)
    if (je.generators(i).size() > 1 && y(i) != 0.0) multi.push_back(i);
  Vector d = je.jacobian.transpose() * y + shift;
  if (multi.empty()) return X.normal_cone_distance(x, -d);
  // Enumerate vertex selections; components beyond the cap keep the selection row.
  std::vector<Index> enumerated;
  std::vector<std::vector<Vector>> gens;
  size_t combos = 1;
  for (Index i : multi) {
    std::vector<Vector> g = je.generators(i);
    if (combos * g.size() > 4096) break;
    combos *= g.size();
    enumerated.push_back(i);
    gens.push_back(std::move(g));
  }
  for (Index i : enumerated) d -= y(i) * je.jacobian.row(i).transpose();
  ConeDistance best{kInf, false};
  for (size_t c = 0; c < combos; ++c) {
    Vector e = d;
    size_t rem = c;
    for (size_t k = 0; k < enumerated.size(); ++k) {
      e += y(enumerated[k]) * gens[k][rem % gens[k].size()];
      rem /= gens[k].size();
    }
    best.distance = std::min(best.distance, X.normal_cone_distance(x, -e).distance);
  }
  best.exact = false;
  return best;
}

inline ResidualTriple stationarity_residual(const CompositeProblem& P, const StationarityTriple& t) {
  if (t.x.size() != P.n() || t.y.size() != P.m() || t.z.size() != P.m())
    throw InputError("stationarity_residual: triple dimensions do not match the problem");
  ResidualTriple r;
  r.u_norm = (P.F.eval(t.x) - t.z).norm();
  const SubdiffDistance sd = P.h.subdiff_distance(t.z, t.y);
  r.v_dist = sd.distance;
  r.v_exact = sd.exact;
  const JacobianElement je = P.F.jacobian_element(t.x);
  const ConeDistance cd = multiplier_residual(P.X, je, t.x, t.y, Vector::Zero(P.n()));
  r.w_dist = cd.distance;
  r.w_exact = cd.exact && je.exact;
  r.combined = max3(r.u_norm, r.v_dist, r.w_dist);
  return r;
}

// Parameters of one member of an approximating sequence.
struct ScheduleEntry {
  double theta = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  std::optional<Vector> y_estimate;
  std::optional<std::size_t> sample_size;
  double delta = 0.0;
};

struct ApproximationSchedule {
  std::vector<ScheduleEntry> entries;

  std::size_t length() const { return entries.size(); }

  // theta nondecreasing, lambda and delta nonincreasing, delta > 0, bounded y.
  void validate() const {
    if (entries.empty()) throw InputError("schedule: empty");
    for (size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (!(e.delta > 0.0) || !std::isfinite(e.delta)) throw InputError("schedule: delta must be finite and > 0");
      if (e.y_estimate && !e.y_estimate->allFinite()) throw InputError("schedule: y estimate must be bounded");
      if (k == 0) continue;
      const auto& p = entries[k - 1];
      if (e.theta < p.theta) throw InputError("schedule: theta must be nondecreasing");
      if (e.lambda > p.lambda) throw InputError("schedule: lambda must be nonincreasing");
      if (e.delta > p.delta) throw InputError("schedule: delta must be nonincreasing");
    }
    if (entries.size() > 1 && !(entries.back().delta < entries.front().delta))
      throw InputError("schedule: delta must decrease toward 0");
  }
};

}  // namespace capx
