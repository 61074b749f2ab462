#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "capx/harness/config.hpp"

namespace capx::harness {

// Perturbed support points p_k + alpha d_k, d_k the unit direction from p_k to
// the simplex barycenter (zero when p_k is the barycenter).
inline std::vector<Vector> perturbed_support(const std::vector<Vector>& pts, double alpha) {
  const Index m = pts.front().size();
  const Vector c = Vector::Constant(m, 1.0 / static_cast<double>(m));
  std::vector<Vector> out;
  for (const auto& p : pts) {
    const Vector d = c - p;
    const double nd = d.norm();
    if (nd == 0.0) {
      out.push_back(p);
      continue;
    }
    if (alpha > nd) throw InputError("distributionally_robust: alpha exceeds the distance to the barycenter");
    Vector q = p + (alpha / nd) * d;
    q = q.cwiseMax(0.0);
    q /= q.sum();
    out.push_back(q);
  }
  return out;
}

// Multipliers of the augmented Lagrangian member nu: y0, or with updates the
// y-block of the previous EPCA triple.
inline Vector al_multipliers(const ExperimentConfig& c, std::size_t nu, const EpcaTrace* trace) {
  if (!c.family.multiplier_update || nu == 1 || !trace || trace->records.size() < nu - 1) return c.family.y0;
  const Vector& y = trace->records[nu - 2].triple.y;
  return y.tail(y.size() - 1);
}

inline OuterFunction member_outer(const ExperimentConfig& c, std::size_t nu, const EpcaTrace* trace) {
  const CompositeProblem& P = c.actual();
  const double t = c.family.parameter.at(nu - 1);
  const Index m = P.m();
  switch (c.family.kind) {
    case FamilyKind::softplus_goal: {
      const auto& g = std::get<OuterFunction::Goal>(P.h.variant());
      return OuterFunction::softplus_goal(g.alpha, g.tau, t);
    }
    case FamilyKind::aug_lagrangian:
      return OuterFunction::augmented_lagrangian(al_multipliers(c, nu, trace), t);
    case FamilyKind::quad_penalty:
      return OuterFunction::quadratic_penalty(m, t);
    case FamilyKind::exact_penalty:
      return OuterFunction::exact_penalty(m, t);
    case FamilyKind::log_barrier:
      return OuterFunction::log_barrier(m, t);
    case FamilyKind::homotopy:
      return OuterFunction::homotopy(*std::get<OuterFunction::Homotopy>(P.h.variant()).base, t);
    case FamilyKind::distributionally_robust:
      return OuterFunction::support(perturbed_support(std::get<OuterFunction::Support>(P.h.variant()).points, t));
    default:
      return P.h;
  }
}

inline InnerMapping member_inner(const ExperimentConfig& c, std::size_t nu) {
  const CompositeProblem& P = c.actual();
  const double t = c.family.parameter.at(nu - 1);
  switch (c.family.kind) {
    case FamilyKind::min_smoothing:
      return P.F.with_min_smoothing(t);
    case FamilyKind::sample_average:
      return c.generator->resample(static_cast<std::size_t>(t),
                                   stream_key(c.seed, c.name, "sample/nu=" + std::to_string(nu)));
    case FamilyKind::network_softplus: {
      const auto& ff = std::get<InnerMapping::FeedForward>(P.F.variant());
      return InnerMapping::feed_forward(ff.networks, Activation{ActivationKind::softplus, t});
    }
    default:
      return P.F;
  }
}

inline CompositeProblem member(const ExperimentConfig& c, std::size_t nu, const EpcaTrace* trace = nullptr) {
  return CompositeProblem(c.actual().X, member_outer(c, nu, trace), member_inner(c, nu));
}

inline ProblemFamily make_family(const ExperimentConfig& c) {
  return {c.family.length, [&c](std::size_t nu, const EpcaTrace& tr) { return member(c, nu, &tr); }};
}

// Goal thresholds and support points lie inside B(0, rho) when they can; add
// them so sampled sups see the kinks.
inline std::vector<Vector> gap_probe_points(const OuterFunction& h) {
  std::vector<Vector> out;
  if (const auto* g = std::get_if<OuterFunction::Goal>(&h.variant())) out.push_back(g->tau);
  if (const auto* s = std::get_if<OuterFunction::Support>(&h.variant()))
    for (size_t a = 0; a < s->points.size(); ++a)
      for (size_t b = a + 1; b < s->points.size(); ++b) out.push_back(s->points[a] - s->points[b]);
  return out;
}

struct RateComputation {
  RateTable table;
  std::vector<double> value_gaps;  // sup |h^nu - h| over B(0, rho) when computed, else nan
};

// One rate row per family member (members 1..count).
inline RateComputation compute_rates(const ExperimentConfig& c, std::size_t count, const EpcaTrace* trace) {
  const CompositeProblem& P = c.actual();
  const double rho = c.diagnostics.rho;
  const auto& opt = c.diagnostics.graph;
  const Index m = P.m();
  RateComputation out;
  for (std::size_t nu = 1; nu <= count; ++nu) {
    RateRow row;
    row.nu = nu;
    row.parameter = c.family.parameter.at(nu - 1);
    const OuterFunction hn = member_outer(c, nu, trace);
    const InnerMapping Fn = member_inner(c, nu);
    double gap = std::nan("");
    const double nan = std::nan("");
    switch (c.family.kind) {
      case FamilyKind::softplus_goal: {
        gap = sup_value_gap(hn, P.h, rho, c.diagnostics.samples, gap_probe_points(P.h));
        row.excess = graph_excess_separable(hn, P.h, rho, opt);
        row.excess.certified_upper = std::sqrt(gap);
        break;
      }
      case FamilyKind::distributionally_robust: {
        gap = sup_value_gap(hn, P.h, rho, c.diagnostics.samples, gap_probe_points(P.h));
        row.excess.rho = rho;
        row.excess.measured_lower = nan;
        row.excess.certified_upper = std::sqrt(gap);
        break;
      }
      case FamilyKind::homotopy:
        row.excess = homotopy_graph_excess(*std::get<OuterFunction::Homotopy>(P.h.variant()).base, row.parameter,
                                           rho, opt);
        break;
      case FamilyKind::aug_lagrangian:
        row.excess = graph_excess_separable(hn, P.h, rho, opt);
        row.excess.closed_form_bound = augmented_lagrangian_bound(rho, al_multipliers(c, nu, trace), m, row.parameter);
        break;
      case FamilyKind::exact_penalty:
        row.excess = graph_excess_separable(hn, P.h, rho, opt);
        if (row.parameter >= 2.0 * rho) row.excess.closed_form_bound = 0.0;
        break;
      case FamilyKind::quad_penalty:
      case FamilyKind::log_barrier:
        row.excess = graph_excess_separable(hn, P.h, rho, opt);
        break;
      default:
        row.excess.rho = rho;  // h^nu = h
        break;
    }
    const bool same_F = c.family.kind != FamilyKind::min_smoothing && c.family.kind != FamilyKind::sample_average &&
                        c.family.kind != FamilyKind::network_softplus;
    if (!same_F) {
      const EtaEstimate e = estimate_eta(Fn, P.F, P.X, rho, c.diagnostics.samples);
      row.eta0 = e.eta0;
      row.eta = e.eta;
    }
    const double up = row.excess.certified_upper;
    row.solution_error_bound = std::isfinite(up) ? solution_error_bound(row.eta0, row.eta, up, rho, m) : nan;
    if (trace && nu <= trace->records.size()) row.residual = trace->records[nu - 1].residual.combined;
    out.table.rows.push_back(row);
    out.value_gaps.push_back(gap);
  }
  return out;
}

}  // namespace capx::harness
