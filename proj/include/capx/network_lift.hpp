#pragma once

#include <optional>

#include "capx/problem.hpp"

namespace capx {

// Lifted formulation of min_x0 hhat(F_1(x0), ..., F_s(x0)) over networks F_i:
// variables (x0, x1), F = (last-layer outputs, layer residuals H), and
// h = hhat (+) iota_{0} on the residual block. When penalty_theta is given the
// indicator is replaced by (theta/2) ||H||^2.
inline CompositeProblem build_network_lift(const std::vector<Network>& nets, Activation g, const OuterFunction& hhat,
                                           std::optional<ClosedSet::Box> input_box = std::nullopt,
                                           std::optional<double> penalty_theta = std::nullopt) {
  InnerMapping F = InnerMapping::network_lift(nets, g);
  const Index n0 = nets.front().input_dim();
  const Index nq = nets.front().output_dim();
  const Index s = static_cast<Index>(nets.size());
  const Index r = nets.front().hidden_total();
  if (hhat.dimension() != s * nq)
    throw InputError("network lift: outer function expects " + std::to_string(hhat.dimension()) +
                     " coordinates, networks produce " + std::to_string(s * nq));
  OuterFunction residual =
      penalty_theta ? OuterFunction::squared_distance(Vector::Zero(s * r), Vector::Constant(s * r, 0.5 * *penalty_theta))
                    : OuterFunction::equality_indicator(s * r, false);
  OuterFunction h = OuterFunction::direct_sum({hhat, residual});
  const Index n = F.input_dim();
  if (!input_box) return CompositeProblem(ClosedSet::whole_space(n), std::move(h), std::move(F));
  if (input_box->lower.size() != n0) throw InputError("network lift: input box dimension mismatch");
  Vector lo = Vector::Constant(n, -kInf), hi = Vector::Constant(n, kInf);
  lo.head(n0) = input_box->lower;
  hi.head(n0) = input_box->upper;
  return CompositeProblem(ClosedSet::box(lo, hi), std::move(h), std::move(F));
}

}  // namespace capx
