#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "capx/problem.hpp"
#include "capx/random.hpp"

namespace capx {

// Excess of gph dh_approx over gph dh_actual, truncated at B(0, 2 rho) in the
// norm max{||z||_2, ||v||_2}.
struct ExcessReport {
  double rho = 0.0;
  double measured_lower = 0.0;
  double certified_upper = 0.0;
  std::optional<double> closed_form_bound;
  std::string norm_note = "max{||z||_2, ||v||_2}";
};

struct GraphSampleOptions {
  std::size_t per_coordinate = 2000;
  std::size_t product_points = 4000;
  std::uint64_t seed = 0;
};

// Nearest point of a product of 1-D graphs.
struct GraphNearest {
  double distance = kInf;
  Vector z, v;
};

namespace detail {

struct ClippedPiece {
  const GraphPiece* piece = nullptr;
  Interval z, v;
};

inline double curve_inverse(const GraphPiece& p, Interval zr, double target, bool lower) {
  // first z in zr with curve(z) >= target (lower) or last z with curve(z) <= target
  double lo = zr.lo, hi = zr.hi;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double c = p.curve(mid);
    if (lower ? c >= target : c > target)
      hi = mid;
    else
      lo = mid;
  }
  return lower ? hi : lo;
}

inline std::optional<ClippedPiece> clip_piece(const GraphPiece& p, Interval zb, Interval vb) {
  ClippedPiece c;
  c.piece = &p;
  Interval zr = p.z.intersect(zb);
  if (zr.is_empty()) return std::nullopt;
  switch (p.kind) {
    case GraphPiece::Kind::vertical:
      c.z = zr;
      c.v = p.v.intersect(vb);
      if (c.v.is_empty()) return std::nullopt;
      return c;
    case GraphPiece::Kind::affine: {
      if (p.slope == 0.0) {
        if (!vb.contains(p.offset, 0.0)) return std::nullopt;
        c.z = zr;
        c.v = Interval::point(p.offset);
        return c;
      }
      double a = (vb.lo - p.offset) / p.slope, b = (vb.hi - p.offset) / p.slope;
      if (a > b) std::swap(a, b);
      c.z = zr.intersect({a, b});
      if (c.z.is_empty()) return std::nullopt;
      const double va = p.offset + p.slope * c.z.lo, vb2 = p.offset + p.slope * c.z.hi;
      c.v = {std::min(va, vb2), std::max(va, vb2)};
      return c;
    }
    case GraphPiece::Kind::curve: {
      const double cl = p.curve(zr.lo), ch = p.curve(zr.hi);
      if (cl > vb.hi || ch < vb.lo) return std::nullopt;
      const double zlo = cl >= vb.lo ? zr.lo : curve_inverse(p, zr, vb.lo, true);
      const double zhi = ch <= vb.hi ? zr.hi : curve_inverse(p, zr, vb.hi, false);
      if (zlo > zhi) return std::nullopt;
      c.z = {zlo, zhi};
      c.v = {p.curve(zlo), p.curve(zhi)};
      if (c.v.lo > c.v.hi) std::swap(c.v.lo, c.v.hi);
      return c;
    }
  }
  return std::nullopt;
}

inline std::vector<ClippedPiece> clip_graph(const SubdifferentialGraph1D& g, Interval zb, Interval vb) {
  std::vector<ClippedPiece> out;
  for (const auto& p : g.pieces)
    if (auto c = clip_piece(p, zb, vb)) out.push_back(*c);
  return out;
}

inline double interval_min_abs(Interval I) { return I.distance(0.0); }

struct GraphSample {
  double z, v;
};

inline std::vector<GraphSample> sample_clipped(const std::vector<ClippedPiece>& cps, std::size_t count) {
  std::vector<GraphSample> out;
  if (cps.empty()) return out;
  const std::size_t per = std::max<std::size_t>(2, count / cps.size());
  for (const auto& c : cps) {
    const GraphPiece& p = *c.piece;
    auto on_z = [&](double z) { out.push_back({z, p.value_at(z)}); };
    auto on_v = [&](double v) {
      if (p.kind == GraphPiece::Kind::vertical) {
        out.push_back({p.z.lo, v});
      } else {
        const double z = curve_inverse(p, c.z, v, true);
        out.push_back({z, p.curve(z)});
      }
    };
    // breakpoints
    if (p.kind == GraphPiece::Kind::vertical) {
      on_v(c.v.lo);
      on_v(c.v.hi);
    } else {
      on_z(c.z.lo);
      on_z(c.z.hi);
    }
    const bool split = p.kind == GraphPiece::Kind::curve && c.v.hi > c.v.lo;
    const std::size_t nz = p.kind == GraphPiece::Kind::vertical ? 0 : (split ? per / 2 : per);
    const std::size_t nv = p.kind == GraphPiece::Kind::vertical ? per : (split ? per - per / 2 : 0);
    for (std::size_t k = 1; k <= nz && c.z.hi > c.z.lo; ++k) on_z(c.z.lo + radical_inverse(k, 2) * (c.z.hi - c.z.lo));
    for (std::size_t k = 1; k <= nv && c.v.hi > c.v.lo; ++k) on_v(c.v.lo + radical_inverse(k, 2) * (c.v.hi - c.v.lo));
  }
  return out;
}

// Squared displacements (dz^2, dv^2) of the mu-weighted projection onto a piece.
inline std::pair<double, double> weighted_projection(const GraphPiece& p, double z, double v, double mu, double* zo,
                                                     double* vo) {
  double zz, vv;
  switch (p.kind) {
    case GraphPiece::Kind::vertical:
      zz = p.z.lo;
      vv = p.v.clamp(v);
      break;
    case GraphPiece::Kind::affine:
      if (p.slope == 0.0) {
        zz = p.z.clamp(z);
        vv = p.offset;
      } else {
        const double s = p.slope;
        const double den = mu + (1.0 - mu) * s * s;
        zz = p.z.clamp((mu * z + (1.0 - mu) * s * (v - p.offset)) / den);
        vv = p.offset + s * zz;
      }
      break;
    default:
      throw CapabilityError("graph distance: curved pieces of the target graph are not supported");
  }
  if (zo) *zo = zz;
  if (vo) *vo = vv;
  return {(zz - z) * (zz - z), (vv - v) * (vv - v)};
}

inline bool mu_independent(const GraphPiece& p) {
  return p.kind == GraphPiece::Kind::vertical || (p.kind == GraphPiece::Kind::affine && p.slope == 0.0);
}

}  // namespace detail

// Exact distance from (z, v) to the product of 1-D graphs under max{||dz||_2, ||dv||_2}.
inline GraphNearest graph_point_distance(const std::vector<SubdifferentialGraph1D>& graphs, const Vector& z,
                                         const Vector& v) {
  const size_t m = graphs.size();
  if (static_cast<size_t>(z.size()) != m || static_cast<size_t>(v.size()) != m)
    throw InputError("graph_point_distance: dimension mismatch");
  for (const auto& g : graphs)
    if (g.has_curves()) throw CapabilityError("graph distance: curved pieces of the target graph are not supported");
  size_t combos = 1;
  for (const auto& g : graphs) {
    if (g.pieces.empty()) throw InputError("graph_point_distance: empty graph");
    combos *= g.pieces.size();
    if (combos > 100000) throw CapabilityError("graph_point_distance: too many piece combinations");
  }
  GraphNearest best;
  std::vector<const GraphPiece*> sel(m);
  for (size_t c = 0; c < combos; ++c) {
    size_t rem = c;
    bool fixed = true;
    for (size_t i = 0; i < m; ++i) {
      sel[i] = &graphs[i].pieces[rem % graphs[i].pieces.size()];
      rem /= graphs[i].pieces.size();
      fixed = fixed && detail::mu_independent(*sel[i]);
    }
    auto eval = [&](double mu, Vector* zo, Vector* vo) {
      double A = 0.0, B = 0.0;
      for (size_t i = 0; i < m; ++i) {
        double zz, vv;
        const auto ab = detail::weighted_projection(*sel[i], z(i), v(i), mu, &zz, &vv);
        A += ab.first;
        B += ab.second;
        if (zo) (*zo)(i) = zz;
        if (vo) (*vo)(i) = vv;
      }
      return std::pair<double, double>{A, B};
    };
    double mu_star = 0.5;
    double val;
    if (fixed) {
      const auto ab = eval(0.5, nullptr, nullptr);
      val = std::max(ab.first, ab.second);
    } else {
      // max over mu of a concave function
      auto g = [&](double mu) {
        const auto ab = eval(mu, nullptr, nullptr);
        return mu * ab.first + (1.0 - mu) * ab.second;
      };
      double lo = 0.0, hi = 1.0;
      const double r = 0.5 * (std::sqrt(5.0) - 1.0);
      double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
      double ga = g(a), gb = g(b);
      for (int k = 0; k < 90; ++k) {
        if (ga < gb) {
          lo = a;
          a = b;
          ga = gb;
          b = lo + r * (hi - lo);
          gb = g(b);
        } else {
          hi = b;
          b = a;
          gb = ga;
          a = hi - r * (hi - lo);
          ga = g(a);
        }
      }
      mu_star = 0.5 * (lo + hi);
      val = std::max({g(mu_star), g(0.0), g(1.0)});
    }
    const double d = std::sqrt(std::max(0.0, val));
    if (d < best.distance) {
      best.distance = d;
      best.z.resize(static_cast<Index>(m));
      best.v.resize(static_cast<Index>(m));
      eval(mu_star, &best.z, &best.v);
    }
  }
  return best;
}

inline std::vector<SubdifferentialGraph1D> graphs_of(const OuterFunction& h) {
  std::vector<SubdifferentialGraph1D> out;
  for (Index i = 0; i < h.dimension(); ++i) out.push_back(h.graph_1d(i));
  return out;
}

inline ExcessReport graph_excess_separable(const OuterFunction& approx, const OuterFunction& actual, double rho,
                                           const GraphSampleOptions& opt = {}) {
  if (!approx.separable() || !actual.separable())
    throw CapabilityError("graph_excess_separable: both outer functions must be separable");
  if (approx.dimension() != actual.dimension()) throw InputError("graph_excess_separable: dimension mismatch");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("graph_excess_separable: rho must be finite and > 0");
  const Index m = approx.dimension();
  const double R = 2.0 * rho;
  const Interval box{-R, R};
  const auto ga = graphs_of(approx);
  const auto gt = graphs_of(actual);

  // coordinate ranges implied by the ball given the other coordinates' minima
  std::vector<double> zmin(m, kInf), vmin(m, kInf);
  for (Index i = 0; i < m; ++i)
    for (const auto& c : detail::clip_graph(ga[i], box, box)) {
      zmin[i] = std::min(zmin[i], detail::interval_min_abs(c.z));
      vmin[i] = std::min(vmin[i], detail::interval_min_abs(c.v));
    }
  ExcessReport rep;
  rep.rho = rho;
  for (Index i = 0; i < m; ++i)
    if (zmin[i] == kInf) return rep;  // empty truncated graph
  double zs = 0.0, vs = 0.0;
  for (Index i = 0; i < m; ++i) zs += zmin[i] * zmin[i], vs += vmin[i] * vmin[i];
  if (zs > R * R || vs > R * R) return rep;

  std::vector<std::vector<detail::GraphSample>> samples(m);
  std::vector<double> sup_dz(m, 0.0), sup_dv(m, 0.0);
  for (Index i = 0; i < m; ++i) {
    const double zr = std::sqrt(std::max(0.0, R * R - (zs - zmin[i] * zmin[i])));
    const double vr = std::sqrt(std::max(0.0, R * R - (vs - vmin[i] * vmin[i])));
    const auto cps = detail::clip_graph(ga[i], {-zr, zr}, {-vr, vr});
    samples[i] = detail::sample_clipped(cps, opt.per_coordinate);
    if (samples[i].empty()) return rep;
    // per-coordinate constructive choice: nearest actual point in max{|dz|, |dv|}
    std::vector<SubdifferentialGraph1D> one{gt[i]};
    for (const auto& s : samples[i]) {
      double bz = kInf, bv = kInf, bm = kInf;
      for (const auto& p : gt[i].pieces) {
        if (p.kind == GraphPiece::Kind::curve)
          throw CapabilityError("graph distance: curved pieces of the target graph are not supported");
        const GraphNearest gn = graph_point_distance({SubdifferentialGraph1D{{p}}}, Vector::Constant(1, s.z),
                                                     Vector::Constant(1, s.v));
        const double dz = std::abs(gn.z(0) - s.z), dv = std::abs(gn.v(0) - s.v);
        if (std::max(dz, dv) < bm) bm = std::max(dz, dv), bz = dz, bv = dv;
      }
      sup_dz[i] = std::max(sup_dz[i], bz);
      sup_dv[i] = std::max(sup_dv[i], bv);
    }
  }
  double uz = 0.0, uv = 0.0;
  for (Index i = 0; i < m; ++i) uz += sup_dz[i] * sup_dz[i], uv += sup_dv[i] * sup_dv[i];
  rep.certified_upper = std::max(std::sqrt(uz), std::sqrt(uv));

  // product points: one coordinate swept with the others at their smallest sample
  std::vector<size_t> base(m, 0);
  for (Index i = 0; i < m; ++i) {
    double bn = kInf;
    for (size_t k = 0; k < samples[i].size(); ++k) {
      const double n = samples[i][k].z * samples[i][k].z + samples[i][k].v * samples[i][k].v;
      if (n < bn) bn = n, base[i] = k;
    }
  }
  Vector z(m), v(m);
  auto try_point = [&](const std::vector<size_t>& idx) {
    for (Index i = 0; i < m; ++i) z(i) = samples[i][idx[i]].z, v(i) = samples[i][idx[i]].v;
    if (z.norm() > R * (1.0 + 1e-12) || v.norm() > R * (1.0 + 1e-12)) return;
    rep.measured_lower = std::max(rep.measured_lower, graph_point_distance(gt, z, v).distance);
  };
  std::vector<size_t> idx = base;
  try_point(idx);
  for (Index i = 0; i < m; ++i) {
    idx = base;
    for (size_t k = 0; k < samples[i].size(); ++k) {
      idx[i] = k;
      try_point(idx);
    }
  }
  if (m > 1) {
    for (std::size_t k = 0; k < opt.product_points; ++k) {
      const Vector u = halton_point(opt.seed + k + 1, m);
      for (Index i = 0; i < m; ++i)
        idx[i] = std::min(samples[i].size() - 1, static_cast<size_t>(u(i) * static_cast<double>(samples[i].size())));
      try_point(idx);
    }
  }
  return rep;
}

// Two-sided version: max of both truncated excesses (sampled).
inline double graph_hausdorff_separable(const OuterFunction& a, const OuterFunction& b, double rho,
                                        const GraphSampleOptions& opt = {}) {
  return std::max(graph_excess_separable(a, b, rho, opt).measured_lower,
                  graph_excess_separable(b, a, rho, opt).measured_lower);
}

inline double homotopy_beta(double lambda, double rho) {
  return std::sqrt(1.0 + (4.0 * rho * rho - lambda * lambda) / ((1.0 - lambda) * (1.0 - lambda)));
}

// homotopy(base, lambda) against homotopy(base, 0) = base(z_1..z_{m-1}) + 0 z_m.
inline ExcessReport homotopy_graph_excess(const OuterFunction& base, double lambda, double rho,
                                          const GraphSampleOptions& opt = {}) {
  if (!base.separable()) throw InputError("homotopy_graph_excess: base must be separable");
  if (!(lambda > 0.0 && lambda < 1.0)) throw InputError("homotopy_graph_excess: lambda must lie in (0, 1)");
  if (!(rho >= lambda / 2.0)) throw InputError("homotopy_graph_excess: requires rho >= lambda / 2");
  const OuterFunction hn = OuterFunction::homotopy(base, lambda);
  const OuterFunction h0 = OuterFunction::homotopy(base, 0.0);
  ExcessReport rep = graph_excess_separable(hn, h0, rho, opt);
  // construction (z, ((1 - lambda) y, lambda)) -> (z, (y, 0)): distance lambda sqrt(1 + ||y||^2)
  double ysq = 0.0;
  const double R = 2.0 * rho;
  for (Index i = 0; i < base.dimension(); ++i) {
    double s = 0.0;
    for (const auto& c : detail::clip_graph(base.graph_1d(i), {-R, R}, Interval::real_line()))
      s = std::max({s, c.v.lo * c.v.lo, c.v.hi * c.v.hi});
    ysq += s;
  }
  ysq = std::min(ysq, (4.0 * rho * rho - lambda * lambda) / ((1.0 - lambda) * (1.0 - lambda)));
  rep.certified_upper = lambda * std::sqrt(1.0 + ysq);
  rep.closed_form_bound = homotopy_beta(lambda, rho) * lambda;
  return rep;
}

inline double augmented_lagrangian_bound(double rho, const Vector& y, Index m, double theta) {
  const double yinf = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
  return (2.0 * rho + yinf) * std::sqrt(static_cast<double>(m - 1)) / theta;
}

inline double excess(const std::vector<Vector>& from, const std::vector<Vector>& to) {
  double e = 0.0;
  for (const auto& a : from) {
    double d = kInf;
    for (const auto& b : to) d = std::min(d, (a - b).norm());
    e = std::max(e, d);
  }
  return e;
}

inline double support_set_excess(const std::vector<Vector>& A, const std::vector<Vector>& B) {
  if (A.empty() || B.empty()) throw InputError("support_set_excess: sets must be nonempty");
  for (const auto& p : A)
    for (const auto& q : B)
      if (p.size() != q.size()) throw InputError("support_set_excess: dimension mismatch");
  return std::max(excess(A, B), excess(B, A));
}

// Points of X inside B(0, rho): proj_X(0), the origin if feasible, and a Halton fill.
inline std::vector<Vector> sample_feasible_ball(const ClosedSet& X, double rho, std::size_t count) {
  const Index n = X.dimension();
  const Vector p0 = X.project(Vector::Zero(n));
  if (p0.norm() > rho) throw InputError("sample_feasible_ball: X and B(0, rho) do not intersect");
  std::vector<Vector> out{p0};
  for (std::uint64_t k = 1; out.size() < count + 1 && k < 50 * count + 100; ++k) {
    const Vector x = (halton_point(k, n).array() * 2.0 - 1.0).matrix() * rho;
    if (x.norm() <= rho && X.contains(x)) out.push_back(x);
  }
  return out;
}

struct EtaEstimate {
  double eta0 = 0.0;
  double eta = 0.0;
  std::optional<double> eta0_certified;
};

// sup ||F_a(x) - F(x)|| and sup_i exs(df_a_i(x); con df_i(x)) over X cap B(0, rho).
inline EtaEstimate estimate_eta(const InnerMapping& Fa, const InnerMapping& F, const ClosedSet& X, double rho,
                                std::size_t samples, const std::vector<Vector>& extra = {}) {
  if (Fa.input_dim() != F.input_dim() || Fa.output_dim() != F.output_dim())
    throw InputError("estimate_eta: mappings differ in dimensions");
  std::vector<Vector> pts = sample_feasible_ball(X, rho, samples);
  for (const auto& e : extra)
    if (e.norm() <= rho && X.contains(e)) pts.push_back(e);
  EtaEstimate r;
  for (const auto& x : pts) {
    r.eta0 = std::max(r.eta0, (Fa.eval(x) - F.eval(x)).norm());
    const JacobianElement ja = Fa.jacobian_element(x), jt = F.jacobian_element(x);
    for (Index i = 0; i < F.output_dim(); ++i) {
      const auto to = jt.generators(i);
      for (const auto& g : ja.generators(i)) r.eta = std::max(r.eta, distance_to_hull(to, g));
    }
  }
  const auto* ma = std::get_if<InnerMapping::MinSmooth>(&Fa.variant());
  const auto* mt = std::get_if<InnerMapping::MinSmooth>(&F.variant());
  if (ma && mt && ma->theta && !mt->theta) {
    double s = 0.0;
    for (const auto& comp : ma->components) {
      const double b = std::log(static_cast<double>(comp.size())) / *ma->theta;
      s += b * b;
    }
    r.eta0_certified = std::sqrt(s);
  }
  return r;
}

inline double solution_error_bound(double eta0, double eta, double graph_excess, double rho, Index m) {
  if (eta0 < 0 || eta < 0 || graph_excess < 0 || rho < 0) throw InputError("solution_error_bound: negative input");
  return std::max(std::sqrt(static_cast<double>(m)) * rho * eta, eta0 + graph_excess);
}

// sup over B(0, radius) of |h_a - h_b|, sampled on the ball, its boundary and the given points.
inline double sup_value_gap(const OuterFunction& ha, const OuterFunction& hb, double radius, std::size_t samples,
                            const std::vector<Vector>& extra = {}) {
  const Index m = ha.dimension();
  double best = std::abs(ha.value(Vector::Zero(m)).value() - hb.value(Vector::Zero(m)).value());
  auto at = [&](const Vector& z) {
    const ExtendedReal a = ha.value(z), b = hb.value(z);
    if (!a.is_finite() || !b.is_finite()) return;
    best = std::max(best, std::abs(a.value() - b.value()));
  };
  for (std::uint64_t k = 1; k <= samples; ++k) {
    const Vector u = (halton_point(k, m).array() * 2.0 - 1.0).matrix();
    if (u.norm() <= 1.0) at(radius * u);
    if (u.norm() > 0.0) at(radius * u.normalized());
  }
  for (const auto& e : extra)
    if (e.norm() <= radius) at(e);
  return best;
}

using Evaluator = std::function<ExtendedReal(const Vector&)>;

struct EpiPointReport {
  Vector point;
  double liminf_deficit_tail = 0.0;
  double limsup_deficit_tail = 0.0;
  double liminf_deficit_last = 0.0;
  double limsup_deficit_last = 0.0;
  bool inconclusive = false;
  bool pass = false;
};

struct EpiProbeReport {
  std::vector<EpiPointReport> points;
  bool pass = true;
};

// Finite-nu proxies of liminf f^nu(x^nu) >= f(x) and limsup f^nu(x^nu) <= f(x).
// Paths default to x^nu = x. When f(x) = +inf the lower deficit is measured
// by 1/(1 + max(0, f^nu)).
inline EpiProbeReport epi_probe(const std::vector<Evaluator>& family, const Evaluator& actual,
                                const std::vector<Vector>& points, const std::vector<std::vector<Vector>>& paths = {},
                                double tol = 1e-6, std::size_t tail = 0) {
  if (family.empty()) throw InputError("epi_probe: empty family");
  if (!paths.empty() && paths.size() != points.size()) throw InputError("epi_probe: one path per point required");
  const size_t N = family.size();
  const size_t tail_len = tail == 0 ? std::max<size_t>(1, N / 2) : std::min(tail, N);
  EpiProbeReport rep;
  for (size_t p = 0; p < points.size(); ++p) {
    EpiPointReport pr;
    pr.point = points[p];
    const ExtendedReal f = actual(points[p]);
    pr.liminf_deficit_tail = pr.limsup_deficit_tail = -kInf;
    bool both_inf_last = false;
    for (size_t nu = N - tail_len; nu < N; ++nu) {
      const Vector& x = paths.empty() ? points[p] : paths[p].at(nu);
      const ExtendedReal fn = family[nu](x);
      double lo, up;
      if (!f.is_finite()) {
        lo = fn.is_finite() ? 1.0 / (1.0 + std::max(0.0, fn.value())) : 0.0;
        up = 0.0;
      } else {
        lo = fn.is_finite() ? f.value() - fn.value() : -kInf;
        up = fn.is_finite() ? fn.value() - f.value() : kInf;
      }
      pr.liminf_deficit_tail = std::max(pr.liminf_deficit_tail, lo);
      pr.limsup_deficit_tail = std::max(pr.limsup_deficit_tail, up);
      if (nu == N - 1) {
        pr.liminf_deficit_last = lo;
        pr.limsup_deficit_last = up;
        both_inf_last = !f.is_finite() && !fn.is_finite();
      }
    }
    pr.inconclusive = both_inf_last;
    pr.pass = pr.inconclusive || (pr.liminf_deficit_last <= tol && pr.limsup_deficit_last <= tol);
    rep.pass = rep.pass && pr.pass;
    rep.points.push_back(std::move(pr));
  }
  return rep;
}

struct TransferResult {
  bool found = false;
  double displacement = kInf;
  double residual = kInf;
  StationarityTriple actual;
  bool pass = false;
};

struct TransferReport {
  std::vector<TransferResult> results;
  bool pass = true;
};

inline double triple_distance(const StationarityTriple& a, const StationarityTriple& b) {
  return max3((a.x - b.x).norm(), (a.y - b.y).norm(), (a.z - b.z).norm());
}

// For each near-stationary approximate triple, finds an actual triple with
// residual <= delta + bound close to it. Candidates: the triple itself, its
// (z, y) projected onto gph dh at the same x, and for n <= 2 a grid of x
// around it at the given resolution.
inline TransferReport near_solution_transfer(const std::vector<std::pair<StationarityTriple, double>>& approx,
                                             const CompositeProblem& actual, double rho, double bound,
                                             double resolution = 1e-3) {
  TransferReport rep;
  const bool sep = actual.h.separable();
  const auto graphs = sep ? graphs_of(actual.h) : std::vector<SubdifferentialGraph1D>{};
  for (const auto& [t, delta] : approx) {
    if (max3(t.x.norm(), t.y.norm(), t.z.norm()) > rho * (1.0 + 1e-12))
      throw InputError("near_solution_transfer: triple lies outside B(0, rho)");
    TransferResult best;
    const double eps = delta + bound;
    auto consider = [&](StationarityTriple c) {
      if (!actual.X.contains(c.x, 1e-10)) return;
      const double r = stationarity_residual(actual, c).combined;
      if (!(r <= eps)) return;
      const double d = triple_distance(c, t);
      if (d < best.displacement) {
        best.found = true;
        best.displacement = d;
        best.residual = r;
        best.actual = std::move(c);
      }
    };
    auto projected = [&](const Vector& x) {
      StationarityTriple c{x, t.y, actual.F.eval(x)};
      if (sep) {
        const GraphNearest gn = graph_point_distance(graphs, c.z, t.y);
        c.z = gn.z;
        c.y = gn.v;
      }
      return c;
    };
    consider(t);
    consider(projected(t.x));
    if (!best.found || best.displacement > bound) {
      const Index n = actual.n();
      if (n <= 2 && actual.m() <= 3) {
        const double radius = std::max(bound, 10.0 * resolution) + resolution;
        const int steps = static_cast<int>(std::ceil(radius / resolution));
        if (n == 1) {
          for (int i = -steps; i <= steps; ++i) consider(projected(actual.X.project(t.x + Vector::Constant(1, i * resolution))));
        } else {
          for (int i = -steps; i <= steps; ++i)
            for (int j = -steps; j <= steps; ++j) {
              Vector x = t.x;
              x(0) += i * resolution;
              x(1) += j * resolution;
              consider(projected(actual.X.project(x)));
            }
        }
      }
    }
    best.pass = best.found && best.displacement <= bound + resolution;
    rep.pass = rep.pass && best.pass;
    rep.results.push_back(std::move(best));
  }
  return rep;
}

struct RateRow {
  std::size_t nu = 0;
  double parameter = 0.0;
  ExcessReport excess;
  std::optional<double> residual;
  std::optional<double> bound;
  double eta0 = 0.0;
  double eta = 0.0;
  double solution_error_bound = 0.0;
};

struct RateTable {
  std::vector<RateRow> rows;
};

// Least-squares slope of log y against log x over the pairs with x, y > 0.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("loglog_slope: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
    const double a = std::log(x[k]), b = std::log(y[k]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
    ++n;
  }
  if (n < 2) throw InputError("loglog_slope: fewer than two positive pairs");
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw InputError("loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

}  // namespace capx
