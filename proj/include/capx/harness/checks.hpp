#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "capx/harness/config.hpp"
#include "capx/harness/family.hpp"
#include "capx/harness/oracles.hpp"
#include "capx/harness/report.hpp"

namespace capx::harness {

struct RunContext {
  const ExperimentConfig& cfg;
  const EpcaTrace* trace = nullptr;  // null when EPCA did not run
  const RateComputation& rates;
  double epca_seconds = 0.0;
  CsvTable trace_csv, rates_csv;
  std::function<std::pair<std::string, std::string>()> rerun;  // fresh (trace, rates) CSV text
  std::string trace_text, rates_text;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline double pnum(const json& p, const char* key, double def) {
  if (!p.contains(key)) return def;
  const auto v = Reader::as_number(p[key]);
  if (!v) throw InputError(std::string("check parameter '") + key + "' must be a number");
  return *v;
}

inline std::vector<double> plist(const json& p, const char* key, std::vector<double> def) {
  if (!p.contains(key)) return def;
  if (!p[key].is_array()) throw InputError(std::string("check parameter '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : p[key]) {
    const auto d = Reader::as_number(v);
    if (!d) throw InputError(std::string("check parameter '") + key + "' must hold numbers");
    out.push_back(*d);
  }
  return out;
}

inline const EpcaTrace& need_trace(const RunContext& ctx) {
  if (!ctx.trace || ctx.trace->records.empty()) throw InputError("check needs an EPCA trace (epca section missing)");
  return *ctx.trace;
}

// Last record with a completed triple.
inline const EpcaRecord& final_record(const RunContext& ctx) {
  const auto& tr = need_trace(ctx);
  for (auto it = tr.records.rbegin(); it != tr.records.rend(); ++it)
    if (it->triple.x.size() > 0) return *it;
  throw InputError("check needs at least one completed EPCA record");
}

inline Check from_csv(const RunContext& ctx, std::string name, std::string op, double thr, json spec,
                      double target = std::nan("")) {
  const CsvTable& t = spec.at("artifact") == "trace" ? ctx.trace_csv : ctx.rates_csv;
  Check c = make_check(std::move(name), std::move(op), csv_statistic(t, spec), thr, target);
  c.recompute = std::move(spec);
  return c;
}

inline std::string tag(const std::string& prefix, double v) {
  std::ostringstream os;
  os << prefix << v;
  return os.str();
}

}  // namespace detail

using detail::pnum;
using detail::plist;

// 1
inline std::vector<Check> check_softplus_uniform_bound(const RunContext&, const json& p) {
  detail::Stopwatch sw;
  const auto thetas = plist(p, "thetas", {1.0, 10.0, 100.0, 1e4});
  const auto grid = grid_points(pnum(p, "lower", -50.0), pnum(p, "upper", 50.0), pnum(p, "step", 1e-3));
  double over = -kInf, at0 = 0.0;
  for (double th : thetas) {
    double dev = 0.0;
    for (double g : grid) dev = std::max(dev, std::abs(softplus(th, g) - std::max(0.0, g)));
    over = std::max(over, dev - std::log(2.0) / th);
    at0 = std::max(at0, std::abs(softplus(th, 0.0) - std::log(2.0) / th));
  }
  return {make_check("max_deviation_minus_ln2_over_theta", "<=", over, 1e-12),
          make_check("value_at_zero_error", "<=", at0, 1e-12),
          make_check("runtime_seconds", "<", sw.seconds(), pnum(p, "runtime_limit", 1.0))};
}

// 2
inline std::vector<Check> check_min_smoothing_sandwich(const RunContext& ctx, const json& p) {
  detail::Stopwatch sw;
  const auto systems = static_cast<std::size_t>(pnum(p, "systems", 100));
  const auto points = static_cast<std::size_t>(pnum(p, "points", 1000));
  const auto max_pieces = static_cast<Index>(pnum(p, "max_pieces", 4));
  const auto max_dim = static_cast<Index>(pnum(p, "max_dim", 3));
  const auto max_comp = static_cast<Index>(pnum(p, "max_components", 3));
  const auto thetas = plist(p, "thetas", {0.5, 1.0, 10.0, 100.0, 1e4});
  CounterRng rng = make_stream(ctx.cfg.seed, ctx.cfg.name, "check/sandwich");
  double lower = -kInf, upper = -kInf;
  for (std::size_t s = 0; s < systems; ++s) {
    const Index n = random_index(rng, 1, max_dim);
    const Index m = random_index(rng, 1, max_comp);
    std::vector<std::vector<QuadraticForm>> comps(static_cast<size_t>(m));
    for (auto& c : comps) {
      const Index k = random_index(rng, 1, max_pieces);
      for (Index j = 0; j < k; ++j) c.push_back(random_quadratic(rng, n));
    }
    const double th = thetas[s % thetas.size()];
    const InnerMapping exact = InnerMapping::min_smooth(comps, std::nullopt);
    const InnerMapping smooth = InnerMapping::min_smooth(comps, th);
    for (std::size_t q = 0; q < points; ++q) {
      const Vector x = random_vector(rng, n, 3.0);
      const Vector d = exact.eval(x) - smooth.eval(x);
      for (Index i = 0; i < m; ++i) {
        lower = std::max(lower, -d(i));
        upper = std::max(upper, d(i) - std::log(static_cast<double>(comps[static_cast<size_t>(i)].size())) / th);
      }
    }
  }
  return {make_check("lower_violation", "<=", lower, 1e-10), make_check("upper_violation", "<=", upper, 1e-10),
          make_check("runtime_seconds", "<", sw.seconds(), pnum(p, "runtime_limit", 5.0))};
}

// 3
inline std::vector<Check> check_al_excess(const RunContext& ctx, const json& p) {
  const auto ms = plist(p, "ms", {2, 4});
  const double rho = pnum(p, "rho", 1.0);
  const auto thetas = plist(p, "thetas", {1e1, 1e2, 1e3, 1e4, 1e5, 1e6});
  std::vector<Check> out;
  for (double md : ms) {
    const Index m = static_cast<Index>(md);
    const Vector y = Vector::Zero(m - 1);
    const OuterFunction actual = OuterFunction::equality_indicator(m, true);
    double over = -kInf, order = -kInf;
    std::vector<double> up;
    for (double th : thetas) {
      const ExcessReport r = graph_excess_separable(OuterFunction::augmented_lagrangian(y, th), actual, rho,
                                                    ctx.cfg.diagnostics.graph);
      over = std::max(over, r.certified_upper - augmented_lagrangian_bound(rho, y, m, th));
      order = std::max(order, r.measured_lower - r.certified_upper);
      up.push_back(r.certified_upper);
    }
    const std::string pre = detail::tag("m", md) + "_";
    out.push_back(make_check(pre + "certified_minus_bound", "<=", over, 1e-12));
    out.push_back(make_check(pre + "certified_slope", "within", loglog_slope(thetas, up), 0.05, -1.0));
    out.push_back(make_check(pre + "measured_minus_certified", "<=", order, 0.0));
  }
  return out;
}

// 4
inline std::vector<Check> check_exact_penalty(const RunContext& ctx, const json& p) {
  const double from = pnum(p, "zero_from", 2.0 * ctx.cfg.diagnostics.rho);
  const double pos = pnum(p, "positive_at", 1.0);
  const json where_zero{{"column", "parameter"}, {"min", from}};
  return {detail::from_csv(ctx, "max_excess_upper_theta_ge_2rho", "==", 0.0,
                           {{"artifact", "rates"}, {"stat", "max"}, {"column", "excess_upper"}, {"where", where_zero}}),
          detail::from_csv(ctx, "max_excess_lower_theta_ge_2rho", "==", 0.0,
                           {{"artifact", "rates"}, {"stat", "max"}, {"column", "excess_lower"}, {"where", where_zero}}),
          detail::from_csv(ctx, "excess_lower_at_theta_1", ">", 0.0,
                           {{"artifact", "rates"},
                            {"stat", "min"},
                            {"column", "excess_lower"},
                            {"where", {{"column", "parameter"}, {"min", pos}, {"max", pos}}}})};
}

// 5
inline std::vector<Check> check_homotopy(const RunContext& ctx, const json&) {
  return {detail::from_csv(ctx, "measured_minus_beta_lambda", "<=", 1e-10,
                           {{"artifact", "rates"}, {"stat", "max_diff"}, {"a", "excess_lower"}, {"b", "paper_bound"}}),
          detail::from_csv(ctx, "certified_minus_beta_lambda", "<=", 1e-10,
                           {{"artifact", "rates"}, {"stat", "max_diff"}, {"a", "excess_upper"}, {"b", "paper_bound"}})};
}

// 6
inline std::vector<Check> check_dro(const RunContext& ctx, const json& p) {
  const double rho = ctx.cfg.diagnostics.rho;
  double over = -kInf;
  const auto& rows = ctx.rates.table.rows;
  for (size_t k = 0; k < rows.size(); ++k) over = std::max(over, ctx.rates.value_gaps[k] - rho * rows[k].parameter);
  return {make_check("value_gap_minus_rho_alpha", "<=", over, 1e-12),
          detail::from_csv(ctx, "excess_upper_slope", "within", pnum(p, "slope_tolerance", 0.1),
                           {{"artifact", "rates"}, {"stat", "slope"}, {"x", "parameter"}, {"y", "excess_upper"}},
                           0.5)};
}

// 7
inline std::vector<Check> check_epca_quadratic(const RunContext& ctx, const json& p) {
  const auto& last = detail::final_record(ctx);
  const CompositeProblem& P = ctx.cfg.actual();
  if (P.n() != 1) throw InputError("epca_quadratic_demo: needs a 1-D problem");
  const auto grid = grid_points(pnum(p, "lower", -1.0), pnum(p, "upper", 3.0), pnum(p, "step", 1e-4));
  const double xg = grid_argmin([&](double x) { return eval_phi(P, Vector::Constant(1, x)); }, grid);
  const double factor = ctx.cfg.epca->subproblem_tolerance_factor;
  const bool all_rows = detail::need_trace(ctx).records.size() == ctx.cfg.family.length;
  return {make_check("final_distance_to_grid_minimizer", "<=", std::abs(last.triple.x(0) - xg),
                     pnum(p, "tolerance", 1e-4)),
          detail::from_csv(ctx, "rows_certified", "<=", 0.0,
                           {{"artifact", "trace"},
                            {"stat", "max_diff"},
                            {"a", "res_combined"},
                            {"b", "delta"},
                            {"b_scale", 1.0 + factor}}),
          make_check("trace_complete", "==", all_rows ? 1.0 : 0.0, 1.0),
          make_check("runtime_seconds", "<", ctx.epca_seconds, pnum(p, "runtime_limit", 2.0))};
}

// 8
inline std::vector<Check> check_actual_stationarity(const RunContext& ctx, const json& p) {
  const auto& last = detail::final_record(ctx);
  const ResidualTriple r = stationarity_residual(ctx.cfg.actual(), last.triple);
  return {make_check("u_norm", "<=", r.u_norm, pnum(p, "u", 1e-8)),
          make_check("v_dist", "<=", r.v_dist, pnum(p, "v", 1e-6)),
          make_check("w_dist", "<=", r.w_dist, pnum(p, "w", 1e-6)),
          make_check("runtime_seconds", "<", ctx.epca_seconds, pnum(p, "runtime_limit", 5.0))};
}

// 9
inline std::vector<Check> check_convex_equivalence(const RunContext& ctx, const json& p) {
  if (!p.contains("instances") || !p["instances"].is_array() || p["instances"].empty())
    throw InputError("convex_oracle_equivalence: params.instances must be a nonempty array");
  const double tol = pnum(p, "tolerance", 1e-6);
  const auto length = static_cast<std::size_t>(pnum(p, "length", 30));
  std::vector<Check> out;
  for (std::size_t i = 0; i < p["instances"].size(); ++i) {
    const json& inst = p["instances"][i];
    const std::string name = inst.value("name", "instance" + std::to_string(i));
    Reader rd;
    const std::string path = "params.instances[" + std::to_string(i) + "]";
    BuildContext bc{ctx.cfg.seed, ctx.cfg.name, "."};
    auto X = build_set(rd, inst.at("set"), path + ".set");
    auto h = build_outer(rd, inst.at("outer"), path + ".outer");
    auto F = build_inner(rd, inst.at("inner"), path + ".inner", bc);
    auto x0 = rd.vec(inst, path, "x0");
    if (!rd.errors.empty()) throw ConfigError(rd.errors);
    const auto* aff = std::get_if<InnerMapping::Affine>(&F->variant());
    if (!aff) throw InputError(path + ": inner mapping must be affine");
    const CompositeProblem P(*X, *h, *F);
    EpcaConfig ec;
    ec.x0 = *x0;
    ec.level_probe = false;
    for (std::size_t k = 0; k < length; ++k) ec.delta.push_back(0.5 * std::pow(0.5, static_cast<double>(k)));
    const EpcaTrace tr = run_epca(constant_family(P, length), ec);
    const DirectSolve ds = direct_splitting_solve(P.X, P.h, aff->A, aff->b, *x0);
    out.push_back(make_check(name + "_distance_to_direct_solve", "<=", (tr.records.back().triple.x - ds.x).norm(), tol));
    out.push_back(make_check(name + "_direct_solve_converged", "==", ds.converged ? 1.0 : 0.0, 1.0));
  }
  return out;
}

// 10, quadratic penalty
inline std::vector<Check> check_epi_grid(const RunContext& ctx, const json& p) {
  const CompositeProblem& P = ctx.cfg.actual();
  if (P.n() != 1) throw InputError("epi_consequence_grid: needs a 1-D problem");
  const double step = pnum(p, "step", 1e-3);
  const auto grid = grid_points(pnum(p, "lower", -2.0), pnum(p, "upper", 2.0), step);
  const double theta_min = pnum(p, "theta_min", 1e4);
  auto at = [](const CompositeProblem& Q) {
    return [&Q](double x) { return eval_phi(Q, Vector::Constant(1, x)); };
  };
  const double xs = grid_argmin(at(P), grid);
  double disp = -kInf;
  int used = 0;
  for (std::size_t nu = 1; nu <= ctx.cfg.family.length; ++nu) {
    if (ctx.cfg.family.parameter[nu - 1] < theta_min) continue;
    const CompositeProblem Q = member(ctx.cfg, nu);
    disp = std::max(disp, std::abs(grid_argmin(at(Q), grid) - xs));
    ++used;
  }
  return {make_check("max_displacement_theta_ge_min", "<=", disp, 2.0 * step),
          make_check("members_with_theta_ge_min", ">=", used, 1.0),
          make_check("actual_grid_minimizer_found", "==", std::isfinite(xs) ? 1.0 : 0.0, 1.0)};
}

// 10, log barrier
inline std::vector<Check> check_epi_barrier(const RunContext& ctx, const json& p) {
  if (!p.contains("points")) throw InputError("epi_consequence_barrier: params.points required");
  Reader rd;
  auto pts = rd.mat(p, "params", "points");
  std::optional<Matrix> dirs;
  if (p.contains("directions")) dirs = rd.mat(p, "params", "directions");
  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  const double power = pnum(p, "offset_power", 0.5);
  const double tol = pnum(p, "tolerance", 1e-3);
  const CompositeProblem& P = ctx.cfg.actual();
  std::vector<Evaluator> fam;
  for (std::size_t nu = 1; nu <= ctx.cfg.family.length; ++nu)
    fam.push_back([Q = member(ctx.cfg, nu)](const Vector& x) { return eval_phi(Q, x); });
  std::vector<Vector> points;
  std::vector<std::vector<Vector>> paths;
  for (Index i = 0; i < pts->rows(); ++i) {
    const Vector x = pts->row(i).transpose();
    points.push_back(x);
    std::vector<Vector> path;
    for (std::size_t nu = 1; nu <= ctx.cfg.family.length; ++nu) {
      const double off = std::pow(ctx.cfg.family.parameter[nu - 1], -power);
      path.push_back(dirs ? Vector(x + off * dirs->row(i).transpose()) : x);
    }
    paths.push_back(std::move(path));
  }
  const EpiProbeReport rep = epi_probe(fam, [&P](const Vector& x) { return eval_phi(P, x); }, points, paths, tol, 1);
  double failing = 0, inconclusive = 0;
  for (const auto& r : rep.points) {
    failing += r.pass ? 0 : 1;
    inconclusive += r.inconclusive ? 1 : 0;
  }
  return {make_check("failing_points", "==", failing, 0.0),
          make_check("conclusive_points", ">=", static_cast<double>(rep.points.size()) - inconclusive, 1.0)};
}

// 11
inline std::vector<Check> check_network_lift(const RunContext& ctx, const json& p) {
  const auto count = static_cast<std::size_t>(pnum(p, "networks", 50));
  const auto points = static_cast<std::size_t>(pnum(p, "points", 20));
  const auto width = static_cast<Index>(pnum(p, "max_width", 8));
  const auto thetas = plist(p, "thetas", {1.0, 10.0, 100.0, 1e4});
  CounterRng rng = make_stream(ctx.cfg.seed, ctx.cfg.name, "check/lift");
  double hmax = 0.0, gap = -kInf;
  std::vector<double> pre;
  for (std::size_t k = 0; k < count; ++k) {
    const Network net = random_two_layer(rng, width);
    for (const Activation g : {Activation{ActivationKind::relu, 1.0}, Activation{ActivationKind::softplus, 5.0}}) {
      const InnerMapping F = InnerMapping::network_lift({net}, g);
      for (std::size_t q = 0; q < points; ++q) {
        const Vector x0 = random_vector(rng, net.input_dim(), 2.0);
        const Vector v = F.eval(F.lift_point(x0));
        const Index r = net.hidden_total();
        hmax = std::max(hmax, v.tail(r).cwiseAbs().maxCoeff());
        if (g.kind == ActivationKind::relu) {
          Vector cur = x0;
          for (const auto& L : net.layers) {
            const Vector z = L.weight * cur + L.bias;
            for (Index j = 0; j < z.size(); ++j) pre.push_back(z(j));
            cur = z.cwiseMax(0.0);
          }
        }
      }
    }
  }
  for (double t : grid_points(-5.0, 5.0, 1e-3)) pre.push_back(t);
  for (double th : thetas) {
    const Activation sp{ActivationKind::softplus, th}, re{ActivationKind::relu, 1.0};
    for (double t : pre) gap = std::max(gap, std::abs(sp.value(t) - re.value(t)) - std::log(2.0) / th);
  }
  std::vector<Check> out{make_check("lift_residual_max_abs", "<=", hmax, 1e-12),
                         make_check("activation_gap_minus_ln2_over_theta", "<=", gap, 0.0)};
  const auto& tr = detail::need_trace(ctx);
  double rise = -kInf;
  std::size_t steps = 0;
  for (const auto& rec : tr.records)
    for (size_t k = 1; k < rec.accepted_objectives.size(); ++k) {
      rise = std::max(rise, rec.accepted_objectives[k] - rec.accepted_objectives[k - 1]);
      ++steps;
    }
  out.push_back(make_check("max_increase_across_accepted_steps", "<=", rise, 0.0));
  out.push_back(make_check("accepted_steps", ">=", static_cast<double>(steps), 1.0));
  return out;
}

// 12
inline std::vector<Check> check_property_suites(const RunContext& ctx, const json& p) {
  std::vector<Check> out;
  const auto cases = static_cast<std::size_t>(pnum(p, "cases", 200));
  for (const auto& r : run_property_suites(stream_key(ctx.cfg.seed, ctx.cfg.name, "properties"), cases)) {
    Check c = make_check(r.name + "_violations", "==", static_cast<double>(r.violations), 0.0);
    c.note = std::to_string(r.cases) + " cases";
    out.push_back(std::move(c));
  }
  if (ctx.cfg.generator) {
    double diff = 0;
    for (std::size_t nu = 1; nu <= ctx.cfg.family.length; ++nu) {
      const auto a = member_inner(ctx.cfg, nu), b = member_inner(ctx.cfg, nu);
      diff += std::get<InnerMapping::SampleAverage>(a.variant()).samples ==
                      std::get<InnerMapping::SampleAverage>(b.variant()).samples
                  ? 0
                  : 1;
    }
    out.push_back(make_check("family_sample_redraw_mismatches", "==", diff, 0.0));
  }
  if (ctx.rerun) {
    const auto [t, r] = ctx.rerun();
    out.push_back(make_check("csv_rerun_mismatches", "==", (t != ctx.trace_text) + (r != ctx.rates_text), 0.0));
  }
  return out;
}

inline Assertion run_check(const CheckSpec& spec, const RunContext& ctx) {
  using Fn = std::vector<Check> (*)(const RunContext&, const json&);
  static const std::map<std::string, Fn> table{{"softplus_uniform_bound", check_softplus_uniform_bound},
                                               {"min_smoothing_sandwich", check_min_smoothing_sandwich},
                                               {"augmented_lagrangian_excess", check_al_excess},
                                               {"exact_penalty_exactness", check_exact_penalty},
                                               {"homotopy_excess", check_homotopy},
                                               {"distributionally_robust_rate", check_dro},
                                               {"epca_quadratic_demo", check_epca_quadratic},
                                               {"epca_softplus_goal_stationarity", check_actual_stationarity},
                                               {"convex_oracle_equivalence", check_convex_equivalence},
                                               {"epi_consequence_grid", check_epi_grid},
                                               {"epi_consequence_barrier", check_epi_barrier},
                                               {"network_lift_smoothing", check_network_lift},
                                               {"property_suites", check_property_suites}};
  Assertion a{spec.check, spec.criterion, {}, {}};
  try {
    a.checks = table.at(spec.check)(ctx, spec.params);
  } catch (const std::exception& e) {
    a.error = e.what();
  }
  return a;
}

// Fixture-level expectations (not acceptance criteria).
inline Assertion run_expectation(const ExpectationSpec& spec, const RunContext& ctx) {
  Assertion a{spec.name, 0, {}, {}};
  const json& p = spec.params;
  try {
    if (spec.kind == "rate_slope") {
      json rs{{"artifact", "rates"}, {"stat", "slope"}, {"x", p.value("x", "parameter")},
              {"y", p.value("column", "excess_upper")}};
      if (p.contains("where")) rs["where"] = p["where"];
      a.checks.push_back(detail::from_csv(ctx, "loglog_slope", "within", pnum(p, "tolerance", 0.05), rs,
                                          pnum(p, "expected", 0.0)));
    } else if (spec.kind == "transfer") {
      const auto& tr = detail::need_trace(ctx);
      const auto from = static_cast<std::size_t>(pnum(p, "from_nu", 1));
      const double res = pnum(p, "resolution", 1e-3);
      const double rho = ctx.cfg.diagnostics.rho;
      double failing = 0, worst = 0;
      std::size_t tried = 0;
      for (const auto& row : ctx.rates.table.rows) {
        if (row.nu < from || row.nu > tr.records.size()) continue;
        const auto& rec = tr.records[row.nu - 1];
        if (rec.triple.x.size() == 0) continue;
        const double bound = row.excess.closed_form_bound.value_or(row.excess.certified_upper);
        const TransferReport t = near_solution_transfer({{rec.triple, rec.delta}}, ctx.cfg.actual(), rho, bound, res);
        failing += t.pass ? 0 : 1;
        if (t.results.front().found) worst = std::max(worst, t.results.front().displacement);
        ++tried;
      }
      a.checks.push_back(make_check("members_without_nearby_actual_triple", "==", failing, 0.0));
      a.checks.push_back(make_check("members_tested", ">=", static_cast<double>(tried), 1.0));
      a.checks.back().note = "largest displacement " + fmt17(worst);
    } else if (spec.kind == "eta0_certified") {
      const CompositeProblem& P = ctx.cfg.actual();
      double over = -kInf;
      for (std::size_t nu = 1; nu <= ctx.cfg.family.length; ++nu) {
        const EtaEstimate e = estimate_eta(member_inner(ctx.cfg, nu), P.F, P.X, ctx.cfg.diagnostics.rho,
                                           ctx.cfg.diagnostics.samples);
        if (!e.eta0_certified) throw InputError("eta0_certified: family has no certified eta0");
        over = std::max(over, e.eta0 - *e.eta0_certified);
      }
      a.checks.push_back(make_check("sampled_minus_certified_eta0", "<=", over, 1e-12));
    } else if (spec.kind == "final_point") {
      Reader rd;
      auto target = rd.vec(p, "", "target");
      if (!rd.errors.empty()) throw ConfigError(rd.errors);
      const auto& last = detail::final_record(ctx);
      a.checks.push_back(
          make_check("distance_to_target", "<=", (last.triple.x - *target).norm(), pnum(p, "tolerance", 1e-6)));
    }
  } catch (const std::exception& e) {
    a.error = e.what();
  }
  return a;
}

}  // namespace capx::harness
