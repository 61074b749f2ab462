#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "capx/harness/checks.hpp"
#include "capx/harness/config.hpp"
#include "capx/harness/family.hpp"
#include "capx/harness/report.hpp"

namespace capx::harness {

enum ExitCode : int { exit_pass = 0, exit_assertion_failure = 1, exit_nonconvergence = 2, exit_input_error = 3 };

struct RunResult {
  int exit_code = exit_pass;
  std::string status;  // pass, fail, nonconvergence, error
  std::string error;
  std::filesystem::path trace_path, rates_path, summary_path;
  std::vector<Assertion> assertions, expectations;
  std::vector<std::string> warnings;
  double epca_seconds = 0.0;
};

struct PipelineOutput {
  std::optional<EpcaTrace> trace;
  RateComputation rates;
  std::string trace_csv, rates_csv;
  std::string status = "pass";
  std::string error;
  double epca_seconds = 0.0;
};

inline PipelineOutput run_pipeline(const ExperimentConfig& cfg) {
  PipelineOutput out;
  std::size_t rate_count = cfg.family.length;
  if (cfg.epca) {
    detail::Stopwatch sw;
    try {
      out.trace = run_epca(make_family(cfg), *cfg.epca);
    } catch (const EpcaNonconvergence& e) {
      out.trace = e.trace;
      out.status = "nonconvergence";
      out.error = e.what();
    } catch (const ConsistencyError& e) {
      out.trace = EpcaTrace{};
      out.status = "nonconvergence";
      out.error = e.what();
    }
    out.epca_seconds = sw.seconds();
    std::size_t complete = 0;
    for (const auto& r : out.trace->records) complete += r.triple.x.size() > 0;
    if (out.status != "pass") rate_count = std::min(rate_count, complete + (cfg.family.multiplier_update ? 1 : 0));
  }
  const EpcaTrace* tp = out.trace ? &*out.trace : nullptr;
  out.rates = compute_rates(cfg, rate_count, tp);
  std::vector<TraceRow> rows;
  if (tp)
    for (const auto& r : tp->records) {
      TraceRow tr{r.nu, cfg.family.parameter.at(r.nu - 1), &r, std::nan("")};
      if (r.triple.x.size() > 0) tr.phi_actual = eval_phi(cfg.actual(), r.triple.x).value();
      rows.push_back(tr);
    }
  out.trace_csv = render_trace_csv(rows);
  out.rates_csv = render_rates_csv(out.rates.table);
  return out;
}

// Output directory: explicit argument, else $CAPX_OUTPUT_DIR, else the working directory.
inline std::filesystem::path resolve_output_dir(const std::filesystem::path& explicit_dir = {}) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* e = std::getenv("CAPX_OUTPUT_DIR"); e && *e) return e;
  return std::filesystem::current_path();
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  RunResult res;
  const std::filesystem::path base = out_dir / cfg.output;
  std::filesystem::create_directories(base.parent_path());
  res.trace_path = base.string() + "_trace.csv";
  res.rates_path = base.string() + "_rates.csv";
  res.summary_path = base.string() + "_summary.json";
  detail::Stopwatch total;

  PipelineOutput po;
  try {
    po = run_pipeline(cfg);
  } catch (const std::exception& e) {
    // input-shaped failures during the run (e.g. +inf objective at x0)
    res.exit_code = exit_input_error;
    res.status = "error";
    res.error = e.what();
    json s{{"name", cfg.name}, {"status", res.status}, {"exit_code", res.exit_code}, {"error", res.error}};
    write_text(res.summary_path, s.dump(2) + "\n");
    return res;
  }
  write_text(res.trace_path, po.trace_csv);
  write_text(res.rates_path, po.rates_csv);
  res.epca_seconds = po.epca_seconds;
  if (po.trace) res.warnings = po.trace->warnings;

  RunContext ctx{cfg, po.trace ? &*po.trace : nullptr, po.rates, po.epca_seconds,
                 parse_csv(po.trace_csv), parse_csv(po.rates_csv), {}, po.trace_csv, po.rates_csv};
  ctx.rerun = [&cfg]() {
    const PipelineOutput again = run_pipeline(cfg);
    return std::make_pair(again.trace_csv, again.rates_csv);
  };
  for (const auto& c : cfg.checks) res.assertions.push_back(run_check(c, ctx));
  for (const auto& e : cfg.expectations) res.expectations.push_back(run_expectation(e, ctx));

  bool all = true;
  for (const auto& a : res.assertions) all = all && a.passed();
  for (const auto& a : res.expectations) all = all && a.passed();
  if (po.status == "nonconvergence") {
    res.exit_code = exit_nonconvergence;
    res.status = po.status;
    res.error = po.error;
  } else {
    res.exit_code = all ? exit_pass : exit_assertion_failure;
    res.status = all ? "pass" : "fail";
  }

  json s{{"name", cfg.name},
         {"description", cfg.description},
         {"seed", cfg.seed},
         {"family", cfg.family.name},
         {"status", res.status},
         {"exit_code", res.exit_code},
         {"artifacts",
          {{"trace", res.trace_path.filename().string()}, {"rates", res.rates_path.filename().string()}}},
         {"timings", {{"epca_seconds", po.epca_seconds}, {"total_seconds", total.seconds()}}},
         {"warnings", res.warnings},
         {"assertions", json::array()},
         {"expectations", json::array()}};
  if (!res.error.empty()) s["error"] = res.error;
  for (const auto& a : res.assertions) s["assertions"].push_back(assertion_to_json(a));
  for (const auto& a : res.expectations) s["expectations"].push_back(assertion_to_json(a));
  write_text(res.summary_path, s.dump(2) + "\n");
  return res;
}

}  // namespace capx::harness
