#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "capx/epca.hpp"
#include "capx/varlab.hpp"

namespace capx::harness {

using nlohmann::json;

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> c{"nu",     "theta",        "lambda_final", "inner_iters",
                                          "res_u",  "res_v",        "res_w",        "res_combined",
                                          "delta",  "phi_approx",   "phi_actual",   "exit_step"};
  return c;
}

inline const std::vector<std::string>& rate_columns() {
  static const std::vector<std::string> c{"nu",   "parameter", "excess_lower", "excess_upper", "paper_bound",
                                          "eta0", "eta",       "solution_error_bound"};
  return c;
}

// 17 significant digits; non-finite values as nan / inf / -inf.
inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt17(v);
}

inline double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return std::strtod(j.get<std::string>().c_str(), nullptr);
  return std::nan("");
}

struct TraceRow {
  std::size_t nu = 0;
  double theta = 0.0;
  const EpcaRecord* record = nullptr;
  double phi_actual = std::nan("");
};

inline std::string render_trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  for (size_t k = 0; k < trace_columns().size(); ++k) os << (k ? "," : "") << trace_columns()[k];
  os << "\n";
  for (const auto& r : rows) {
    const EpcaRecord& e = *r.record;
    const bool complete = e.triple.x.size() > 0;
    const double nan = std::nan("");
    os << r.nu << "," << fmt17(r.theta) << "," << fmt17(complete ? e.lambda_final : nan) << ","
       << e.inner_iterations << "," << fmt17(complete ? e.residual.u_norm : nan) << ","
       << fmt17(complete ? e.residual.v_dist : nan) << "," << fmt17(complete ? e.residual.w_dist : nan) << ","
       << fmt17(complete ? e.residual.combined : nan) << "," << fmt17(e.delta) << ","
       << fmt17(complete ? e.objective.value() : nan) << "," << fmt17(r.phi_actual) << ","
       << (complete ? exit_name(e.exit) : "incomplete") << "\n";
  }
  return os.str();
}

inline std::string render_rates_csv(const RateTable& t) {
  std::ostringstream os;
  for (size_t k = 0; k < rate_columns().size(); ++k) os << (k ? "," : "") << rate_columns()[k];
  os << "\n";
  for (const auto& r : t.rows)
    os << r.nu << "," << fmt17(r.parameter) << "," << fmt17(r.excess.measured_lower) << ","
       << fmt17(r.excess.certified_upper) << "," << fmt17(r.excess.closed_form_bound.value_or(std::nan(""))) << ","
       << fmt17(r.eta0) << "," << fmt17(r.eta) << "," << fmt17(r.solution_error_bound) << "\n";
  return os.str();
}

// Parsed CSV: header names and numeric cells (non-numeric cells read as nan).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw InputError("csv: no column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw InputError("csv: empty file");
  t.header = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) throw InputError("csv: row width differs from header");
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      row.push_back(end != c.c_str() && *end == '\0' ? v : std::nan(""));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << s;
}

// Statistic over CSV columns, filtered by {"where": {"column", "min", "max"}}:
//   slope    least-squares log-log slope of y against x
//   max/min  extreme of one column (nan cells skipped)
//   max_diff max of a - b_scale * b
inline double csv_statistic(const CsvTable& t, const json& spec) {
  const std::string stat = spec.at("stat").get<std::string>();
  std::vector<const std::vector<double>*> rows;
  for (const auto& r : t.rows) {
    if (spec.contains("where")) {
      const json& w = spec["where"];
      const double v = r[t.column(w.at("column").get<std::string>())];
      if (w.contains("min") && !(v >= w["min"].get<double>())) continue;
      if (w.contains("max") && !(v <= w["max"].get<double>())) continue;
    }
    rows.push_back(&r);
  }
  const double nan = std::nan("");
  if (stat == "slope") {
    const size_t cx = t.column(spec.at("x").get<std::string>()), cy = t.column(spec.at("y").get<std::string>());
    std::vector<double> x, y;
    for (auto* r : rows) x.push_back((*r)[cx]), y.push_back((*r)[cy]);
    try {
      return loglog_slope(x, y);
    } catch (const InputError&) {
      return nan;
    }
  }
  if (stat == "max" || stat == "min") {
    const size_t c = t.column(spec.at("column").get<std::string>());
    double best = nan;
    for (auto* r : rows) {
      const double v = (*r)[c];
      if (std::isnan(v)) continue;
      if (std::isnan(best) || (stat == "max" ? v > best : v < best)) best = v;
    }
    return best;
  }
  if (stat == "max_diff") {
    const size_t ca = t.column(spec.at("a").get<std::string>()), cb = t.column(spec.at("b").get<std::string>());
    const double s = spec.value("b_scale", 1.0);
    double best = nan;
    for (auto* r : rows) {
      const double v = (*r)[ca] - s * (*r)[cb];
      if (std::isnan(v)) return nan;
      if (std::isnan(best) || v > best) best = v;
    }
    return best;
  }
  throw InputError("csv statistic: unknown stat '" + stat + "'");
}

struct Check {
  std::string name;
  std::string comparator;  // <=, >=, <, >, ==, within (|measured - target| <= threshold)
  double measured = std::nan("");
  double threshold = 0.0;
  double target = std::nan("");
  bool passed = false;
  json recompute;  // null when the value is not derivable from the CSV artifacts
  std::string note;
};

inline bool compare(const std::string& op, double m, double thr, double target) {
  if (std::isnan(m)) return false;
  if (op == "<=") return m <= thr;
  if (op == ">=") return m >= thr;
  if (op == "<") return m < thr;
  if (op == ">") return m > thr;
  if (op == "==") return m == thr;
  if (op == "within") return std::abs(m - target) <= thr;
  throw InputError("unknown comparator '" + op + "'");
}

inline Check make_check(std::string name, std::string op, double measured, double threshold,
                        double target = std::nan("")) {
  Check c{std::move(name), std::move(op), measured, threshold, target, false, nullptr, {}};
  c.passed = compare(c.comparator, measured, threshold, target);
  return c;
}

struct Assertion {
  std::string name;
  int criterion = 0;  // 0 for fixture expectations
  std::vector<Check> checks;
  std::string error;

  bool passed() const {
    if (!error.empty() || checks.empty()) return false;
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline json check_to_json(const Check& c) {
  json j{{"name", c.name},
         {"comparator", c.comparator},
         {"measured", json_number(c.measured)},
         {"threshold", json_number(c.threshold)},
         {"passed", c.passed}};
  if (c.comparator == "within") j["target"] = json_number(c.target);
  if (!c.recompute.is_null()) j["recompute"] = c.recompute;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline json assertion_to_json(const Assertion& a) {
  json j{{"name", a.name}, {"passed", a.passed()}, {"checks", json::array()}};
  if (a.criterion) j["criterion"] = a.criterion;
  for (const auto& c : a.checks) j["checks"].push_back(check_to_json(c));
  if (!a.error.empty()) j["error"] = a.error;
  return j;
}

struct VerifyReport {
  int exit_code = 0;
  std::vector<std::string> lines;
};

// Re-checks every stored check: recomputable values are re-derived from the
// CSV artifacts next to the summary, then every comparator is re-applied.
inline VerifyReport verify_summary(const std::filesystem::path& summary_path) {
  VerifyReport rep;
  json s;
  try {
    s = json::parse(read_text(summary_path));
  } catch (const std::exception& e) {
    rep.exit_code = 3;
    rep.lines.push_back(std::string("cannot read summary: ") + e.what());
    return rep;
  }
  const auto dir = summary_path.parent_path();
  std::map<std::string, CsvTable> tables;
  auto table = [&](const std::string& which) -> const CsvTable& {
    auto it = tables.find(which);
    if (it != tables.end()) return it->second;
    const std::string file = s.at("artifacts").at(which).get<std::string>();
    return tables.emplace(which, parse_csv(read_text(dir / file))).first->second;
  };
  bool ok = true;
  auto visit = [&](const json& list, const char* what) {
    if (!list.is_array()) return;
    for (const auto& a : list) {
      bool a_ok = !a.contains("error") && !a.value("checks", json::array()).empty();
      for (const auto& c : a.value("checks", json::array())) {
        const double measured = number_from_json(c.at("measured"));
        const double thr = number_from_json(c.at("threshold"));
        const double target = c.contains("target") ? number_from_json(c["target"]) : std::nan("");
        std::string status;
        bool c_ok = compare(c.at("comparator").get<std::string>(), measured, thr, target);
        if (c_ok != c.at("passed").get<bool>()) {
          status = "stored pass flag disagrees with comparator";
          c_ok = false;
        }
        if (c.contains("recompute")) {
          try {
            const double again = csv_statistic(table(c["recompute"].at("artifact").get<std::string>()), c["recompute"]);
            const bool same = (std::isnan(again) && std::isnan(measured)) ||
                              std::abs(again - measured) <= 1e-12 * (1.0 + std::abs(measured));
            if (!same) {
              status = "recomputed " + fmt17(again) + " differs from stored " + fmt17(measured);
              c_ok = false;
            }
          } catch (const std::exception& e) {
            status = std::string("recompute failed: ") + e.what();
            c_ok = false;
          }
        }
        if (status.empty()) status = c_ok ? "ok" : "fails";
        rep.lines.push_back(std::string(what) + " " + a.value("name", "?") + "/" + c.value("name", "?") + ": " +
                            status + (c.contains("recompute") ? " (recomputed)" : ""));
        a_ok = a_ok && c_ok;
      }
      if (a.contains("error")) rep.lines.push_back(std::string(what) + " " + a.value("name", "?") + ": error " +
                                                   a["error"].get<std::string>());
      ok = ok && a_ok;
    }
  };
  try {
    visit(s.value("assertions", json::array()), "assertion");
    visit(s.value("expectations", json::array()), "expectation");
  } catch (const std::exception& e) {
    rep.exit_code = 3;
    rep.lines.push_back(std::string("malformed summary: ") + e.what());
    return rep;
  }
  if (s.value("status", "") == "nonconvergence") {
    rep.exit_code = 2;
    rep.lines.push_back("run did not converge: " + s.value("error", std::string()));
  } else {
    rep.exit_code = ok ? 0 : 1;
  }
  return rep;
}

}  // namespace capx::harness
