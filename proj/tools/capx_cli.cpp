// capx: run experiment configs, list bundled fixtures, verify summaries.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "capx/harness.hpp"

namespace fs = std::filesystem;
using namespace capx::harness;

namespace {

// A bare fixture name resolves to the bundled file.
fs::path resolve_config(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  for (const auto& f : list_fixtures())
    if (f.name == arg) return fixture_path(arg);
  return arg;
}

int cmd_run(const std::string& arg, const std::string& out) {
  const fs::path path = resolve_config(arg);
  if (!fs::exists(path)) {
    std::cerr << "capx: config '" << arg << "' not found\n";
    return exit_input_error;
  }
  ExperimentConfig cfg = [&] {
    try {
      return load_config(path);
    } catch (const ConfigError& e) {
      std::cerr << e.what() << "\n";
      std::exit(exit_input_error);
    }
  }();
  const RunResult r = run_experiment(cfg, resolve_output_dir(out));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  auto show = [](const Assertion& a) {
    std::cout << (a.passed() ? "PASS " : "FAIL ") << a.name;
    if (a.criterion) std::cout << " (criterion " << a.criterion << ")";
    std::cout << "\n";
    for (const auto& c : a.checks) {
      std::cout << "    " << (c.passed ? "ok   " : "FAIL ") << c.name << " = " << fmt17(c.measured) << " "
                << c.comparator << " ";
      if (c.comparator == "within") std::cout << fmt17(c.target) << " +- ";
      std::cout << fmt17(c.threshold) << "\n";
    }
    if (!a.error.empty()) std::cout << "    error: " << a.error << "\n";
  };
  for (const auto& a : r.assertions) show(a);
  for (const auto& a : r.expectations) show(a);
  if (!r.error.empty()) std::cerr << "capx: " << r.error << "\n";
  std::cout << cfg.name << ": " << r.status << " (exit " << r.exit_code << ")\n"
            << "  " << r.trace_path.string() << "\n  " << r.rates_path.string() << "\n  " << r.summary_path.string()
            << "\n";
  return r.exit_code;
}

int cmd_fixtures() {
  for (const auto& f : list_fixtures()) std::cout << f.name << "\t" << f.description << "\n";
  return 0;
}

int cmd_verify(const std::string& summary) {
  const VerifyReport v = verify_summary(summary);
  for (const auto& l : v.lines) std::cout << l << "\n";
  std::cout << (v.exit_code == 0 ? "verified" : "verification failed") << " (exit " << v.exit_code << ")\n";
  return v.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capx: composite optimization approximation experiments"};
  app.require_subcommand(1);
  std::string config, out, summary;
  auto* run = app.add_subcommand("run", "run one experiment config (path or fixture name)");
  run->add_option("config", config, "config JSON or bundled fixture name")->required();
  run->add_option("-o,--output-dir", out, "output directory (default: $CAPX_OUTPUT_DIR or .)");
  auto* fixtures = app.add_subcommand("fixtures", "list bundled fixtures");
  auto* verify = app.add_subcommand("verify", "re-check a summary against its CSV artifacts");
  verify->add_option("summary", summary, "summary JSON")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_input_error;
  }
  try {
    if (*run) return cmd_run(config, out);
    if (*fixtures) return cmd_fixtures();
    if (*verify) return cmd_verify(summary);
  } catch (const capx::InputError& e) {
    std::cerr << "capx: " << e.what() << "\n";
    return exit_input_error;
  }
  return exit_input_error;
}
