#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "capx/harness.hpp"

using namespace capx::harness;
namespace fs = std::filesystem;

namespace {

fs::path out_dir() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / "capx_integration";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + CAPX_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

class FixtureRun : public ::testing::TestWithParam<std::string> {};

TEST_P(FixtureRun, RunsAndVerifies) {
  const std::string name = GetParam();
  ASSERT_EQ(cli("run " + name + " -o " + quoted(out_dir())), 0);
  const fs::path summary = out_dir() / (name + "_summary.json");
  ASSERT_TRUE(fs::exists(summary));
  EXPECT_TRUE(fs::exists(out_dir() / (name + "_trace.csv")));
  EXPECT_TRUE(fs::exists(out_dir() / (name + "_rates.csv")));
  const json s = json::parse(read_text(summary));
  EXPECT_EQ(s["status"], "pass");
  EXPECT_EQ(cli("verify " + quoted(summary)), 0);

  // measured_lower <= certified_upper <= closed-form bound, where present
  const CsvTable rates = parse_csv(read_text(out_dir() / (name + "_rates.csv")));
  const size_t lo = rates.column("excess_lower"), up = rates.column("excess_upper"), pb = rates.column("paper_bound");
  for (const auto& r : rates.rows) {
    if (std::isfinite(r[lo]) && std::isfinite(r[up])) EXPECT_LE(r[lo], r[up] + 1e-12) << "nu=" << r[0];
    if (std::isfinite(r[pb])) EXPECT_LE(r[up], r[pb] + 1e-9) << "nu=" << r[0];
  }
}

INSTANTIATE_TEST_SUITE_P(All, FixtureRun, ::testing::ValuesIn([] {
                           std::vector<std::string> v;
                           for (const auto& f : list_fixtures()) v.push_back(f.name);
                           return v;
                         }()),
                         [](const auto& info) { return info.param; });

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("fixtures"), 0);
  EXPECT_EQ(cli("run /nonexistent.json -o " + quoted(out_dir())), 3);
  EXPECT_EQ(cli("frobnicate"), 3);

  json bad = json::parse(read_text(fixture_path("convex_sanity")));
  bad["epca"]["sigma"] = 1.5;
  write_text(out_dir() / "bad_sigma.json", bad.dump());
  EXPECT_EQ(cli("run " + quoted(out_dir() / "bad_sigma.json") + " -o " + quoted(out_dir())), 3);

  json stall = json::parse(read_text(fixture_path("convex_sanity")));
  stall["epca"]["inner_iteration_cap"] = 1;
  stall["epca"]["lambda_bar"] = 1e-3;
  stall["epca"]["lambda0"] = 1e-3;
  stall["output"] = "stall";
  write_text(out_dir() / "stall.json", stall.dump());
  EXPECT_EQ(cli("run " + quoted(out_dir() / "stall.json") + " -o " + quoted(out_dir())), 2);

  json strict = json::parse(read_text(fixture_path("convex_sanity")));
  strict["assertions"][0]["params"]["tolerance"] = 0.0;
  strict["assertions"][0]["params"]["step"] = 0.3;
  strict["output"] = "strict";
  write_text(out_dir() / "strict.json", strict.dump());
  EXPECT_EQ(cli("run " + quoted(out_dir() / "strict.json") + " -o " + quoted(out_dir())), 1);
  EXPECT_EQ(cli("verify " + quoted(out_dir() / "strict_summary.json")), 1);
}

TEST(Cli, OutputDirFromEnvironment) {
  const fs::path d = out_dir() / "env";
  fs::create_directories(d);
  const std::string cmd = "CAPX_OUTPUT_DIR=" + quoted(d) + " \"" + CAPX_CLI_PATH + "\" run homotopy > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(st));
  EXPECT_EQ(WEXITSTATUS(st), 0);
  EXPECT_TRUE(fs::exists(d / "homotopy_summary.json"));
}
