#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace capx::harness {

struct FixtureInfo {
  std::string name;
  std::string description;
};

inline const std::vector<FixtureInfo>& list_fixtures() {
  static const std::vector<FixtureInfo> f{
      {"goal_softplus", "softplus smoothing of a goal function, theta = 2^nu, EPCA and graph-excess rate"},
      {"aug_lagrangian", "augmented Lagrangian family for one equality constraint, excess ~ 1/theta"},
      {"quad_penalty", "quadratic penalty on a 1-D equality-constrained problem, grid minimizers"},
      {"exact_penalty", "exact penalty family, graph excess exactly 0 once theta >= 2 rho"},
      {"log_barrier", "log-barrier family, epi-convergence probe along interior paths"},
      {"homotopy", "homotopy from a linear objective, excess against beta lambda"},
      {"distributionally_robust", "perturbed two-point ambiguity set, square-root rate of the graph pipeline"},
      {"min_smoothing", "log-sum-exp smoothing of min pieces, sandwich and certified eta0"},
      {"sample_average", "sample-average approximation with growing samples, property suites"},
      {"network_inverse", "inversion through a relu network smoothed by softplus, network lift"},
      {"convex_sanity", "quadratic demo and affine problems checked against a direct splitting solve"}};
  return f;
}

// $CAPX_FIXTURE_DIR, else the bundled directory fixed at configure time.
inline std::filesystem::path fixture_dir() {
  if (const char* e = std::getenv("CAPX_FIXTURE_DIR"); e && *e) return e;
#ifdef CAPX_DEFAULT_FIXTURE_DIR
  return CAPX_DEFAULT_FIXTURE_DIR;
#else
  return "fixtures";
#endif
}

inline std::filesystem::path fixture_path(const std::string& name) { return fixture_dir() / (name + ".json"); }

}  // namespace capx::harness
