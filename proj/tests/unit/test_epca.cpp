#include <gtest/gtest.h>

#include <chrono>

#include "capx/epca.hpp"

using namespace capx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// f(x) = a x^2 + b x + c in one variable
QuadraticForm quad1(double a, double b, double c) { return QuadraticForm::make(Matrix::Constant(1, 1, 2.0 * a), vec({b}), c); }

std::vector<double> halving(std::size_t n) {
  std::vector<double> d;
  for (std::size_t k = 1; k <= n; ++k) d.push_back(std::ldexp(1.0, -static_cast<int>(k)));
  return d;
}

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) < 0) == (f(mid) < 0))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

CompositeProblem quadratic_demo() {
  return CompositeProblem(ClosedSet::box(vec({-1.0}), vec({3.0})), OuterFunction::linear(vec({1.0})),
                          InnerMapping::quadratic_array({quad1(1.0, -2.0, 1.0)}));
}

ProblemFamily softplus_goal_family(std::size_t length) {
  return {length, [](std::size_t nu, const EpcaTrace&) {
            return CompositeProblem(ClosedSet::box(vec({-5.0}), vec({5.0})),
                                    OuterFunction::softplus_goal(vec({1.0}), vec({1.0}), std::ldexp(1.0, static_cast<int>(nu))),
                                    InnerMapping::quadratic_array({quad1(1.0, 0.0, 0.0)}));
          }};
}

EpcaConfig config(Vector x0, std::size_t n) {
  EpcaConfig c;
  c.x0 = std::move(x0);
  c.delta = halving(n);
  return c;
}

}  // namespace

TEST(Subproblem, Examples) {
  const Matrix I1 = Matrix::Identity(1, 1);
  auto r = solve_subproblem(ClosedSet::whole_space(1), OuterFunction::linear(vec({1.0})), vec({0.5}), I1, vec({1.0}), 1.0, 1e-12);
  EXPECT_NEAR(r.x(0), 0.0, 1e-10);
  EXPECT_NEAR(r.y(0), 1.0, 1e-15);
  r = solve_subproblem(ClosedSet::box(vec({0.0}), vec({5.0})), OuterFunction::linear(vec({1.0})), vec({0.5}), I1, vec({1.0}),
                       1.0, 1e-12);
  EXPECT_NEAR(r.x(0), 0.0, 1e-10);

  // first coordinate linear, second (max{0, z})^2
  const double x2 = bisect([](double x) { return 2.0 * std::max(0.0, 1.0 + x) + x; }, -5.0, 5.0);
  const OuterFunction h = OuterFunction::quadratic_penalty(2, 1.0);
  r = solve_subproblem(ClosedSet::whole_space(2), h, vec({0.0, 1.0}), Matrix::Identity(2, 2), vec({0.0, 0.0}), 1.0, 1e-12);
  EXPECT_NEAR(r.x(0), -1.0, 1e-10);
  EXPECT_NEAR(r.x(1), x2, 1e-10);
  EXPECT_NEAR(x2, -2.0 / 3.0, 1e-12);
}

TEST(Subproblem, SplittingBranchSatisfiesOptimality) {
  // nonsmooth h: exact-penalty over a 2-D affine model inside a box
  const OuterFunction h = OuterFunction::exact_penalty(3, 2.0);
  Matrix J(3, 2);
  J << 1.0, 0.5, -1.0, 2.0, 0.3, -0.7;
  const Vector c = vec({0.2, 0.4, -0.3});
  const Vector xb = vec({0.1, -0.2});
  const ClosedSet X = ClosedSet::box(vec({-1.0, -1.0}), vec({1.0, 0.5}));
  const double tol = 1e-9;
  const auto r = solve_subproblem(X, h, c, J, xb, 0.7, tol);
  EXPECT_TRUE(r.splitting);
  EXPECT_LE(h.subdiff_distance(r.z, r.y).distance, 1e-12);
  EXPECT_LE((r.z - (c + J * (r.x - xb))).norm(), tol);
  EXPECT_LE(X.normal_cone_distance(r.x, -(J.transpose() * r.y + (r.x - xb) / 0.7)).distance, tol);
  // the value matches a fine grid search
  auto obj = [&](const Vector& x) { return h.value(c + J * (x - xb)).value() + (x - xb).squaredNorm() / 1.4; };
  double best = kInf;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 300; ++j) best = std::min(best, obj(vec({-1.0 + i * 0.005, -1.0 + j * 0.005})));
  EXPECT_LE(obj(r.x), best + 1e-12);
}

TEST(Subproblem, SupportFunctionUsesProx) {
  const OuterFunction h = OuterFunction::support({vec({1.0, 0.0}), vec({0.3, 0.7})});
  const auto r = solve_subproblem(ClosedSet::whole_space(1), h, vec({0.5, -0.2}), Matrix::Constant(2, 1, 1.0), vec({0.0}),
                                  1.0, 1e-10);
  // h(c + x 1) = x + max(0.5, 0.01) = x + 0.5 so x* = -1
  EXPECT_NEAR(r.x(0), -1.0, 1e-8);
}

TEST(Subproblem, CuttingPlaneHasNoSolverBranch) {
  const OuterFunction h = add_cut(OuterFunction::cutting_plane(1), vec({0.0}), 0.0, vec({1.0}));
  EXPECT_THROW(solve_subproblem(ClosedSet::whole_space(1), h, vec({0.0}), Matrix::Identity(1, 1), vec({0.0}), 1.0, 1e-6),
               CapabilityError);
}

TEST(SufficientDecrease, Examples) {
  const OuterFunction lin = OuterFunction::linear(vec({1.0}));
  const InnerMapping aff = InnerMapping::affine(Matrix::Constant(1, 1, 2.0), vec({1.0}));
  const Matrix Ja = aff.jacobian(vec({0.0}));
  for (double s : {0.01, 0.5, 0.99}) EXPECT_TRUE(sufficient_decrease_test(lin, aff, vec({0.0}), vec({-3.0}), Ja, s));

  const InnerMapping sq = InnerMapping::quadratic_array({quad1(1.0, 0.0, 0.0)});
  const Matrix J = sq.jacobian(vec({1.0}));
  EXPECT_TRUE(sufficient_decrease_test(lin, sq, vec({1.0}), vec({1.0}), J, 0.5));
  EXPECT_FALSE(sufficient_decrease_test(lin, sq, vec({1.0}), vec({-1.0}), J, 0.5));

  const OuterFunction bar = OuterFunction::log_barrier(2, 1.0);
  const InnerMapping F2 = InnerMapping::affine(Matrix::Identity(2, 2), vec({0.0, 0.0}));
  EXPECT_THROW(sufficient_decrease_test(bar, F2, vec({0.0, -1.0}), vec({0.0, 1.0}), Matrix::Identity(2, 2), 0.5),
               EvaluationError);
}

TEST(Step5, Examples) {
  const InnerMapping aff = InnerMapping::affine(Matrix::Constant(1, 1, 3.0), vec({1.0}));
  auto r = step5_residuals(aff, vec({1.0}), vec({0.5}), vec({1.0 + 3.0 * 0.5}), vec({2.0}), 2.0);
  EXPECT_NEAR(r.u(0), 0.0, 1e-15);
  EXPECT_NEAR(r.w(0), 0.25, 1e-15);

  r = step5_residuals(aff, vec({1.0}), vec({1.0}), aff.eval(vec({1.0})), vec({2.0}), 2.0);
  EXPECT_EQ(r.u.norm(), 0.0);
  EXPECT_EQ(r.w.norm(), 0.0);

  const InnerMapping sq = InnerMapping::quadratic_array({quad1(1.0, 0.0, 0.0)});
  r = step5_residuals(sq, vec({1.0}), vec({0.5}), vec({0.0}), vec({1.0}), 1.0);
  EXPECT_DOUBLE_EQ(r.u(0), 0.25);
  EXPECT_DOUBLE_EQ(r.w(0), -0.5);
}

TEST(Step4, Examples) {
  const InnerMapping aff = InnerMapping::affine(Matrix::Identity(2, 2), vec({0.0, 0.0}));
  const ClosedSet X = ClosedSet::box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  const auto lin = extract_multipliers_step4(OuterFunction::linear(vec({2.0, 3.0})), aff, X, vec({0.0, 0.0}));
  EXPECT_EQ(lin.y, vec({2.0, 3.0}));

  // softplus goal: y = alpha * logistic(theta (z - tau)) at a stationary point
  const OuterFunction sg = OuterFunction::softplus_goal(vec({2.0}), vec({1.0}), 4.0);
  const InnerMapping one = InnerMapping::affine(Matrix::Identity(1, 1), vec({0.0}));
  const auto r = extract_multipliers_step4(sg, one, ClosedSet::box(vec({-3.0}), vec({3.0})), vec({-3.0}), std::nullopt, 1e-6);
  EXPECT_NEAR(r.y(0), 2.0 * std::exp(-16.0) / (1.0 + std::exp(-16.0)), 1e-18);

  const CompositeProblem P = quadratic_demo();
  const auto q = extract_multipliers_step4(P.h, P.F, ClosedSet::whole_space(1), vec({1.0}));
  EXPECT_EQ(q.y(0), 1.0);
  EXPECT_EQ(q.z(0), 0.0);
  EXPECT_EQ(q.w_residual, 0.0);

  EXPECT_THROW(extract_multipliers_step4(OuterFunction::linear(vec({1.0})), P.F, ClosedSet::whole_space(1), vec({2.0})),
               ConsistencyError);
}

TEST(Config, Validation) {
  EpcaConfig c = config(vec({0.0}), 3);
  EXPECT_NO_THROW(c.validate());
  auto bad = [&](auto mut) {
    EpcaConfig d = c;
    mut(d);
    EXPECT_THROW(d.validate(), InputError);
  };
  bad([](EpcaConfig& d) { d.tau = 1.0; });
  bad([](EpcaConfig& d) { d.sigma = 1.5; });
  bad([](EpcaConfig& d) { d.sigma = 0.0; });
  bad([](EpcaConfig& d) { d.lambda0 = 2.0 * d.lambda_bar; });
  bad([](EpcaConfig& d) { d.lambda_bar = 0.0; });
  bad([](EpcaConfig& d) { d.delta = {}; });
  bad([](EpcaConfig& d) { d.delta = {0.1, 0.0}; });
  bad([](EpcaConfig& d) { d.delta = {0.1, 0.2}; });
  bad([](EpcaConfig& d) { d.inner_iteration_cap = 0; });
  bad([](EpcaConfig& d) { d.subproblem_tolerance_factor = 1.0; });
}

TEST(RunEpca, QuadraticDemo) {
  const auto t0 = std::chrono::steady_clock::now();
  const CompositeProblem P = quadratic_demo();
  const EpcaTrace tr = run_epca(constant_family(P, 20), config(vec({3.0}), 20));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // grid oracle on [-1, 3]
  double gx = 0.0, gv = kInf;
  for (int k = 0; k <= 40000; ++k) {
    const double x = -1.0 + k * 1e-4;
    const double v = eval_phi(P, vec({x})).value();
    if (v < gv) gv = v, gx = x;
  }
  ASSERT_EQ(tr.records.size(), 20u);
  EXPECT_LE(std::abs(tr.records.back().triple.x(0) - gx), 1e-4);
  EXPECT_LE(std::abs(tr.records.back().triple.x(0) - 1.0), 1e-4);
  EXPECT_NEAR(tr.records.back().triple.y(0), 1.0, 1e-15);
  EXPECT_NEAR(tr.records.back().triple.z(0), 0.0, 1e-8);
  for (const auto& r : tr.records) EXPECT_LE(r.residual.combined, r.delta + r.subproblem_tolerance);
  EXPECT_LT(secs, 2.0);
}

TEST(RunEpca, SoftplusGoalReachesActualStationarity) {
  const auto t0 = std::chrono::steady_clock::now();
  const EpcaTrace tr = run_epca(softplus_goal_family(20), config(vec({4.0}), 20));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const CompositeProblem actual(ClosedSet::box(vec({-5.0}), vec({5.0})), OuterFunction::goal(vec({1.0}), vec({1.0})),
                                InnerMapping::quadratic_array({quad1(1.0, 0.0, 0.0)}));
  const auto& last = tr.records.back().triple;
  const ResidualTriple r = stationarity_residual(actual, last);
  EXPECT_LE(r.u_norm, 1e-8);
  EXPECT_LE(r.v_dist, 1e-6);
  EXPECT_LE(r.w_dist, 1e-6);
  EXPECT_LE(std::abs(last.x(0)), 1.0 + 1e-6);
  EXPECT_LT(secs, 5.0);
}

TEST(RunEpca, AffineModelStopsAfterOneProximalStep) {
  // exact model: the first subproblem solution is the minimizer
  const CompositeProblem P(ClosedSet::whole_space(2), OuterFunction::squared_distance(vec({1.0, -2.0}), vec({1.0, 1.0})),
                           InnerMapping::affine(Matrix::Identity(2, 2), vec({0.0, 0.0})));
  EpcaConfig c = config(vec({0.0, 0.0}), 1);
  c.lambda0 = c.lambda_bar;
  c.delta = {1e-3};
  const EpcaTrace tr = run_epca(constant_family(P, 1), c);
  EXPECT_EQ(tr.records[0].inner_iterations, 1u);
  EXPECT_NEAR(tr.records[0].triple.x(0), 1.0, 1e-3);
  EXPECT_NEAR(tr.records[0].triple.x(1), -2.0, 1e-3);
}

TEST(RunEpca, StartAtStationaryPointExitsAtStep4) {
  const CompositeProblem P = quadratic_demo();
  const EpcaTrace tr = run_epca(constant_family(P, 3), config(vec({1.0}), 3));
  for (const auto& r : tr.records) {
    EXPECT_EQ(r.exit, EpcaExit::step4);
    EXPECT_EQ(r.residual.combined, 0.0);
    EXPECT_EQ(r.triple.x(0), 1.0);
  }
}

TEST(RunEpca, InnerDescentLambdaBoundsAndCertificates) {
  struct Case {
    ProblemFamily fam;
    Vector x0;
  };
  std::vector<Case> cases;
  cases.push_back({constant_family(quadratic_demo(), 12), vec({-1.0})});
  cases.push_back({softplus_goal_family(12), vec({-4.5})});
  // nonsmooth outer function, smooth nonlinear F
  const CompositeProblem ep(ClosedSet::box(vec({-2.0, -2.0}), vec({2.0, 2.0})), OuterFunction::exact_penalty(2, 3.0),
                            InnerMapping::quadratic_array({QuadraticForm::make(Matrix::Identity(2, 2), vec({0.0, 0.0}), 0.0),
                                                           QuadraticForm::affine(vec({1.0, 1.0}), -1.0)}));
  cases.push_back({constant_family(ep, 10), vec({2.0, -1.5})});
  for (const auto& cs : cases) {
    EpcaConfig c = config(cs.x0, cs.fam.length);
    const EpcaTrace tr = run_epca(cs.fam, c);
    for (const auto& r : tr.records) {
      for (size_t k = 1; k < r.accepted_objectives.size(); ++k)
        EXPECT_LE(r.accepted_objectives[k], r.accepted_objectives[k - 1]);
      EXPECT_GT(r.lambda_final, 0.0);
      EXPECT_LE(r.lambda_final, c.lambda_bar);
      EXPECT_LE(r.residual.combined, r.delta);
      // independent recomputation never exceeds the recorded certificate
      const CompositeProblem P = cs.fam.member(r.nu, tr);
      const ResidualTriple again = stationarity_residual(P, r.triple);
      EXPECT_LE(again.u_norm, r.residual.u_norm + r.subproblem_tolerance + 1e-10);
      EXPECT_LE(again.v_dist, r.residual.v_dist + r.subproblem_tolerance + 1e-10);
      EXPECT_LE(again.w_dist, r.residual.w_dist + r.subproblem_tolerance + 1e-10);
    }
  }
}

TEST(RunEpca, ActualObjectiveBelowApproximateRunningMinimum) {
  const EpcaTrace tr = run_epca(softplus_goal_family(16), config(vec({4.0}), 16));
  const OuterFunction goal = OuterFunction::goal(vec({1.0}), vec({1.0}));
  double running = kInf;
  for (const auto& r : tr.records) running = std::min(running, r.objective.value());
  const double x = tr.records.back().triple.x(0);
  EXPECT_LE(goal.value(vec({x * x})).value(), running + 1e-6);
}

TEST(RunEpca, WarmStartProjectsPreviousPoint) {
  // shrinking boxes force the projection in Step 1
  ProblemFamily fam{4, [](std::size_t nu, const EpcaTrace&) {
                      const double b = 4.0 / static_cast<double>(nu);
                      return CompositeProblem(ClosedSet::box(vec({-b}), vec({b})), OuterFunction::linear(vec({-1.0})),
                                              InnerMapping::affine(Matrix::Identity(1, 1), vec({0.0})));
                    }};
  const EpcaTrace tr = run_epca(fam, config(vec({10.0}), 4));
  for (size_t k = 0; k < tr.records.size(); ++k) EXPECT_NEAR(tr.records[k].triple.x(0), 4.0 / (k + 1.0), 1e-9);
}

TEST(RunEpca, IterationCapRaisesWithPartialTrace) {
  EpcaConfig c = config(vec({3.0}), 5);
  c.inner_iteration_cap = 1;
  c.delta = std::vector<double>(5, 1e-12);
  try {
    run_epca(constant_family(quadratic_demo(), 5), c);
    FAIL() << "expected nonconvergence";
  } catch (const EpcaNonconvergence& e) {
    EXPECT_EQ(e.trace.records.size(), 1u);
  }
}

TEST(RunEpca, LevelProbeWarnsOnUnboundedDescent) {
  const CompositeProblem P(ClosedSet::whole_space(1), OuterFunction::softplus_goal(vec({1.0}), vec({0.0}), 1.0),
                           InnerMapping::affine(Matrix::Identity(1, 1), vec({0.0})));
  const EpcaTrace tr = run_epca(constant_family(P, 1), config(vec({0.0}), 1));
  EXPECT_FALSE(tr.warnings.empty());
  const EpcaTrace ok = run_epca(constant_family(quadratic_demo(), 1), config(vec({0.0}), 1));
  EXPECT_TRUE(ok.warnings.empty());
}

TEST(RunEpca, BarrierFamilyIsRejected) {
  const CompositeProblem P(ClosedSet::whole_space(1), OuterFunction::log_barrier(2, 1.0),
                           InnerMapping::affine(Matrix::Constant(2, 1, 1.0), vec({0.0, 0.0})));
  EXPECT_THROW(run_epca(constant_family(P, 1), config(vec({1.0}), 1)), EvaluationError);
}

TEST(RunEpca, Deterministic) {
  const EpcaTrace a = run_epca(softplus_goal_family(8), config(vec({4.0}), 8));
  const EpcaTrace b = run_epca(softplus_goal_family(8), config(vec({4.0}), 8));
  for (size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].triple.x, b.records[k].triple.x);
    EXPECT_EQ(a.records[k].inner_iterations, b.records[k].inner_iterations);
  }
}
