#include <gtest/gtest.h>

#include "capx/epca.hpp"
#include "capx/varlab.hpp"

using namespace capx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

QuadraticForm quad1(double a, double b, double c) { return QuadraticForm::make(Matrix::Constant(1, 1, 2.0 * a), vec({b}), c); }

OuterFunction equality(Index m) { return OuterFunction::equality_indicator(m, true); }

}  // namespace

TEST(GraphDistance, PointToStaircase) {
  // |z| graph in the second coordinate
  const OuterFunction ab = OuterFunction::exact_penalty(2, 1.0);
  const auto g = graphs_of(ab);
  const GraphNearest d = graph_point_distance(g, vec({0.0, 0.5}), vec({1.0, 1.0}));
  EXPECT_NEAR(d.distance, 0.0, 1e-15);
  const GraphNearest e = graph_point_distance(g, vec({0.0, 0.5}), vec({1.0, 0.2}));
  // nearest: (0, 0.2) on the vertical piece, or (0.5, 1) on the ray
  EXPECT_NEAR(e.distance, 0.5, 1e-12);
}

TEST(GraphDistance, SlopedPieceMatchesBruteForce) {
  const OuterFunction sd = OuterFunction::squared_distance(vec({0.3, -0.2}), vec({1.5, 0.4}));
  const auto g = graphs_of(sd);
  const Vector z = vec({1.0, 0.5}), v = vec({-0.4, 0.9});
  const double d = graph_point_distance(g, z, v).distance;
  // brute force over the two lines v_i = 2 b_i (t_i - a_i)
  double best = kInf;
  for (int i = -1500; i <= 1500; ++i)
    for (int j = -1500; j <= 1500; ++j) {
      const double t1 = i * 1e-3 + 0.5, t2 = j * 1e-3 + 0.5;
      const double dz = std::hypot(t1 - z(0), t2 - z(1));
      const double dv = std::hypot(3.0 * (t1 - 0.3) - v(0), 0.8 * (t2 + 0.2) - v(1));
      best = std::min(best, std::max(dz, dv));
    }
  EXPECT_LE(d, best + 1e-12);
  EXPECT_GE(d, best - 5e-3);
}

TEST(GraphExcess, ExactPenaltyExamples) {
  const ExcessReport r = graph_excess_separable(OuterFunction::exact_penalty(3, 5.0), equality(3), 2.0);
  EXPECT_EQ(r.measured_lower, 0.0);
  EXPECT_EQ(r.certified_upper, 0.0);
  for (double th : {4.0, 4.5, 10.0, 1e3}) {
    const ExcessReport s = graph_excess_separable(OuterFunction::exact_penalty(2, th), equality(2), 2.0);
    EXPECT_EQ(s.measured_lower, 0.0) << th;
    EXPECT_EQ(s.certified_upper, 0.0) << th;
  }
  const ExcessReport one = graph_excess_separable(OuterFunction::exact_penalty(2, 1.0), equality(2), 2.0);
  EXPECT_GT(one.measured_lower, 0.0);
  EXPECT_LE(one.measured_lower, one.certified_upper + 1e-10);
}

TEST(GraphExcess, AugmentedLagrangianExamples) {
  // m = 2, rho = 1, theta = 10: z_2 = v_2 / theta with v_1 = 1 and |v| <= 2, so
  // the excess is sqrt(3) / 10, below the bound 2 sqrt(m - 1) / theta = 0.2
  const ExcessReport r = graph_excess_separable(OuterFunction::augmented_lagrangian(vec({0.0}), 10.0), equality(2), 1.0);
  const double bound = augmented_lagrangian_bound(1.0, vec({0.0}), 2, 10.0);
  EXPECT_DOUBLE_EQ(bound, 0.2);
  EXPECT_NEAR(r.certified_upper, std::sqrt(3.0) / 10.0, 1e-12);
  EXPECT_NEAR(r.measured_lower, std::sqrt(3.0) / 10.0, 1e-12);
  EXPECT_LE(r.certified_upper, bound + 1e-12);
}

TEST(GraphExcess, AugmentedLagrangianRate) {
  for (Index m : {2, 4}) {
    std::vector<double> th, up;
    const Vector y = Vector::Zero(m - 1);
    for (int k = 1; k <= 6; ++k) {
      const double theta = std::pow(10.0, k);
      const ExcessReport r = graph_excess_separable(OuterFunction::augmented_lagrangian(y, theta), equality(m), 1.0);
      EXPECT_LE(r.measured_lower, r.certified_upper + 1e-10);
      EXPECT_LE(r.certified_upper, augmented_lagrangian_bound(1.0, y, m, theta) + 1e-12);
      th.push_back(theta);
      up.push_back(r.certified_upper);
    }
    EXPECT_NEAR(loglog_slope(th, up), -1.0, 0.05);
  }
}

TEST(GraphExcess, AugmentedLagrangianShiftedMultiplier) {
  const Vector y = vec({0.5, -1.0});
  const ExcessReport r = graph_excess_separable(OuterFunction::augmented_lagrangian(y, 100.0), equality(3), 1.0);
  EXPECT_LE(r.measured_lower, r.certified_upper + 1e-10);
  EXPECT_LE(r.certified_upper, augmented_lagrangian_bound(1.0, y, 3, 100.0) + 1e-12);
  EXPECT_GT(r.measured_lower, 0.0);
}

TEST(GraphExcess, IdenticalGraphsGiveZero) {
  for (const OuterFunction& h : {OuterFunction::goal(vec({1.0, 2.0}), vec({0.5, -1.0})), equality(3),
                                 OuterFunction::quadratic_penalty(3, 2.0), OuterFunction::linear(vec({1.0, -1.0}))}) {
    const ExcessReport r = graph_excess_separable(h, h, 1.5);
    EXPECT_NEAR(r.measured_lower, 0.0, 1e-12);
    EXPECT_NEAR(r.certified_upper, 0.0, 1e-12);
  }
}

TEST(GraphExcess, CurvedTargetAndNonseparableRejected) {
  const OuterFunction sg = OuterFunction::softplus_goal(vec({1.0}), vec({0.0}), 5.0);
  const OuterFunction g = OuterFunction::goal(vec({1.0}), vec({0.0}));
  EXPECT_NO_THROW(graph_excess_separable(sg, g, 1.0));
  EXPECT_THROW(graph_excess_separable(g, sg, 1.0), CapabilityError);
  const OuterFunction sp = OuterFunction::support({vec({1.0, 0.0}), vec({0.0, 1.0})});
  EXPECT_THROW(graph_excess_separable(sp, sp, 1.0), CapabilityError);
}

TEST(GraphExcess, SoftplusGoalBelowSqrtPipeline) {
  const OuterFunction g = OuterFunction::goal(vec({1.0}), vec({1.0}));
  for (int k = 1; k <= 12; ++k) {
    const double theta = std::ldexp(1.0, k);
    const OuterFunction sg = OuterFunction::softplus_goal(vec({1.0}), vec({1.0}), theta);
    const ExcessReport r = graph_excess_separable(sg, g, 2.0);
    EXPECT_LE(r.measured_lower, r.certified_upper + 1e-10);
    const double gap = sup_value_gap(sg, g, 4.0, 2000, {vec({1.0})});
    EXPECT_NEAR(gap, std::log(2.0) / theta, 1e-12);
    EXPECT_LE(r.measured_lower, std::sqrt(gap));
  }
}

TEST(Homotopy, Examples) {
  const ExcessReport r = homotopy_graph_excess(OuterFunction::linear(vec({1.0})), 0.1, 1.0);
  EXPECT_NEAR(r.measured_lower, 0.1 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.certified_upper, 0.1 * std::sqrt(2.0), 1e-12);
  ASSERT_TRUE(r.closed_form_bound);
  EXPECT_NEAR(*r.closed_form_bound, 0.1 * std::sqrt(1.0 + (4.0 - 0.01) / 0.81), 1e-15);
  double prev = kInf;
  for (double lam : {0.5, 0.1, 0.01, 1e-4, 1e-6}) {
    const ExcessReport s = homotopy_graph_excess(OuterFunction::linear(vec({1.0})), lam, 1.0);
    EXPECT_LE(s.measured_lower, homotopy_beta(lam, 1.0) * lam + 1e-10);
    EXPECT_LE(s.measured_lower, s.certified_upper + 1e-10);
    EXPECT_LE(s.certified_upper, *s.closed_form_bound + 1e-9);
    EXPECT_LT(s.measured_lower, prev);
    prev = s.measured_lower;
  }
  EXPECT_LT(prev, 1e-5);
  EXPECT_THROW(homotopy_graph_excess(OuterFunction::linear(vec({1.0})), 0.5, 0.2), InputError);
  EXPECT_THROW(homotopy_graph_excess(OuterFunction::linear(vec({1.0})), 1.0, 1.0), InputError);
}

TEST(Homotopy, GoalBase) {
  const OuterFunction base = OuterFunction::goal(vec({1.0, 0.5}), vec({0.0, 0.2}));
  for (double lam : {0.5, 0.1, 0.01}) {
    const ExcessReport s = homotopy_graph_excess(base, lam, 1.0);
    EXPECT_LE(s.measured_lower, s.certified_upper + 1e-10);
    EXPECT_LE(s.certified_upper, *s.closed_form_bound + 1e-9);
  }
}

TEST(SupportExcess, Examples) {
  EXPECT_EQ(support_set_excess({vec({1, 0}), vec({0, 1})}, {vec({1, 0}), vec({0, 1})}), 0.0);
  EXPECT_NEAR(support_set_excess({vec({1, 0})}, {vec({0.9, 0.1})}), std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(support_set_excess({vec({1, 0}), vec({0, 1})}, {vec({1, 0})}), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(support_set_excess({}, {vec({1, 0})}), InputError);
}

TEST(SupportExcess, ValueGapWithinRhoAlpha) {
  const std::vector<Vector> A{vec({1.0, 0.0}), vec({0.0, 1.0})};
  const OuterFunction h = OuterFunction::support(A);
  const Vector d = vec({-1.0, 1.0}) / std::sqrt(2.0);
  for (int k = 1; k <= 5; ++k) {
    const double a = std::pow(10.0, -k);
    const std::vector<Vector> B{A[0] + a * d, A[1] - a * d};
    const double alpha = support_set_excess(A, B);
    EXPECT_NEAR(alpha, a, 1e-15);
    const double gap = sup_value_gap(h, OuterFunction::support(B), 2.0, 4000);
    EXPECT_LE(gap, 2.0 * alpha + 1e-12);
    EXPECT_GT(gap, 0.9 * 2.0 * alpha);
  }
}

TEST(Eta, Examples) {
  const InnerMapping aff = InnerMapping::affine(Matrix::Identity(2, 2), vec({1.0, 2.0}));
  const ClosedSet R2 = ClosedSet::whole_space(2);
  EtaEstimate e = estimate_eta(aff, aff, R2, 3.0, 200);
  EXPECT_EQ(e.eta0, 0.0);
  EXPECT_EQ(e.eta, 0.0);
  const InnerMapping shifted = InnerMapping::affine(Matrix::Identity(2, 2), vec({1.3, 1.6}));
  e = estimate_eta(shifted, aff, R2, 3.0, 200);
  EXPECT_NEAR(e.eta0, 0.5, 1e-14);
  EXPECT_NEAR(e.eta, 0.0, 1e-14);

  const std::vector<std::vector<QuadraticForm>> comps{{QuadraticForm::affine(vec({1.0}), 0.0), QuadraticForm::affine(vec({-1.0}), 0.0)}};
  const InnerMapping sm = InnerMapping::min_smooth(comps, 10.0), ex = InnerMapping::min_smooth(comps, std::nullopt);
  e = estimate_eta(sm, ex, ClosedSet::whole_space(1), 5.0, 500);
  ASSERT_TRUE(e.eta0_certified);
  EXPECT_NEAR(*e.eta0_certified, std::log(2.0) / 10.0, 1e-15);
  EXPECT_NEAR(e.eta0, std::log(2.0) / 10.0, 1e-15);
  EXPECT_LE(e.eta0, *e.eta0_certified + 1e-15);
  // smoothed gradient at 0 is 0, inside the hull [-1, 1]
  EXPECT_LE(e.eta, 1.0);
  EXPECT_THROW(estimate_eta(aff, aff, ClosedSet::box(vec({5, 5}), vec({6, 6})), 1.0, 10), InputError);
}

TEST(SolutionErrorBound, Examples) {
  EXPECT_EQ(solution_error_bound(0, 0, 0, 1.0, 3), 0.0);
  EXPECT_DOUBLE_EQ(solution_error_bound(0.1, 0, 0.2, 1.0, 3), 0.3);
  EXPECT_DOUBLE_EQ(solution_error_bound(0, 1.0, 0, 2.0, 4), 4.0);
  EXPECT_THROW(solution_error_bound(-1, 0, 0, 1, 1), InputError);
}

TEST(EpiProbe, Examples) {
  const OuterFunction g = OuterFunction::goal(vec({1.0, 2.0}), vec({0.0, 1.0}));
  std::vector<Evaluator> fam;
  for (int k = 1; k <= 30; ++k) {
    const OuterFunction sg = OuterFunction::softplus_goal(vec({1.0, 2.0}), vec({0.0, 1.0}), std::ldexp(1.0, k));
    fam.push_back([sg](const Vector& z) { return sg.value(z); });
  }
  const Evaluator act = [g](const Vector& z) { return g.value(z); };
  const EpiProbeReport r = epi_probe(fam, act, {vec({0.0, 1.0}), vec({3.0, -2.0}), vec({-1.0, 0.5})}, {}, 1e-8);
  EXPECT_TRUE(r.pass);
  for (const auto& p : r.points) {
    EXPECT_LE(p.limsup_deficit_last, 3.0 * std::log(2.0) / std::ldexp(1.0, 30) + 1e-15);
    EXPECT_LE(p.liminf_deficit_last, 0.0);
  }

  // penalty values at an infeasible point diverge with the actual +inf
  std::vector<Evaluator> pen;
  for (int k = 1; k <= 12; ++k) {
    const OuterFunction q = OuterFunction::quadratic_penalty(2, std::pow(10.0, k));
    pen.push_back([q](const Vector& z) { return q.value(z); });
  }
  const OuterFunction ind = OuterFunction::inequality_indicator(2, true);
  const EpiProbeReport s = epi_probe(pen, [ind](const Vector& z) { return ind.value(z); }, {vec({1.0, 1.0})}, {}, 1e-10);
  EXPECT_TRUE(s.pass);
  EXPECT_NEAR(s.points[0].liminf_deficit_last, 1.0 / (2.0 + 1e12), 1e-20);

  std::vector<Evaluator> same(5, act);
  const EpiProbeReport c = epi_probe(same, act, {vec({0.3, 0.4})});
  EXPECT_EQ(c.points[0].liminf_deficit_tail, 0.0);
  EXPECT_EQ(c.points[0].limsup_deficit_tail, 0.0);
}

TEST(EpiProbe, BarrierInteriorPaths) {
  // z = (x, x - 1) with the barrier on the second coordinate; at the boundary
  // point x = 1 the constant path is +inf for every nu, the interior path is not
  std::vector<Evaluator> fam;
  const int N = 20;
  for (int k = 1; k <= N; ++k) {
    const OuterFunction b = OuterFunction::log_barrier(2, std::pow(2.0, k));
    fam.push_back([b](const Vector& x) { return b.value(vec({x(0), x(0) - 1.0})); });
  }
  const OuterFunction ind = OuterFunction::inequality_indicator(2, true);
  const Evaluator act = [ind](const Vector& x) { return ind.value(vec({x(0), x(0) - 1.0})); };
  std::vector<Vector> path;
  for (int k = 1; k <= N; ++k) path.push_back(vec({1.0 - std::pow(2.0, -k)}));
  const EpiProbeReport r = epi_probe(fam, act, {vec({1.0})}, {path}, 1e-4);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.points[0].inconclusive);
  // the constant path sees +inf against f = 1 and cannot certify the upper condition
  const EpiProbeReport flat = epi_probe(fam, act, {vec({1.0})}, {}, 1e-4);
  EXPECT_FALSE(flat.pass);
  EXPECT_EQ(flat.points[0].limsup_deficit_last, kInf);
}

TEST(Transfer, IdentityFamily) {
  const CompositeProblem P(ClosedSet::whole_space(1), OuterFunction::linear(vec({1.0})),
                           InnerMapping::quadratic_array({quad1(1.0, -2.0, 1.0)}));
  const StationarityTriple t{vec({1.0}), vec({1.0}), vec({0.0})};
  const TransferReport r = near_solution_transfer({{t, 0.0}}, P, 2.0, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.results[0].displacement, 0.0);
}

TEST(Transfer, AugmentedLagrangianTriple) {
  // min (x - 2)^2 s.t. x - 1 = 0
  const InnerMapping F = InnerMapping::quadratic_array({quad1(1.0, -4.0, 4.0), quad1(0.0, 1.0, -1.0)});
  const double theta = 1e3;
  const CompositeProblem approx(ClosedSet::whole_space(1), OuterFunction::augmented_lagrangian(vec({0.0}), theta), F);
  EpcaConfig c;
  c.x0 = vec({0.0});
  c.delta = {1e-6};
  const EpcaTrace tr = run_epca(constant_family(approx, 1), c);
  const StationarityTriple t = tr.records[0].triple;
  const CompositeProblem actual(ClosedSet::whole_space(1), equality(2), F);
  const double rho = 3.0;
  const double bound = augmented_lagrangian_bound(rho, vec({0.0}), 2, theta);
  const TransferReport r = near_solution_transfer({{t, 1e-6}}, actual, rho, bound);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.results[0].displacement, bound + 1e-3);
  EXPECT_NEAR(r.results[0].actual.x(0), t.x(0), 1e-15);
}

TEST(Transfer, ExactPenaltyTripleIsActual) {
  const InnerMapping F = InnerMapping::quadratic_array({quad1(1.0, -4.0, 4.0), quad1(0.0, 1.0, -1.0)});
  const double rho = 3.0;
  const CompositeProblem approx(ClosedSet::whole_space(1), OuterFunction::exact_penalty(2, 2.0 * rho + 1.0), F);
  EpcaConfig c;
  c.x0 = vec({0.0});
  c.delta = {1e-7};
  const EpcaTrace tr = run_epca(constant_family(approx, 1), c);
  const StationarityTriple t = tr.records[0].triple;
  const CompositeProblem actual(ClosedSet::whole_space(1), equality(2), F);
  EXPECT_LE(stationarity_residual(actual, t).combined, 1e-7);
  const TransferReport r = near_solution_transfer({{t, 1e-7}}, actual, rho, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.results[0].displacement, 0.0);
}

TEST(Invariants, HausdorffDominatesOneSided) {
  const std::vector<std::pair<OuterFunction, OuterFunction>> pairs{
      {OuterFunction::augmented_lagrangian(vec({0.2}), 20.0), equality(2)},
      {OuterFunction::exact_penalty(2, 1.5), equality(2)},
      {OuterFunction::quadratic_penalty(2, 3.0), OuterFunction::inequality_indicator(2, true)}};
  for (const auto& [a, b] : pairs) {
    const double d = graph_hausdorff_separable(a, b, 1.0);
    EXPECT_GE(d, graph_excess_separable(a, b, 1.0).measured_lower);
    EXPECT_GE(d, graph_excess_separable(b, a, 1.0).measured_lower);
  }
}

TEST(Invariants, ExcessNondecreasingInRho) {
  const std::vector<std::pair<OuterFunction, OuterFunction>> pairs{
      {OuterFunction::augmented_lagrangian(vec({0.0, 0.0}), 20.0), equality(3)},
      {OuterFunction::exact_penalty(2, 3.0), equality(2)},
      {OuterFunction::homotopy(OuterFunction::linear(vec({1.0})), 0.1), OuterFunction::homotopy(OuterFunction::linear(vec({1.0})), 0.0)},
      {OuterFunction::quadratic_penalty(2, 3.0), OuterFunction::inequality_indicator(2, true)}};
  for (const auto& [a, b] : pairs) {
    double pl = 0.0, pu = 0.0;
    for (double rho : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
      const ExcessReport r = graph_excess_separable(a, b, rho);
      EXPECT_GE(r.measured_lower, pl - 1e-12) << rho;
      EXPECT_GE(r.certified_upper, pu - 1e-12) << rho;
      EXPECT_LE(r.measured_lower, r.certified_upper + 1e-10);
      pl = r.measured_lower;
      pu = r.certified_upper;
    }
  }
}

TEST(Slope, Fit) {
  EXPECT_NEAR(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}), -1.0, 1e-12);
  EXPECT_NEAR(loglog_slope({1, 4, 16}, {1, 2, 4}), 0.5, 1e-12);
  EXPECT_THROW(loglog_slope({1, 2}, {0, 0}), InputError);
}
