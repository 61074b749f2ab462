#include <gtest/gtest.h>

#include <cmath>

#include "capx/network_lift.hpp"
#include "capx/random.hpp"

using namespace capx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

std::vector<std::vector<QuadraticForm>> abs_pieces() {
  return {{QuadraticForm::affine(vec({1.0}), 0.0), QuadraticForm::affine(vec({-1.0}), 0.0)}};
}

QuadraticForm random_quadratic(CounterRng& rng, Index n) {
  Matrix B(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) B(i, j) = rng.uniform(-1, 1);
  Vector q(n);
  for (Index i = 0; i < n; ++i) q(i) = rng.uniform(-2, 2);
  return QuadraticForm::make(B + B.transpose(), q, rng.uniform(-1, 1));
}

Vector random_vector(CounterRng& rng, Index n, double r) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = rng.uniform(-r, r);
  return x;
}

Matrix central_difference(const InnerMapping& F, const Vector& x, double h) {
  Matrix J(F.output_dim(), F.input_dim());
  for (Index j = 0; j < x.size(); ++j) {
    Vector a = x, b = x;
    a(j) += h;
    b(j) -= h;
    J.col(j) = (F.eval(a) - F.eval(b)) / (2 * h);
  }
  return J;
}

Network one_layer(double a, double b) {
  return Network{{Layer{Matrix::Constant(1, 1, a), Vector::Constant(1, b)}}};
}

Network random_network(CounterRng& rng, std::vector<Index> widths) {
  Network net;
  for (size_t k = 1; k < widths.size(); ++k) {
    Matrix W(widths[k], widths[k - 1]);
    for (Index i = 0; i < W.rows(); ++i)
      for (Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-1, 1);
    net.layers.push_back(Layer{W, random_vector(rng, widths[k], 0.5)});
  }
  return net;
}

}  // namespace

TEST(InnerEval, MinSmoothExamples) {
  const auto exact = InnerMapping::min_smooth(abs_pieces(), std::nullopt);
  EXPECT_EQ(exact.eval(vec({0.0}))(0), 0.0);
  const auto s1 = InnerMapping::min_smooth(abs_pieces(), 1.0);
  EXPECT_NEAR(s1.eval(vec({0.0}))(0), -std::log(2.0), 1e-15);
  const auto s10 = InnerMapping::min_smooth(abs_pieces(), 10.0);
  const double v = s10.eval(vec({1.0}))(0);
  // Oracle: extended precision evaluation of the unshifted formula.
  const long double oracle = -std::log(std::exp(-10.0L) + std::exp(10.0L)) / 10.0L;
  EXPECT_NEAR(v, static_cast<double>(oracle), 1e-15);
  EXPECT_LE(v, -1.0);
  EXPECT_GE(v, -1.0 - std::log(2.0) / 10.0);
}

TEST(InnerEval, SmoothedMinIsOverflowSafe) {
  const auto s = InnerMapping::min_smooth(abs_pieces(), 1e6);
  const double v = s.eval(vec({500.0}))(0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -500.0, 1e-12);
}

TEST(InnerJacobian, Examples) {
  const auto s1 = InnerMapping::min_smooth(abs_pieces(), 1.0);
  const JacobianElement je = s1.jacobian_element(vec({0.0}));
  EXPECT_NEAR(je.jacobian(0, 0), 0.0, 1e-16);
  EXPECT_NEAR(je.weights[0](0), 0.5, 1e-16);
  EXPECT_NEAR(je.weights[0](1), 0.5, 1e-16);

  Matrix A(2, 3);
  A << 1, 2, 3, 4, 5, 6;
  const auto aff = InnerMapping::affine(A, vec({1.0, -1.0}));
  EXPECT_EQ(aff.jacobian(vec({7.0, 8.0, 9.0})), A);

  const auto sq = InnerMapping::quadratic_array({QuadraticForm::make(2.0 * Matrix::Identity(1, 1), vec({0.0}), 0.0)});
  EXPECT_DOUBLE_EQ(sq.jacobian(vec({3.0}))(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(sq.eval(vec({3.0}))(0), 9.0);
}

TEST(InnerJacobian, ExactMinReportsActivePieces) {
  const auto exact = InnerMapping::min_smooth(abs_pieces(), std::nullopt);
  const JacobianElement tie = exact.jacobian_element(vec({0.0}));
  EXPECT_EQ(tie.active[0].size(), 2u);
  EXPECT_EQ(tie.hull[0].size(), 2u);
  const JacobianElement one = exact.jacobian_element(vec({2.0}));
  EXPECT_EQ(one.active[0], std::vector<int>({1}));
  EXPECT_DOUBLE_EQ(one.jacobian(0, 0), -1.0);
  EXPECT_FALSE(exact.smooth());
}

TEST(InnerMapping, Validation) {
  EXPECT_THROW(InnerMapping::affine(Matrix::Zero(2, 2), Vector::Zero(3)), InputError);
  EXPECT_THROW(QuadraticForm::make((Matrix(2, 2) << 1, 2, 0, 1).finished(), Vector::Zero(2), 0.0), InputError);
  EXPECT_THROW(InnerMapping::min_smooth(abs_pieces(), 0.0), InputError);
  Network bad{{Layer{Matrix::Zero(2, 1), Vector::Zero(2)}, Layer{Matrix::Zero(1, 3), Vector::Zero(1)}}};
  EXPECT_THROW(InnerMapping::network_lift({bad}, Activation{}), InputError);
}

TEST(SmoothingSandwich, RandomQuadraticPieces) {
  CounterRng rng(123);
  for (int sys = 0; sys < 20; ++sys) {
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 3);
    const int s = 1 + static_cast<int>(rng.next_u64() % 4);
    std::vector<std::vector<QuadraticForm>> comps(2);
    for (auto& c : comps)
      for (int k = 0; k < s; ++k) c.push_back(random_quadratic(rng, n));
    const double theta = std::pow(10.0, rng.uniform(-1, 4));
    const auto exact = InnerMapping::min_smooth(comps, std::nullopt);
    const auto smooth = exact.with_min_smoothing(theta);
    for (int k = 0; k < 1000; ++k) {
      const Vector x = random_vector(rng, n, 3.0);
      const Vector gap = exact.eval(x) - smooth.eval(x);
      for (Index i = 0; i < gap.size(); ++i) {
        EXPECT_GE(gap(i), -1e-10);
        EXPECT_LE(gap(i), std::log(static_cast<double>(s)) / theta + 1e-10);
      }
    }
  }
}

TEST(SmoothingWeights, OffMinimizerWeightsDecayMonotonically) {
  // Total off-minimizer weight 1 - 1/(1 + sum_k e^{-theta d_k}) is decreasing in theta.
  std::vector<std::vector<QuadraticForm>> close = {
      {QuadraticForm::affine(vec({1.0}), 0.0), QuadraticForm::affine(vec({-1.0}), 0.5),
       QuadraticForm::make(Matrix::Constant(1, 1, 2.0), vec({0.0}), 0.1)}};
  const Vector x = vec({0.3});  // piece values 0.3, 0.2, 0.19
  double prev_total = 1.0;
  for (int k = 0; k <= 10; ++k) {
    const Vector mu = InnerMapping::min_smooth(close, std::pow(2.0, k)).jacobian_element(x).weights[0];
    EXPECT_NEAR(mu.sum(), 1.0, 1e-12);
    EXPECT_LT(mu(0) + mu(1), prev_total);
    prev_total = mu(0) + mu(1);
  }
  // With well-separated pieces every individual off-minimizer weight decays.
  std::vector<std::vector<QuadraticForm>> apart = {
      {QuadraticForm::affine(vec({1.0}), 0.0), QuadraticForm::affine(vec({-1.0}), 0.85),
       QuadraticForm::affine(vec({0.0}), 0.05)}};  // gaps 0.25 and 0.5
  std::vector<double> prev(2, 1.0);
  for (int k = 0; k <= 10; ++k) {
    const Vector mu = InnerMapping::min_smooth(apart, std::pow(2.0, k)).jacobian_element(x).weights[0];
    for (int j = 0; j < 2; ++j) {
      EXPECT_GT(mu(j), 0.0);
      EXPECT_LT(mu(j), prev[j]);
      prev[j] = mu(j);
    }
  }
  EXPECT_LT(prev[0], 1e-40);
}

TEST(SmoothingWeights, GradientInHullOfPieceGradients) {
  CounterRng rng(77);
  for (int sys = 0; sys < 30; ++sys) {
    const Index n = 2;
    const int s = 2 + static_cast<int>(rng.next_u64() % 2);
    std::vector<std::vector<QuadraticForm>> comps(1);
    for (int k = 0; k < s; ++k) comps[0].push_back(random_quadratic(rng, n));
    const auto F = InnerMapping::min_smooth(comps, rng.uniform(0.5, 20.0));
    for (int k = 0; k < 20; ++k) {
      const Vector x = random_vector(rng, n, 2.0);
      std::vector<Vector> grads;
      for (const auto& g : comps[0]) grads.push_back(g.gradient(x));
      const Vector row = F.jacobian(x).row(0).transpose();
      EXPECT_LE(distance_to_hull(grads, row), 1e-10);
    }
  }
}

TEST(GradientCheck, SmoothVariantsMatchCentralDifferences) {
  CounterRng rng(2024);
  std::vector<InnerMapping> maps;
  maps.push_back(InnerMapping::quadratic_array({random_quadratic(rng, 3), random_quadratic(rng, 3)}));
  maps.push_back(InnerMapping::min_smooth({{random_quadratic(rng, 3), random_quadratic(rng, 3)},
                                           {random_quadratic(rng, 3), random_quadratic(rng, 3), random_quadratic(rng, 3)}},
                                          3.0));
  maps.push_back(InnerMapping::sample_average({random_quadratic(rng, 3)}, {random_quadratic(rng, 3)},
                                              SampleDistribution::uniform, 5, 17));
  maps.push_back(InnerMapping::feed_forward({random_network(rng, {3, 4, 2})}, Activation{ActivationKind::softplus, 4.0}));
  maps.push_back(InnerMapping::network_lift({random_network(rng, {3, 3, 2}), random_network(rng, {3, 3, 2})},
                                            Activation{ActivationKind::softplus, 4.0}));
  for (const auto& F : maps) {
    for (int k = 0; k < 100; ++k) {
      const Vector x = random_vector(rng, F.input_dim(), 2.0);
      const Matrix J = F.jacobian(x);
      const Matrix Jfd = central_difference(F, x, 1e-6);
      for (Index i = 0; i < J.rows(); ++i)
        EXPECT_LE((J.row(i) - Jfd.row(i)).norm(), 1e-5 * std::max(1.0, J.row(i).norm())) << F.kind_name();
    }
  }
}

TEST(LocalLipschitz, DifferenceQuotientsBounded) {
  CounterRng rng(8);
  const auto F = InnerMapping::network_lift({random_network(rng, {2, 4, 1})}, Activation{ActivationKind::relu, 1.0});
  for (int k = 0; k < 200; ++k) {
    const Vector a = random_vector(rng, F.input_dim(), 3.0), b = random_vector(rng, F.input_dim(), 3.0);
    EXPECT_LE((F.eval(a) - F.eval(b)).norm() / (a - b).norm(), 1e6);
  }
}

TEST(NetworkLift, ReluExamples) {
  const auto F = InnerMapping::network_lift({one_layer(1.0, 0.0)}, Activation{ActivationKind::relu, 1.0});
  EXPECT_EQ(F.input_dim(), 2);
  EXPECT_EQ(F.output_dim(), 2);
  const Vector xa = F.lift_point(vec({-2.0}));
  EXPECT_EQ(xa(1), 0.0);
  EXPECT_EQ(F.eval(xa)(1), 0.0);
  const Vector xb = F.lift_point(vec({3.0}));
  EXPECT_EQ(xb(1), 3.0);
  EXPECT_EQ(F.eval(xb)(1), 0.0);
  EXPECT_EQ(F.eval(xb)(0), 3.0);
}

TEST(NetworkLift, SoftplusExample) {
  const Activation sp{ActivationKind::softplus, 10.0};
  const auto F = InnerMapping::network_lift({one_layer(1.0, 0.0)}, sp);
  const Vector x = F.lift_point(vec({0.0}));
  EXPECT_NEAR(x(1), std::log(2.0) / 10.0, 1e-16);
  CounterRng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double t = rng.uniform(-5, 5);
    EXPECT_LE(std::abs(sp.value(t) - std::max(0.0, t)), std::log(2.0) / 10.0 + 1e-15);
  }
}

TEST(NetworkLift, DimensionsAndFeasibility) {
  CounterRng rng(31);
  std::vector<Network> nets = {random_network(rng, {3, 5, 8, 2}), random_network(rng, {3, 5, 8, 2})};
  const auto F = InnerMapping::network_lift(nets, Activation{ActivationKind::relu, 1.0});
  const Index r = 5 + 8 + 2;
  EXPECT_EQ(F.input_dim(), 3 + 2 * r);
  EXPECT_EQ(F.output_dim(), 2 * 2 + 2 * r);
  const auto ff = InnerMapping::feed_forward(nets, Activation{ActivationKind::relu, 1.0});
  for (int k = 0; k < 50; ++k) {
    const Vector x0 = random_vector(rng, 3, 2.0);
    const Vector x = F.lift_point(x0);
    const Vector f = F.eval(x);
    EXPECT_LE(f.tail(2 * r).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE((f.head(4) - ff.eval(x0)).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(NetworkLift, ReluKinkHasTwoGenerators) {
  const auto F = InnerMapping::network_lift({one_layer(2.0, 0.0)}, Activation{ActivationKind::relu, 1.0});
  const JacobianElement je = F.jacobian_element(vec({0.0, 0.0}));
  ASSERT_EQ(je.generators(1).size(), 2u);
  EXPECT_EQ(je.generators(1)[0], vec({0.0, -1.0}));
  EXPECT_EQ(je.generators(1)[1], vec({2.0, -1.0}));
}

TEST(NetworkLift, BuildsCompositeProblem) {
  const auto P = build_network_lift({one_layer(1.0, 0.0)}, Activation{ActivationKind::relu, 1.0},
                                    OuterFunction::squared_distance(vec({1.0}), vec({1.0})));
  EXPECT_EQ(P.n(), 2);
  EXPECT_EQ(P.m(), 2);
  const Vector x = P.F.lift_point(vec({3.0}));
  EXPECT_DOUBLE_EQ(eval_phi(P, x).value(), 4.0);
  EXPECT_TRUE(eval_phi(P, vec({3.0, 2.0})).is_infinite());
  EXPECT_THROW(build_network_lift({one_layer(1.0, 0.0)}, Activation{}, OuterFunction::linear(vec({1.0, 1.0}))),
               InputError);
}

TEST(Resample, ExamplesAndDeterminism) {
  const auto base = QuadraticForm::affine(vec({0.0}), 0.0);
  const auto pert = QuadraticForm::affine(vec({1.0}), 0.0);  // g(xi, x) = xi x
  const auto one = InnerMapping::sample_average({base}, {pert}, SampleDistribution::two_point, 99, 1);
  EXPECT_EQ(std::abs(one.eval(vec({1.0}))(0)), 1.0);
  EXPECT_EQ(std::abs(one.eval(vec({2.5}))(0)), 2.5);
  const auto big = one.resample(200000, 3);
  EXPECT_LE(std::abs(big.eval(vec({1.0}))(0)), 0.02);
  const auto a = one.resample(50, 11), b = one.resample(50, 11);
  CounterRng rng(4);
  for (int k = 0; k < 100; ++k) {
    const Vector x = vec({rng.uniform(-10, 10)});
    EXPECT_EQ(a.eval(x), b.eval(x));
  }
  EXPECT_EQ(one.expectation().eval(vec({1.0}))(0), 0.0);
}

TEST(Resample, VarianceDecaysLikeOneOverN) {
  const auto base = QuadraticForm::affine(vec({0.0}), 0.0);
  const auto pert = QuadraticForm::affine(vec({1.0}), 0.0);
  const auto F = InnerMapping::sample_average({base}, {pert}, SampleDistribution::two_point, 1, 1);
  auto variance = [&](std::size_t n) {
    double s = 0.0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
      const double v = F.resample(n, seed).eval(vec({1.0}))(0);
      s += v * v;
    }
    return s / 400.0;
  };
  const double v10 = variance(10), v1000 = variance(1000);
  // var = 1/n for centered +-1; generous band for the seed average
  EXPECT_NEAR(v10 * 10, 1.0, 0.3);
  EXPECT_NEAR(v1000 * 1000, 1.0, 0.3);
}
