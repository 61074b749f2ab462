#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "capx/random.hpp"
#include "capx/scalar_term.hpp"

namespace capx {

// 1/2 x'Qx + q'x + c
struct QuadraticForm {
  Matrix Q;
  Vector q;
  double c = 0.0;

  static QuadraticForm make(Matrix Q_, Vector q_, double c_) {
    if (Q_.rows() != Q_.cols() || Q_.rows() != q_.size() || q_.size() < 1)
      throw InputError("quadratic form: Q must be n x n with n = len(q)");
    if (!Q_.allFinite() || !q_.allFinite() || !std::isfinite(c_)) throw InputError("quadratic form: non-finite data");
    if ((Q_ - Q_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q_.cwiseAbs().maxCoeff()))
      throw InputError("quadratic form: Q must be symmetric");
    QuadraticForm f;
    f.Q = 0.5 * (Q_ + Q_.transpose());
    f.q = std::move(q_);
    f.c = c_;
    return f;
  }
  static QuadraticForm affine(Vector q_, double c_) {
    const Index n = q_.size();
    return make(Matrix::Zero(n, n), std::move(q_), c_);
  }

  Index dim() const { return q.size(); }
  double value(const Vector& x) const { return 0.5 * x.dot(Q * x) + q.dot(x) + c; }
  Vector gradient(const Vector& x) const { return Q * x + q; }
};

enum class ActivationKind { relu, softplus };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double theta = 1.0;

  static constexpr double kKinkTolerance = 1e-14;

  double value(double t) const { return kind == ActivationKind::relu ? std::max(0.0, t) : softplus(theta, t); }
  // Selected derivative; the relu kink selects 0.
  double derivative(double t) const {
    if (kind == ActivationKind::softplus) return softplus_derivative(theta, t);
    return t > kKinkTolerance ? 1.0 : 0.0;
  }
  bool at_kink(double t) const { return kind == ActivationKind::relu && std::abs(t) <= kKinkTolerance; }
  bool smooth() const { return kind == ActivationKind::softplus; }
};

struct Layer {
  Matrix weight;
  Vector bias;
};

struct Network {
  std::vector<Layer> layers;

  Index input_dim() const { return layers.front().weight.cols(); }
  Index output_dim() const { return layers.back().weight.rows(); }
  Index hidden_total() const {
    Index r = 0;
    for (const auto& l : layers) r += l.weight.rows();
    return r;
  }
  void validate() const {
    if (layers.empty()) throw InputError("network: no layers");
    for (size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      if (l.weight.rows() != l.bias.size() || l.weight.rows() < 1)
        throw InputError("network: layer " + std::to_string(k + 1) + " weight/bias shape mismatch");
      if (k > 0 && l.weight.cols() != layers[k - 1].weight.rows())
        throw InputError("network: layer " + std::to_string(k + 1) + " input width mismatch");
      if (!l.weight.allFinite() || !l.bias.allFinite()) throw InputError("network: non-finite weights");
    }
  }
  // Activations of every layer for input x0.
  std::vector<Vector> forward(const Vector& x0, const Activation& g) const {
    std::vector<Vector> out;
    Vector cur = x0;
    for (const auto& l : layers) {
      Vector pre = l.weight * cur + l.bias;
      for (Index j = 0; j < pre.size(); ++j) pre(j) = g.value(pre(j));
      out.push_back(pre);
      cur = out.back();
    }
    return out;
  }
};

enum class SampleDistribution { two_point, uniform };

// Per-component data at a point for building the convexified subdifferential
// sum_i y_i con df_i(x).
struct JacobianElement {
  Matrix jacobian;                           // one selection, row i in df_i(x)
  std::vector<std::vector<Vector>> hull;     // generators of con df_i(x); empty => {row i}
  std::vector<std::vector<int>> active;      // active pieces (min functions)
  std::vector<Vector> weights;               // smoothing weights (smoothed min)
  bool exact = true;                         // hull describes con df_i exactly

  std::vector<Vector> generators(Index i) const {
    if (static_cast<size_t>(i) < hull.size() && !hull[i].empty()) return hull[i];
    return {jacobian.row(i).transpose()};
  }
};

// Inner mapping F : R^n -> R^m.
class InnerMapping {
 public:
  struct Affine {
    Matrix A;
    Vector b;
  };
  struct QuadraticArray {
    std::vector<QuadraticForm> rows;
  };
  // f_i = min_k g_ik, or the log-sum-exp smoothing with parameter theta.
  struct MinSmooth {
    std::vector<std::vector<QuadraticForm>> components;
    std::optional<double> theta;
  };
  // f_i(x) = mean over samples xi_j of base_i(x) + xi_j pert_i(x).
  struct SampleAverage {
    std::vector<QuadraticForm> base, perturbation;
    SampleDistribution distribution;
    std::uint64_t seed;
    std::size_t count;
    std::vector<double> samples;
    double sample_mean;
  };
  struct FeedForward {
    std::vector<Network> networks;
    Activation activation;
  };
  struct NetworkLift {
    std::vector<Network> networks;
    Activation activation;
  };
  using Variant = std::variant<Affine, QuadraticArray, MinSmooth, SampleAverage, FeedForward, NetworkLift>;

  static InnerMapping affine(Matrix A, Vector b) {
    if (A.rows() != b.size() || A.cols() < 1 || A.rows() < 1) throw InputError("affine: A/b dimension mismatch");
    if (!A.allFinite() || !b.allFinite()) throw InputError("affine: non-finite data");
    return InnerMapping(Affine{std::move(A), std::move(b)});
  }
  static InnerMapping quadratic_array(std::vector<QuadraticForm> rows) {
    check_rows(rows, "quadratic-array");
    return InnerMapping(QuadraticArray{std::move(rows)});
  }
  static InnerMapping min_smooth(std::vector<std::vector<QuadraticForm>> comps, std::optional<double> theta) {
    if (comps.empty()) throw InputError("min-smooth: no components");
    const Index n = comps.front().empty() ? 0 : comps.front().front().dim();
    for (const auto& c : comps) {
      if (c.empty()) throw InputError("min-smooth: component with no pieces");
      for (const auto& g : c)
        if (g.dim() != n) throw InputError("min-smooth: pieces must share one input dimension");
    }
    if (theta && (!(*theta > 0.0) || !std::isfinite(*theta))) throw InputError("min-smooth: theta must be finite and > 0");
    return InnerMapping(MinSmooth{std::move(comps), theta});
  }
  static InnerMapping sample_average(std::vector<QuadraticForm> base, std::vector<QuadraticForm> pert,
                                     SampleDistribution dist, std::uint64_t seed, std::size_t count) {
    check_rows(base, "sample-average");
    if (pert.size() != base.size()) throw InputError("sample-average: base/perturbation row counts differ");
    for (const auto& p : pert)
      if (p.dim() != base.front().dim()) throw InputError("sample-average: perturbation dimension mismatch");
    if (count < 1) throw InputError("sample-average: sample size must be >= 1");
    SampleAverage s{std::move(base), std::move(pert), dist, seed, count, {}, 0.0};
    CounterRng rng(mix64(seed));
    s.samples.reserve(count);
    double sum = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      const double xi = dist == SampleDistribution::two_point ? rng.sign() : rng.uniform(-1.0, 1.0);
      s.samples.push_back(xi);
      sum += xi;
    }
    s.sample_mean = sum / static_cast<double>(count);
    return InnerMapping(std::move(s));
  }
  static InnerMapping feed_forward(std::vector<Network> nets, Activation g) {
    check_networks(nets, g);
    return InnerMapping(FeedForward{std::move(nets), g});
  }
  static InnerMapping network_lift(std::vector<Network> nets, Activation g) {
    check_networks(nets, g);
    for (const auto& n : nets)
      for (size_t k = 0; k < n.layers.size(); ++k)
        if (n.layers[k].weight.rows() != nets.front().layers[k].weight.rows())
          throw InputError("network-lift: networks must share layer widths");
    return InnerMapping(NetworkLift{std::move(nets), g});
  }

  const Variant& variant() const { return var_; }
  std::string kind_name() const {
    static const char* names[] = {"affine", "quadratic-array", "min-smooth", "sample-average", "feed-forward",
                                  "network-lift"};
    return names[var_.index()];
  }
  Index input_dim() const { return n_; }
  Index output_dim() const { return m_; }

  // True when every component is continuously differentiable.
  bool smooth() const {
    if (const auto* ms = std::get_if<MinSmooth>(&var_)) {
      if (ms->theta) return true;
      for (const auto& c : ms->components)
        if (c.size() > 1) return false;
      return true;
    }
    if (const auto* ff = std::get_if<FeedForward>(&var_)) return ff->activation.smooth();
    if (const auto* nl = std::get_if<NetworkLift>(&var_)) return nl->activation.smooth();
    return true;
  }

  Vector eval(const Vector& x) const {
    check_dim(x, "inner_eval");
    return std::visit(
        [&](const auto& v) -> Vector {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Affine>) {
            return v.A * x + v.b;
          } else if constexpr (std::is_same_v<T, QuadraticArray>) {
            Vector f(m_);
            for (Index i = 0; i < m_; ++i) f(i) = v.rows[i].value(x);
            return f;
          } else if constexpr (std::is_same_v<T, MinSmooth>) {
            Vector f(m_);
            for (Index i = 0; i < m_; ++i) f(i) = min_component(v.components[i], v.theta, x, nullptr);
            return f;
          } else if constexpr (std::is_same_v<T, SampleAverage>) {
            Vector f(m_);
            for (Index i = 0; i < m_; ++i) f(i) = v.base[i].value(x) + v.sample_mean * v.perturbation[i].value(x);
            return f;
          } else if constexpr (std::is_same_v<T, FeedForward>) {
            Vector f(m_);
            Index off = 0;
            for (const auto& net : v.networks) {
              const Vector out = net.forward(x, v.activation).back();
              f.segment(off, out.size()) = out;
              off += out.size();
            }
            return f;
          } else {
            return lift_eval(v, x);
          }
        },
        var_);
  }

  JacobianElement jacobian_element(const Vector& x) const {
    check_dim(x, "inner_jacobian_element");
    JacobianElement je;
    je.jacobian = Matrix::Zero(m_, n_);
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Affine>) {
            je.jacobian = v.A;
          } else if constexpr (std::is_same_v<T, QuadraticArray>) {
            for (Index i = 0; i < m_; ++i) je.jacobian.row(i) = v.rows[i].gradient(x).transpose();
          } else if constexpr (std::is_same_v<T, MinSmooth>) {
            je.hull.resize(m_);
            je.active.resize(m_);
            je.weights.resize(m_);
            for (Index i = 0; i < m_; ++i) min_jacobian_row(v.components[i], v.theta, x, je, i);
          } else if constexpr (std::is_same_v<T, SampleAverage>) {
            for (Index i = 0; i < m_; ++i)
              je.jacobian.row(i) = (v.base[i].gradient(x) + v.sample_mean * v.perturbation[i].gradient(x)).transpose();
          } else if constexpr (std::is_same_v<T, FeedForward>) {
            Index off = 0;
            for (const auto& net : v.networks) {
              bool kink = false;
              const Matrix Jn = network_jacobian(net, v.activation, x, &kink);
              je.jacobian.block(off, 0, Jn.rows(), n_) = Jn;
              off += Jn.rows();
              if (kink) je.exact = false;
            }
          } else {
            lift_jacobian(v, x, je);
          }
        },
        var_);
    return je;
  }

  Matrix jacobian(const Vector& x) const { return jacobian_element(x).jacobian; }

  // Expectation mapping of a sample-average mapping (xi has mean zero).
  InnerMapping expectation() const {
    const auto* s = std::get_if<SampleAverage>(&var_);
    if (!s) throw CapabilityError("expectation: not a sample-average mapping");
    return quadratic_array(s->base);
  }

  // Same generator with a fresh sample.
  InnerMapping resample(std::size_t count, std::uint64_t seed) const {
    const auto* s = std::get_if<SampleAverage>(&var_);
    if (!s) throw CapabilityError("resample: not a sample-average mapping");
    return sample_average(s->base, s->perturbation, s->distribution, seed, count);
  }

  // Smoothed (or exact, when theta is empty) version of the same min pieces.
  InnerMapping with_min_smoothing(std::optional<double> theta) const {
    const auto* ms = std::get_if<MinSmooth>(&var_);
    if (!ms) throw CapabilityError("with_min_smoothing: not a min-smooth mapping");
    return min_smooth(ms->components, theta);
  }

  // Lifted point (x0, x1) with every layer equation satisfied.
  Vector lift_point(const Vector& x0) const {
    const auto* nl = std::get_if<NetworkLift>(&var_);
    if (!nl) throw CapabilityError("lift_point: not a network-lift mapping");
    const Index n0 = nl->networks.front().input_dim();
    if (x0.size() != n0) throw InputError("lift_point: input dimension mismatch");
    Vector x(n_);
    x.head(n0) = x0;
    Index off = n0;
    for (const auto& net : nl->networks)
      for (const auto& layer_out : net.forward(x0, nl->activation)) {
        x.segment(off, layer_out.size()) = layer_out;
        off += layer_out.size();
      }
    return x;
  }

 private:
  explicit InnerMapping(Variant v) : var_(std::move(v)) { dims(); }

  static void check_rows(const std::vector<QuadraticForm>& rows, const char* what) {
    if (rows.empty()) throw InputError(std::string(what) + ": no rows");
    for (const auto& r : rows)
      if (r.dim() != rows.front().dim()) throw InputError(std::string(what) + ": rows must share one input dimension");
  }
  static void check_networks(const std::vector<Network>& nets, const Activation& g) {
    if (nets.empty()) throw InputError("network: no networks");
    for (const auto& n : nets) {
      n.validate();
      if (n.input_dim() != nets.front().input_dim() || n.output_dim() != nets.front().output_dim())
        throw InputError("network: networks must share input and output dimensions");
    }
    if (g.kind == ActivationKind::softplus && (!(g.theta > 0.0) || !std::isfinite(g.theta)))
      throw InputError("network: softplus theta must be finite and > 0");
  }
  void check_dim(const Vector& x, const char* op) const {
    if (x.size() != n_)
      throw InputError(std::string(op) + ": expected dimension " + std::to_string(n_) + ", got " +
                       std::to_string(x.size()));
  }

  void dims() {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Affine>) {
            n_ = v.A.cols();
            m_ = v.A.rows();
          } else if constexpr (std::is_same_v<T, QuadraticArray>) {
            n_ = v.rows.front().dim();
            m_ = static_cast<Index>(v.rows.size());
          } else if constexpr (std::is_same_v<T, MinSmooth>) {
            n_ = v.components.front().front().dim();
            m_ = static_cast<Index>(v.components.size());
          } else if constexpr (std::is_same_v<T, SampleAverage>) {
            n_ = v.base.front().dim();
            m_ = static_cast<Index>(v.base.size());
          } else if constexpr (std::is_same_v<T, FeedForward>) {
            n_ = v.networks.front().input_dim();
            m_ = static_cast<Index>(v.networks.size()) * v.networks.front().output_dim();
          } else {
            const Index s = static_cast<Index>(v.networks.size());
            const Index r = v.networks.front().hidden_total();
            n_ = v.networks.front().input_dim() + s * r;
            m_ = s * v.networks.front().output_dim() + s * r;
          }
        },
        var_);
  }

  // -(1/theta) ln sum_k exp(-theta g_k), with the minimum factored out.
  static double min_component(const std::vector<QuadraticForm>& pieces, const std::optional<double>& theta,
                              const Vector& x, Vector* mu) {
    Vector g(static_cast<Index>(pieces.size()));
    for (size_t k = 0; k < pieces.size(); ++k) g(static_cast<Index>(k)) = pieces[k].value(x);
    const double f = g.minCoeff();
    if (!theta) return f;
    const Vector e = (-(*theta) * (g.array() - f)).exp().matrix();
    const double s = e.sum();
    if (mu) *mu = e / s;
    return f - std::log(s) / *theta;
  }

  static void min_jacobian_row(const std::vector<QuadraticForm>& pieces, const std::optional<double>& theta,
                               const Vector& x, JacobianElement& je, Index i) {
    const Index n = x.size();
    if (theta) {
      Vector mu;
      min_component(pieces, theta, x, &mu);
      Vector row = Vector::Zero(n);
      for (size_t k = 0; k < pieces.size(); ++k) row += mu(static_cast<Index>(k)) * pieces[k].gradient(x);
      je.jacobian.row(i) = row.transpose();
      je.weights[i] = mu;
      for (size_t k = 0; k < pieces.size(); ++k) je.active[i].push_back(static_cast<int>(k));
      return;
    }
    const double f = min_component(pieces, theta, x, nullptr);
    for (size_t k = 0; k < pieces.size(); ++k)
      if (pieces[k].value(x) <= f + 1e-9) {
        je.active[i].push_back(static_cast<int>(k));
        je.hull[i].push_back(pieces[k].gradient(x));
      }
    je.jacobian.row(i) = je.hull[i].front().transpose();
  }

  static Matrix network_jacobian(const Network& net, const Activation& g, const Vector& x0, bool* kink) {
    Matrix J = Matrix::Identity(x0.size(), x0.size());
    Vector cur = x0;
    for (const auto& l : net.layers) {
      const Vector pre = l.weight * cur + l.bias;
      Vector d(pre.size()), nxt(pre.size());
      for (Index j = 0; j < pre.size(); ++j) {
        d(j) = g.derivative(pre(j));
        nxt(j) = g.value(pre(j));
        if (g.at_kink(pre(j))) *kink = true;
      }
      J = d.asDiagonal() * (l.weight * J);
      cur = nxt;
    }
    return J;
  }

  Vector lift_eval(const NetworkLift& v, const Vector& x) const {
    const Index n0 = v.networks.front().input_dim();
    const Index nq = v.networks.front().output_dim();
    const Index r = v.networks.front().hidden_total();
    const Index s = static_cast<Index>(v.networks.size());
    Vector f(m_);
    for (Index i = 0; i < s; ++i) {
      const Index blk = n0 + i * r;
      f.segment(i * nq, nq) = x.segment(blk + r - nq, nq);
      Index off = 0;
      Vector prev = x.head(n0);
      for (const auto& l : v.networks[i].layers) {
        const Index w = l.weight.rows();
        const Vector own = x.segment(blk + off, w);
        const Vector pre = l.weight * prev + l.bias;
        for (Index j = 0; j < w; ++j) f(s * nq + i * r + off + j) = v.activation.value(pre(j)) - own(j);
        prev = own;
        off += w;
      }
    }
    return f;
  }

  void lift_jacobian(const NetworkLift& v, const Vector& x, JacobianElement& je) const {
    const Index n0 = v.networks.front().input_dim();
    const Index nq = v.networks.front().output_dim();
    const Index r = v.networks.front().hidden_total();
    const Index s = static_cast<Index>(v.networks.size());
    je.hull.assign(m_, {});
    for (Index i = 0; i < s; ++i) {
      const Index blk = n0 + i * r;
      for (Index j = 0; j < nq; ++j) je.jacobian(i * nq + j, blk + r - nq + j) = 1.0;
      Index off = 0;
      Index prev_col = 0, prev_w = n0;
      Vector prev = x.head(n0);
      for (const auto& l : v.networks[i].layers) {
        const Index w = l.weight.rows();
        const Vector pre = l.weight * prev + l.bias;
        for (Index j = 0; j < w; ++j) {
          const Index row = s * nq + i * r + off + j;
          je.jacobian.block(row, prev_col, 1, prev_w) = v.activation.derivative(pre(j)) * l.weight.row(j);
          je.jacobian(row, blk + off + j) = -1.0;
          if (v.activation.at_kink(pre(j))) {
            // con df = segment between the slopes 0 and 1 of the kink
            Vector g0 = je.jacobian.row(row).transpose();
            Vector g1 = g0;
            g1.segment(prev_col, prev_w) = l.weight.row(j).transpose();
            g0.segment(prev_col, prev_w).setZero();
            je.hull[row] = {g0, g1};
          }
        }
        prev = x.segment(blk + off, w);
        prev_col = blk + off;
        prev_w = w;
        off += w;
      }
    }
  }

  Variant var_;
  Index n_ = 0;
  Index m_ = 0;
};

}  // namespace capx
