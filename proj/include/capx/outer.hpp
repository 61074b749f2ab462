#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "capx/linalg.hpp"
#include "capx/scalar_term.hpp"

namespace capx {

struct SubdiffDistance {
  double distance = 0.0;
  bool exact = true;
};

struct Cut {
  Vector point;     // z^k
  double value;     // h(z^k)
  Vector slope;     // v^k in dh(z^k)
};

// Proper lsc convex outer function h : R^m -> (-inf, +inf].
class OuterFunction {
 public:
  struct Goal {
    Vector alpha, tau;
  };
  struct SoftplusGoal {
    Vector alpha, tau;
    double theta;
  };
  struct Linear {
    Vector p;
  };
  struct Support {
    std::vector<Vector> points;
  };
  struct EqualityIndicator {
    Index dim;
    bool leading_linear;
  };
  struct InequalityIndicator {
    Index dim;
    bool leading_linear;
  };
  struct AugmentedLagrangian {
    Vector multipliers;  // y_i for i >= 2
    double theta;
  };
  struct QuadraticPenalty {
    Index dim;
    double theta;
  };
  struct ExactPenalty {
    Index dim;
    double theta;
  };
  struct LogBarrier {
    Index dim;
    double theta;
  };
  struct Homotopy {
    std::shared_ptr<const OuterFunction> base;
    double lambda;
  };
  struct CuttingPlane {
    Index dim;
    std::vector<Cut> cuts;
  };
  struct SquaredDistance {
    Vector target, weights;
  };
  struct DirectSum {
    std::vector<std::shared_ptr<const OuterFunction>> parts;
  };
  using Variant = std::variant<Goal, SoftplusGoal, Linear, Support, EqualityIndicator, InequalityIndicator,
                               AugmentedLagrangian, QuadraticPenalty, ExactPenalty, LogBarrier, Homotopy,
                               CuttingPlane, SquaredDistance, DirectSum>;

  // sum_i alpha_i max{0, z_i - tau_i}
  static OuterFunction goal(Vector alpha, Vector tau) {
    check_goal(alpha, tau, "goal");
    return OuterFunction(Goal{std::move(alpha), std::move(tau)});
  }
  static OuterFunction softplus_goal(Vector alpha, Vector tau, double theta) {
    check_goal(alpha, tau, "softplus-goal");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw InputError("softplus-goal: theta must be finite and > 0");
    return OuterFunction(SoftplusGoal{std::move(alpha), std::move(tau), theta});
  }
  static OuterFunction linear(Vector p) {
    if (p.size() < 1 || !p.allFinite()) throw InputError("linear: p must be nonempty and finite");
    return OuterFunction(Linear{std::move(p)});
  }
  // max_{p in A} <p, z>, A a finite subset of the probability simplex.
  static OuterFunction support(std::vector<Vector> points) {
    if (points.empty()) throw InputError("support: empty point set");
    const Index m = points.front().size();
    for (size_t k = 0; k < points.size(); ++k) {
      const Vector& p = points[k];
      if (p.size() != m || m < 1) throw InputError("support: points must share one dimension");
      if (!p.allFinite() || (p.array() < -1e-12).any() || std::abs(p.sum() - 1.0) > 1e-12)
        throw InputError("support: point " + std::to_string(k) + " is not in the probability simplex");
    }
    return OuterFunction(Support{std::move(points)});
  }
  // [z_1 +] iota_{0}(remaining coordinates)
  static OuterFunction equality_indicator(Index m, bool leading_linear) {
    if (m < 1 || (leading_linear && m < 1)) throw InputError("equality-indicator: m must be >= 1");
    return OuterFunction(EqualityIndicator{m, leading_linear});
  }
  // [z_1 +] iota_{(-inf,0]}(remaining coordinates)
  static OuterFunction inequality_indicator(Index m, bool leading_linear) {
    if (m < 1) throw InputError("inequality-indicator: m must be >= 1");
    return OuterFunction(InequalityIndicator{m, leading_linear});
  }
  // z_1 + sum_{i>=2} (y_i z_i + theta/2 z_i^2)
  static OuterFunction augmented_lagrangian(Vector y, double theta) {
    if (!y.allFinite()) throw InputError("aug-lagrangian: multipliers must be finite");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw InputError("aug-lagrangian: theta must be finite and > 0");
    return OuterFunction(AugmentedLagrangian{std::move(y), theta});
  }
  // z_1 + theta sum_{i>=2} max{0, z_i}^2
  static OuterFunction quadratic_penalty(Index m, double theta) {
    check_penalty(m, theta, "quad-penalty");
    return OuterFunction(QuadraticPenalty{m, theta});
  }
  // z_1 + theta sum_{i>=2} |z_i|
  static OuterFunction exact_penalty(Index m, double theta) {
    check_penalty(m, theta, "exact-penalty");
    return OuterFunction(ExactPenalty{m, theta});
  }
  // z_1 - (1/theta) sum_{i>=2} ln(-z_i)
  static OuterFunction log_barrier(Index m, double theta) {
    check_penalty(m, theta, "log-barrier");
    if (!(theta > 0.0)) throw InputError("log-barrier: theta must be > 0");
    return OuterFunction(LogBarrier{m, theta});
  }
  // (1 - lambda) base(z_1..z_{m-1}) + lambda z_m
  static OuterFunction homotopy(OuterFunction base, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("homotopy: lambda must lie in [0, 1]");
    if (!base.separable()) throw CapabilityError("homotopy: base must be separable");
    return OuterFunction(Homotopy{std::make_shared<const OuterFunction>(std::move(base)), lambda});
  }
  static OuterFunction cutting_plane(Index m) {
    if (m < 1) throw InputError("cutting-plane: m must be >= 1");
    return OuterFunction(CuttingPlane{m, {}});
  }
  // sum_i w_i (z_i - t_i)^2
  static OuterFunction squared_distance(Vector target, Vector weights) {
    if (target.size() != weights.size() || target.size() < 1)
      throw InputError("squared-distance: target/weights dimension mismatch");
    if (!target.allFinite() || !weights.allFinite() || (weights.array() < 0.0).any())
      throw InputError("squared-distance: weights must be finite and >= 0");
    return OuterFunction(SquaredDistance{std::move(target), std::move(weights)});
  }
  // h(z) = sum_k h_k(z^(k)) over consecutive coordinate blocks.
  static OuterFunction direct_sum(std::vector<OuterFunction> parts) {
    if (parts.empty()) throw InputError("direct-sum: no parts");
    DirectSum d;
    for (auto& p : parts) {
      if (!p.separable()) throw CapabilityError("direct-sum: parts must be separable");
      d.parts.push_back(std::make_shared<const OuterFunction>(std::move(p)));
    }
    return OuterFunction(std::move(d));
  }

  const Variant& variant() const { return var_; }
  std::string kind_name() const {
    static const char* names[] = {"goal",          "softplus-goal",  "linear",       "support",
                                  "equality-indicator", "inequality-indicator", "aug-lagrangian",
                                  "quad-penalty",  "exact-penalty",  "log-barrier",  "homotopy",
                                  "cutting-plane", "squared-distance", "direct-sum"};
    return names[var_.index()];
  }

  Index dimension() const { return dim_; }
  bool separable() const { return separable_; }
  bool real_valued() const {
    if (!separable_) return true;
    for (const auto& t : terms_)
      if (!t.real_valued()) return false;
    return true;
  }
  bool differentiable() const {
    if (!separable_) return false;
    for (const auto& t : terms_)
      if (!t.smooth()) return false;
    return true;
  }
  bool has_prox() const {
    if (std::holds_alternative<Support>(var_)) return true;
    if (!separable_) return false;
    for (const auto& t : terms_)
      if (!t.has_prox()) return false;
    return true;
  }

  // Per-coordinate terms of a separable function.
  const std::vector<ScalarTerm>& terms() const {
    if (!separable_) throw CapabilityError(kind_name() + " is not separable");
    return terms_;
  }

  ExtendedReal value(const Vector& z) const {
    check_dim(z, "outer_value");
    if (separable_) {
      double s = 0.0;
      for (Index i = 0; i < dim_; ++i) {
        const double t = terms_[i].value(z(i));
        if (t == kInf) return ExtendedReal::infinity();
        s += t;
      }
      return ExtendedReal(s);
    }
    if (const auto* sp = std::get_if<Support>(&var_)) {
      double best = -kInf;
      for (const auto& p : sp->points) best = std::max(best, p.dot(z));
      return ExtendedReal(best);
    }
    const auto& cp = std::get<CuttingPlane>(var_);
    if (cp.cuts.empty()) throw CapabilityError("cutting-plane: model has no cuts");
    double best = -kInf;
    for (const auto& c : cp.cuts) best = std::max(best, c.value + c.slope.dot(z - c.point));
    return ExtendedReal(best);
  }

  Interval subdiff_1d(Index i, double zi) const {
    if (i < 0 || i >= dim_) throw InputError("outer_subdiff_1d: coordinate out of range");
    return terms().at(static_cast<size_t>(i)).subdiff(zi);
  }

  // dist(y, dh(z)); +inf when dh(z) is empty.
  SubdiffDistance subdiff_distance(const Vector& z, const Vector& y) const {
    check_dim(z, "subdiff_distance");
    check_dim(y, "subdiff_distance");
    if (separable_) {
      double s = 0.0;
      for (Index i = 0; i < dim_; ++i) {
        const double d = terms_[i].subdiff(z(i)).distance(y(i));
        if (d == kInf) return {kInf, true};
        s += d * d;
      }
      return {std::sqrt(s), true};
    }
    const std::vector<Vector> act = active_slopes(z);
    const HullProjection hp = project_onto_hull(act, y);
    return {(y - hp.point).norm(), hp.exact};
  }

  // Active generators of dh(z) for support / cutting-plane functions.
  std::vector<Vector> active_slopes(const Vector& z) const {
    check_dim(z, "active_slopes");
    std::vector<Vector> act;
    const double h = value(z).value();
    const double tol = 1e-10 * (1.0 + std::abs(h));
    if (const auto* sp = std::get_if<Support>(&var_)) {
      for (const auto& p : sp->points)
        if (p.dot(z) >= h - tol) act.push_back(p);
    } else if (const auto* cp = std::get_if<CuttingPlane>(&var_)) {
      for (const auto& c : cp->cuts)
        if (c.value + c.slope.dot(z - c.point) >= h - tol) act.push_back(c.slope);
    } else {
      throw CapabilityError("active_slopes: " + kind_name() + " is separable");
    }
    return act;
  }

  // Some element of dh(z) (the gradient for smooth functions).
  Vector subgradient(const Vector& z) const {
    check_dim(z, "subgradient");
    if (!separable_) return active_slopes(z).front();
    Vector g(dim_);
    for (Index i = 0; i < dim_; ++i) {
      const Interval I = terms_[i].subdiff(z(i));
      if (I.is_empty()) throw EvaluationError("subgradient: z is outside dom h");
      g(i) = I.clamp(0.0);
    }
    return g;
  }

  Vector gradient(const Vector& z) const {
    check_dim(z, "gradient");
    if (!differentiable()) throw CapabilityError(kind_name() + " is not differentiable");
    Vector g(dim_);
    for (Index i = 0; i < dim_; ++i) g(i) = terms_[i].derivative(z(i));
    return g;
  }

  // Diagonal of the Hessian of a smooth separable function.
  Vector hessian_diagonal(const Vector& z) const {
    check_dim(z, "hessian_diagonal");
    if (!differentiable()) throw CapabilityError(kind_name() + " is not differentiable");
    Vector g(dim_);
    for (Index i = 0; i < dim_; ++i) g(i) = terms_[i].second_derivative(z(i));
    return g;
  }

  // argmin_w h(w) + ||w - z||^2 / (2 step)
  Vector prox(const Vector& z, double step) const {
    check_dim(z, "outer_prox");
    if (!(step > 0.0) || !std::isfinite(step)) throw InputError("outer_prox: step must be finite and > 0");
    if (const auto* sp = std::get_if<Support>(&var_)) {
      // Moreau: prox_{s sigma_C}(z) = z - s P_C(z / s)
      return z - step * project_onto_hull(sp->points, z / step).point;
    }
    if (!separable_) throw CapabilityError(kind_name() + " has no prox");
    Vector w(dim_);
    for (Index i = 0; i < dim_; ++i) w(i) = terms_[i].prox(z(i), step);
    return w;
  }

  SubdifferentialGraph1D graph_1d(Index i) const {
    if (i < 0 || i >= dim_) throw InputError("subdiff_graph_1d: coordinate out of range");
    return terms().at(static_cast<size_t>(i)).graph();
  }

 private:
  explicit OuterFunction(Variant v) : var_(std::move(v)) { build(); }

  static void check_goal(const Vector& alpha, const Vector& tau, const char* what) {
    if (alpha.size() != tau.size() || alpha.size() < 1)
      throw InputError(std::string(what) + ": alpha/tau dimension mismatch");
    if (!alpha.allFinite() || !tau.allFinite() || (alpha.array() < 0.0).any())
      throw InputError(std::string(what) + ": alpha must be finite and >= 0");
  }
  static void check_penalty(Index m, double theta, const char* what) {
    if (m < 1) throw InputError(std::string(what) + ": m must be >= 1");
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw InputError(std::string(what) + ": theta must be finite and >= 0");
  }
  void check_dim(const Vector& z, const char* op) const {
    if (z.size() != dim_)
      throw InputError(std::string(op) + ": expected dimension " + std::to_string(dim_) + ", got " +
                       std::to_string(z.size()));
  }

  void build() {
    using K = ScalarTerm::Kind;
    separable_ = true;
    auto lead = [&](bool flag) {
      if (flag) terms_.push_back(ScalarTerm::make(K::linear, 1.0));
    };
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Goal>) {
            for (Index i = 0; i < v.alpha.size(); ++i) terms_.push_back(ScalarTerm::make(K::hinge, v.alpha(i), v.tau(i)));
          } else if constexpr (std::is_same_v<T, SoftplusGoal>) {
            for (Index i = 0; i < v.alpha.size(); ++i)
              terms_.push_back(ScalarTerm::make(K::softplus, v.alpha(i), v.tau(i), v.theta));
          } else if constexpr (std::is_same_v<T, Linear>) {
            for (Index i = 0; i < v.p.size(); ++i) terms_.push_back(ScalarTerm::make(K::linear, v.p(i)));
          } else if constexpr (std::is_same_v<T, Support>) {
            separable_ = false;
            dim_ = v.points.front().size();
          } else if constexpr (std::is_same_v<T, EqualityIndicator>) {
            lead(v.leading_linear);
            for (Index i = v.leading_linear ? 1 : 0; i < v.dim; ++i) terms_.push_back(ScalarTerm::make(K::zero_indicator));
          } else if constexpr (std::is_same_v<T, InequalityIndicator>) {
            lead(v.leading_linear);
            for (Index i = v.leading_linear ? 1 : 0; i < v.dim; ++i)
              terms_.push_back(ScalarTerm::make(K::nonpos_indicator));
          } else if constexpr (std::is_same_v<T, AugmentedLagrangian>) {
            lead(true);
            for (Index i = 0; i < v.multipliers.size(); ++i)
              terms_.push_back(ScalarTerm::make(K::quadratic, v.multipliers(i), v.theta));
          } else if constexpr (std::is_same_v<T, QuadraticPenalty>) {
            lead(true);
            for (Index i = 1; i < v.dim; ++i) terms_.push_back(ScalarTerm::make(K::squared_hinge, 0.0, v.theta));
          } else if constexpr (std::is_same_v<T, ExactPenalty>) {
            lead(true);
            for (Index i = 1; i < v.dim; ++i) terms_.push_back(ScalarTerm::make(K::absolute, 0.0, v.theta));
          } else if constexpr (std::is_same_v<T, LogBarrier>) {
            lead(true);
            for (Index i = 1; i < v.dim; ++i) terms_.push_back(ScalarTerm::make(K::log_barrier, 0.0, v.theta));
          } else if constexpr (std::is_same_v<T, Homotopy>) {
            for (const auto& t : v.base->terms()) terms_.push_back(t.scaled(1.0 - v.lambda));
            terms_.push_back(ScalarTerm::make(K::linear, v.lambda));
          } else if constexpr (std::is_same_v<T, CuttingPlane>) {
            separable_ = false;
            dim_ = v.dim;
          } else if constexpr (std::is_same_v<T, SquaredDistance>) {
            for (Index i = 0; i < v.target.size(); ++i)
              terms_.push_back(ScalarTerm::make(K::squared_distance, v.target(i), v.weights(i)));
          } else if constexpr (std::is_same_v<T, DirectSum>) {
            for (const auto& p : v.parts)
              for (const auto& t : p->terms()) terms_.push_back(t);
          }
        },
        var_);
    if (separable_) dim_ = static_cast<Index>(terms_.size());
  }

  friend OuterFunction add_cut(const OuterFunction&, const Vector&, double, const Vector&);

  Variant var_;
  Index dim_ = 0;
  bool separable_ = true;
  std::vector<ScalarTerm> terms_;
};

// New model with the cut h(z_k) + <v_k, z - z_k> appended; the input is unchanged.
inline OuterFunction add_cut(const OuterFunction& model, const Vector& zk, double hk, const Vector& vk) {
  const auto* cp = std::get_if<OuterFunction::CuttingPlane>(&model.variant());
  if (!cp) throw CapabilityError("add_cut: model is not a cutting-plane function");
  if (zk.size() != cp->dim || vk.size() != cp->dim) throw InputError("add_cut: dimension mismatch");
  if (!std::isfinite(hk) || !zk.allFinite() || !vk.allFinite()) throw InputError("add_cut: cut data must be finite");
  OuterFunction::CuttingPlane next = *cp;
  next.cuts.push_back(Cut{zk, hk, vk});
  return OuterFunction(std::move(next));
}

// Cut of a real-valued h at z_k using one of its subgradients.
inline OuterFunction add_cut(const OuterFunction& model, const OuterFunction& h, const Vector& zk) {
  const ExtendedReal v = h.value(zk);
  if (!v.is_finite()) throw EvaluationError("add_cut: h(z_k) is +inf");
  return add_cut(model, zk, v.value(), h.subgradient(zk));
}

}  // namespace capx
