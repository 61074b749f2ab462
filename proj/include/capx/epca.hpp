#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "capx/problem.hpp"
#include "capx/random.hpp"

namespace capx {

struct EpcaConfig {
  Vector x0;
  double tau = 2.0;
  double sigma = 0.1;
  double lambda_bar = 1e4;
  double lambda0 = 1.0;
  std::vector<double> delta;
  std::size_t inner_iteration_cap = 5000;
  double subproblem_tolerance_factor = 0.1;
  std::size_t subproblem_iteration_cap = 200000;
  bool level_probe = true;

  void validate() const {
    if (x0.size() == 0 || !x0.allFinite()) throw InputError("epca: x0 must be a finite nonempty vector");
    if (!(tau > 1.0) || !std::isfinite(tau)) throw InputError("epca: tau must lie in (1, inf)");
    if (!(sigma > 0.0 && sigma < 1.0)) throw InputError("epca: sigma must lie in (0, 1)");
    if (!(lambda_bar > 0.0) || !std::isfinite(lambda_bar)) throw InputError("epca: lambda_bar must be finite and > 0");
    if (!(lambda0 > 0.0 && lambda0 <= lambda_bar)) throw InputError("epca: lambda0 must lie in (0, lambda_bar]");
    if (delta.empty()) throw InputError("epca: delta schedule is empty");
    for (size_t k = 0; k < delta.size(); ++k) {
      if (!(delta[k] > 0.0) || !std::isfinite(delta[k])) throw InputError("epca: delta entries must be finite and > 0");
      if (k > 0 && delta[k] > delta[k - 1]) throw InputError("epca: delta schedule must be nonincreasing");
    }
    if (inner_iteration_cap == 0) throw InputError("epca: inner_iteration_cap must be positive");
    if (!(subproblem_tolerance_factor > 0.0 && subproblem_tolerance_factor < 1.0))
      throw InputError("epca: subproblem_tolerance_factor must lie in (0, 1)");
    if (subproblem_iteration_cap == 0) throw InputError("epca: subproblem_iteration_cap must be positive");
  }
};

enum class EpcaExit { step4, step5 };

inline const char* exit_name(EpcaExit e) { return e == EpcaExit::step4 ? "step4" : "step5"; }

struct EpcaRecord {
  std::size_t nu = 0;
  StationarityTriple triple;
  ResidualTriple residual;
  std::size_t inner_iterations = 0;
  double lambda_final = 0.0;
  ExtendedReal objective;
  EpcaExit exit = EpcaExit::step5;
  double delta = 0.0;
  double subproblem_tolerance = 0.0;
  // h(F(xbar^k)) at the start and after every accepted step
  std::vector<double> accepted_objectives;
};

struct EpcaTrace {
  std::vector<EpcaRecord> records;
  std::vector<std::string> warnings;
};

class EpcaNonconvergence : public NonconvergenceError {
 public:
  EpcaNonconvergence(const std::string& what, EpcaTrace partial)
      : NonconvergenceError(what), trace(std::move(partial)) {}
  EpcaTrace trace;
};

// Members X^nu, h^nu, F^nu for nu = 1..length. The builder sees the records
// produced so far, which lets multiplier-type families update their data.
struct ProblemFamily {
  std::size_t length = 0;
  std::function<CompositeProblem(std::size_t nu, const EpcaTrace& so_far)> member;
};

struct SubproblemResult {
  Vector x;
  Vector y;
  // point where y is a subgradient of h: the model value on the smooth branch
  Vector z;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool splitting = false;
};

namespace detail {

inline double subproblem_value(const OuterFunction& h, const Vector& e, const Matrix& J, const Vector& xbar,
                               double lambda, const Vector& x) {
  const ExtendedReal hv = h.value(e + J * x);
  if (!hv.is_finite()) return kInf;
  return hv.value() + (x - xbar).squaredNorm() / (2.0 * lambda);
}

inline SubproblemResult solve_smooth(const ClosedSet& X, const OuterFunction& h, const Vector& e, const Matrix& J,
                                     const Vector& xbar, double lambda, double tol, std::size_t cap) {
  auto grad = [&](const Vector& x) -> Vector { return J.transpose() * h.gradient(e + J * x) + (x - xbar) / lambda; };
  auto q = [&](const Vector& x) { return subproblem_value(h, e, J, xbar, lambda, x); };
  auto certificate = [&](const Vector& x) { return X.normal_cone_distance(x, -grad(x)).distance; };

  Vector x = xbar;
  double res = certificate(x);
  SubproblemResult out;
  if (res <= tol) {
    out.x = x;
    out.z = e + J * x;
    out.y = h.gradient(out.z);
    out.residual = res;
    return out;
  }
  Vector yk = x;
  double t = 1.0;
  double step = lambda;
  double qx = q(x);
  for (std::size_t it = 1; it <= cap; ++it) {
    const Vector g = grad(yk);
    const double qy = q(yk);
    Vector xn;
    double qn = kInf;
    for (int bt = 0; bt < 200; ++bt) {
      xn = X.project(yk - step * g);
      qn = q(xn);
      const Vector d = xn - yk;
      if (qn <= qy + g.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15 * (1.0 + std::abs(qy))) break;
      step *= 0.5;
    }
    if (qn > qx && t > 1.0) {
      // function-value restart
      yk = x;
      t = 1.0;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yk = xn + ((t - 1.0) / tn) * (xn - x);
    t = tn;
    x = xn;
    qx = qn;
    res = certificate(x);
    if (res <= tol) {
      out.x = x;
      out.z = e + J * x;
      out.y = h.gradient(out.z);
      out.residual = res;
      out.iterations = it;
      return out;
    }
  }
  throw NonconvergenceError("solve_subproblem: projected gradient did not reach tolerance " + std::to_string(tol) +
                            " (residual " + std::to_string(res) + ")");
}

// Accelerated proximal gradient on the dual of the subproblem,
//   min_y g^*(y) + psi(y),  psi(y) = max_{x in X} -<J^T y, x> - ||x - xbar||^2 / (2 lambda),
// with g(w) = h(w + e). grad psi(y) = -J x(y), x(y) = proj_X(xbar - lambda J^T y), so
// every primal candidate satisfies the normal-cone inclusion by construction.
inline SubproblemResult solve_splitting(const ClosedSet& X, const OuterFunction& h, const Vector& e, const Matrix& J,
                                        const Vector& xbar, double lambda, double tol, std::size_t cap) {
  SubproblemResult out;
  out.splitting = true;
  const double L = J.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(J).singularValues()(0);
  if (L == 0.0) {
    // model is constant in x
    out.x = xbar;
    out.z = e + J * xbar;
    out.y = h.subgradient(out.z);
    out.residual = X.normal_cone_distance(xbar, Vector::Zero(xbar.size())).distance;
    return out;
  }
  auto primal = [&](const Vector& y) -> Vector { return X.project(xbar - lambda * (J.transpose() * y)); };
  const double s = 1.0 / (lambda * L * L);
  Vector y = Vector::Zero(J.rows()), yt = y;
  double t = 1.0;
  double res = kInf;
  for (std::size_t it = 1; it <= cap; ++it) {
    const Vector v = yt + s * (J * primal(yt));
    // prox of s g^* through Moreau
    const Vector w = h.prox(v / s + e, 1.0 / s) - e;
    const Vector yn = v - s * w;
    const Vector x = primal(yn);
    const double mismatch = (J * x - w).norm();
    const double nc = X.normal_cone_distance(x, -(J.transpose() * yn + (x - xbar) / lambda)).distance;
    res = std::max(mismatch, nc);
    if (res <= tol) {
      out.x = x;
      out.y = yn;
      out.z = w + e;
      out.residual = res;
      out.iterations = it;
      return out;
    }
    if ((yt - yn).dot(yn - y) > 0.0) {
      // gradient restart
      t = 1.0;
      y = yt = yn;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yt = yn + ((t - 1.0) / tn) * (yn - y);
    y = yn;
    t = tn;
  }
  throw NonconvergenceError("solve_subproblem: dual proximal gradient did not reach tolerance " + std::to_string(tol) +
                            " (residual " + std::to_string(res) + ")");
}

}  // namespace detail

// argmin_{x in X} h(c + J(x - xbar)) + ||x - xbar||^2 / (2 lambda)
inline SubproblemResult solve_subproblem(const ClosedSet& X, const OuterFunction& h, const Vector& c, const Matrix& J,
                                         const Vector& xbar, double lambda, double tol,
                                         std::size_t cap = 200000) {
  if (J.rows() != h.dimension() || J.cols() != X.dimension() || c.size() != h.dimension() ||
      xbar.size() != X.dimension())
    throw InputError("solve_subproblem: dimension mismatch");
  if (!(lambda > 0.0) || !(tol > 0.0)) throw InputError("solve_subproblem: lambda and tol must be > 0");
  const Vector e = c - J * xbar;
  if (h.differentiable()) return detail::solve_smooth(X, h, e, J, xbar, lambda, tol, cap);
  if (!h.has_prox()) throw CapabilityError("solve_subproblem: " + h.kind_name() + " has neither gradient nor prox");
  return detail::solve_splitting(X, h, e, J, xbar, lambda, tol, cap);
}

inline double finite_objective(const OuterFunction& h, const Vector& z, const char* what) {
  const ExtendedReal v = h.value(z);
  if (!v.is_finite()) throw EvaluationError(std::string(what) + ": h is +inf; the step test needs real values");
  return v.value();
}

inline bool sufficient_decrease_test(const OuterFunction& h, const InnerMapping& F, const Vector& xbar,
                                     const Vector& xstar, const Matrix& J, double sigma) {
  const Vector Fb = F.eval(xbar);
  const double hb = finite_objective(h, Fb, "sufficient_decrease_test");
  const double hs = finite_objective(h, F.eval(xstar), "sufficient_decrease_test");
  const double hm = finite_objective(h, Fb + J * (xstar - xbar), "sufficient_decrease_test");
  return hb - hs >= sigma * (hb - hm);
}

struct Step5Residuals {
  Vector u, w;
};

inline Step5Residuals step5_residuals(const InnerMapping& F, const Vector& xprev, const Vector& xnext,
                                      const Vector& znext, const Vector& ynext, double lambda) {
  Step5Residuals r;
  r.u = F.eval(xnext) - znext;
  r.w = (F.jacobian(xnext) - F.jacobian(xprev)).transpose() * ynext - (xnext - xprev) / lambda;
  return r;
}

struct Step4Multipliers {
  Vector y, z;
  double v_residual = 0.0;
  double w_residual = 0.0;
};

// y from the gradient when h is smooth, otherwise from the subproblem dual,
// certified against dh(F(x)) and N_X(x).
inline Step4Multipliers extract_multipliers_step4(const OuterFunction& h, const InnerMapping& F, const ClosedSet& X,
                                                  const Vector& xstar, const std::optional<Vector>& dual = std::nullopt,
                                                  double tol = 1e-9) {
  Step4Multipliers r;
  r.z = F.eval(xstar);
  if (h.differentiable())
    r.y = h.gradient(r.z);
  else if (dual)
    r.y = *dual;
  else
    r.y = h.subgradient(r.z);
  r.v_residual = h.subdiff_distance(r.z, r.y).distance;
  r.w_residual = multiplier_residual(X, F.jacobian_element(xstar), xstar, r.y, Vector::Zero(xstar.size())).distance;
  if (!(r.v_residual <= tol) || !(r.w_residual <= tol))
    throw ConsistencyError("step 4: multiplier certification failed (subgradient residual " +
                           std::to_string(r.v_residual) + ", normal-cone residual " + std::to_string(r.w_residual) +
                           ")");
  return r;
}

namespace detail {

// Looks for far-away feasible points that do not raise the objective.
inline void level_probe(const CompositeProblem& P, const Vector& x0, std::size_t nu, std::vector<std::string>& warn) {
  const ExtendedReal f0 = eval_phi(P, x0);
  if (!f0.is_finite()) return;
  const Index n = P.n();
  std::vector<Vector> dirs;
  for (Index i = 0; i < n; ++i) {
    dirs.push_back(Vector::Unit(n, i));
    dirs.push_back(-Vector::Unit(n, i));
  }
  for (std::uint64_t k = 1; k <= 4; ++k) {
    Vector d = halton_point(k, static_cast<int>(n)).array() * 2.0 - 1.0;
    if (d.norm() > 0) dirs.push_back(d.normalized());
  }
  const double base = 1.0 + x0.norm();
  for (const auto& d : dirs) {
    bool low = true;
    for (double r : {1e3, 1e6}) {
      const Vector p = P.X.project(x0 + r * base * d);
      if ((p - x0).norm() < 0.5 * r * base) {
        low = false;
        break;
      }
      const ExtendedReal f = eval_phi(P, p);
      if (!(f <= f0)) {
        low = false;
        break;
      }
    }
    if (low) {
      warn.push_back("nu=" + std::to_string(nu) + ": level set at the warm start may be unbounded");
      return;
    }
  }
}

}  // namespace detail

inline EpcaTrace run_epca(const ProblemFamily& family, const EpcaConfig& cfg) {
  cfg.validate();
  if (!family.member || family.length == 0) throw InputError("epca: empty problem family");
  if (cfg.delta.size() < family.length) throw InputError("epca: delta schedule is shorter than the family");
  EpcaTrace trace;
  Vector xprev = cfg.x0;
  for (std::size_t nu = 1; nu <= family.length; ++nu) {
    const CompositeProblem P = family.member(nu, trace);
    if (P.n() != xprev.size()) throw InputError("epca: family member " + std::to_string(nu) + " changes dimension");
    const double delta = cfg.delta[nu - 1];
    const double tol = cfg.subproblem_tolerance_factor * delta;
    Vector xb = P.X.project(xprev);
    if (cfg.level_probe) detail::level_probe(P, xb, nu, trace.warnings);

    EpcaRecord rec;
    rec.nu = nu;
    rec.delta = delta;
    rec.subproblem_tolerance = tol;
    double lambda = cfg.lambda0;
    Vector Fb = P.F.eval(xb);
    double hb = finite_objective(P.h, Fb, "epca");
    rec.accepted_objectives.push_back(hb);
    Matrix J = P.F.jacobian(xb);
    std::size_t solves = 0;
    bool done = false;
    while (!done) {
      if (++solves > cfg.inner_iteration_cap) {
        trace.records.push_back(rec);
        throw EpcaNonconvergence("epca: inner iteration cap reached at nu=" + std::to_string(nu), trace);
      }
      SubproblemResult sp;
      try {
        sp = solve_subproblem(P.X, P.h, Fb, J, xb, lambda, tol, cfg.subproblem_iteration_cap);
      } catch (const NonconvergenceError& err) {
        trace.records.push_back(rec);
        throw EpcaNonconvergence(std::string(err.what()) + " at nu=" + std::to_string(nu), trace);
      }
      const Vector& xs = sp.x;
      if ((xs - xb).norm() <= 1e-12 * (1.0 + xb.norm())) {
        // Step 4
        StationarityTriple t;
        t.x = xs;
        t.z = P.F.eval(xs);
        t.y = sp.y;
        if (!P.h.differentiable() && P.h.subdiff_distance(t.z, t.y).distance > tol) t.z = sp.z;
        if (P.h.differentiable()) t.y = P.h.gradient(t.z);
        const double v = P.h.subdiff_distance(t.z, t.y).distance;
        const double w = multiplier_residual(P.X, P.F.jacobian_element(xs), xs, t.y, Vector::Zero(xs.size())).distance;
        if (!(v <= tol) || !(w <= tol + sp.residual)) {
          trace.records.push_back(rec);
          throw ConsistencyError("epca step 4 at nu=" + std::to_string(nu) + ": certification failed (v=" +
                                 std::to_string(v) + ", w=" + std::to_string(w) + ")");
        }
        rec.triple = t;
        rec.residual.u_norm = (P.F.eval(xs) - t.z).norm();
        rec.residual.v_dist = v;
        rec.residual.w_dist = w;
        rec.residual.combined = max3(rec.residual.u_norm, v, w);
        rec.exit = EpcaExit::step4;
        done = true;
        break;
      }
      // Step 3
      if (!sufficient_decrease_test(P.h, P.F, xb, xs, J, cfg.sigma)) {
        lambda /= cfg.tau;
        if (lambda < 1e-16) {
          trace.records.push_back(rec);
          throw EpcaNonconvergence("epca: proximal parameter fell below 1e-16 at nu=" + std::to_string(nu), trace);
        }
        continue;
      }
      const double lam_used = lambda;
      lambda = std::min(cfg.tau * lambda, cfg.lambda_bar);
      // Step 5
      const Vector zbar = sp.splitting ? sp.z : Vector(Fb + J * (xs - xb));
      const Step5Residuals r5 = step5_residuals(P.F, xb, xs, zbar, sp.y, lam_used);
      const double u = r5.u.norm();
      const double v = P.h.subdiff_distance(zbar, sp.y).distance;
      const double w = r5.w.norm() + sp.residual;
      xb = xs;
      Fb = P.F.eval(xb);
      hb = finite_objective(P.h, Fb, "epca");
      rec.accepted_objectives.push_back(hb);
      J = P.F.jacobian(xb);
      if (max3(u, v, w) <= delta) {
        rec.triple = {xs, sp.y, zbar};
        rec.residual.u_norm = u;
        rec.residual.v_dist = v;
        rec.residual.w_dist = w;
        rec.residual.combined = max3(u, v, w);
        rec.exit = EpcaExit::step5;
        done = true;
      }
    }
    rec.inner_iterations = solves;
    rec.lambda_final = lambda;
    rec.objective = P.h.value(P.F.eval(rec.triple.x));
    xprev = rec.triple.x;
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

// Single-member family.
inline ProblemFamily constant_family(const CompositeProblem& P, std::size_t length) {
  return {length, [P](std::size_t, const EpcaTrace&) { return P; }};
}

}  // namespace capx
