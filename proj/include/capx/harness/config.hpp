#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "capx/epca.hpp"
#include "capx/problem.hpp"
#include "capx/random.hpp"
#include "capx/varlab.hpp"

namespace capx::harness {

using nlohmann::json;

// All validation failures of one configuration, one entry per problem.
class ConfigError : public InputError {
 public:
  explicit ConfigError(std::vector<std::string> errs) : InputError(join(errs)), errors(std::move(errs)) {}
  std::vector<std::string> errors;

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s = "invalid configuration (" + std::to_string(e.size()) + " error" + (e.size() == 1 ? "" : "s") + ")";
    for (const auto& x : e) s += "\n  " + x;
    return s;
  }
};

// Field reader that records every problem under a dotted path instead of stopping.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  static std::string sub(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
  static std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  void allow(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) return;
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!ok.count(it.key())) fail(sub(path, it.key()), "unknown field");
  }

  const json* field(const json& j, const std::string& path, const char* key, bool required) {
    if (j.is_object()) {
      auto it = j.find(key);
      if (it != j.end()) return &*it;
    }
    if (required) fail(sub(path, key), "missing required field");
    return nullptr;
  }

  // Numbers may be given as "inf" / "-inf" strings.
  static std::optional<double> as_number(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return kInf;
      if (s == "-inf") return -kInf;
    }
    return std::nullopt;
  }

  std::optional<double> number(const json& j, const std::string& path, const char* key,
                               std::optional<double> def = std::nullopt) {
    const json* v = field(j, path, key, !def.has_value());
    if (!v) return def;
    auto d = as_number(*v);
    if (!d) fail(sub(path, key), "expected a number");
    return d;
  }

  std::optional<std::int64_t> integer(const json& j, const std::string& path, const char* key,
                                      std::optional<std::int64_t> def = std::nullopt) {
    const json* v = field(j, path, key, !def.has_value());
    if (!v) return def;
    if (!v->is_number_integer()) {
      fail(sub(path, key), "expected an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  std::optional<bool> boolean(const json& j, const std::string& path, const char* key, std::optional<bool> def) {
    const json* v = field(j, path, key, !def.has_value());
    if (!v) return def;
    if (!v->is_boolean()) {
      fail(sub(path, key), "expected true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::optional<std::string> string(const json& j, const std::string& path, const char* key,
                                    std::optional<std::string> def = std::nullopt) {
    const json* v = field(j, path, key, !def.has_value());
    if (!v) return def;
    if (!v->is_string()) {
      fail(sub(path, key), "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<Vector> vector_value(const json& v, const std::string& path) {
    if (!v.is_array()) {
      fail(path, "expected an array of numbers");
      return std::nullopt;
    }
    Vector out(static_cast<Index>(v.size()));
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto d = as_number(v[i]);
      if (!d) {
        fail(at(path, i), "expected a number");
        ok = false;
      } else {
        out(static_cast<Index>(i)) = *d;
      }
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<Vector> vec(const json& j, const std::string& path, const char* key, bool required = true) {
    const json* v = field(j, path, key, required);
    if (!v) return std::nullopt;
    return vector_value(*v, sub(path, key));
  }

  // Row-major nested arrays; every row must have the same length.
  std::optional<Matrix> matrix_value(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
      fail(path, "expected a nonempty array of rows");
      return std::nullopt;
    }
    std::size_t cols = 0;
    std::vector<Vector> rows;
    bool ok = true;
    for (std::size_t r = 0; r < v.size(); ++r) {
      auto row = vector_value(v[r], at(path, r));
      if (!row) {
        ok = false;
        continue;
      }
      if (r == 0) cols = static_cast<std::size_t>(row->size());
      if (static_cast<std::size_t>(row->size()) != cols) {
        fail(at(path, r), "row length " + std::to_string(row->size()) + " differs from " + std::to_string(cols));
        ok = false;
      }
      rows.push_back(*row);
    }
    if (!ok || cols == 0) {
      if (ok) fail(path, "rows must be nonempty");
      return std::nullopt;
    }
    Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) M.row(static_cast<Index>(r)) = rows[r].transpose();
    return M;
  }

  std::optional<Matrix> mat(const json& j, const std::string& path, const char* key, bool required = true) {
    const json* v = field(j, path, key, required);
    if (!v) return std::nullopt;
    return matrix_value(*v, sub(path, key));
  }

  // Runs a catalogue factory and records its InputError/CapabilityError under path.
  template <class F>
  auto guard(const std::string& path, F&& f) -> std::optional<decltype(f())> {
    try {
      return f();
    } catch (const InputError& e) {
      fail(path, e.what());
    } catch (const CapabilityError& e) {
      fail(path, e.what());
    }
    return std::nullopt;
  }
};

// Schedule: explicit list, or {"start": s, "factor": r} giving s r^(nu-1).
inline std::optional<std::vector<double>> read_schedule(Reader& rd, const json& j, const std::string& path,
                                                        std::size_t length) {
  if (j.is_array()) {
    auto v = rd.vector_value(j, path);
    if (!v) return std::nullopt;
    if (static_cast<std::size_t>(v->size()) != length) {
      rd.fail(path, "schedule has " + std::to_string(v->size()) + " entries but family.length is " +
                        std::to_string(length));
      return std::nullopt;
    }
    return std::vector<double>(v->data(), v->data() + v->size());
  }
  if (!rd.object(j, path)) return std::nullopt;
  rd.allow(j, path, {"start", "factor"});
  auto s = rd.number(j, path, "start");
  auto r = rd.number(j, path, "factor");
  if (!s || !r) return std::nullopt;
  std::vector<double> out(length);
  double cur = *s;
  for (std::size_t k = 0; k < length; ++k, cur *= *r) out[k] = cur;
  return out;
}

inline const char* const kSetKinds = "whole_space, box, ball, halfspaces";
inline const char* const kOuterKinds =
    "goal, softplus_goal, linear, support, equality_indicator, inequality_indicator, aug_lagrangian, quad_penalty, "
    "exact_penalty, log_barrier, homotopy, cutting_plane, squared_distance, direct_sum";
inline const char* const kInnerKinds = "affine, quadratic, min_smooth, sample_average, feed_forward";

inline std::optional<ClosedSet> build_set(Reader& rd, const json& j, const std::string& path) {
  if (!rd.object(j, path)) return std::nullopt;
  auto kind = rd.string(j, path, "kind");
  if (!kind) return std::nullopt;
  if (*kind == "whole_space") {
    rd.allow(j, path, {"kind", "dim"});
    auto n = rd.integer(j, path, "dim");
    if (!n) return std::nullopt;
    return rd.guard(path, [&] { return ClosedSet::whole_space(static_cast<Index>(*n)); });
  }
  if (*kind == "box") {
    rd.allow(j, path, {"kind", "lower", "upper"});
    auto lo = rd.vec(j, path, "lower");
    auto hi = rd.vec(j, path, "upper");
    if (!lo || !hi) return std::nullopt;
    return rd.guard(path, [&] { return ClosedSet::box(*lo, *hi); });
  }
  if (*kind == "ball") {
    rd.allow(j, path, {"kind", "center", "radius"});
    auto c = rd.vec(j, path, "center");
    auto r = rd.number(j, path, "radius");
    if (!c || !r) return std::nullopt;
    return rd.guard(path, [&] { return ClosedSet::ball(*c, *r); });
  }
  if (*kind == "halfspaces") {
    rd.allow(j, path, {"kind", "normals", "offsets"});
    auto A = rd.mat(j, path, "normals");
    auto b = rd.vec(j, path, "offsets");
    if (!A || !b) return std::nullopt;
    return rd.guard(path, [&] { return ClosedSet::halfspaces(*A, *b); });
  }
  rd.fail(Reader::sub(path, "kind"), "unknown set kind '" + *kind + "' (known: " + kSetKinds + ")");
  return std::nullopt;
}

inline std::optional<OuterFunction> build_outer(Reader& rd, const json& j, const std::string& path) {
  if (!rd.object(j, path)) return std::nullopt;
  auto kind = rd.string(j, path, "kind");
  if (!kind) return std::nullopt;
  const std::string& k = *kind;
  auto dim = [&]() { return rd.integer(j, path, "dim"); };
  if (k == "goal" || k == "softplus_goal") {
    if (k == "goal") rd.allow(j, path, {"kind", "alpha", "tau"});
    else rd.allow(j, path, {"kind", "alpha", "tau", "theta"});
    auto a = rd.vec(j, path, "alpha");
    auto t = rd.vec(j, path, "tau");
    std::optional<double> th = k == "goal" ? std::optional<double>(1.0) : rd.number(j, path, "theta");
    if (!a || !t || !th) return std::nullopt;
    if (a->size() != t->size()) {
      rd.fail(Reader::sub(path, "tau"), "dimension mismatch: tau has " + std::to_string(t->size()) +
                                            " entries, alpha has " + std::to_string(a->size()));
      return std::nullopt;
    }
    if (k == "goal") return rd.guard(path, [&] { return OuterFunction::goal(*a, *t); });
    return rd.guard(path, [&] { return OuterFunction::softplus_goal(*a, *t, *th); });
  }
  if (k == "linear") {
    rd.allow(j, path, {"kind", "p"});
    auto p = rd.vec(j, path, "p");
    if (!p) return std::nullopt;
    return rd.guard(path, [&] { return OuterFunction::linear(*p); });
  }
  if (k == "support") {
    rd.allow(j, path, {"kind", "points"});
    auto P = rd.mat(j, path, "points");
    if (!P) return std::nullopt;
    std::vector<Vector> pts;
    for (Index r = 0; r < P->rows(); ++r) pts.push_back(P->row(r).transpose());
    return rd.guard(path, [&] { return OuterFunction::support(pts); });
  }
  if (k == "equality_indicator" || k == "inequality_indicator") {
    rd.allow(j, path, {"kind", "dim", "leading_linear"});
    auto m = dim();
    auto lead = rd.boolean(j, path, "leading_linear", false);
    if (!m || !lead) return std::nullopt;
    if (k == "equality_indicator")
      return rd.guard(path, [&] { return OuterFunction::equality_indicator(static_cast<Index>(*m), *lead); });
    return rd.guard(path, [&] { return OuterFunction::inequality_indicator(static_cast<Index>(*m), *lead); });
  }
  if (k == "aug_lagrangian") {
    rd.allow(j, path, {"kind", "y", "theta"});
    auto y = rd.vec(j, path, "y");
    auto th = rd.number(j, path, "theta");
    if (!y || !th) return std::nullopt;
    return rd.guard(path, [&] { return OuterFunction::augmented_lagrangian(*y, *th); });
  }
  if (k == "quad_penalty" || k == "exact_penalty" || k == "log_barrier") {
    rd.allow(j, path, {"kind", "dim", "theta"});
    auto m = dim();
    auto th = rd.number(j, path, "theta");
    if (!m || !th) return std::nullopt;
    const Index mm = static_cast<Index>(*m);
    if (k == "quad_penalty") return rd.guard(path, [&] { return OuterFunction::quadratic_penalty(mm, *th); });
    if (k == "exact_penalty") return rd.guard(path, [&] { return OuterFunction::exact_penalty(mm, *th); });
    return rd.guard(path, [&] { return OuterFunction::log_barrier(mm, *th); });
  }
  if (k == "homotopy") {
    rd.allow(j, path, {"kind", "base", "lambda"});
    const json* b = rd.field(j, path, "base", true);
    auto lam = rd.number(j, path, "lambda");
    std::optional<OuterFunction> base = b ? build_outer(rd, *b, Reader::sub(path, "base")) : std::nullopt;
    if (!base || !lam) return std::nullopt;
    return rd.guard(path, [&] { return OuterFunction::homotopy(*base, *lam); });
  }
  if (k == "cutting_plane") {
    rd.allow(j, path, {"kind", "dim"});
    auto m = dim();
    if (!m) return std::nullopt;
    return rd.guard(path, [&] { return OuterFunction::cutting_plane(static_cast<Index>(*m)); });
  }
  if (k == "squared_distance") {
    rd.allow(j, path, {"kind", "target", "weights"});
    auto t = rd.vec(j, path, "target");
    std::optional<Vector> w = rd.field(j, path, "weights", false) ? rd.vec(j, path, "weights") : std::nullopt;
    if (!t) return std::nullopt;
    if (!w) w = Vector::Ones(t->size());
    return rd.guard(path, [&] { return OuterFunction::squared_distance(*t, *w); });
  }
  if (k == "direct_sum") {
    rd.allow(j, path, {"kind", "parts"});
    const json* parts = rd.field(j, path, "parts", true);
    if (!parts) return std::nullopt;
    if (!parts->is_array() || parts->empty()) {
      rd.fail(Reader::sub(path, "parts"), "expected a nonempty array");
      return std::nullopt;
    }
    std::vector<OuterFunction> hs;
    bool ok = true;
    for (std::size_t i = 0; i < parts->size(); ++i) {
      auto h = build_outer(rd, (*parts)[i], Reader::at(Reader::sub(path, "parts"), i));
      if (h) hs.push_back(*h);
      else ok = false;
    }
    if (!ok) return std::nullopt;
    return rd.guard(path, [&] { return OuterFunction::direct_sum(hs); });
  }
  rd.fail(Reader::sub(path, "kind"), "unknown outer kind '" + k + "' (known: " + kOuterKinds + ")");
  return std::nullopt;
}

inline std::optional<QuadraticForm> build_quadratic_form(Reader& rd, const json& j, const std::string& path) {
  if (!rd.object(j, path)) return std::nullopt;
  rd.allow(j, path, {"Q", "q", "c"});
  auto q = rd.vec(j, path, "q");
  auto c = rd.number(j, path, "c", 0.0);
  std::optional<Matrix> Q;
  if (rd.field(j, path, "Q", false)) Q = rd.mat(j, path, "Q");
  if (!q || !c) return std::nullopt;
  if (!Q) {
    if (rd.field(j, path, "Q", false)) return std::nullopt;
    Q = Matrix::Zero(q->size(), q->size());
  }
  return rd.guard(path, [&] { return QuadraticForm::make(*Q, *q, *c); });
}

inline std::optional<std::vector<QuadraticForm>> build_rows(Reader& rd, const json& j, const std::string& path,
                                                            const char* key) {
  const json* rows = rd.field(j, path, key, true);
  if (!rows) return std::nullopt;
  const std::string p = Reader::sub(path, key);
  if (!rows->is_array() || rows->empty()) {
    rd.fail(p, "expected a nonempty array of quadratic forms");
    return std::nullopt;
  }
  std::vector<QuadraticForm> out;
  bool ok = true;
  for (std::size_t i = 0; i < rows->size(); ++i) {
    auto f = build_quadratic_form(rd, (*rows)[i], Reader::at(p, i));
    if (f) out.push_back(*f);
    else ok = false;
  }
  if (!ok) return std::nullopt;
  return out;
}

// Layer: {"shape": [rows, cols], "weight": [[...]], "bias": [...]}.
inline std::optional<Network> build_network(Reader& rd, const json& j, const std::string& path) {
  if (!rd.object(j, path)) return std::nullopt;
  rd.allow(j, path, {"layers"});
  const json* layers = rd.field(j, path, "layers", true);
  if (!layers) return std::nullopt;
  const std::string lp = Reader::sub(path, "layers");
  if (!layers->is_array() || layers->empty()) {
    rd.fail(lp, "expected a nonempty array of layers");
    return std::nullopt;
  }
  Network net;
  bool ok = true;
  for (std::size_t k = 0; k < layers->size(); ++k) {
    const json& L = (*layers)[k];
    const std::string p = Reader::at(lp, k);
    if (!rd.object(L, p)) {
      ok = false;
      continue;
    }
    rd.allow(L, p, {"shape", "weight", "bias"});
    const json* shape = rd.field(L, p, "shape", true);
    auto W = rd.mat(L, p, "weight");
    auto b = rd.vec(L, p, "bias");
    if (!shape || !W || !b) {
      ok = false;
      continue;
    }
    if (!shape->is_array() || shape->size() != 2 || !(*shape)[0].is_number_integer() ||
        !(*shape)[1].is_number_integer()) {
      rd.fail(Reader::sub(p, "shape"), "expected [rows, cols]");
      ok = false;
      continue;
    }
    if ((*shape)[0].get<Index>() != W->rows() || (*shape)[1].get<Index>() != W->cols()) {
      rd.fail(Reader::sub(p, "weight"), "shape field says " + shape->dump() + " but weight is " +
                                            std::to_string(W->rows()) + "x" + std::to_string(W->cols()));
      ok = false;
      continue;
    }
    net.layers.push_back({*W, *b});
  }
  if (!ok) return std::nullopt;
  if (!rd.guard(path, [&] {
        net.validate();
        return true;
      }))
    return std::nullopt;
  return net;
}

// Deterministic random network with the given widths [n0, n1, ..., nL].
inline Network random_network(const std::vector<Index>& widths, double scale, CounterRng& rng) {
  Network net;
  for (size_t k = 1; k < widths.size(); ++k) {
    Layer L{Matrix(widths[k], widths[k - 1]), Vector(widths[k])};
    for (Index r = 0; r < L.weight.rows(); ++r) {
      for (Index c = 0; c < L.weight.cols(); ++c) L.weight(r, c) = rng.uniform(-scale, scale);
      L.bias(r) = rng.uniform(-0.5 * scale, 0.5 * scale);
    }
    net.layers.push_back(std::move(L));
  }
  return net;
}

inline std::optional<Activation> build_activation(Reader& rd, const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "relu") return Activation{ActivationKind::relu, 1.0};
    rd.fail(path, "unknown activation '" + j.get<std::string>() + "' (known: relu, softplus)");
    return std::nullopt;
  }
  if (!rd.object(j, path)) return std::nullopt;
  rd.allow(j, path, {"kind", "theta"});
  auto kind = rd.string(j, path, "kind");
  if (!kind) return std::nullopt;
  if (*kind == "relu") return Activation{ActivationKind::relu, 1.0};
  if (*kind == "softplus") {
    auto th = rd.number(j, path, "theta");
    if (!th) return std::nullopt;
    if (!(*th > 0.0) || !std::isfinite(*th)) {
      rd.fail(Reader::sub(path, "theta"), "must be finite and > 0");
      return std::nullopt;
    }
    return Activation{ActivationKind::softplus, *th};
  }
  rd.fail(Reader::sub(path, "kind"), "unknown activation '" + *kind + "' (known: relu, softplus)");
  return std::nullopt;
}

struct BuildContext {
  std::uint64_t seed = 0;
  std::string experiment;
  std::filesystem::path base_dir;
};

inline std::optional<json> read_json_file(Reader& rd, const std::filesystem::path& file, const std::string& path);

inline std::optional<InnerMapping> build_inner(Reader& rd, const json& j, const std::string& path,
                                               const BuildContext& ctx) {
  if (!rd.object(j, path)) return std::nullopt;
  auto kind = rd.string(j, path, "kind");
  if (!kind) return std::nullopt;
  const std::string& k = *kind;
  if (k == "affine") {
    rd.allow(j, path, {"kind", "A", "b"});
    auto A = rd.mat(j, path, "A");
    auto b = rd.vec(j, path, "b");
    if (!A || !b) return std::nullopt;
    return rd.guard(path, [&] { return InnerMapping::affine(*A, *b); });
  }
  if (k == "quadratic") {
    rd.allow(j, path, {"kind", "rows"});
    auto rows = build_rows(rd, j, path, "rows");
    if (!rows) return std::nullopt;
    return rd.guard(path, [&] { return InnerMapping::quadratic_array(*rows); });
  }
  if (k == "min_smooth") {
    rd.allow(j, path, {"kind", "components", "theta"});
    const json* comps = rd.field(j, path, "components", true);
    std::optional<double> theta;
    if (const json* t = rd.field(j, path, "theta", false); t && !t->is_null()) theta = rd.number(j, path, "theta");
    if (!comps) return std::nullopt;
    const std::string cp = Reader::sub(path, "components");
    if (!comps->is_array() || comps->empty()) {
      rd.fail(cp, "expected a nonempty array of piece lists");
      return std::nullopt;
    }
    std::vector<std::vector<QuadraticForm>> all;
    bool ok = true;
    for (std::size_t i = 0; i < comps->size(); ++i) {
      json wrap = {{"pieces", (*comps)[i]}};
      auto rows = build_rows(rd, wrap, Reader::at(cp, i), "pieces");
      if (rows) all.push_back(*rows);
      else ok = false;
    }
    if (!ok) return std::nullopt;
    return rd.guard(path, [&] { return InnerMapping::min_smooth(all, theta); });
  }
  if (k == "sample_average") {
    rd.allow(j, path, {"kind", "base", "perturbation", "distribution", "count"});
    auto base = build_rows(rd, j, path, "base");
    auto pert = build_rows(rd, j, path, "perturbation");
    auto dist = rd.string(j, path, "distribution", std::string("two_point"));
    auto count = rd.integer(j, path, "count", 1);
    std::optional<SampleDistribution> d;
    if (dist) {
      if (*dist == "two_point") d = SampleDistribution::two_point;
      else if (*dist == "uniform") d = SampleDistribution::uniform;
      else rd.fail(Reader::sub(path, "distribution"), "unknown distribution '" + *dist + "' (known: two_point, uniform)");
    }
    if (count && *count < 1) rd.fail(Reader::sub(path, "count"), "must be >= 1");
    if (!base || !pert || !d || !count || *count < 1) return std::nullopt;
    const std::uint64_t key = stream_key(ctx.seed, ctx.experiment, "sample/base");
    return rd.guard(path, [&] {
      return InnerMapping::sample_average(*base, *pert, *d, key, static_cast<std::size_t>(*count));
    });
  }
  if (k == "feed_forward") {
    rd.allow(j, path, {"kind", "activation", "networks", "random", "model"});
    const json* act = rd.field(j, path, "activation", true);
    std::optional<Activation> g = act ? build_activation(rd, *act, Reader::sub(path, "activation")) : std::nullopt;
    std::vector<Network> nets;
    bool ok = true;
    const json* inline_nets = rd.field(j, path, "networks", false);
    const json* random = rd.field(j, path, "random", false);
    const json* model = rd.field(j, path, "model", false);
    const int sources = (inline_nets != nullptr) + (random != nullptr) + (model != nullptr);
    if (sources != 1) {
      rd.fail(path, "give exactly one of networks, random, model");
      return std::nullopt;
    }
    std::optional<json> loaded;
    std::string np = Reader::sub(path, "networks");
    if (model) {
      auto file = rd.string(j, path, "model");
      if (!file) return std::nullopt;
      loaded = read_json_file(rd, ctx.base_dir / *file, Reader::sub(path, "model"));
      if (!loaded) return std::nullopt;
      if (!loaded->is_object() || !loaded->contains("networks")) {
        rd.fail(Reader::sub(path, "model"), "model file must hold an object with a networks array");
        return std::nullopt;
      }
      inline_nets = &(*loaded)["networks"];
      np = *file + ":networks";
    }
    if (inline_nets) {
      if (!inline_nets->is_array() || inline_nets->empty()) {
        rd.fail(np, "expected a nonempty array of networks");
        return std::nullopt;
      }
      for (std::size_t i = 0; i < inline_nets->size(); ++i) {
        auto n = build_network(rd, (*inline_nets)[i], Reader::at(np, i));
        if (n) nets.push_back(*n);
        else ok = false;
      }
    } else {
      const std::string rp = Reader::sub(path, "random");
      if (!rd.object(*random, rp)) return std::nullopt;
      rd.allow(*random, rp, {"widths", "count", "scale"});
      auto w = rd.vec(*random, rp, "widths");
      auto count = rd.integer(*random, rp, "count", 1);
      auto scale = rd.number(*random, rp, "scale", 1.0);
      if (!w || !count || !scale) return std::nullopt;
      std::vector<Index> widths;
      for (Index i = 0; i < w->size(); ++i) {
        if ((*w)(i) < 1 || (*w)(i) != std::floor((*w)(i))) {
          rd.fail(Reader::sub(rp, "widths"), "widths must be positive integers");
          return std::nullopt;
        }
        widths.push_back(static_cast<Index>((*w)(i)));
      }
      if (widths.size() < 2 || *count < 1) {
        rd.fail(rp, "need at least two widths and count >= 1");
        return std::nullopt;
      }
      CounterRng rng = make_stream(ctx.seed, ctx.experiment, "network/weights");
      for (std::int64_t c = 0; c < *count; ++c) nets.push_back(random_network(widths, *scale, rng));
    }
    if (!ok || !g) return std::nullopt;
    return rd.guard(path, [&] { return InnerMapping::feed_forward(nets, *g); });
  }
  rd.fail(Reader::sub(path, "kind"), "unknown inner kind '" + k + "' (known: " + kInnerKinds + ")");
  return std::nullopt;
}

// Byte offset to "line L, column C".
inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline std::optional<json> parse_json_text(Reader& rd, const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    rd.fail(where, "JSON parse error at " + line_column(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + msg);
  }
  return std::nullopt;
}

inline std::optional<json> read_json_file(Reader& rd, const std::filesystem::path& file, const std::string& path) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    rd.fail(path, "cannot open '" + file.string() + "'");
    return std::nullopt;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(rd, ss.str(), file.string());
}

// Family kinds and the actual-problem shape each one requires.
enum class FamilyKind {
  identity,
  softplus_goal,
  aug_lagrangian,
  quad_penalty,
  exact_penalty,
  log_barrier,
  homotopy,
  distributionally_robust,
  min_smoothing,
  sample_average,
  network_softplus
};

inline const std::map<std::string, FamilyKind>& family_kinds() {
  static const std::map<std::string, FamilyKind> k{{"identity", FamilyKind::identity},
                                                   {"softplus_goal", FamilyKind::softplus_goal},
                                                   {"aug_lagrangian", FamilyKind::aug_lagrangian},
                                                   {"quad_penalty", FamilyKind::quad_penalty},
                                                   {"exact_penalty", FamilyKind::exact_penalty},
                                                   {"log_barrier", FamilyKind::log_barrier},
                                                   {"homotopy", FamilyKind::homotopy},
                                                   {"distributionally_robust", FamilyKind::distributionally_robust},
                                                   {"min_smoothing", FamilyKind::min_smoothing},
                                                   {"sample_average", FamilyKind::sample_average},
                                                   {"network_softplus", FamilyKind::network_softplus}};
  return k;
}

// Name of the schedule driving each family ("" for none).
inline const char* parameter_key(FamilyKind k) {
  switch (k) {
    case FamilyKind::identity:
      return "";
    case FamilyKind::homotopy:
      return "lambda";
    case FamilyKind::distributionally_robust:
      return "alpha";
    case FamilyKind::sample_average:
      return "samples";
    default:
      return "theta";
  }
}

struct FamilySpec {
  std::string name;
  FamilyKind kind = FamilyKind::identity;
  std::size_t length = 1;
  std::vector<double> parameter;  // theta, lambda, alpha or sample size per nu
  std::vector<double> delta;
  Vector y0;                      // augmented Lagrangian multipliers at nu = 1
  bool multiplier_update = false;
};

struct DiagnosticsSpec {
  double rho = 1.0;
  std::size_t samples = 2000;
  GraphSampleOptions graph;
};

// Named check with free-form parameters; the check name fixes the criterion.
struct CheckSpec {
  std::string check;
  int criterion = 0;
  json params;
};

struct ExpectationSpec {
  std::string name;
  std::string kind;
  json params;
};

inline const std::map<std::string, int>& check_criteria() {
  static const std::map<std::string, int> m{{"softplus_uniform_bound", 1},
                                            {"min_smoothing_sandwich", 2},
                                            {"augmented_lagrangian_excess", 3},
                                            {"exact_penalty_exactness", 4},
                                            {"homotopy_excess", 5},
                                            {"distributionally_robust_rate", 6},
                                            {"epca_quadratic_demo", 7},
                                            {"epca_softplus_goal_stationarity", 8},
                                            {"convex_oracle_equivalence", 9},
                                            {"epi_consequence_grid", 10},
                                            {"epi_consequence_barrier", 10},
                                            {"network_lift_smoothing", 11},
                                            {"property_suites", 12}};
  return m;
}

inline const std::set<std::string>& expectation_kinds() {
  static const std::set<std::string> k{"rate_slope", "transfer", "eta0_certified", "final_point"};
  return k;
}

struct ExperimentConfig {
  std::string name;
  std::string description;
  std::uint64_t seed = 0;
  std::filesystem::path source;
  json raw;
  std::optional<CompositeProblem> problem;   // the actual problem
  std::optional<InnerMapping> generator;     // sample-average generator when F is its expectation
  FamilySpec family;
  std::optional<EpcaConfig> epca;
  DiagnosticsSpec diagnostics;
  std::vector<CheckSpec> checks;
  std::vector<ExpectationSpec> expectations;
  std::string output;

  const CompositeProblem& actual() const { return *problem; }
};

namespace detail {

template <class T, class V>
const T* get_if_variant(const V& v) {
  return std::get_if<T>(&v.variant());
}

inline void check_family_shape(Reader& rd, const ExperimentConfig& c) {
  const std::string p = "family.kind";
  const CompositeProblem& P = *c.problem;
  const auto& hv = P.h;
  const auto& Fv = c.generator ? *c.generator : P.F;
  auto lead_eq = [&]() {
    const auto* e = get_if_variant<OuterFunction::EqualityIndicator>(hv);
    return e && e->leading_linear && e->dim >= 2;
  };
  auto lead_ineq = [&]() {
    const auto* e = get_if_variant<OuterFunction::InequalityIndicator>(hv);
    return e && e->leading_linear && e->dim >= 2;
  };
  switch (c.family.kind) {
    case FamilyKind::identity:
      break;
    case FamilyKind::softplus_goal:
      if (!get_if_variant<OuterFunction::Goal>(hv)) rd.fail(p, "softplus_goal needs problem.outer of kind goal");
      break;
    case FamilyKind::aug_lagrangian:
    case FamilyKind::exact_penalty:
      if (!lead_eq())
        rd.fail(p, c.family.name + " needs problem.outer equality_indicator with leading_linear and dim >= 2");
      break;
    case FamilyKind::quad_penalty:
    case FamilyKind::log_barrier:
      if (!lead_ineq())
        rd.fail(p, c.family.name + " needs problem.outer inequality_indicator with leading_linear and dim >= 2");
      break;
    case FamilyKind::homotopy: {
      const auto* hm = get_if_variant<OuterFunction::Homotopy>(hv);
      if (!hm || hm->lambda != 0.0) rd.fail(p, "homotopy needs problem.outer of kind homotopy with lambda 0");
      break;
    }
    case FamilyKind::distributionally_robust:
      if (!get_if_variant<OuterFunction::Support>(hv)) rd.fail(p, "distributionally_robust needs problem.outer support");
      break;
    case FamilyKind::min_smoothing: {
      const auto* ms = get_if_variant<InnerMapping::MinSmooth>(Fv);
      if (!ms || ms->theta) rd.fail(p, "min_smoothing needs problem.inner min_smooth without theta");
      break;
    }
    case FamilyKind::sample_average:
      if (!get_if_variant<InnerMapping::SampleAverage>(Fv)) rd.fail(p, "sample_average needs problem.inner sample_average");
      break;
    case FamilyKind::network_softplus: {
      const auto* ff = get_if_variant<InnerMapping::FeedForward>(Fv);
      if (!ff || ff->activation.kind != ActivationKind::relu)
        rd.fail(p, "network_softplus needs problem.inner feed_forward with relu activation");
      break;
    }
  }
  if (c.family.kind == FamilyKind::aug_lagrangian && c.family.y0.size() != P.m() - 1)
    rd.fail("family.y0", "expected " + std::to_string(P.m() - 1) + " multipliers, got " +
                             std::to_string(c.family.y0.size()));
}

inline void check_monotone(Reader& rd, const std::string& path, const std::vector<double>& v, bool increasing,
                           bool positive) {
  for (size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k]) || (positive && !(v[k] > 0.0))) {
      rd.fail(Reader::at(path, k), positive ? "must be finite and > 0" : "must be finite");
      return;
    }
    if (k > 0 && (increasing ? v[k] < v[k - 1] : v[k] > v[k - 1])) {
      rd.fail(Reader::at(path, k), increasing ? "schedule must be nondecreasing" : "schedule must be nonincreasing");
      return;
    }
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& source = {}) {
  Reader rd;
  ExperimentConfig c;
  c.source = source;
  c.raw = j;
  if (!rd.object(j, "")) throw ConfigError(rd.errors);
  rd.allow(j, "", {"name", "description", "seed", "problem", "family", "epca", "diagnostics", "assertions",
                   "expectations", "output"});
  c.name = rd.string(j, "", "name").value_or("");
  if (rd.field(j, "", "name", false) && c.name.empty()) rd.fail("name", "must be nonempty");
  c.description = rd.string(j, "", "description", std::string()).value_or("");
  if (const json* s = rd.field(j, "", "seed", false)) {
    if (s->is_number_unsigned() || (s->is_number_integer() && s->get<std::int64_t>() >= 0))
      c.seed = s->get<std::uint64_t>();
    else
      rd.fail("seed", "expected a nonnegative 64-bit integer");
  }
  c.output = rd.string(j, "", "output", c.name).value_or(c.name);
  BuildContext ctx{c.seed, c.name, source.empty() ? std::filesystem::path(".") : source.parent_path()};

  // problem
  std::optional<ClosedSet> X;
  std::optional<OuterFunction> h;
  std::optional<InnerMapping> F;
  if (const json* p = rd.field(j, "", "problem", true); p && rd.object(*p, "problem")) {
    rd.allow(*p, "problem", {"set", "outer", "inner"});
    if (const json* s = rd.field(*p, "problem", "set", true)) X = build_set(rd, *s, "problem.set");
    if (const json* o = rd.field(*p, "problem", "outer", true)) h = build_outer(rd, *o, "problem.outer");
    if (const json* i = rd.field(*p, "problem", "inner", true)) F = build_inner(rd, *i, "problem.inner", ctx);
  }
  if (X && h && F) {
    InnerMapping actualF = *F;
    if (std::holds_alternative<InnerMapping::SampleAverage>(F->variant())) {
      c.generator = *F;
      actualF = F->expectation();
    }
    try {
      c.problem.emplace(*X, *h, actualF);
    } catch (const InputError& e) {
      rd.fail("problem", e.what());
    }
  }

  // family
  if (const json* f = rd.field(j, "", "family", true); f && rd.object(*f, "family")) {
    rd.allow(*f, "family", {"kind", "length", "theta", "lambda", "alpha", "samples", "delta", "y0",
                            "multiplier_update"});
    auto kind = rd.string(*f, "family", "kind");
    auto len = rd.integer(*f, "family", "length", 1);
    bool kind_ok = false;
    if (kind) {
      auto it = family_kinds().find(*kind);
      if (it == family_kinds().end()) {
        std::string known;
        for (const auto& [k, v] : family_kinds()) known += (known.empty() ? "" : ", ") + k;
        rd.fail("family.kind", "unknown family '" + *kind + "' (known: " + known + ")");
      } else {
        c.family.name = *kind;
        c.family.kind = it->second;
        kind_ok = true;
      }
    }
    if (len && *len < 1) rd.fail("family.length", "must be >= 1");
    if (kind_ok && len && *len >= 1) {
      c.family.length = static_cast<std::size_t>(*len);
      const std::string pk = parameter_key(c.family.kind);
      for (const char* key : {"theta", "lambda", "alpha", "samples"})
        if (pk != key && rd.field(*f, "family", key, false))
          rd.fail(Reader::sub("family", key), "not used by family '" + c.family.name + "'");
      if (!pk.empty()) {
        if (const json* s = rd.field(*f, "family", pk.c_str(), true)) {
          auto v = read_schedule(rd, *s, "family." + pk, c.family.length);
          if (v) {
            c.family.parameter = *v;
            const std::string sp = "family." + pk;
            if (c.family.kind == FamilyKind::homotopy) {
              detail::check_monotone(rd, sp, *v, false, false);
              for (double x : *v)
                if (!(x >= 0.0 && x <= 1.0)) {
                  rd.fail(sp, "lambda must lie in [0, 1]");
                  break;
                }
            } else if (c.family.kind == FamilyKind::distributionally_robust) {
              detail::check_monotone(rd, sp, *v, false, true);
            } else {
              detail::check_monotone(rd, sp, *v, true, true);
            }
            if (c.family.kind == FamilyKind::sample_average)
              for (double x : *v)
                if (x != std::floor(x)) {
                  rd.fail(sp, "sample sizes must be integers");
                  break;
                }
          }
        }
      } else {
        c.family.parameter.assign(c.family.length, std::nan(""));
      }
      if (const json* d = rd.field(*f, "family", "delta", false)) {
        auto v = read_schedule(rd, *d, "family.delta", c.family.length);
        if (v) {
          c.family.delta = *v;
          detail::check_monotone(rd, "family.delta", *v, false, true);
        }
      }
      c.family.multiplier_update = rd.boolean(*f, "family", "multiplier_update", false).value_or(false);
      if (rd.field(*f, "family", "y0", false)) {
        if (auto y = rd.vec(*f, "family", "y0")) c.family.y0 = *y;
      } else if (c.problem) {
        c.family.y0 = Vector::Zero(std::max<Index>(0, c.problem->m() - 1));
      }
      if (c.problem) detail::check_family_shape(rd, c);
    }
  }

  // epca
  if (const json* e = rd.field(j, "", "epca", false); e && rd.object(*e, "epca")) {
    rd.allow(*e, "epca", {"x0", "tau", "sigma", "lambda_bar", "lambda0", "inner_iteration_cap",
                          "subproblem_tolerance_factor", "subproblem_iteration_cap", "level_probe"});
    EpcaConfig ec;
    auto x0 = rd.vec(*e, "epca", "x0");
    ec.tau = rd.number(*e, "epca", "tau", ec.tau).value_or(ec.tau);
    ec.sigma = rd.number(*e, "epca", "sigma", ec.sigma).value_or(ec.sigma);
    ec.lambda_bar = rd.number(*e, "epca", "lambda_bar", ec.lambda_bar).value_or(ec.lambda_bar);
    ec.lambda0 = rd.number(*e, "epca", "lambda0", ec.lambda0).value_or(ec.lambda0);
    ec.subproblem_tolerance_factor =
        rd.number(*e, "epca", "subproblem_tolerance_factor", ec.subproblem_tolerance_factor).value_or(0.1);
    auto cap = rd.integer(*e, "epca", "inner_iteration_cap", static_cast<std::int64_t>(ec.inner_iteration_cap));
    auto scap = rd.integer(*e, "epca", "subproblem_iteration_cap",
                           static_cast<std::int64_t>(ec.subproblem_iteration_cap));
    ec.level_probe = rd.boolean(*e, "epca", "level_probe", true).value_or(true);
    if (!(ec.sigma > 0.0 && ec.sigma < 1.0)) rd.fail("epca.sigma", "σ ∈ (0,1) required, got " + json(ec.sigma).dump());
    if (!(ec.tau > 1.0) || !std::isfinite(ec.tau)) rd.fail("epca.tau", "τ ∈ (1,∞) required");
    if (!(ec.lambda_bar > 0.0) || !std::isfinite(ec.lambda_bar)) rd.fail("epca.lambda_bar", "must be finite and > 0");
    if (!(ec.lambda0 > 0.0 && ec.lambda0 <= ec.lambda_bar)) rd.fail("epca.lambda0", "must lie in (0, lambda_bar]");
    if (!(ec.subproblem_tolerance_factor > 0.0 && ec.subproblem_tolerance_factor < 1.0))
      rd.fail("epca.subproblem_tolerance_factor", "must lie in (0, 1)");
    if (cap && *cap < 1) rd.fail("epca.inner_iteration_cap", "must be >= 1");
    if (scap && *scap < 1) rd.fail("epca.subproblem_iteration_cap", "must be >= 1");
    if (cap && *cap >= 1) ec.inner_iteration_cap = static_cast<std::size_t>(*cap);
    if (scap && *scap >= 1) ec.subproblem_iteration_cap = static_cast<std::size_t>(*scap);
    if (x0) {
      ec.x0 = *x0;
      if (c.problem && x0->size() != c.problem->n())
        rd.fail("epca.x0", "dimension mismatch: expected " + std::to_string(c.problem->n()) + " entries, got " +
                               std::to_string(x0->size()));
    }
    if (c.family.delta.empty() && rd.field(j, "", "family", false))
      rd.fail("family.delta", "required when epca is present");
    if (c.family.kind == FamilyKind::log_barrier)
      rd.fail("epca", "the log_barrier family is not real-valued on all of R^m, so EPCA does not apply");
    ec.delta = c.family.delta;
    c.epca = ec;
  }

  // diagnostics
  if (const json* d = rd.field(j, "", "diagnostics", false); d && rd.object(*d, "diagnostics")) {
    rd.allow(*d, "diagnostics", {"rho", "samples", "per_coordinate", "product_points"});
    c.diagnostics.rho = rd.number(*d, "diagnostics", "rho", 1.0).value_or(1.0);
    if (!(c.diagnostics.rho > 0.0) || !std::isfinite(c.diagnostics.rho))
      rd.fail("diagnostics.rho", "must be finite and > 0");
    auto s = rd.integer(*d, "diagnostics", "samples", 2000);
    auto pc = rd.integer(*d, "diagnostics", "per_coordinate", 2000);
    auto pp = rd.integer(*d, "diagnostics", "product_points", 4000);
    for (auto [v, key] : {std::pair{s, "samples"}, std::pair{pc, "per_coordinate"}, std::pair{pp, "product_points"}})
      if (v && *v < 1) rd.fail(Reader::sub("diagnostics", key), "must be >= 1");
    if (s && *s >= 1) c.diagnostics.samples = static_cast<std::size_t>(*s);
    if (pc && *pc >= 1) c.diagnostics.graph.per_coordinate = static_cast<std::size_t>(*pc);
    if (pp && *pp >= 1) c.diagnostics.graph.product_points = static_cast<std::size_t>(*pp);
  }
  c.diagnostics.graph.seed = stream_key(c.seed, c.name, "varlab/graph");

  // assertions
  if (const json* a = rd.field(j, "", "assertions", false)) {
    if (!a->is_array()) {
      rd.fail("assertions", "expected an array");
    } else {
      std::set<std::string> seen;
      for (std::size_t i = 0; i < a->size(); ++i) {
        const std::string p = Reader::at("assertions", i);
        const json& e = (*a)[i];
        if (!rd.object(e, p)) continue;
        auto chk = rd.string(e, p, "check");
        if (!chk) continue;
        auto it = check_criteria().find(*chk);
        if (it == check_criteria().end()) {
          rd.fail(Reader::sub(p, "check"), "unknown check '" + *chk + "'");
          continue;
        }
        if (!seen.insert(*chk).second) rd.fail(Reader::sub(p, "check"), "duplicate check '" + *chk + "'");
        if (auto cr = rd.integer(e, p, "criterion", it->second); cr && *cr != it->second)
          rd.fail(Reader::sub(p, "criterion"),
                  "check '" + *chk + "' belongs to criterion " + std::to_string(it->second));
        const json* params = rd.field(e, p, "params", false);
        rd.allow(e, p, {"check", "criterion", "params"});
        c.checks.push_back({*chk, it->second, params ? *params : json::object()});
      }
    }
  }
  if (const json* a = rd.field(j, "", "expectations", false)) {
    if (!a->is_array()) {
      rd.fail("expectations", "expected an array");
    } else {
      std::set<std::string> seen;
      for (std::size_t i = 0; i < a->size(); ++i) {
        const std::string p = Reader::at("expectations", i);
        const json& e = (*a)[i];
        if (!rd.object(e, p)) continue;
        auto kind = rd.string(e, p, "kind");
        auto name = rd.string(e, p, "name", kind.value_or(""));
        if (!kind) continue;
        if (!expectation_kinds().count(*kind)) {
          rd.fail(Reader::sub(p, "kind"), "unknown expectation kind '" + *kind + "'");
          continue;
        }
        if (!seen.insert(*name).second) rd.fail(Reader::sub(p, "name"), "duplicate expectation name '" + *name + "'");
        json params = e;
        params.erase("kind");
        params.erase("name");
        c.expectations.push_back({*name, *kind, params});
      }
    }
  }
  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return c;
}

// pre: file exists. Throws ConfigError listing every problem found.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  Reader rd;
  auto j = read_json_file(rd, path, "config");
  if (!j) throw ConfigError(rd.errors);
  return parse_config(*j, path);
}

}  // namespace capx::harness
