#include "vflow/spec_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

[[noreturn]] void fail(std::string_view what, std::string_view why) {
  throw InputError(std::string(what) + ": " + std::string(why));
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_plain(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

std::vector<Json> json_list(const Json& j, std::string_view what) {
  if (j.is_array()) return std::vector<Json>(j.begin(), j.end());
  if (j.is_object()) {
    std::vector<std::pair<long, Json>> items;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key.empty() || !std::all_of(key.begin(), key.end(), [](unsigned char c) { return std::isdigit(c); }))
        fail(what, "expected a list, found key '" + key + "'");
      items.emplace_back(std::stol(key), it.value());
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Json> out;
    for (auto& [k, v] : items) out.push_back(std::move(v));
    return out;
  }
  fail(what, "expected a list");
}

namespace {

const Json& require(const Json& j, const char* key, std::string_view what) {
  if (!j.is_object() || !j.contains(key)) fail(what, std::string("missing '") + key + "'");
  return j.at(key);
}

std::string kind_of(const Json& j, std::string_view what) {
  const Json& k = require(j, "kind", what);
  if (!k.is_string()) fail(what, "'kind' must be a string");
  return k.get<std::string>();
}

bool bool_or(const Json& j, const char* key, bool fallback, std::string_view what) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "off" || s == "no") return false;
  }
  if (v.is_number()) return v.get<double>() != 0.0;
  fail(what, std::string("'") + key + "' must be a boolean");
}

double number_or(const Json& j, const char* key, double fallback, std::string_view what) {
  if (!j.contains(key)) return fallback;
  return number_from_json(j.at(key), std::string(what) + "." + key);
}

Matrix matrix_from_json(const Json& j, int dim, std::string_view what) {
  if (j.is_string() && j.get<std::string>() == "identity") return Matrix::Identity(dim, dim);
  if (j.is_number() && dim == 1) return Matrix::Constant(1, 1, j.get<double>());
  const auto rows = json_list(j, what);
  if (static_cast<int>(rows.size()) != dim) fail(what, "matrix must have " + std::to_string(dim) + " rows");
  Matrix m(dim, dim);
  for (int r = 0; r < dim; ++r) m.row(r) = vector_from_json(rows[static_cast<std::size_t>(r)], dim, what).transpose();
  return m;
}

Json matrix_to_json(const Matrix& m) {
  if (m.rows() == m.cols() && m.isIdentity(0.0)) return "identity";
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
  return rows;
}

}  // namespace

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i]))
      out.push_back(v[i]);
    else
      out.push_back(std::isnan(v[i]) ? "nan" : (v[i] > 0 ? "inf" : "-inf"));
  }
  return out;
}

Json to_json(const ConvexSet& set) {
  return std::visit(
      Overloaded{[](const Ball& b) { return Json{{"kind", "ball"}, {"center", to_json(b.center)}, {"radius", b.radius}}; },
                 [](const Halfspace& h) {
                   return Json{{"kind", "halfspace"}, {"normal", to_json(h.normal)}, {"offset", h.offset}};
                 },
                 [](const AffineSubspace& a) {
                   Json basis = Json::array();
                   for (Eigen::Index c = 0; c < a.basis.cols(); ++c) basis.push_back(to_json(Vector(a.basis.col(c))));
                   return Json{{"kind", "affine"}, {"anchor", to_json(a.anchor)}, {"basis", basis}};
                 },
                 [](const Box& b) { return Json{{"kind", "box"}, {"lo", to_json(b.lo)}, {"hi", to_json(b.hi)}}; },
                 [](const WholeSpace&) { return Json{{"kind", "whole"}}; },
                 [](const Intersection& in) {
                   Json parts = Json::array();
                   for (const auto& p : *in.parts) parts.push_back(to_json(p));
                   return Json{{"kind", "intersection"}, {"parts", parts}};
                 }},
      set.shape());
}

Json to_json(const Operator& op) {
  Json out = std::visit(
      Overloaded{[](const Rotation& r) { return Json{{"kind", "rotation"}, {"angle", r.angle}, {"plane", {r.i, r.j}}}; },
                 [](const Negation&) { return Json{{"kind", "negation"}}; },
                 [](const Projection& p) { return Json{{"kind", "projection"}, {"set", to_json(p.set)}}; },
                 [](const Reflection& p) { return Json{{"kind", "reflection"}, {"set", to_json(p.set)}}; },
                 [](const Averaged& a) { return Json{{"kind", "averaged"}, {"lambda", a.lambda}, {"inner", to_json(*a.inner)}}; },
                 [](const Composition& c) {
                   Json parts = Json::array();
                   for (const auto& p : *c.parts) parts.push_back(to_json(p));
                   return Json{{"kind", "composition"}, {"parts", parts}};
                 }},
      op.shape());
  out["fix_set"] = op.fix_set() ? to_json(*op.fix_set()) : Json(nullptr);
  return out;
}

Json to_json(const Contraction& f) {
  return std::visit(Overloaded{[](const ConstantMap& c) { return Json{{"kind", "constant"}, {"value", to_json(c.value)}}; },
                               [](const AffineMap& a) {
                                 return Json{{"kind", "affine"},
                                             {"alpha", a.alpha},
                                             {"linear", matrix_to_json(a.linear)},
                                             {"offset", to_json(a.offset)}};
                               }},
                    f.shape());
}

Json to_json(const Problem& p) {
  return Json{{"dim", p.dim()},
              {"set", to_json(p.domain)},
              {"operator", to_json(p.map)},
              {"contraction", to_json(p.viscosity)}};
}

Json to_json(const ThetaSchedule& s) {
  Json out = std::visit(
      Overloaded{[](const PowerSchedule& p) { return Json{{"kind", "power"}, {"K", p.K}, {"nu", p.nu}}; },
                 [](const ConstantSchedule& c) { return Json{{"kind", "constant"}, {"c", c.c}}; },
                 [](const TableSchedule& t) { return Json{{"kind", "table"}, {"times", t.times}, {"values", t.values}}; }},
      s.shape());
  out["clamp"] = s.clamp();
  if (auto tc = s.clamp_end()) out["clamp_interval"] = {0.0, *tc};
  return out;
}

Json to_json(const SolverConfig& cfg) {
  Json out{{"method", std::string(method_name(cfg.method))},
           {"project", cfg.project_each_step},
           {"t_end", cfg.t_end},
           {"record_count", cfg.record_count},
           {"record_stride", cfg.record_stride}};
  if (cfg.method == Method::rk45) {
    out["abs_tol"] = cfg.abs_tol;
    out["rel_tol"] = cfg.rel_tol;
    out["max_steps"] = cfg.max_steps;
  } else {
    out["step"] = cfg.step;
  }
  return out;
}

Json to_json(const Perturbation& h) {
  if (h.kind == Perturbation::Kind::zero) return Json{{"kind", "zero"}};
  return Json{{"kind", "power_decay"},
              {"c", h.c},
              {"p", h.p},
              {"direction", to_json(h.direction)},
              {"claim", std::string(class_name(h.claim))}};
}

double number_from_json(const Json& j, std::string_view what) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) fail(what, "expected a number");
  std::string s = trim(j.get<std::string>());
  double v = 0.0;
  if (parse_plain(s, v)) return v;

  // [-][a*]pi[/b]
  double sign = 1.0;
  if (!s.empty() && s[0] == '-') {
    sign = -1.0;
    s = trim(s.substr(1));
  }
  const auto pi_at = s.find("pi");
  if (pi_at == std::string::npos) fail(what, "cannot parse '" + j.get<std::string>() + "' as a number");
  double scale = 1.0;
  if (pi_at > 0) {
    std::string head = trim(s.substr(0, pi_at));
    if (head.empty() || head.back() != '*' || !parse_plain(trim(head.substr(0, head.size() - 1)), scale))
      fail(what, "cannot parse '" + j.get<std::string>() + "'");
  }
  double divisor = 1.0;
  std::string tail = trim(s.substr(pi_at + 2));
  if (!tail.empty()) {
    if (tail[0] != '/' || !parse_plain(trim(tail.substr(1)), divisor) || divisor == 0.0)
      fail(what, "cannot parse '" + j.get<std::string>() + "'");
  }
  return sign * scale * std::numbers::pi / divisor;
}

namespace {

Vector components(const Json& j, int dim, std::string_view what) {
  if (j.is_number() || j.is_string()) {
    if (dim != 1) fail(what, "expected " + std::to_string(dim) + " components, got 1");
    return Vector::Constant(1, number_from_json(j, what));
  }
  const auto items = json_list(j, what);
  if (static_cast<int>(items.size()) != dim)
    fail(what, "expected " + std::to_string(dim) + " components, got " + std::to_string(items.size()));
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = number_from_json(items[static_cast<std::size_t>(i)], what);
  return v;
}

// box sides may be open
Vector bound_from_json(const Json& j, int dim, std::string_view what) {
  Vector v = components(j, dim, what);
  if (v.hasNaN()) fail(what, "nan component");
  return v;
}

}  // namespace

Vector vector_from_json(const Json& j, int dim, std::string_view what) {
  Vector v = components(j, dim, what);
  if (!v.allFinite()) fail(what, "non-finite component");
  return v;
}

ConvexSet set_from_json(const Json& j, int dim) {
  const std::string kind = kind_of(j, "set");
  if (kind == "ball") {
    const Vector c = j.contains("center") ? vector_from_json(j.at("center"), dim, "set.center") : Vector::Zero(dim);
    return ConvexSet::ball(c, number_from_json(require(j, "radius", "set"), "set.radius"));
  }
  if (kind == "halfspace") {
    return ConvexSet::halfspace(vector_from_json(require(j, "normal", "set"), dim, "set.normal"),
                                number_from_json(require(j, "offset", "set"), "set.offset"));
  }
  if (kind == "affine" || kind == "affine_subspace") {
    const Vector anchor = j.contains("anchor") ? vector_from_json(j.at("anchor"), dim, "set.anchor") : Vector::Zero(dim);
    std::vector<Json> cols;
    if (j.contains("basis") && !j.at("basis").is_null()) {
      const Json& b = j.at("basis");
      // a flat list of numbers is a single basis vector
      const bool single = b.is_array() && !b.empty() && !b.front().is_array() && !b.front().is_object();
      cols = single ? std::vector<Json>{b} : json_list(b, "set.basis");
    }
    Matrix basis(dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) basis.col(static_cast<Eigen::Index>(c)) = vector_from_json(cols[c], dim, "set.basis");
    return ConvexSet::affine(basis, anchor);
  }
  if (kind == "point") return ConvexSet::point(vector_from_json(require(j, "at", "set"), dim, "set.at"));
  if (kind == "box") {
    return ConvexSet::box(bound_from_json(require(j, "lo", "set"), dim, "set.lo"),
                          bound_from_json(require(j, "hi", "set"), dim, "set.hi"));
  }
  if (kind == "whole" || kind == "whole_space") return ConvexSet::whole(dim);
  if (kind == "intersection") {
    std::vector<ConvexSet> parts;
    for (const auto& p : json_list(require(j, "parts", "set"), "set.parts")) parts.push_back(set_from_json(p, dim));
    return ConvexSet::intersection(std::move(parts));
  }
  throw UnsupportedError("set: unsupported kind '" + kind + "'");
}

Operator operator_from_json(const Json& j, int dim) {
  const std::string kind = kind_of(j, "operator");
  if (kind == "rotation") {
    int i = 0, k = 1;
    if (j.contains("plane")) {
      const Vector plane = vector_from_json(j.at("plane"), 2, "operator.plane");
      i = static_cast<int>(plane[0]);
      k = static_cast<int>(plane[1]);
    }
    return Operator::rotation(dim, number_from_json(require(j, "angle", "operator"), "operator.angle"), i, k);
  }
  if (kind == "negation") return Operator::negation(dim);
  if (kind == "identity") return Operator::identity(dim);
  if (kind == "projection") return Operator::projection(set_from_json(require(j, "set", "operator"), dim));
  if (kind == "reflection") return Operator::reflection(set_from_json(require(j, "set", "operator"), dim));
  if (kind == "averaged") {
    return Operator::averaged(number_from_json(require(j, "lambda", "operator"), "operator.lambda"),
                              operator_from_json(require(j, "inner", "operator"), dim));
  }
  if (kind == "composition") {
    std::vector<Operator> parts;
    for (const auto& p : json_list(require(j, "parts", "operator"), "operator.parts")) parts.push_back(operator_from_json(p, dim));
    return Operator::composition(std::move(parts));
  }
  throw UnsupportedError("operator: unsupported kind '" + kind + "'");
}

Contraction contraction_from_json(const Json& j, int dim) {
  const std::string kind = kind_of(j, "contraction");
  if (kind == "constant") {
    return Contraction::constant(j.contains("value") ? vector_from_json(j.at("value"), dim, "contraction.value")
                                                     : Vector::Zero(dim));
  }
  if (kind == "zero") return Contraction::constant(Vector::Zero(dim));
  if (kind == "affine") {
    const Matrix linear = j.contains("linear") ? matrix_from_json(j.at("linear"), dim, "contraction.linear")
                                               : Matrix::Identity(dim, dim);
    const Vector offset = j.contains("offset") ? vector_from_json(j.at("offset"), dim, "contraction.offset")
                                               : Vector::Zero(dim);
    return Contraction::affine(number_from_json(require(j, "alpha", "contraction"), "contraction.alpha"), linear, offset);
  }
  throw UnsupportedError("contraction: unsupported kind '" + kind + "'");
}

Problem problem_from_json(const Json& j) {
  const double d = number_from_json(require(j, "dim", "problem"), "dim");
  if (!(d >= 1.0) || d != std::floor(d)) fail("dim", "must be a positive integer");
  const int dim = static_cast<int>(d);
  ConvexSet domain = j.contains("set") ? set_from_json(j.at("set"), dim) : ConvexSet::whole(dim);
  Operator map = operator_from_json(require(j, "operator", "problem"), dim);
  Contraction f = j.contains("contraction") ? contraction_from_json(j.at("contraction"), dim)
                                            : Contraction::constant(Vector::Zero(dim));
  return Problem::make(std::move(domain), std::move(map), std::move(f));
}

ThetaSchedule schedule_from_json(const Json& j) {
  const std::string kind = kind_of(j, "schedule");
  const bool clamp = bool_or(j, "clamp", true, "schedule");
  if (kind == "power") {
    return ThetaSchedule::power(number_from_json(require(j, "K", "schedule"), "schedule.K"),
                                number_from_json(require(j, "nu", "schedule"), "schedule.nu"), clamp);
  }
  if (kind == "constant") return ThetaSchedule::constant(number_from_json(require(j, "c", "schedule"), "schedule.c"));
  if (kind == "table") {
    std::vector<double> times, values;
    for (const auto& t : json_list(require(j, "times", "schedule"), "schedule.times")) times.push_back(number_from_json(t, "schedule.times"));
    for (const auto& v : json_list(require(j, "values", "schedule"), "schedule.values")) values.push_back(number_from_json(v, "schedule.values"));
    return ThetaSchedule::table(std::move(times), std::move(values), clamp);
  }
  throw UnsupportedError("schedule: unsupported kind '" + kind + "'");
}

SolverConfig solver_from_json(const Json& j) {
  SolverConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) fail("solver", "expected a section");
  if (j.contains("method")) {
    const std::string m = j.at("method").get<std::string>();
    if (m == "rk45") {
      cfg.method = Method::rk45;
    } else if (m == "rk4") {
      cfg.method = Method::rk4;
    } else if (m == "euler" || m == "explicit-euler") {
      cfg.method = Method::euler;
    } else {
      fail("solver.method", "unknown method '" + m + "'");
    }
  }
  cfg.step = number_or(j, "step", cfg.step, "solver");
  cfg.abs_tol = number_or(j, "abs_tol", cfg.abs_tol, "solver");
  cfg.rel_tol = number_or(j, "rel_tol", cfg.rel_tol, "solver");
  cfg.project_each_step = bool_or(j, "project", cfg.project_each_step, "solver");
  cfg.t_end = number_or(j, "t_end", cfg.t_end, "solver");
  cfg.record_count = static_cast<int>(number_or(j, "record_count", cfg.record_count, "solver"));
  cfg.record_stride = number_or(j, "record_stride", cfg.record_stride, "solver");
  cfg.max_steps = static_cast<long>(number_or(j, "max_steps", static_cast<double>(cfg.max_steps), "solver"));
  cfg.validate();
  return cfg;
}

Perturbation perturbation_from_json(const Json& j, int dim) {
  const std::string kind = kind_of(j, "perturbation");
  if (kind == "zero") return Perturbation::zero(dim);
  if (kind == "power_decay") {
    PerturbationClass claim = PerturbationClass::l1;
    if (j.contains("claim")) {
      const std::string c = j.at("claim").get<std::string>();
      if (c == "L1" || c == "l1") {
        claim = PerturbationClass::l1;
      } else if (c == "o_of_theta") {
        claim = PerturbationClass::o_of_theta;
      } else if (c == "neither") {
        claim = PerturbationClass::neither;
      } else {
        fail("perturbation.claim", "expected L1, o_of_theta or neither");
      }
    }
    return Perturbation::power_decay(number_from_json(require(j, "c", "perturbation"), "perturbation.c"),
                                     number_from_json(require(j, "p", "perturbation"), "perturbation.p"),
                                     vector_from_json(require(j, "direction", "perturbation"), dim, "perturbation.direction"),
                                     claim);
  }
  throw UnsupportedError("perturbation: unsupported kind '" + kind + "'");
}

}  // namespace vflow
