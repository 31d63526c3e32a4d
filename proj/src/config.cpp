#include "vflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void line_error(int line, const std::string& why) {
  throw InputError("config line " + std::to_string(line) + ": " + why);
}

bool is_integer_text(const std::string& s) {
  std::size_t i = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  if (i >= s.size()) return false;
  return std::all_of(s.begin() + static_cast<long>(i), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

Json scalar(const std::string& s, int line) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  if (s == "true") return true;
  if (s == "false") return false;
  if (is_integer_text(s)) {
    errno = 0;
    if (s[0] == '-') {
      const long long v = std::strtoll(s.c_str(), nullptr, 10);
      if (errno == 0) return v;
    } else {
      const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
      if (errno == 0) return v;
    }
    line_error(line, "integer out of range: " + s);
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (!s.empty() && end == s.c_str() + s.size()) return v;
  return s;
}

Json list(const std::string& s, int line) {
  Json out = Json::array();
  for (const auto& item : split(s, ',')) {
    if (item.empty()) line_error(line, "empty list element");
    out.push_back(scalar(item, line));
  }
  return out;
}

Json value(std::string s, int line) {
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = trim(s.substr(1, s.size() - 2));
  if (s.empty()) return Json::array();
  if (s.find(';') != std::string::npos) {
    Json rows = Json::array();
    for (const auto& row : split(s, ';')) {
      if (row.empty()) continue;
      rows.push_back(list(row, line));
    }
    return rows;
  }
  if (s.find(',') != std::string::npos) return list(s, line);
  return scalar(s, line);
}

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.' || key.find("..") != std::string::npos) return false;
  return std::all_of(key.begin(), key.end(),
                     [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '.' || c == '-'; });
}

void assign(Json& root, const std::string& key, Json v, int line) {
  Json* node = &root;
  const auto parts = split(key, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& next = (*node)[parts[i]];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) line_error(line, "'" + key + "' extends a key that already holds a value");
    node = &next;
  }
  const std::string& leaf = parts.back();
  if (node->contains(leaf)) line_error(line, "duplicate key '" + key + "'");
  (*node)[leaf] = std::move(v);
}

const Json* find(const Json& tree, std::string_view dotted) {
  const Json* node = &tree;
  for (const auto& part : split(dotted, '.')) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &node->at(part);
  }
  return node;
}

double number_at(const Json& tree, std::string_view key, double fallback) {
  const Json* j = find(tree, key);
  return j ? number_from_json(*j, key) : fallback;
}

long count_at(const Json& tree, std::string_view key, long fallback, long min) {
  const double v = number_at(tree, key, static_cast<double>(fallback));
  if (v != static_cast<double>(static_cast<long>(v)) || v < static_cast<double>(min))
    throw InputError(std::string(key) + ": expected an integer >= " + std::to_string(min));
  return static_cast<long>(v);
}

std::vector<double> grid_axis(const Json& tree, std::string_view key) {
  const Json* j = find(tree, key);
  if (!j) return {};
  std::vector<double> out;
  if (j->is_array() || j->is_object()) {
    for (const auto& v : json_list(*j, key)) out.push_back(number_from_json(v, key));
  } else {
    out.push_back(number_from_json(*j, key));
  }
  return out;
}

std::string describe(const Vector& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

}  // namespace

Json parse_config_text(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw InputError(std::string("config: ") + e.what());
    }
  }

  Json root = Json::object();
  std::string prefix;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') line_error(line_no, "unterminated section header");
      const std::string section = trim(line.substr(1, line.size() - 2));
      if (!section.empty() && !valid_key(section)) line_error(line_no, "bad section name '" + section + "'");
      prefix = section.empty() ? "" : section + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) line_error(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) line_error(line_no, "bad key '" + key + "'");
    assign(root, prefix + key, value(trim(line.substr(eq + 1)), line_no), line_no);
  }
  return root;
}

Json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string_view analysis_name(AnalysisKind k) {
  switch (k) {
    case AnalysisKind::vp: return "vp";
    case AnalysisKind::rate: return "rate";
    case AnalysisKind::boundedness: return "boundedness";
    case AnalysisKind::stability: return "stability";
    case AnalysisKind::gronwall: return "gronwall";
    case AnalysisKind::conditions: return "conditions";
  }
  return "?";
}

AnalysisRequest parse_analysis(std::string_view text) {
  std::string s = trim(text);
  std::optional<double> nu;
  if (const auto open = s.find('('); open != std::string::npos) {
    if (s.back() != ')') throw InputError("analysis '" + s + "': missing ')'");
    nu = number_from_json(Json(trim(s.substr(open + 1, s.size() - open - 2))), "analysis argument");
    s = trim(s.substr(0, open));
  }
  for (auto k : {AnalysisKind::vp, AnalysisKind::rate, AnalysisKind::boundedness, AnalysisKind::stability,
                 AnalysisKind::gronwall, AnalysisKind::conditions}) {
    if (s == analysis_name(k)) {
      if (nu && k != AnalysisKind::rate) throw InputError("analysis '" + s + "' takes no argument");
      if (nu && !(*nu > 0.0 && *nu <= 1.0)) throw InputError("rate: nu must lie in (0, 1]");
      return {k, nu};
    }
  }
  throw InputError("unknown analysis '" + s + "'");
}

bool ExperimentConfig::wants(AnalysisKind k) const {
  return std::any_of(analyses.begin(), analyses.end(), [k](const AnalysisRequest& a) { return a.kind == k; });
}

const Problem& ExperimentConfig::require_problem() const {
  if (!problem) throw InputError("config: no problem (dim/operator) given");
  return *problem;
}

const Vector& ExperimentConfig::require_x0() const {
  if (!x0) throw InputError("config: x0 is required");
  return *x0;
}

ExperimentConfig config_from_json(const Json& tree, bool need_problem) {
  if (!tree.is_object()) throw InputError("config: expected a set of keys");
  ExperimentConfig cfg;
  cfg.tree = tree;

  if (need_problem || tree.contains("operator")) cfg.problem = problem_from_json(tree);

  if (!tree.contains("schedule")) throw InputError("config: schedule is required");
  cfg.schedule = schedule_from_json(tree.at("schedule"));
  cfg.solver = solver_from_json(tree.contains("solver") ? tree.at("solver") : Json());
  if (tree.contains("perturbation")) {
    if (!cfg.problem) throw InputError("config: perturbation needs a problem");
    cfg.perturbation = perturbation_from_json(tree.at("perturbation"), cfg.problem->dim());
  }
  if (tree.contains("x0")) {
    if (!cfg.problem) throw InputError("config: x0 needs a problem");
    cfg.x0 = vector_from_json(tree.at("x0"), cfg.problem->dim(), "x0");
    const ConvexSet& C = cfg.problem->domain;
    if (!contains(C, *cfg.x0)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3g", distance(C, *cfg.x0));
      throw InputError("x0 = " + describe(*cfg.x0) + " is not in C (" + std::string(C.kind_name()) +
                       ", distance " + buf + ")");
    }
  }

  if (tree.contains("analyses")) {
    const Json& a = tree.at("analyses");
    if (a.is_string()) {
      cfg.analyses.push_back(parse_analysis(a.get<std::string>()));
    } else {
      for (const auto& item : json_list(a, "analyses")) {
        if (!item.is_string()) throw InputError("analyses: expected names");
        cfg.analyses.push_back(parse_analysis(item.get<std::string>()));
      }
    }
  } else {
    cfg.analyses = {{AnalysisKind::vp, {}}, {AnalysisKind::boundedness, {}}, {AnalysisKind::gronwall, {}}};
  }

  if (tree.contains("output_dir")) {
    if (!tree.at("output_dir").is_string()) throw InputError("output_dir: expected a path");
    cfg.output_dir = tree.at("output_dir").get<std::string>();
  }
  if (tree.contains("seed")) {
    const Json& s = tree.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw InputError("seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }

  cfg.discrete_N = count_at(tree, "discrete.N", cfg.discrete_N, 1);
  cfg.discrete_shift = number_at(tree, "discrete.shift", cfg.discrete_shift);
  cfg.compare_N = count_at(tree, "compare.N", cfg.compare_N, 0);
  cfg.rate_window = number_at(tree, "rate.window", cfg.rate_window);
  if (!(cfg.rate_window > 0.0 && cfg.rate_window <= 1.0)) throw InputError("rate.window must lie in (0, 1]");
  cfg.probe_count = static_cast<int>(count_at(tree, "probes.count", cfg.probe_count, 1));

  cfg.sweep.K = grid_axis(tree, "sweep.K");
  cfg.sweep.nu = grid_axis(tree, "sweep.nu");
  cfg.sweep.alpha = grid_axis(tree, "sweep.alpha");
  for (double d : grid_axis(tree, "sweep.dim")) {
    if (d < 1.0 || d != static_cast<double>(static_cast<int>(d))) throw InputError("sweep.dim: expected positive integers");
    cfg.sweep.dim.push_back(static_cast<int>(d));
  }
  return cfg;
}

namespace {

Json resize_vector(const Json& j, int dim, bool repeat_last, std::string_view what) {
  std::vector<Json> items = (j.is_array() || j.is_object()) ? json_list(j, what) : std::vector<Json>{j};
  const Json fill = (repeat_last && !items.empty()) ? items.back() : Json(0.0);
  items.resize(static_cast<std::size_t>(dim), fill);
  return Json(items);
}

Json resize_matrix(const Json& j, int dim, std::string_view what) {
  if (j.is_string()) return j;
  const std::vector<Json> rows = j.is_number() ? std::vector<Json>{Json::array({j})} : json_list(j, what);
  Json out = Json::array();
  for (std::size_t r = 0; r < static_cast<std::size_t>(dim); ++r) {
    if (r < rows.size()) {
      out.push_back(resize_vector(rows[r], dim, false, what));
    } else {
      Json row = resize_vector(Json::array(), dim, false, what);
      row[r] = 1.0;
      out.push_back(row);
    }
  }
  return out;
}

void resize_set(Json& j, int dim);

void resize_field(Json& j, const char* key, int dim, bool repeat_last = false) {
  if (j.contains(key)) j[key] = resize_vector(j[key], dim, repeat_last, key);
}

void resize_set(Json& j, int dim) {
  if (!j.is_object()) return;
  resize_field(j, "center", dim);
  resize_field(j, "normal", dim);
  resize_field(j, "anchor", dim);
  resize_field(j, "at", dim);
  resize_field(j, "lo", dim, true);
  resize_field(j, "hi", dim, true);
  if (j.contains("basis")) {
    Json& b = j["basis"];
    const bool single = b.is_array() && !b.empty() && !b.front().is_array() && !b.front().is_object();
    Json out = Json::array();
    for (const auto& v : single ? std::vector<Json>{b} : json_list(b, "basis")) out.push_back(resize_vector(v, dim, false, "basis"));
    b = out;
  }
  if (j.contains("parts")) {
    Json parts = Json::array();
    for (auto p : json_list(j["parts"], "parts")) {
      resize_set(p, dim);
      parts.push_back(p);
    }
    j["parts"] = parts;
  }
}

void resize_operator(Json& j, int dim) {
  if (!j.is_object()) return;
  if (j.contains("set")) resize_set(j["set"], dim);
  if (j.contains("inner")) resize_operator(j["inner"], dim);
  if (j.contains("parts")) {
    Json parts = Json::array();
    for (auto p : json_list(j["parts"], "parts")) {
      resize_operator(p, dim);
      parts.push_back(p);
    }
    j["parts"] = parts;
  }
}

}  // namespace

Json resize_dim(const Json& tree, int dim) {
  if (dim < 1) throw InputError("dim must be positive");
  Json out = tree;
  out["dim"] = dim;
  if (out.contains("set")) resize_set(out["set"], dim);
  if (out.contains("operator")) resize_operator(out["operator"], dim);
  if (out.contains("contraction")) {
    Json& f = out["contraction"];
    resize_field(f, "value", dim);
    resize_field(f, "offset", dim);
    if (f.contains("linear")) f["linear"] = resize_matrix(f["linear"], dim, "linear");
  }
  if (out.contains("perturbation")) resize_field(out["perturbation"], "direction", dim);
  resize_field(out, "x0", dim);
  return out;
}

}  // namespace vflow
