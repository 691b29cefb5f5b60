#pragma once

// Experiment configuration: an INI-style text format (or JSON with the same
// schema), dotted-path overrides, time expressions and the sampled time sets.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/error.hpp"
#include "talbot/function_spec.hpp"

namespace talbot::experiments {

using nlohmann::json;

// ---- time expressions -----------------------------------------------------------

namespace detail {

// expr := term (('+' | '-') term)*; term := unary (('*' | '/') unary)*;
// unary := '-' unary | power; power := atom ('^' unary)?;
// atom := number | name | name '(' expr ')' | '(' expr ')'
class ExprParser {
 public:
  explicit ExprParser(std::string text) : s_(std::move(text)) {}

  double parse() {
    const double v = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("time expression '" + s_ + "': " + what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = unary();
    for (;;) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else return v;
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }
  double power() {
    const double base = atom();
    if (eat('^')) return std::pow(base, unary());
    return base;
  }
  double atom() {
    skip();
    if (eat('(')) {
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
      std::size_t used = 0;
      const double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      return v;
    }
    std::string name;
    while (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      name += s_[pos_++];
    if (name.empty()) fail("expected a number or a name");
    if (name == "pi") return std::numbers::pi;
    if (name == "e") return std::numbers::e;
    if (name == "phi" || name == "golden") return std::numbers::phi;
    if (name == "sqrt" || name == "exp" || name == "log") {
      if (!eat('(')) fail("expected '(' after " + name);
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      if (name == "sqrt") return std::sqrt(v);
      if (name == "exp") return std::exp(v);
      return std::log(v);
    }
    fail("unknown name '" + name + "'");
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Evaluates "pi/2", "sqrt(2)", "2*pi*3/7", "e", "phi", plain numbers.
inline double parse_time_expression(const std::string& text) {
  const double v = detail::ExprParser(text).parse();
  if (!std::isfinite(v)) throw ConfigError("time expression '" + text + "' is not finite");
  return v;
}

inline double time_value(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_time_expression(j.get<std::string>());
  throw ConfigError("time must be a number or an expression string");
}

// ---- sampled irrational times ----------------------------------------------------

struct SampledTime {
  std::string label;
  double value = 0.0;
};

/// Distance from t to the nearest pi p / q with q <= qmax.
inline double distance_to_pi_rationals(double t, int qmax) {
  double best = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= qmax; ++q) {
    const double p = std::round(t * q / std::numbers::pi);
    best = std::min(best, std::abs(t - std::numbers::pi * p / q));
  }
  return best;
}

/// sqrt 2, golden ratio, sqrt 3 / 2, e, then uniform draws in (0, 2 pi)
/// rejected within 1e-4 of pi p / q for q <= 64. Deterministic in the seed.
inline std::vector<SampledTime> irrational_times(std::size_t count, std::uint64_t seed) {
  std::vector<SampledTime> out = {{"sqrt(2)", std::numbers::sqrt2},
                                  {"phi", std::numbers::phi},
                                  {"sqrt(3)/2", std::numbers::sqrt3 / 2.0},
                                  {"e", std::numbers::e}};
  if (count <= out.size()) {
    out.resize(count);
    return out;
  }
  std::mt19937_64 rng(seed);
  int draw = 0;
  while (out.size() < count) {
    // 53 random bits mapped to (0, 1); avoids distribution-specific behaviour.
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    const double t = 2.0 * std::numbers::pi * u;
    ++draw;
    if (distance_to_pi_rationals(t, 64) < 1e-4) continue;
    out.push_back({"random#" + std::to_string(draw), t});
  }
  return out;
}

// ---- INI-style format ------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline json parse_scalar(const std::string& raw) {
  const auto v = trim(raw);
  if (v.empty()) return "";
  try {
    return json::parse(v);
  } catch (const json::parse_error&) {
  }
  return v;
}

/// Numbers, true/false, JSON arrays or strings; a bare comma list becomes an array.
inline json parse_value(const std::string& raw) {
  const auto v = trim(raw);
  if (!v.empty() && v.front() != '[' && v.front() != '"' && v.find(',') != std::string::npos) {
    json arr = json::array();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) arr.push_back(parse_scalar(item));
    return arr;
  }
  return parse_scalar(v);
}

inline json& at_path(json& root, const std::string& dotted) {
  json* node = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = trim(part);
    if (part.empty()) throw ConfigError("empty component in key '" + dotted + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("key '" + dotted + "' descends into a non-table value");
      *node = json::object();
    }
    node = &(*node)[part];
  }
  return *node;
}

}  // namespace detail

/// Grammar: '#' or ';' comments, "[section]" or "[a.b]" headers, "key = value"
/// lines; keys may be dotted. Returns the equivalent JSON tree.
inline json parse_ini(const std::string& text) {
  json root = json::object();
  std::string section;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      detail::at_path(root, section);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    detail::at_path(root, section.empty() ? key : section + "." + key) = detail::parse_value(t.substr(eq + 1));
  }
  return root;
}

/// "a.b.c=value"
inline void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const auto key = detail::trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
  detail::at_path(root, key) = detail::parse_value(assignment.substr(eq + 1));
}

inline json load_config_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config JSON: ") + e.what());
    }
  }
  return parse_ini(text);
}

// ---- typed config ----------------------------------------------------------------

enum class ExperimentKind { dichotomy, dimension, smoothing, kernel_scan, revival };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::dichotomy: return "dichotomy";
    case ExperimentKind::dimension: return "dimension";
    case ExperimentKind::smoothing: return "smoothing";
    case ExperimentKind::kernel_scan: return "kernel_scan";
    case ExperimentKind::revival: return "revival";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind(const std::string& name) {
  if (name == "dichotomy") return ExperimentKind::dichotomy;
  if (name == "dimension") return ExperimentKind::dimension;
  if (name == "smoothing") return ExperimentKind::smoothing;
  if (name == "kernel_scan" || name == "kernel-scan") return ExperimentKind::kernel_scan;
  if (name == "revival") return ExperimentKind::revival;
  throw ConfigError("unknown experiment '" + name + "'");
}

struct Resolution {
  int N = 0;                    // spectral truncation; 0 means M / 4
  std::size_t M = 1 << 14;      // grid points
  std::vector<int> levels;      // log2 M values for multi-resolution runs
  int duhamel_N = 512;          // truncation of the eigensolved Duhamel part

  int truncation() const { return N > 0 ? N : static_cast<int>(M / 4); }
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::dimension;
  FunctionSpec data = step_function();
  FunctionSpec potential = zero_function();
  std::vector<SampledTime> times;
  Resolution resolution;
  std::string output = "out";
  std::uint64_t seed = 0;
  json params = json::object();  // experiment-specific knobs
  json tree;                     // normalized source tree (hashed)
};

/// FNV-1a over the canonical (sorted-key, compact) JSON dump, as 16 hex digits.
inline std::string config_hash(const json& tree) {
  const auto text = tree.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline json as_array(const json& j) { return j.is_array() ? j : json::array({j}); }

}  // namespace detail

inline ExperimentConfig config_from_tree(json tree) {
  if (!tree.is_object()) throw ConfigError("config root must be a table");
  ExperimentConfig c;
  try {
    c.experiment = experiment_kind(detail::get_or<std::string>(tree, "experiment", "dimension"));
    if (tree.contains("seed")) {
      const auto& s = tree.at("seed");
      if (!s.is_number_integer() && !s.is_number_unsigned()) throw ConfigError("seed must be an integer");
      c.seed = s.get<std::uint64_t>();
    }
    if (tree.contains("data")) c.data = function_spec_from_json(tree.at("data"));
    if (tree.contains("potential")) c.potential = function_spec_from_json(tree.at("potential"));
    c.output = detail::get_or<std::string>(tree, "output", "out");

    if (tree.contains("resolution")) {
      const auto& r = tree.at("resolution");
      c.resolution.N = detail::get_or<int>(r, "N", 0);
      c.resolution.M = detail::get_or<std::size_t>(r, "M", c.resolution.M);
      c.resolution.duhamel_N = detail::get_or<int>(r, "duhamel_N", c.resolution.duhamel_N);
      if (r.contains("levels")) c.resolution.levels = detail::as_array(r.at("levels")).get<std::vector<int>>();
    }
    if (c.resolution.M == 0 || (c.resolution.M & (c.resolution.M - 1)) != 0)
      throw ConfigError("resolution.M must be a power of two");
    if (c.resolution.N < 0 || 4 * static_cast<std::size_t>(c.resolution.N) > c.resolution.M)
      throw ConfigError("resolution must satisfy M >= 4N");
    if (c.resolution.duhamel_N < 1) throw ConfigError("resolution.duhamel_N must be positive");
    for (int e : c.resolution.levels)
      if (e < 4 || e > 26) throw ConfigError("resolution.levels entries must lie in [4, 26]");

    if (tree.contains("times")) {
      const auto& t = tree.at("times");
      json values = t.is_object() ? t.value("values", json::array()) : t;
      for (const auto& v : detail::as_array(values)) {
        if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) continue;
        c.times.push_back({v.is_string() ? v.get<std::string>() : v.dump(), time_value(v)});
      }
      if (t.is_object() && t.contains("irrational")) {
        const auto n = t.at("irrational").get<int>();
        if (n < 0) throw ConfigError("times.irrational must be >= 0");
        for (auto& s : irrational_times(static_cast<std::size_t>(n), c.seed)) c.times.push_back(s);
      }
    }
    if (tree.contains("params")) {
      c.params = tree.at("params");
      if (!c.params.is_object()) throw ConfigError("params must be a table");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.tree = std::move(tree);
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  auto tree = load_config_tree(path);
  for (const auto& o : overrides) apply_override(tree, o);
  return config_from_tree(std::move(tree));
}

}  // namespace talbot::experiments
