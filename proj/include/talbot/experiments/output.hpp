#pragma once

// Result tables (RFC-4180 CSV), provenance JSON and the deterministic worker pool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/error.hpp"

namespace talbot::experiments {

inline constexpr const char* kVersion = "1.0.0";

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

using Cell = std::variant<std::string, double, long long, bool>;

inline std::string format_cell(const Cell& c) {
  struct {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(double d) const { return format_number(d); }
    std::string operator()(long long i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  } visit;
  return std::visit(visit, c);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw Error("table '" + name + "': row has " + std::to_string(row.size()) + " cells, expected " +
                  std::to_string(columns.size()));
    rows.push_back(std::move(row));
  }

  std::string to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_escape(columns[i]);
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_escape(format_cell(r[i]));
      out += '\n';
    }
    return out;
  }

  std::size_t column(const std::string& c) const {
    const auto it = std::find(columns.begin(), columns.end(), c);
    if (it == columns.end()) throw Error("table '" + name + "' has no column '" + c + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<CheckOutcome> checks;
  double wall_seconds = 0.0;

  bool checks_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const Table& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw Error("result has no table '" + name + "'");
  }
};

/// Appends b's rows to a's tables; refuses results from different configs.
inline ExperimentResult merge_results(ExperimentResult a, const ExperimentResult& b) {
  if (a.config_hash != b.config_hash)
    throw Error("cannot aggregate results of different configs (" + a.config_hash + " vs " + b.config_hash + ")");
  for (const auto& tb : b.tables) {
    auto it = std::find_if(a.tables.begin(), a.tables.end(), [&](const Table& t) { return t.name == tb.name; });
    if (it == a.tables.end()) {
      a.tables.push_back(tb);
      continue;
    }
    if (it->columns != tb.columns) throw Error("table '" + tb.name + "': column mismatch");
    it->rows.insert(it->rows.end(), tb.rows.begin(), tb.rows.end());
  }
  a.checks.insert(a.checks.end(), b.checks.begin(), b.checks.end());
  return a;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json provenance(const ExperimentResult& r, const nlohmann::json& config_tree) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  nlohmann::json files = nlohmann::json::array();
  for (const auto& t : r.tables) files.push_back(t.name + ".csv");
  return {{"experiment", r.experiment},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"config", config_tree},
          {"versions", {{"talbot", kVersion}, {"nlohmann_json", NLOHMANN_JSON_VERSION_MAJOR * 10000 +
                                                                    NLOHMANN_JSON_VERSION_MINOR * 100 +
                                                                    NLOHMANN_JSON_VERSION_PATCH}}},
          {"timestamp", utc_timestamp()},
          {"wall_seconds", r.wall_seconds},
          {"files", files},
          {"summary", r.summary},
          {"checks", checks}};
}

/// Writes <dir>/<table>.csv for every table and <dir>/provenance.json.
inline void write_result(const ExperimentResult& r, const nlohmann::json& config_tree,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : r.tables) {
    std::ofstream out(dir / (t.name + ".csv"), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / (t.name + ".csv")).string());
    out << t.to_csv();
  }
  std::ofstream prov(dir / "provenance.json", std::ios::binary);
  if (!prov) throw Error("cannot write provenance.json");
  prov << provenance(r, config_tree).dump(2) << '\n';
}

// ---- worker pool -------------------------------------------------------------------

/// Default worker count: $TALBOT_THREADS if set and positive, else hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("TALBOT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// out[i] = fn(i) for i < n, computed on up to `threads` workers. Output order
/// is the index order whatever the schedule; the first exception (lowest
/// index) is rethrown.
template <typename Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using T = decltype(fn(std::size_t{}));
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace talbot::experiments
