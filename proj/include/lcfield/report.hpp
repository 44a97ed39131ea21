#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace lcf {

inline constexpr double not_applicable = std::numeric_limits<double>::quiet_NaN();

// One CSV line: experiment,level,s,L,R,defect,order_fit.
struct Row {
  std::string experiment;
  int level = 0;
  double s = not_applicable;
  double L = not_applicable, R = not_applicable;
  double defect = not_applicable;
  double order_fit = not_applicable;
};

struct Check {
  int criterion = 0;  // acceptance criterion, 0 if none
  std::string name;
  bool pass = false;
  double value = 0;
  double bound = 0;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<Row> rows;
  std::vector<Check> checks;

  bool pass() const {
    if (checks.empty()) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  double worst_defect() const {
    double w = 0;
    for (const auto& r : rows)
      if (std::isfinite(r.defect)) w = std::max(w, std::abs(r.defect));
    return w;
  }
  // Smallest fitted order over the order rows; infinity when all sit at the rounding floor.
  double fitted_order() const {
    double o = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& r : rows)
      if (!std::isnan(r.order_fit)) {
        o = std::min(o, r.order_fit);
        any = true;
      }
    return any ? o : not_applicable;
  }
};

inline const char* csv_header() { return "experiment,level,s,L,R,defect,order_fit"; }

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string csv_text(const SuiteResult& r) {
  std::string out = csv_header();
  out += '\n';
  for (const auto& row : r.rows) {
    out += row.experiment + ',' + std::to_string(row.level) + ',' + format_number(row.s) + ',' + format_number(row.L) +
           ',' + format_number(row.R) + ',' + format_number(row.defect) + ',' + format_number(row.order_fit) + '\n';
  }
  return out;
}

inline nlohmann::ordered_json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return "exact";
  return v;
}

inline nlohmann::ordered_json summary_json(const SuiteResult& r, const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["pass"] = r.pass();
  j["worst_defect"] = json_number(r.worst_defect());
  j["fitted_order"] = json_number(r.fitted_order());
  j["seed"] = r.seed;
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& [sec, kv] : cfg.echo)
    for (const auto& [k, v] : kv) echo[sec][k] = v;
  j["config_echo"] = echo;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json e;
    e["criterion"] = c.criterion;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["value"] = json_number(c.value);
    e["bound"] = json_number(c.bound);
    checks.push_back(e);
  }
  j["checks"] = checks;
  return j;
}

struct ReportFiles {
  std::filesystem::path csv, json;
};

// Writes <dir>/<suite>.csv and <dir>/<suite>.json.
inline ReportFiles emit_report(const SuiteResult& r, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  if (r.rows.empty() && r.checks.empty()) throw Error("empty results: nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("unwritable output directory " + dir.string());
  ReportFiles f{dir / (r.suite + ".csv"), dir / (r.suite + ".json")};
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("unwritable output directory " + p.parent_path().string());
    out << text;
    if (!out) throw Error("failed writing " + p.string());
  };
  write(f.csv, csv_text(r));
  write(f.json, summary_json(r, cfg).dump(2) + "\n");
  return f;
}

}  // namespace lcf
