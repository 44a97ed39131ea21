#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace lcf {

// Sectioned key=value text: "[section]" headers, one "key = value" per line,
// '#' starts a comment. Every key must be consumed by the typed reader.
class RawConfig {
 public:
  static RawConfig parse(const std::string& text) {
    RawConfig c;
    std::istringstream in(text);
    std::string line, section;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw Error(where(no) + "malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) throw Error(where(no) + "empty section name");
        c.sections_[section];
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(where(no) + "expected key = value");
      if (section.empty()) throw Error(where(no) + "key outside of a section");
      std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(where(no) + "empty key");
      auto& s = c.sections_[section];
      if (s.count(key)) throw Error(where(no) + "duplicate key " + section + "." + key);
      s[key] = value;
    }
    return c;
  }

  static RawConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key);
  }

  // Returns the value and marks it consumed.
  const std::string* take(const std::string& section, const std::string& key) {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used_[section].push_back(key);
    return &k->second;
  }

  void require_consumed() const {
    for (const auto& [sec, kv] : sections_) {
      auto u = used_.find(sec);
      for (const auto& [k, v] : kv) {
        bool ok = u != used_.end() && std::find(u->second.begin(), u->second.end(), k) != u->second.end();
        if (!ok) throw Error("unknown config key " + sec + "." + k);
      }
    }
  }

  void require_known_sections(const std::vector<std::string>& names) const {
    for (const auto& [sec, kv] : sections_)
      if (std::find(names.begin(), names.end(), sec) == names.end()) throw Error("unknown config section [" + sec + "]");
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

 private:
  static std::string where(int no) { return "config line " + std::to_string(no) + ": "; }
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::map<std::string, std::vector<std::string>> used_;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("config " + key + ": not a number '" + v + "'");
  return x;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("config " + key + ": not an integer '" + v + "'");
  return x;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = RawConfig::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

struct LatticeBlock {
  int dim = 2;
  double extent = 1.0;    // spatial side
  double duration = 1.0;  // time window length
  double dt_ratio = 0.4;  // dt / dx
  Boundary boundary = Boundary::periodic;
};

struct MetricBlock {
  std::string preset = "minkowski";  // minkowski | frw | frw_sine | curved | constant
  double amplitude = 0.3;
};

struct FieldBlock {
  std::string kind = "klein_gordon";  // klein_gordon | proca | maxwell
  double mass = 1.0;
};

struct Component {
  int i = 0, j = 0;
  double weight = 1.0;
};

struct PerturbationBlock {
  std::string kind = "generic_bump";  // generic_bump | lie_derivative
  double amplitude = 1.0;
  std::array<double, 3> center{0.5, 0.5, 0.5};
  std::array<double, 3> width{0.15, 0.25, 0.25};
  int power = 4;
  std::vector<Component> components{{0, 0, 0.5}, {1, 1, 1.0}};
  double s_max = 0.02;
  int n_s_samples = 4;
  double s_fixed = 1e-3;
  double band_fraction = 0.25;
};

struct RunBlock {
  std::string suite;
  std::vector<int> levels{64, 128, 256};
  std::uint64_t seed = 1;
  double min_order = -1;   // < 0: suite default
  double max_defect = -1;  // < 0: suite default
  std::string output = "out";
};

struct ExperimentConfig {
  LatticeBlock lattice;
  MetricBlock metric;
  FieldBlock field;
  PerturbationBlock perturbation;
  RunBlock run;
  // Normalized key=value echo, section by section.
  std::map<std::string, std::map<std::string, std::string>> echo;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"geometry",    "calculus",     "green",    "symplectic", "rce-identities",
                                              "rce-balance", "rce-threeway", "em-gauge", "ccr"};
  return names;
}

inline ExperimentConfig read_config(RawConfig raw) {
  raw.require_known_sections({"lattice", "metric", "field", "perturbation", "run"});
  ExperimentConfig c;
  auto str = [&](const char* s, const char* k, std::string& out) {
    if (auto v = raw.take(s, k)) out = *v;
  };
  auto num = [&](const char* s, const char* k, double& out) {
    if (auto v = raw.take(s, k)) out = detail::parse_double(std::string(s) + "." + k, *v);
  };
  auto integer = [&](const char* s, const char* k, auto& out) {
    if (auto v = raw.take(s, k)) out = static_cast<std::decay_t<decltype(out)>>(detail::parse_int(std::string(s) + "." + k, *v));
  };
  auto triple = [&](const char* s, const char* k, std::array<double, 3>& out) {
    if (auto v = raw.take(s, k)) {
      auto items = detail::split_list(*v);
      if (items.empty() || items.size() > 3) throw Error(std::string("config ") + s + "." + k + ": expected 1 to 3 numbers");
      for (std::size_t a = 0; a < items.size(); ++a) out[a] = detail::parse_double(std::string(s) + "." + k, items[a]);
    }
  };

  integer("lattice", "dim", c.lattice.dim);
  num("lattice", "extent", c.lattice.extent);
  num("lattice", "duration", c.lattice.duration);
  num("lattice", "dt_ratio", c.lattice.dt_ratio);
  if (auto v = raw.take("lattice", "boundary")) c.lattice.boundary = parse_boundary(*v);
  if (c.lattice.dim != 2 && c.lattice.dim != 3) throw Error("config lattice.dim must be 2 or 3");
  if (c.lattice.extent <= 0 || c.lattice.duration <= 0 || c.lattice.dt_ratio <= 0)
    throw Error("config lattice: extent, duration and dt_ratio must be positive");

  str("metric", "preset", c.metric.preset);
  num("metric", "amplitude", c.metric.amplitude);
  const std::vector<std::string> presets{"minkowski", "frw", "frw_sine", "curved", "constant"};
  if (std::find(presets.begin(), presets.end(), c.metric.preset) == presets.end())
    throw Error("config metric.preset: unknown preset '" + c.metric.preset + "'");

  str("field", "kind", c.field.kind);
  num("field", "mass", c.field.mass);
  if (c.field.kind != "klein_gordon" && c.field.kind != "proca" && c.field.kind != "maxwell")
    throw Error("config field.kind: unknown kind '" + c.field.kind + "'");
  if (c.field.mass < 0) throw Error("config field.mass must be nonnegative");
  if (c.field.kind == "maxwell" && c.field.mass != 0) throw Error("config field.mass must be 0 for maxwell");
  if (c.field.kind == "proca" && c.field.mass == 0) throw Error("config field.mass must be positive for proca");

  str("perturbation", "kind", c.perturbation.kind);
  num("perturbation", "amplitude", c.perturbation.amplitude);
  triple("perturbation", "center", c.perturbation.center);
  triple("perturbation", "width", c.perturbation.width);
  integer("perturbation", "power", c.perturbation.power);
  if (auto v = raw.take("perturbation", "components")) {
    c.perturbation.components.clear();
    for (const auto& item : detail::split_list(*v)) {
      auto colon = item.find(':');
      if (colon != 2 || !std::isdigit(item[0]) || !std::isdigit(item[1]))
        throw Error("config perturbation.components: expected ij:weight, got '" + item + "'");
      Component comp{item[0] - '0', item[1] - '0', detail::parse_double("perturbation.components", item.substr(3))};
      if (comp.i >= c.lattice.dim || comp.j >= c.lattice.dim)
        throw Error("config perturbation.components: index out of range in '" + item + "'");
      c.perturbation.components.push_back(comp);
    }
  }
  num("perturbation", "s_max", c.perturbation.s_max);
  integer("perturbation", "n_s_samples", c.perturbation.n_s_samples);
  num("perturbation", "s_fixed", c.perturbation.s_fixed);
  num("perturbation", "band_fraction", c.perturbation.band_fraction);
  if (c.perturbation.kind != "generic_bump" && c.perturbation.kind != "lie_derivative")
    throw Error("config perturbation.kind: unknown kind '" + c.perturbation.kind + "'");
  if (c.perturbation.s_max <= 0 || c.perturbation.n_s_samples < 2)
    throw Error("config perturbation: s_max must be positive and n_s_samples at least 2");

  str("run", "suite", c.run.suite);
  if (auto v = raw.take("run", "levels")) {
    c.run.levels.clear();
    for (const auto& item : detail::split_list(*v))
      c.run.levels.push_back(static_cast<int>(detail::parse_int("run.levels", item)));
  }
  integer("run", "seed", c.run.seed);
  num("run", "min_order", c.run.min_order);
  num("run", "max_defect", c.run.max_defect);
  str("run", "output", c.run.output);
  if (!c.run.suite.empty() &&
      std::find(suite_names().begin(), suite_names().end(), c.run.suite) == suite_names().end())
    throw Error("unknown suite '" + c.run.suite + "'");
  if (c.run.levels.empty()) throw Error("config run.levels is empty");
  if (!std::is_sorted(c.run.levels.begin(), c.run.levels.end()) || c.run.levels.front() < 8)
    throw Error("config run.levels must be increasing and at least 8");

  raw.require_consumed();
  c.echo = raw.sections();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) { return read_config(RawConfig::parse(text)); }

inline ExperimentConfig load_config(const std::string& path) { return read_config(RawConfig::load(path)); }

// Refinement-order suites need at least three levels.
inline void require_levels(const ExperimentConfig& c, std::size_t n = 3) {
  if (c.run.levels.size() < n)
    throw Error("suite " + c.run.suite + " needs at least " + std::to_string(n) + " refinement levels");
}

}  // namespace lcf
