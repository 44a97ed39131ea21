#include <chrono>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "lcfield/suites.hpp"

#ifndef LCFIELD_CONFIG_DIR
#define LCFIELD_CONFIG_DIR "configs"
#endif

namespace {

const std::map<int, std::string> criterion_names{
    {1, "exterior calculus exactness"},  {2, "adjointness and selfadjointness"},
    {3, "Lichnerowicz agreement"},        {4, "Green operator properties"},
    {5, "propagator kernel and adjointness"}, {6, "flat-space fundamental solution"},
    {7, "Proca structure"},              {8, "electromagnetic gauge machinery"},
    {9, "geometric identities"},         {10, "RCE sanity"},
    {11, "three-way derivative agreement"}, {12, "balance identity"},
    {13, "CCR layer"}};

// Config name and the criteria it reports on.
const std::vector<std::pair<std::string, std::vector<int>>> acceptance_configs{
    {"calculus", {1, 2, 3}},       {"green", {4, 6, 7}},
    {"symplectic", {5}},         {"em_gauge", {8}},             {"rce_identities_kg", {9, 10}},
    {"rce_identities_proca", {9, 10}}, {"kg_balance_flat", {12}}, {"proca_balance_flat", {12}},
    {"em_balance", {12}},        {"threeway_kg", {11}},         {"threeway_proca", {11}},
    {"threeway_em", {11}},       {"ccr", {13}}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lcfield acceptance run"};
  std::string dir = LCFIELD_CONFIG_DIR, out = "acceptance_out";
  bool verbose = false;
  app.add_option("--configs", dir, "config directory");
  app.add_option("--out", out, "report directory");
  app.add_flag("-v,--verbose", verbose, "print every check");
  CLI11_PARSE(app, argc, argv);

  std::map<int, std::vector<std::pair<std::string, lcf::Check>>> by_criterion;
  for (const auto& [name, criteria] : acceptance_configs) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      lcf::ExperimentConfig cfg = lcf::load_config(dir + "/" + name + ".cfg");
      lcf::SuiteResult r = lcf::run_experiment(cfg);
      r.suite = name;
      lcf::emit_report(r, cfg, out);
      for (const auto& c : r.checks) by_criterion[c.criterion].push_back({name, c});
    } catch (const std::exception& e) {
      lcf::Check c;
      c.name = std::string("error: ") + e.what();
      for (int k : criteria) by_criterion[k].push_back({name, c});
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << name << " finished in " << sec << " s\n";
  }

  int failed = 0;
  for (const auto& [k, title] : criterion_names) {
    const auto& checks = by_criterion[k];
    bool pass = !checks.empty();
    std::string first_fail;
    for (const auto& [cfg, c] : checks)
      if (!c.pass) {
        pass = false;
        if (first_fail.empty())
          first_fail = cfg + ": " + c.name + " (value " + lcf::format_number(c.value) + ", bound " +
                       lcf::format_number(c.bound) + ")";
      }
    if (checks.empty()) first_fail = "no checks ran";
    failed += !pass;
    std::cout << "criterion " << k << ": " << (pass ? "PASS" : "FAIL") << "  " << title << "  [" << checks.size()
              << " checks]" << (pass ? "" : "  first failure: " + first_fail) << '\n';
    if (verbose)
      for (const auto& [cfg, c] : checks)
        std::cout << "    " << (c.pass ? "pass " : "FAIL ") << cfg << ": " << c.name << "  value "
                  << lcf::format_number(c.value) << "  bound " << lcf::format_number(c.bound)
                  << (c.detail.empty() ? "" : "  [" + c.detail + "]") << '\n';
  }
  return failed == 0 ? 0 : 1;
}
