#include <iostream>

#include <CLI11.hpp>

#include "lcfield/suites.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lcfield experiment runner"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run one suite from a config file");
  std::string config, suite, out;
  bool list = false;
  run->add_option("--config", config, "config file");
  run->add_option("--suite", suite, "suite name, overrides run.suite");
  run->add_option("--out", out, "output directory, overrides run.output");
  run->add_flag("--list", list, "print the suite names and exit");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& s : lcf::suite_names()) std::cout << s << '\n';
    return 0;
  }
  try {
    if (config.empty()) throw lcf::Error("--config is required");
    lcf::ExperimentConfig cfg = lcf::load_config(config);
    if (!suite.empty()) cfg.run.suite = suite;
    if (!out.empty()) cfg.run.output = out;
    if (cfg.run.suite.empty()) throw lcf::Error("no suite given: set run.suite or pass --suite");
    lcf::SuiteResult r = lcf::run_experiment(cfg);
    auto files = lcf::emit_report(r, cfg, cfg.run.output);
    for (const auto& c : r.checks)
      std::cout << (c.pass ? "pass " : "FAIL ") << c.name << "  value " << lcf::format_number(c.value) << "  bound "
                << lcf::format_number(c.bound) << '\n';
    std::cout << "wrote " << files.csv.string() << " and " << files.json.string() << '\n';
    return r.pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
