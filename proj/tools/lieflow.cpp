#include <CLI11.hpp>
#include <iostream>

#include "lieflow/counterexamples.hpp"
#include "lieflow/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lieflow: stochastic Lie transport of differential k-forms"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run one named experiment from a config file");
  std::string config_path, out_override;
  long long seed_override = -1;
  run_cmd->add_option("--config", config_path, "key=value configuration file")->required();
  run_cmd->add_option("--seed", seed_override, "override the master seed");
  run_cmd->add_option("--out", out_override, "override the output directory");

  auto* list_cmd = app.add_subcommand("list", "list experiments and fixtures");

  auto* check_cmd = app.add_subcommand("check", "run the acceptance suite");
  bool check_all = false;
  std::string check_out = "out/acceptance";
  long long check_seed = 42;
  check_cmd->add_flag("--all", check_all, "run every acceptance criterion");
  check_cmd->add_option("--out", check_out, "output directory for reports");
  check_cmd->add_option("--seed", check_seed, "master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list_cmd) {
      std::cout << "experiments:\n";
      for (const auto& info : lieflow::experiments::registry()) {
        std::cout << "  " << info.name << " - " << info.description << " (criteria";
        for (int c : info.criteria) std::cout << ' ' << c;
        std::cout << ")\n";
      }
      std::cout << "fixtures:\n";
      for (const auto& fx : lieflow::fixture_registry())
        std::cout << "  " << fx.name << " - " << fx.description << "\n";
      return 0;
    }
    if (*run_cmd) {
      lieflow::Config cfg = lieflow::Config::from_file(config_path);
      if (seed_override >= 0) cfg.set("seed", std::to_string(seed_override));
      if (!out_override.empty()) cfg.set("out_dir", out_override);
      lieflow::RunReport rep = lieflow::experiments::run(cfg);
      const std::string out = cfg.get_string("out_dir", "out/" + rep.experiment);
      lieflow::write_all(out, rep);
      for (const auto& c : rep.checks)
        std::cout << (c.pass ? "  ok  " : " FAIL ") << c.name << "  value="
                  << lieflow::format_double(c.value) << " tol="
                  << lieflow::format_double(c.tolerance) << " (" << c.op << ")\n";
      std::cout << rep.run_id << ": " << (rep.all_pass() ? "all checks passed" : "CHECKS FAILED")
                << " in " << lieflow::format_double(rep.wall_seconds) << " s; reports in " << out
                << "\n";
      return rep.all_pass() ? 0 : 1;
    }
    if (*check_cmd) {
      if (!check_all) {
        std::cerr << "check: nothing to do (use --all)\n";
        return 2;
      }
      int failed = lieflow::experiments::run_acceptance_suite(
          std::cout, check_out, static_cast<uint64_t>(check_seed));
      return failed == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
