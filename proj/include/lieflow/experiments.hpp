#pragma once

#include <string>
#include <vector>

#include "lieflow/config.hpp"
#include "lieflow/report.hpp"

namespace lieflow::experiments {

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::vector<int> criteria;          // acceptance criteria hosted by this experiment
  std::vector<std::string> keys;      // recognized configuration keys (beyond common)
};

/// The eight named experiments, in stable order.
const std::vector<ExperimentInfo>& registry();

/// Pinned acceptance parameters for one experiment (the implementation
/// defaults are the acceptance values; this just names the experiment and
/// fixes the seed).
Config acceptance_config(const std::string& name, uint64_t seed = 42);

/// Runs one experiment. Throws std::invalid_argument naming the violated
/// constraint for bad configurations.
RunReport run(const Config& cfg);

/// Runs every experiment at the pinned acceptance parameters, writes reports
/// under out_dir/<experiment>/, prints one pass/fail line per criterion to
/// os, and returns the number of failed criteria.
int run_acceptance_suite(std::ostream& os, const std::string& out_dir, uint64_t seed = 42);

}  // namespace lieflow::experiments
