#pragma once

// The batch commands behind the command-line tool. Each command computes its
// outputs in memory; write_outputs then publishes them into a directory
// through temporary files and renames, so a failed command leaves nothing.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vflow/config.hpp"

namespace vflow {

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  Json report;
  bool failed = false;  // some verdict came out "fail"

  const std::string& file(std::string_view name) const;
};

/// trajectory.csv, report.json, plot.script; only report.json when the sole
/// requested analysis is `conditions`.
Outputs run_experiment(const ExperimentConfig& cfg);

/// continuous.csv, discrete.csv, gap.csv and compare.json for N integer
/// steps of the flow against the discrete scheme.
Outputs compare_experiment(const ExperimentConfig& cfg, long N);

/// sweep.csv over the grid in cfg.sweep (K, nu, alpha, dim; outermost
/// first). Rows run on up to `threads` workers; row failures are recorded in
/// the row.
Outputs sweep_experiment(const ExperimentConfig& cfg, unsigned threads = 0);

/// Continuous and discrete condition flags of the configured schedule.
Json check_conditions(const ExperimentConfig& cfg);

void write_outputs(const std::filesystem::path& dir, const Outputs& out);

}  // namespace vflow
