#pragma once

// Experiment configuration. The text format is a flat list of
//   section.key = value
// lines (grammar in docs/config-format.md); a file whose first non-blank
// character is '{' is read as JSON instead. Both end up in the same JSON tree.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vflow/flows.hpp"
#include "vflow/operators.hpp"
#include "vflow/schedules.hpp"
#include "vflow/spec_io.hpp"

namespace vflow {

Json parse_config_text(std::string_view text);
Json load_config_file(const std::filesystem::path& path);

enum class AnalysisKind { vp, rate, boundedness, stability, gronwall, conditions };

std::string_view analysis_name(AnalysisKind k);

struct AnalysisRequest {
  AnalysisKind kind;
  std::optional<double> nu;  // rate only
};

/// Parses "vp", "rate", "rate(0.5)", ...
AnalysisRequest parse_analysis(std::string_view text);

struct SweepGrid {
  std::vector<double> K, nu, alpha;
  std::vector<int> dim;

  bool empty() const { return K.empty() && nu.empty() && alpha.empty() && dim.empty(); }
};

struct ExperimentConfig {
  Json tree;

  std::optional<Problem> problem;  // absent only for schedule-only configs
  ThetaSchedule schedule = ThetaSchedule::power(2.0, 1.0);
  SolverConfig solver;
  std::optional<Perturbation> perturbation;
  std::optional<Vector> x0;
  std::vector<AnalysisRequest> analyses;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  long discrete_N = 1000;
  double discrete_shift = 0.0;
  long compare_N = 100;
  double rate_window = 0.5;
  int probe_count = 100;
  SweepGrid sweep;

  bool wants(AnalysisKind k) const;
  /// Problem and x0, throwing InputError when the config lacks them.
  const Problem& require_problem() const;
  const Vector& require_x0() const;
};

/// Builds and validates every component named in the tree. With `need_problem`
/// false, a missing operator section is tolerated.
ExperimentConfig config_from_json(const Json& tree, bool need_problem = true);

/// Rewrites every vector, matrix and dimension field of the tree for a new
/// dimension: vectors are zero-padded or truncated, box bounds repeat their
/// last entry, matrices are padded with the identity.
Json resize_dim(const Json& tree, int dim);

}  // namespace vflow
