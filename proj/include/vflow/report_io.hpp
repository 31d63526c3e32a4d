#pragma once

// JSON forms of the analysis reports, and the CSV / plot-script text emitted
// by the experiment driver. Floats are written with 17 significant digits.

#include <optional>
#include <string>
#include <vector>

#include "vflow/analysis.hpp"
#include "vflow/discrete.hpp"
#include "vflow/flows.hpp"
#include "vflow/schedules.hpp"
#include "vflow/spec_io.hpp"

namespace vflow {

std::string format_double(double v);

Json to_json(const VPSolution& vp);
Json to_json(const VPResidualReport& r);
Json to_json(const GronwallReport& r);
Json to_json(const RateReport& r);
Json to_json(const BoundednessReport& r);
Json to_json(const StabilityReport& r);
Json to_json(const ConditionFlag& f);
Json to_json(const ConditionReport& r);
Json to_json(const EulerBridgeReport& r);

/// Header `t,x_0,...,x_{d-1},residual,deriv_norm,dist_qstar`; the last column
/// is blank without q*.
std::string trajectory_csv(const Trajectory& traj, const std::optional<Vector>& q_star);

/// Same layout with `n` for `t`; deriv_norm holds the increment ||x_{n+1} - x_n||.
std::string iterates_csv(const IterateSequence& seq, int dim, const std::optional<Vector>& q_star);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

/// Text of directives and point blocks:
///   title ..., xlabel ..., ylabel ..., scale x log, scale y log,
///   series NAME / "x y" lines / end
/// Points that cannot be shown on a log axis are dropped.
std::string plot_script(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                        bool log_x, bool log_y, const std::vector<PlotSeries>& series);

/// Residual and distance-to-q* series against 1 + t, log-log.
std::string trajectory_plot(const Trajectory& traj, const std::optional<Vector>& q_star);

}  // namespace vflow
