#pragma once

// Ground truth and diagnostics: the variational-problem solution q*, its
// residual, the Gronwall-type estimate checker, rate fits and the
// convergence verdicts over trajectories.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vflow/flows.hpp"
#include "vflow/operators.hpp"

namespace vflow {

enum class Verdict { pass, fail, floor, not_applicable };

std::string_view verdict_name(Verdict v);

struct VPSolution {
  Vector q_star;
  int iterations = 0;
  double final_gap = 0.0;
  double gamma = 1.0;
  /// Largest observed gap ratio ||q_{k+1} - q_k|| / ||q_k - q_{k-1}|| over
  /// gaps large enough to resolve the ratio to 1e-12 in double precision.
  double max_gap_ratio = 0.0;
  /// Every gap ratio stayed within alpha + 1e-12 (after rounding allowance).
  bool contraction_certified = true;
};

/// Banach iteration q <- P_Fix(T)(f(q)) until ||q_{k+1} - q_k|| <= tol.
/// Throws UnsupportedError without a known Fix(T), NonConvergenceError past
/// max_iter.
VPSolution solve_vp(const Problem& p, const Vector& x_init, double tol = 1e-13, int max_iter = 100000);

struct VPResidualReport {
  double max_value = 0.0;
  int probes = 0;
  bool pass = true;
};

/// max over probes z of <f(q) - q, z - q>. Probes must be fixed by T.
VPResidualReport vp_residual(const Vector& q, const Problem& p, std::span<const Vector> probes, double tol);

/// Seeded points of Fix(T) (restricted to C).
std::vector<Vector> sample_fixed_points(const Problem& p, Rng& rng, int count = 100, double radius = 10.0);

struct GronwallTolerances {
  double inequality = 1e-6;
  double bound = 1e-8;
};

struct GronwallReport {
  bool inequality_ok = true;
  std::optional<bool> bound_ok;  // unset when the differential inequality fails
  double max_inequality_violation = 0.0;
  double max_bound_violation = 0.0;
};

/// Checks u' + 2 v u <= 2 w sqrt(u) on the grid and, when it holds,
///   sqrt(u(t)) <= e^{-V(t)} (sqrt(u(0)) + int_0^t e^{V(s)} w(s) ds),
/// with V and the outer integral by the trapezoid rule. u' comes from
/// `du` when given, otherwise from second-order finite differences.
GronwallReport gronwall_check(std::span<const double> grid, std::span<const double> u, std::span<const double> v,
                              std::span<const double> w, const GronwallTolerances& tol,
                              std::span<const double> du = {});

struct GronwallTriple {
  std::vector<double> grid, u, v, w, du;
};

/// u = ||x - q*||^2, v = gamma theta, w = theta ||f(q*) - q*||, and the exact
/// u' = 2 <x', x - q*> along a recorded trajectory.
GronwallTriple cds_gronwall_triple(const Trajectory& traj, const Vector& q_star);

struct RateReport {
  double nu_claimed = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double fitted_slope = 0.0;
  double sup_scaled_residual = 0.0;
  double sup_first_half = 0.0;
  double sup_second_half = 0.0;
  int samples_used = 0;
  int samples_below_floor = 0;
  double floor = 0.0;              // residuals at or below this are left out of the fit
  double sup_field_norm = 0.0;     // sup of ||f(x)|| + ||T x|| along the trajectory
  std::optional<double> kappa;     // gamma K / nu for power schedules
  Verdict verdict = Verdict::fail;
  std::string note;
};

/// Residual values at or below this are treated as zero in the log fit.
inline constexpr double kResidualFloor = 1e-12;

/// Least-squares slope of log residual against log(1 + t) over
/// [t_end (1 - window_fraction), t_end]. For rk45 trajectories the floor is
/// raised to the solver's absolute tolerance.
RateReport fit_rate(const Trajectory& traj, double nu, double window_fraction = 0.5);

struct BoundednessReport {
  double sup_distance = 0.0;    // sup_t ||x(t) - q*||
  double initial_distance = 0.0;
  double anchor_term = 0.0;     // ||f(q*) - q*|| / gamma
  double bound = 0.0;           // max of the two
  double allowance = 0.0;       // 10 x solver tolerance
  bool pass = true;
};

BoundednessReport boundedness_verdict(const Trajectory& traj, const VPSolution& vp, const Problem& p);

struct StabilityReport {
  double median_first_decade = 0.0;
  double median_last_decade = 0.0;
  double sup_gap_tail = 0.0;
  double final_gap = 0.0;
  bool l1 = false;
  bool o_of_theta = false;
  bool claim_consistent = true;
  double perturbation_integral = 0.0;        // int_0^t_end ||h||
  double perturbation_over_theta_end = 0.0;  // ||h(t_end)|| / theta(t_end)
  Verdict verdict = Verdict::not_applicable;
};

/// Compares the unperturbed trajectory x with the perturbed one y.
StabilityReport stability_verdict(const Trajectory& cds, const Trajectory& pcds);

}  // namespace vflow
