#pragma once

// Integration of the viscosity flow
//   x'(t) + x(t) = theta(t) f(x) + (1 - theta(t)) T(x)
// and of its perturbed, projected variant
//   y'(t) + y(t) = P_C(theta(t) f(y) + (1 - theta(t)) T(y) + h(t)).

#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "vflow/operators.hpp"
#include "vflow/schedules.hpp"

namespace vflow {

enum class Method { euler, rk4, rk45 };

std::string_view method_name(Method m);

struct SolverConfig {
  Method method = Method::rk45;
  double step = 0.1;  // fixed-step methods only
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  bool project_each_step = true;
  double t_end = 1000.0;
  int record_count = 512;     // log-spaced samples in (1 + t)
  double record_stride = 0.0; // > 0 selects a uniform grid instead
  long max_steps = 10'000'000;  // accepted + rejected rk45 steps before giving up

  /// Throws InputError on non-positive step, tolerances or horizon.
  void validate() const;
  /// Accuracy scale of the method: max(abs_tol, rel_tol) for rk45, h for
  /// Euler, h^4 for rk4.
  double tolerance() const;
};

/// Recording times, starting at 0 and ending at t_end.
std::vector<double> record_grid(const SolverConfig& cfg);

enum class PerturbationClass { l1, o_of_theta, neither };

std::string_view class_name(PerturbationClass c);

/// h(t) = c u / (1 + t)^p with unit direction u, or h = 0.
struct Perturbation {
  enum class Kind { zero, power_decay };
  Kind kind = Kind::zero;
  double c = 0.0;
  double p = 0.0;
  Vector direction;  // unit vector
  PerturbationClass claim = PerturbationClass::l1;

  static Perturbation zero(int dim);
  static Perturbation power_decay(double c, double p, const Vector& direction, PerturbationClass claim);

  Vector at(double t) const;
};

struct PerturbationClassification {
  bool l1 = false;
  bool o_of_theta = false;
  bool claim_consistent = false;
};

/// Classifies h analytically against the schedule.
PerturbationClassification classify(const Perturbation& h, const ThetaSchedule& s);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> derivative_norms;  // ||x'(t)|| from the vector field
  std::vector<double> residuals;         // ||x(t) - T x(t)||

  Problem problem;
  ThetaSchedule schedule;
  SolverConfig solver;
  std::optional<Perturbation> perturbation;

  long accepted_steps = 0;
  long rejected_steps = 0;

  std::size_t size() const { return times.size(); }
};

/// Step-size underflow or an exhausted step budget in the adaptive solver;
/// carries what was computed.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, Trajectory partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// theta(t) f(x) + (1 - theta(t)) T(x) - x
Vector rhs_cds(const Problem& p, const ThetaSchedule& s, double t, const Vector& x);

/// P_C(theta(t) f(x) + (1 - theta(t)) T(x) + h(t)) - x
Vector rhs_pcds(const Problem& p, const ThetaSchedule& s, const Perturbation& h, double t, const Vector& x);

/// Integrates over [0, t_end]. Without a perturbation the unperturbed flow is
/// solved; with one (even zero) the projected perturbed flow.
Trajectory integrate(const Problem& p, const ThetaSchedule& s, const Vector& x0, const SolverConfig& cfg,
                     const std::optional<Perturbation>& h = std::nullopt);

struct EulerBridgeReport {
  double max_gap = 0.0;      // relative to the largest state norm seen
  double max_abs_gap = 0.0;
  long steps = 0;
};

/// Explicit Euler with h = 1 from x(1) = x1, theta sampled at integer times,
/// against iterate_dds with theta_n = theta(n).
EulerBridgeReport euler_dds_equivalence(const Problem& p, const ThetaSchedule& s, const Vector& x1, long N);

}  // namespace vflow
