#pragma once

// The relaxation schedule theta(t) / theta_n, its derivative and running
// integral, and checkers for the continuous (C'1, C'2, C'5) and discrete
// (C0..C5) conditions.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vflow {

/// theta(t) = K / (1 + t)^nu
struct PowerSchedule {
  double K;
  double nu;
};

struct ConstantSchedule {
  double c;
};

/// Natural cubic spline through (times, values), held constant after the
/// last knot. Coefficients are per segment: v + b s + c s^2 + d s^3.
struct TableSchedule {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> b, c, d;
};

using ScheduleShape = std::variant<PowerSchedule, ConstantSchedule, TableSchedule>;

class ThetaSchedule {
 public:
  /// K > 0, nu in (0, 1]. With `clamp`, theta is capped at 1 (relevant for K > 1).
  static ThetaSchedule power(double K, double nu, bool clamp = true);
  /// c in (0, 1].
  static ThetaSchedule constant(double c);
  /// times strictly increasing from 0, values > 0.
  static ThetaSchedule table(std::vector<double> times, std::vector<double> values, bool clamp = true);

  const ScheduleShape& shape() const { return shape_; }
  bool clamp() const { return clamp_; }
  std::string_view kind_name() const;

  /// End of the initial interval [0, t_c] on which the cap theta = 1 is active
  /// (power family with K > 1 and clamping on).
  std::optional<double> clamp_end() const;

 private:
  ThetaSchedule(ScheduleShape shape, bool clamp) : shape_(std::move(shape)), clamp_(clamp) {}

  ScheduleShape shape_;
  bool clamp_;
};

double theta(const ThetaSchedule& s, double t);

struct Slope {
  double value;
  bool one_sided;  // evaluated at a clamp breakpoint; value is the right derivative
};

/// Derivative of theta as evaluated (zero where the cap is active).
Slope theta_prime(const ThetaSchedule& s, double t);

/// Integral of theta over [0, t]. Closed form for power/constant, adaptive
/// Gauss-Kronrod for tables.
double big_theta(const ThetaSchedule& s, double t);

/// theta_n := theta(n + shift).
double theta_n(const ThetaSchedule& s, long n, double shift = 0.0);

enum class Evidence { analytic, numeric };

struct ConditionFlag {
  std::string name;
  bool holds = false;
  Evidence method = Evidence::analytic;
  std::optional<double> estimate;  // last-window numeric value of the quantity
  std::optional<double> horizon;   // horizon (t or N) behind the estimate
  std::string note;
};

struct ConditionReport {
  std::vector<ConditionFlag> flags;

  const ConditionFlag& flag(std::string_view name) const;
};

/// C'1: theta -> 0; C'2: integral diverges; C'5: |theta'| integrable or theta'/theta -> 0.
ConditionReport check_continuous_conditions(const ThetaSchedule& s, double horizon);

/// C0..C5 for theta_n = theta(n + shift), n = 1..N.
ConditionReport check_discrete_conditions(const ThetaSchedule& s, long N, double shift = 0.0);

}  // namespace vflow
