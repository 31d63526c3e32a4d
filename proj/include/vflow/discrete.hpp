#pragma once

// The discrete iterations: viscosity, Halpern, Lions and
// Krasnoselskii-Mann, all 1-indexed from a given x_1.

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "vflow/operators.hpp"
#include "vflow/schedules.hpp"

namespace vflow {

/// n -> theta_n for n >= 1.
using ThetaSequence = std::function<double(long)>;

/// theta_n = theta(n + shift).
ThetaSequence sampled(ThetaSchedule schedule, double shift = 0.0);

enum class Scheme { dds, halpern, lions, km };

std::string_view scheme_name(Scheme s);

struct IterateSequence {
  Scheme scheme = Scheme::dds;
  std::vector<Vector> states;       // states[k] is x_{k+1}
  std::vector<double> thetas;       // theta_n used to produce x_{n+1}
  std::vector<double> residuals;    // ||x_n - T x_n||
  std::vector<double> increments;   // ||x_{n+1} - x_n||
  std::optional<Vector> anchor;     // u for Lions
  std::optional<Problem> problem;   // set for dds

  std::size_t size() const { return states.size(); }
};

/// x_{n+1} = theta_n f(x_n) + (1 - theta_n) T(x_n). Requires x1 in C and
/// theta_n in (0, 1].
IterateSequence iterate_dds(const Problem& problem, const ThetaSequence& theta, const Vector& x1, long N);

/// x_{n+1} = (1 - theta_n) T(x_n), i.e. dds with f = 0.
IterateSequence iterate_halpern(const Operator& map, const ThetaSequence& theta, const Vector& x1, long N);

/// x_{n+1} = theta_n u + (1 - theta_n) T(x_n), i.e. dds with f = u.
IterateSequence iterate_lions(const Operator& map, const Vector& anchor, const ThetaSequence& theta,
                              const Vector& x1, long N);

/// x_{n+1} = theta_n x_n + (1 - theta_n) T(x_n); theta_n may be 0 or 1.
IterateSequence iterate_km(const Operator& map, const ThetaSequence& theta, const Vector& x1, long N);

}  // namespace vflow
