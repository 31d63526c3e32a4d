#include "vflow/discrete.hpp"

#include <string>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

using AnchorTerm = std::function<Vector(const Vector&)>;

// Shared recurrence x_{n+1} = theta_n a(x_n) + (1 - theta_n) T(x_n); every
// scheme goes through this one expression.
IterateSequence run(Scheme scheme, const Operator& map, const AnchorTerm& anchor_term, const ThetaSequence& theta,
                    const Vector& x1, long N, bool allow_closed_unit) {
  if (N < 1) throw InputError("iteration: N must be >= 1");
  require_point(x1, map.dim(), "x1");
  IterateSequence seq;
  seq.scheme = scheme;
  const auto n_states = static_cast<std::size_t>(N);
  seq.states.reserve(n_states);
  seq.thetas.reserve(n_states);
  seq.residuals.reserve(n_states);
  seq.increments.reserve(n_states);

  Vector x = x1;
  for (long n = 1; n <= N; ++n) {
    const double th = theta(n);
    const bool ok = allow_closed_unit ? (th >= 0.0 && th <= 1.0) : (th > 0.0 && th <= 1.0);
    if (!ok) {
      throw InputError(std::string("iteration: theta_") + std::to_string(n) + " = " + std::to_string(th) +
                       (allow_closed_unit ? " outside [0, 1]" : " outside (0, 1]"));
    }
    const Vector tx = apply(map, x);
    const Vector next = th * anchor_term(x) + (1.0 - th) * tx;
    seq.states.push_back(x);
    seq.thetas.push_back(th);
    seq.residuals.push_back((x - tx).norm());
    seq.increments.push_back((next - x).norm());
    x = next;
  }
  return seq;
}

}  // namespace

ThetaSequence sampled(ThetaSchedule schedule, double shift) {
  return [schedule = std::move(schedule), shift](long n) { return theta_n(schedule, n, shift); };
}

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::dds:
      return "dds";
    case Scheme::halpern:
      return "halpern";
    case Scheme::lions:
      return "lions";
    case Scheme::km:
      return "km";
  }
  return "unknown";
}

IterateSequence iterate_dds(const Problem& problem, const ThetaSequence& theta, const Vector& x1, long N) {
  require_point(x1, problem.dim(), "x1");
  if (!contains(problem.domain, x1)) throw InputError("iterate_dds: x1 lies outside C");
  const Contraction& f = problem.viscosity;
  auto seq = run(Scheme::dds, problem.map, [&f](const Vector& x) { return apply(f, x); }, theta, x1, N, false);
  seq.problem = problem;
  return seq;
}

IterateSequence iterate_halpern(const Operator& map, const ThetaSequence& theta, const Vector& x1, long N) {
  const Contraction zero = Contraction::constant(Vector::Zero(map.dim()));
  return run(Scheme::halpern, map, [&zero](const Vector& x) { return apply(zero, x); }, theta, x1, N, false);
}

IterateSequence iterate_lions(const Operator& map, const Vector& anchor, const ThetaSequence& theta,
                              const Vector& x1, long N) {
  require_point(anchor, map.dim(), "anchor");
  const Contraction u = Contraction::constant(anchor);
  auto seq = run(Scheme::lions, map, [&u](const Vector& x) { return apply(u, x); }, theta, x1, N, false);
  seq.anchor = anchor;
  return seq;
}

IterateSequence iterate_km(const Operator& map, const ThetaSequence& theta, const Vector& x1, long N) {
  return run(Scheme::km, map, [](const Vector& x) { return x; }, theta, x1, N, true);
}

}  // namespace vflow
