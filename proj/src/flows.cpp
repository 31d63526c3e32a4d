#include "vflow/flows.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "vflow/discrete.hpp"
#include "vflow/errors.hpp"

namespace vflow {

namespace {

using Field = std::function<Vector(double, const Vector&)>;

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct AdaptiveStep {
  Vector y;
  double error;  // scaled RMS norm, accept when <= 1
};

AdaptiveStep dopri_step(const Field& f, double t, const Vector& x, double h, double atol, double rtol) {
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + c2 * h, x + h * (a21 * k1));
  const Vector k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
  const Vector k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vector k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vector k6 = f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  Vector y = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const Vector k7 = f(t + h, y);
  const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(x[i]), std::abs(y[i]));
    sum += (err[i] / scale) * (err[i] / scale);
  }
  return {std::move(y), std::sqrt(sum / static_cast<double>(x.size()))};
}

Vector rk4_step(const Field& f, double t, const Vector& x, double h) {
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector euler_step(const Field& f, double t, const Vector& x, double h) { return x + h * f(t, x); }

double initial_step(const Field& f, const Vector& x0, double atol, double rtol) {
  const Vector f0 = f(0.0, x0);
  const double d0 = (x0.array().abs() * rtol + atol).inverse().matrix().cwiseProduct(x0).norm();
  const double d1 = (x0.array().abs() * rtol + atol).inverse().matrix().cwiseProduct(f0).norm();
  const double h = 0.01 * d0 / d1;
  if (d0 < 1e-5 || d1 < 1e-5 || !std::isfinite(h) || h <= 0.0) return 1e-6;
  return h;
}

class Recorder {
 public:
  Recorder(Trajectory& traj, const Field& field) : traj_(traj), field_(field) {}

  void record(double t, const Vector& x) {
    traj_.times.push_back(t);
    traj_.states.push_back(x);
    traj_.derivative_norms.push_back(field_(t, x).norm());
    traj_.residuals.push_back((x - apply(traj_.problem.map, x)).norm());
  }

 private:
  Trajectory& traj_;
  const Field& field_;
};

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::euler:
      return "euler";
    case Method::rk4:
      return "rk4";
    case Method::rk45:
      return "rk45";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InputError("solver: t_end must be > 0");
  if (method != Method::rk45 && !(step > 0.0)) throw InputError("solver: step must be > 0");
  if (method == Method::rk45 && (!(abs_tol > 0.0) || !(rel_tol > 0.0)))
    throw InputError("solver: tolerances must be > 0");
  if (record_stride <= 0.0 && record_count < 2) throw InputError("solver: record_count must be >= 2");
  if (record_stride < 0.0) throw InputError("solver: record_stride must be >= 0");
  if (max_steps < 1) throw InputError("solver: max_steps must be >= 1");
}

double SolverConfig::tolerance() const {
  switch (method) {
    case Method::rk45:
      return std::max(abs_tol, rel_tol);
    case Method::rk4:
      return std::pow(step, 4);
    case Method::euler:
      return step;
  }
  return 0.0;
}

std::vector<double> record_grid(const SolverConfig& cfg) {
  std::vector<double> grid{0.0};
  if (cfg.record_stride > 0.0) {
    for (long k = 1;; ++k) {
      const double t = static_cast<double>(k) * cfg.record_stride;
      if (t >= cfg.t_end * (1.0 - 1e-12)) break;
      grid.push_back(t);
    }
  } else {
    const double span = std::log1p(cfg.t_end);
    const int n = cfg.record_count;
    for (int k = 1; k + 1 < n; ++k) {
      const double t = std::expm1(span * k / (n - 1));
      if (t > grid.back() && t < cfg.t_end) grid.push_back(t);
    }
  }
  grid.push_back(cfg.t_end);
  return grid;
}

std::string_view class_name(PerturbationClass c) {
  switch (c) {
    case PerturbationClass::l1:
      return "L1";
    case PerturbationClass::o_of_theta:
      return "o_of_theta";
    case PerturbationClass::neither:
      return "neither";
  }
  return "unknown";
}

Perturbation Perturbation::zero(int dim) {
  Perturbation h;
  h.direction = Vector::Zero(dim);
  return h;
}

Perturbation Perturbation::power_decay(double c, double p, const Vector& direction, PerturbationClass claim) {
  if (!std::isfinite(c) || !(p >= 0.0) || !std::isfinite(p)) throw InputError("perturbation: c finite, p >= 0");
  const double n = direction.norm();
  if (!(n > 0.0) || !direction.allFinite()) throw InputError("perturbation: direction must be nonzero");
  Perturbation h;
  h.kind = Kind::power_decay;
  h.c = c;
  h.p = p;
  h.direction = direction / n;
  h.claim = claim;
  return h;
}

Vector Perturbation::at(double t) const {
  if (kind == Kind::zero) return Vector::Zero(direction.size());
  return (c / std::pow(1.0 + t, p)) * direction;
}

PerturbationClassification classify(const Perturbation& h, const ThetaSchedule& s) {
  PerturbationClassification out;
  if (h.kind == Perturbation::Kind::zero || h.c == 0.0) {
    out.l1 = true;
    out.o_of_theta = true;
  } else {
    out.l1 = h.p > 1.0;
    if (const auto* p = std::get_if<PowerSchedule>(&s.shape())) {
      out.o_of_theta = h.p > p->nu;
    } else {
      // constant schedules and tables (held constant after the last knot)
      out.o_of_theta = h.p > 0.0;
    }
  }
  switch (h.claim) {
    case PerturbationClass::l1:
      out.claim_consistent = out.l1;
      break;
    case PerturbationClass::o_of_theta:
      out.claim_consistent = out.o_of_theta;
      break;
    case PerturbationClass::neither:
      out.claim_consistent = !out.l1 && !out.o_of_theta;
      break;
  }
  return out;
}

Vector rhs_cds(const Problem& p, const ThetaSchedule& s, double t, const Vector& x) {
  require_point(x, p.dim(), "state");
  const double th = theta(s, t);
  return th * apply(p.viscosity, x) + (1.0 - th) * apply(p.map, x) - x;
}

Vector rhs_pcds(const Problem& p, const ThetaSchedule& s, const Perturbation& h, double t, const Vector& x) {
  require_point(x, p.dim(), "state");
  const double th = theta(s, t);
  return project(p.domain, th * apply(p.viscosity, x) + (1.0 - th) * apply(p.map, x) + h.at(t)) - x;
}

Trajectory integrate(const Problem& p, const ThetaSchedule& s, const Vector& x0, const SolverConfig& cfg,
                     const std::optional<Perturbation>& h) {
  cfg.validate();
  require_point(x0, p.dim(), "x0");
  if (!contains(p.domain, x0)) {
    throw InputError("integrate: x0 lies outside C (distance " + std::to_string(distance(p.domain, x0)) + ")");
  }
  if (h && h->direction.size() != p.dim()) throw InputError("integrate: perturbation dimension mismatch");

  Field field;
  if (h) {
    field = [&](double t, const Vector& x) { return rhs_pcds(p, s, *h, t, x); };
  } else {
    field = [&](double t, const Vector& x) { return rhs_cds(p, s, t, x); };
  }
  auto safeguard = [&](Vector y) { return cfg.project_each_step ? project(p.domain, y) : y; };

  Trajectory traj{{}, {}, {}, {}, p, s, cfg, h, 0, 0};
  Recorder rec(traj, field);
  const std::vector<double> grid = record_grid(cfg);
  rec.record(0.0, x0);
  std::size_t next = 1;

  double t = 0.0;
  Vector x = x0;

  if (cfg.method != Method::rk45) {
    const double step = cfg.step;
    const auto n_steps = static_cast<long>(std::ceil(cfg.t_end / step - 1e-9));
    for (long k = 1; k <= n_steps; ++k) {
      const double t_next = (k == n_steps) ? cfg.t_end : static_cast<double>(k) * step;
      const double hk = t_next - t;
      x = safeguard(cfg.method == Method::rk4 ? rk4_step(field, t, x, hk) : euler_step(field, t, x, hk));
      t = t_next;
      ++traj.accepted_steps;
      if (next < grid.size() && grid[next] <= t + 1e-9 * step) {
        rec.record(t, x);
        while (next < grid.size() && grid[next] <= t + 1e-9 * step) ++next;
      }
    }
    return traj;
  }

  double hstep = std::min(initial_step(field, x0, cfg.abs_tol, cfg.rel_tol), cfg.t_end);
  while (next < grid.size()) {
    const double target = grid[next];
    const double room = target - t;
    const bool truncated = hstep >= room;
    const double hh = truncated ? room : hstep;
    AdaptiveStep st = dopri_step(field, t, x, hh, cfg.abs_tol, cfg.rel_tol);
    const bool finite = std::isfinite(st.error) && st.y.allFinite();
    const double factor =
        !finite ? 0.2 : st.error == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(st.error, -0.2), 0.2, 5.0);
    if (finite && st.error <= 1.0) {
      t = truncated ? target : t + hh;
      x = safeguard(std::move(st.y));
      ++traj.accepted_steps;
      if (truncated) {
        rec.record(t, x);
        ++next;
        hstep = std::max(hstep, hh * factor);
      } else {
        hstep = hh * factor;
      }
    } else {
      ++traj.rejected_steps;
      hstep = hh * std::min(factor, 1.0);
    }
    if (!(hstep >= 1e-14 * std::max(1.0, t))) {
      throw SolverFailure("integrate: step size underflow at t = " + std::to_string(t), std::move(traj));
    }
    if (traj.accepted_steps + traj.rejected_steps >= cfg.max_steps) {
      throw SolverFailure("integrate: step budget of " + std::to_string(cfg.max_steps) + " exhausted at t = " +
                              std::to_string(t),
                          std::move(traj));
    }
  }
  return traj;
}

EulerBridgeReport euler_dds_equivalence(const Problem& p, const ThetaSchedule& s, const Vector& x1, long N) {
  if (N < 1) throw InputError("euler_dds_equivalence: N must be >= 1");
  const Field field = [&](double t, const Vector& x) { return rhs_cds(p, s, t, x); };
  const IterateSequence dds = iterate_dds(p, sampled(s), x1, N + 1);

  EulerBridgeReport report;
  report.steps = N;
  Vector e = x1;
  double scale = 0.0;
  for (long n = 1; n <= N + 1; ++n) {
    const Vector& d = dds.states[static_cast<std::size_t>(n - 1)];
    report.max_abs_gap = std::max(report.max_abs_gap, (e - d).norm());
    scale = std::max({scale, e.norm(), d.norm()});
    if (n <= N) e = euler_step(field, static_cast<double>(n), e, 1.0);
  }
  report.max_gap = scale > 0.0 ? report.max_abs_gap / scale : report.max_abs_gap;
  return report;
}

}  // namespace vflow
