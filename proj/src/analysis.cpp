#include "vflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vflow/errors.hpp"
#include "vflow/spec_io.hpp"

namespace vflow {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::vector<double> central_differences(std::span<const double> t, std::span<const double> u) {
  const std::size_t n = t.size();
  std::vector<double> du(n, 0.0);
  if (n < 3) {
    if (n == 2) du[0] = du[1] = (u[1] - u[0]) / (t[1] - t[0]);
    return du;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    du[i] = -h2 / (h1 * (h1 + h2)) * u[i - 1] + (h2 - h1) / (h1 * h2) * u[i] + h1 / (h2 * (h1 + h2)) * u[i + 1];
  }
  {
    const double h1 = t[1] - t[0];
    const double h2 = t[2] - t[1];
    du[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1] -
            h1 / (h2 * (h1 + h2)) * u[2];
  }
  {
    const double h1 = t[n - 2] - t[n - 3];
    const double h2 = t[n - 1] - t[n - 2];
    du[n - 1] = h2 / (h1 * (h1 + h2)) * u[n - 3] - (h1 + h2) / (h1 * h2) * u[n - 2] +
                (2.0 * h2 + h1) / (h2 * (h1 + h2)) * u[n - 1];
  }
  return du;
}

bool is_intersection(const std::optional<ConvexSet>& s) {
  return s && std::holds_alternative<Intersection>(s->shape());
}

}  // namespace

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::floor:
      return "floor";
    case Verdict::not_applicable:
      return "n/a";
  }
  return "unknown";
}

VPSolution solve_vp(const Problem& p, const Vector& x_init, double tol, int max_iter) {
  if (!(tol > 0.0)) throw InputError("solve_vp: tol must be > 0");
  require_point(x_init, p.dim(), "solve_vp initial point");
  const auto fix = p.fixed_set();
  if (!fix) throw UnsupportedError("solve_vp: Fix(T) is not known for this operator");
  const double alpha = p.viscosity.alpha();
  const double inexact = is_intersection(fix) ? 4.0 * kIntersectionStop : 0.0;

  VPSolution sol;
  sol.gamma = p.gamma();
  Vector q = project(*fix, x_init);
  double prev_gap = -1.0;
  for (int k = 1; k <= max_iter; ++k) {
    Vector next = project(*fix, apply(p.viscosity, q));
    const double gap = (next - q).norm();
    if (prev_gap > 0.0) {
      const double allowance = (16.0 * kEps + inexact) * (1.0 + next.norm() + q.norm());
      if (gap > (alpha + 1e-12) * prev_gap + allowance) sol.contraction_certified = false;
      if (prev_gap > 1e12 * allowance) sol.max_gap_ratio = std::max(sol.max_gap_ratio, gap / prev_gap);
    }
    q = std::move(next);
    sol.iterations = k;
    sol.final_gap = gap;
    if (gap <= tol) {
      sol.q_star = q;
      return sol;
    }
    prev_gap = gap;
  }
  throw NonConvergenceError("solve_vp: no convergence within " + std::to_string(max_iter) + " iterations",
                            sol.final_gap);
}

VPResidualReport vp_residual(const Vector& q, const Problem& p, std::span<const Vector> probes, double tol) {
  require_point(q, p.dim(), "vp_residual point");
  const Vector drift = apply(p.viscosity, q) - q;
  VPResidualReport report;
  report.max_value = probes.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& z : probes) {
    require_point(z, p.dim(), "vp_residual probe");
    if ((apply(p.map, z) - z).norm() > kMembershipTol) throw InputError("vp_residual: probe is not fixed by T");
    report.max_value = std::max(report.max_value, inner(drift, z - q));
    ++report.probes;
  }
  report.pass = report.max_value <= tol;
  return report;
}

std::vector<Vector> sample_fixed_points(const Problem& p, Rng& rng, int count, double radius) {
  const auto fix = p.fixed_set();
  if (!fix) throw UnsupportedError("sample_fixed_points: Fix(T) is not known for this operator");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out.push_back(sample_point(*fix, rng, radius));
  return out;
}

GronwallReport gronwall_check(std::span<const double> grid, std::span<const double> u, std::span<const double> v,
                              std::span<const double> w, const GronwallTolerances& tol,
                              std::span<const double> du) {
  const std::size_t n = grid.size();
  if (n < 2 || u.size() != n || v.size() != n || w.size() != n || (!du.empty() && du.size() != n))
    throw InputError("gronwall_check: samples must share the grid (at least two points)");
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("gronwall_check: grid must increase strictly");
    if (u[i] < 0.0 || v[i] < 0.0 || w[i] < 0.0) throw InputError("gronwall_check: negative sample");
  }
  const std::vector<double> slope =
      du.empty() ? central_differences(grid, u) : std::vector<double>(du.begin(), du.end());

  GronwallReport report;
  report.max_inequality_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double excess = slope[i] + 2.0 * v[i] * u[i] - 2.0 * w[i] * std::sqrt(u[i]);
    report.max_inequality_violation = std::max(report.max_inequality_violation, excess);
  }
  report.inequality_ok = report.max_inequality_violation <= tol.inequality;

  double big_v = 0.0;
  double weighted = 0.0;  // int_0^t e^{V(s)} w(s) ds
  const double root0 = std::sqrt(u[0]);
  report.max_bound_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double h = grid[i] - grid[i - 1];
      const double prev_v = big_v;
      big_v += 0.5 * h * (v[i] + v[i - 1]);
      weighted += 0.5 * h * (std::exp(prev_v) * w[i - 1] + std::exp(big_v) * w[i]);
    }
    const double bound = std::exp(-big_v) * (root0 + weighted);
    report.max_bound_violation = std::max(report.max_bound_violation, std::sqrt(u[i]) - bound);
  }
  if (report.inequality_ok) report.bound_ok = report.max_bound_violation <= tol.bound;
  return report;
}

GronwallTriple cds_gronwall_triple(const Trajectory& traj, const Vector& q_star) {
  const Problem& p = traj.problem;
  const double anchor = (apply(p.viscosity, q_star) - q_star).norm();
  GronwallTriple out;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    const Vector& x = traj.states[i];
    const Vector field = traj.perturbation ? rhs_pcds(p, traj.schedule, *traj.perturbation, t, x)
                                           : rhs_cds(p, traj.schedule, t, x);
    const double th = theta(traj.schedule, t);
    out.grid.push_back(t);
    out.u.push_back((x - q_star).squaredNorm());
    out.v.push_back(p.gamma() * th);
    out.w.push_back(th * anchor);
    out.du.push_back(2.0 * field.dot(x - q_star));
  }
  return out;
}

RateReport fit_rate(const Trajectory& traj, double nu, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw InputError("fit_rate: window_fraction must lie in (0, 1]");
  if (!(nu > 0.0)) throw InputError("fit_rate: nu must be > 0");
  if (traj.size() < 2) throw InputError("fit_rate: trajectory too short");
  RateReport report;
  report.nu_claimed = nu;
  report.window_hi = traj.times.back();
  report.window_lo = report.window_hi * (1.0 - window_fraction);
  const double mid = 0.5 * (report.window_lo + report.window_hi);

  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vector& x = traj.states[i];
    report.sup_field_norm =
        std::max(report.sup_field_norm, apply(traj.problem.viscosity, x).norm() + apply(traj.problem.map, x).norm());
  }
  if (const auto* pw = std::get_if<PowerSchedule>(&traj.schedule.shape())) {
    report.kappa = traj.problem.gamma() * pw->K / pw->nu;
  }

  // below the adaptive solver's absolute tolerance the residual is integration noise
  report.floor = traj.solver.method == Method::rk45 ? std::max(kResidualFloor, traj.solver.abs_tol) : kResidualFloor;

  std::vector<double> xs, ys;
  int in_window = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    if (t < report.window_lo) continue;
    ++in_window;
    const double r = traj.residuals[i];
    if (!(r > report.floor)) {
      ++report.samples_below_floor;
      continue;
    }
    xs.push_back(std::log1p(t));
    ys.push_back(std::log(r));
    const double scaled = std::pow(1.0 + t, nu) * r;
    report.sup_scaled_residual = std::max(report.sup_scaled_residual, scaled);
    double& half = t <= mid ? report.sup_first_half : report.sup_second_half;
    half = std::max(half, scaled);
  }
  if (in_window < 30) {
    throw InputError("fit_rate: window holds " + std::to_string(in_window) + " samples, need at least 30");
  }
  report.samples_used = static_cast<int>(xs.size());
  if (report.samples_below_floor > 0) {
    report.note = std::to_string(report.samples_below_floor) + " window samples at or below the residual floor excluded";
  }
  if (report.samples_used < 30) {
    report.verdict = Verdict::floor;
    report.fitted_slope = std::numeric_limits<double>::quiet_NaN();
    if (report.note.empty()) report.note = "residuals at the solver floor";
    return report;
  }

  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  report.fitted_slope = sxy / sxx;

  const bool slope_ok = report.fitted_slope <= -nu + 0.1;
  const bool sup_ok = std::isfinite(report.sup_scaled_residual) &&
                      report.sup_second_half <= report.sup_first_half * (1.0 + 1e-9);
  report.verdict = slope_ok && sup_ok ? Verdict::pass : Verdict::fail;
  return report;
}

BoundednessReport boundedness_verdict(const Trajectory& traj, const VPSolution& vp, const Problem& p) {
  if (traj.states.empty()) throw InputError("boundedness_verdict: empty trajectory");
  const Vector& q = vp.q_star;
  require_point(q, p.dim(), "q*");
  BoundednessReport report;
  for (const auto& x : traj.states) report.sup_distance = std::max(report.sup_distance, (x - q).norm());
  report.initial_distance = (traj.states.front() - q).norm();
  report.anchor_term = (apply(p.viscosity, q) - q).norm() / p.gamma();
  report.bound = std::max(report.initial_distance, report.anchor_term);
  report.allowance = 10.0 * traj.solver.tolerance();
  report.pass = report.sup_distance <= report.bound + report.allowance;
  return report;
}

StabilityReport stability_verdict(const Trajectory& cds, const Trajectory& pcds) {
  if (!pcds.perturbation) throw InputError("stability_verdict: second trajectory carries no perturbation");
  if (cds.perturbation && cds.perturbation->kind != Perturbation::Kind::zero)
    throw InputError("stability_verdict: first trajectory must be unperturbed");
  if (to_json(cds.problem) != to_json(pcds.problem)) throw InputError("stability_verdict: problems differ");
  if (to_json(cds.schedule) != to_json(pcds.schedule)) throw InputError("stability_verdict: schedules differ");
  if (cds.states.empty() || pcds.states.empty() || cds.states.front() != pcds.states.front())
    throw InputError("stability_verdict: initial points differ");
  if (cds.times.back() != pcds.times.back()) throw InputError("stability_verdict: horizons differ");

  // Gap on the unperturbed grid, interpolating y linearly where grids differ.
  std::vector<double> gap(cds.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < cds.size(); ++i) {
    const double t = cds.times[i];
    while (j + 1 < pcds.size() && pcds.times[j + 1] < t) ++j;
    Vector y;
    if (pcds.times[j] == t || j + 1 >= pcds.size()) {
      y = pcds.states[j];
    } else if (pcds.times[j + 1] == t) {
      y = pcds.states[j + 1];
    } else {
      const double a = (t - pcds.times[j]) / (pcds.times[j + 1] - pcds.times[j]);
      y = (1.0 - a) * pcds.states[j] + a * pcds.states[j + 1];
    }
    gap[i] = (cds.states[i] - y).norm();
  }

  const double t_end = cds.times.back();
  std::vector<double> first, last;
  StabilityReport report;
  for (std::size_t i = 0; i < cds.size(); ++i) {
    const double t = cds.times[i];
    if (1.0 + t <= 10.0) first.push_back(gap[i]);
    if (1.0 + t >= (1.0 + t_end) / 10.0) {
      last.push_back(gap[i]);
      report.sup_gap_tail = std::max(report.sup_gap_tail, gap[i]);
    }
  }
  report.median_first_decade = median(first);
  report.median_last_decade = median(last);
  report.final_gap = gap.back();

  const Perturbation& h = *pcds.perturbation;
  const auto cls = classify(h, pcds.schedule);
  report.l1 = cls.l1;
  report.o_of_theta = cls.o_of_theta;
  report.claim_consistent = cls.claim_consistent;
  if (h.kind == Perturbation::Kind::power_decay) {
    const double c = std::abs(h.c);
    report.perturbation_integral = h.p == 1.0 ? c * std::log1p(t_end)
                                              : c * (std::pow(1.0 + t_end, 1.0 - h.p) - 1.0) / (1.0 - h.p);
    report.perturbation_over_theta_end = h.at(t_end).norm() / theta(pcds.schedule, t_end);
  }

  if (!cls.l1 && !cls.o_of_theta) {
    report.verdict = Verdict::not_applicable;
  } else {
    report.verdict =
        report.median_last_decade <= report.median_first_decade / 10.0 ? Verdict::pass : Verdict::fail;
  }
  return report;
}

}  // namespace vflow
