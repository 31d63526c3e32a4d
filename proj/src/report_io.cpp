#include "vflow/report_io.hpp"

#include <cmath>
#include <cstdio>

namespace vflow {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const VPSolution& vp) {
  return Json{{"q_star", to_json(vp.q_star)},
              {"iterations", vp.iterations},
              {"final_gap", vp.final_gap},
              {"gamma", vp.gamma},
              {"max_gap_ratio", vp.max_gap_ratio},
              {"contraction_certified", vp.contraction_certified}};
}

Json to_json(const VPResidualReport& r) {
  return Json{{"max_value", r.max_value}, {"probes", r.probes}, {"pass", r.pass}};
}

Json to_json(const GronwallReport& r) {
  return Json{{"inequality_ok", r.inequality_ok},
              {"bound_ok", r.bound_ok ? Json(*r.bound_ok) : Json(nullptr)},
              {"max_inequality_violation", r.max_inequality_violation},
              {"max_bound_violation", r.max_bound_violation}};
}

Json to_json(const RateReport& r) {
  return Json{{"nu_claimed", r.nu_claimed},
              {"window", {r.window_lo, r.window_hi}},
              {"fitted_slope", r.fitted_slope},
              {"sup_scaled_residual", r.sup_scaled_residual},
              {"sup_first_half", r.sup_first_half},
              {"sup_second_half", r.sup_second_half},
              {"samples_used", r.samples_used},
              {"samples_below_floor", r.samples_below_floor},
              {"floor", r.floor},
              {"sup_field_norm", r.sup_field_norm},
              {"kappa", optional_number(r.kappa)},
              {"verdict", std::string(verdict_name(r.verdict))},
              {"note", r.note}};
}

Json to_json(const BoundednessReport& r) {
  return Json{{"sup_distance", r.sup_distance},
              {"initial_distance", r.initial_distance},
              {"anchor_term", r.anchor_term},
              {"bound", r.bound},
              {"allowance", r.allowance},
              {"pass", r.pass}};
}

Json to_json(const StabilityReport& r) {
  return Json{{"median_first_decade", r.median_first_decade},
              {"median_last_decade", r.median_last_decade},
              {"sup_gap_tail", r.sup_gap_tail},
              {"final_gap", r.final_gap},
              {"l1", r.l1},
              {"o_of_theta", r.o_of_theta},
              {"claim_consistent", r.claim_consistent},
              {"perturbation_integral", r.perturbation_integral},
              {"perturbation_over_theta_end", r.perturbation_over_theta_end},
              {"verdict", std::string(verdict_name(r.verdict))}};
}

Json to_json(const ConditionFlag& f) {
  return Json{{"name", f.name},
              {"holds", f.holds},
              {"method", f.method == Evidence::analytic ? "analytic" : "numeric"},
              {"estimate", optional_number(f.estimate)},
              {"horizon", optional_number(f.horizon)},
              {"note", f.note}};
}

Json to_json(const ConditionReport& r) {
  Json flags = Json::array();
  for (const auto& f : r.flags) flags.push_back(to_json(f));
  return Json{{"flags", flags}};
}

Json to_json(const EulerBridgeReport& r) {
  return Json{{"max_gap", r.max_gap}, {"max_abs_gap", r.max_abs_gap}, {"steps", r.steps}};
}

namespace {

std::string header(const char* index, int dim) {
  std::string h = index;
  for (int i = 0; i < dim; ++i) h += ",x_" + std::to_string(i);
  h += ",residual,deriv_norm,dist_qstar\n";
  return h;
}

void append_row(std::string& out, const std::string& index, const Vector& x, double residual,
                const std::optional<double>& deriv, const std::optional<Vector>& q_star) {
  out += index;
  for (Eigen::Index i = 0; i < x.size(); ++i) out += ',' + format_double(x[i]);
  out += ',' + format_double(residual);
  out += ',';
  if (deriv) out += format_double(*deriv);
  out += ',';
  if (q_star) out += format_double((x - *q_star).norm());
  out += '\n';
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj, const std::optional<Vector>& q_star) {
  std::string out = header("t", traj.problem.dim());
  for (std::size_t k = 0; k < traj.size(); ++k)
    append_row(out, format_double(traj.times[k]), traj.states[k], traj.residuals[k], traj.derivative_norms[k], q_star);
  return out;
}

std::string iterates_csv(const IterateSequence& seq, int dim, const std::optional<Vector>& q_star) {
  std::string out = header("n", dim);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const std::optional<double> inc = k < seq.increments.size() ? std::optional<double>(seq.increments[k]) : std::nullopt;
    append_row(out, std::to_string(k + 1), seq.states[k], seq.residuals[k], inc, q_star);
  }
  return out;
}

std::string plot_script(const std::string& title, const std::string& xlabel, const std::string& ylabel, bool log_x,
                        bool log_y, const std::vector<PlotSeries>& series) {
  std::string out = "title " + title + "\nxlabel " + xlabel + "\nylabel " + ylabel + "\n";
  out += std::string("scale x ") + (log_x ? "log" : "linear") + "\n";
  out += std::string("scale y ") + (log_y ? "log" : "linear") + "\n";
  for (const auto& s : series) {
    out += "series " + s.name + "\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if ((log_x && !(s.x[k] > 0.0)) || (log_y && !(s.y[k] > 0.0))) continue;
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      out += format_double(s.x[k]) + ' ' + format_double(s.y[k]) + '\n';
    }
    out += "end\n";
  }
  return out;
}

std::string trajectory_plot(const Trajectory& traj, const std::optional<Vector>& q_star) {
  PlotSeries residual{"residual", {}, {}};
  PlotSeries dist{"dist_qstar", {}, {}};
  for (std::size_t k = 0; k < traj.size(); ++k) {
    residual.x.push_back(1.0 + traj.times[k]);
    residual.y.push_back(traj.residuals[k]);
    if (q_star) {
      dist.x.push_back(1.0 + traj.times[k]);
      dist.y.push_back((traj.states[k] - *q_star).norm());
    }
  }
  std::vector<PlotSeries> series{residual};
  if (q_star) series.push_back(dist);
  return plot_script("viscosity flow", "1+t", "||x-Tx||, ||x-q*||", true, true, series);
}

}  // namespace vflow
