#include "vflow/experiment.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "vflow/analysis.hpp"
#include "vflow/discrete.hpp"
#include "vflow/errors.hpp"
#include "vflow/random.hpp"
#include "vflow/report_io.hpp"

namespace vflow {

namespace {

constexpr double kVpResidualTol = 1e-8;
constexpr double kBridgeTol = 1e-13;
constexpr GronwallTolerances kGronwallTol{1e-6, 1e-8};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string analysis_key(const AnalysisRequest& a) {
  std::string key(analysis_name(a.kind));
  if (a.nu) key += "(" + format_double(*a.nu) + ")";
  return key;
}

Json config_summary(const ExperimentConfig& cfg) {
  Json out;
  if (cfg.problem) out["problem"] = to_json(*cfg.problem);
  out["schedule"] = to_json(cfg.schedule);
  out["solver"] = to_json(cfg.solver);
  out["perturbation"] = cfg.perturbation ? to_json(*cfg.perturbation) : Json(nullptr);
  out["x0"] = cfg.x0 ? to_json(*cfg.x0) : Json(nullptr);
  out["seed"] = cfg.seed;
  Json names = Json::array();
  for (const auto& a : cfg.analyses) names.push_back(analysis_key(a));
  out["analyses"] = names;
  return out;
}

Json conditions_json(const ExperimentConfig& cfg) {
  return Json{{"continuous", to_json(check_continuous_conditions(cfg.schedule, cfg.solver.t_end))},
              {"discrete", to_json(check_discrete_conditions(cfg.schedule, cfg.discrete_N, cfg.discrete_shift))},
              {"discrete_N", cfg.discrete_N},
              {"discrete_shift", cfg.discrete_shift}};
}

double rate_nu(const ExperimentConfig& cfg, const AnalysisRequest& a) {
  if (a.nu) return *a.nu;
  if (const auto* p = std::get_if<PowerSchedule>(&cfg.schedule.shape())) return p->nu;
  throw InputError("rate: give nu as rate(nu) for a non-power schedule");
}

Json not_applicable(const std::string& note) { return Json{{"verdict", "n/a"}, {"note", note}}; }

struct QStar {
  std::optional<VPSolution> vp;
  std::string note;
};

QStar find_q_star(const Problem& p, const Vector& x0) {
  QStar out;
  if (!p.map.fix_set()) {
    out.note = "Fix(T) is not known for this operator";
    return out;
  }
  try {
    out.vp = solve_vp(p, x0);
  } catch (const NonConvergenceError& e) {
    out.note = e.what();
  }
  return out;
}

}  // namespace

const std::string& Outputs::file(std::string_view name) const {
  for (const auto& [n, content] : files)
    if (n == name) return content;
  throw InputError("no output named " + std::string(name));
}

Outputs run_experiment(const ExperimentConfig& cfg) {
  Outputs out;
  Json report;
  report["config"] = config_summary(cfg);
  Json analyses = Json::object();
  Json verdicts = Json::object();

  if (cfg.wants(AnalysisKind::conditions)) analyses["conditions"] = conditions_json(cfg);

  const bool only_conditions =
      !cfg.analyses.empty() && std::all_of(cfg.analyses.begin(), cfg.analyses.end(),
                                           [](const AnalysisRequest& a) { return a.kind == AnalysisKind::conditions; });
  if (only_conditions) {
    report["analyses"] = analyses;
    report["verdicts"] = verdicts;
    report["status"] = "pass";
    out.report = report;
    out.files.emplace_back("report.json", dump(report));
    return out;
  }

  const Problem& p = cfg.require_problem();
  const Vector& x0 = cfg.require_x0();
  const Trajectory traj = integrate(p, cfg.schedule, x0, cfg.solver, cfg.perturbation);
  std::optional<Trajectory> reference;
  if (cfg.perturbation && (cfg.wants(AnalysisKind::stability) || cfg.wants(AnalysisKind::gronwall)))
    reference = integrate(p, cfg.schedule, x0, cfg.solver);
  const Trajectory& unperturbed = reference ? *reference : traj;

  const QStar qs = find_q_star(p, x0);
  std::optional<Vector> q_star;
  if (qs.vp) q_star = qs.vp->q_star;

  for (const auto& a : cfg.analyses) {
    const std::string key = analysis_key(a);
    Json entry;
    switch (a.kind) {
      case AnalysisKind::conditions:
        continue;
      case AnalysisKind::vp: {
        if (!qs.vp) {
          entry = not_applicable(qs.note);
          break;
        }
        Rng rng = make_rng(cfg.seed, "vp.probes");
        const auto probes = sample_fixed_points(p, rng, cfg.probe_count);
        const auto residual = vp_residual(qs.vp->q_star, p, probes, kVpResidualTol);
        entry = Json{{"solution", to_json(*qs.vp)},
                     {"residual", to_json(residual)},
                     {"tolerance", kVpResidualTol},
                     {"verdict", residual.pass && qs.vp->contraction_certified ? "pass" : "fail"}};
        break;
      }
      case AnalysisKind::rate:
        entry = to_json(fit_rate(traj, rate_nu(cfg, a), cfg.rate_window));
        break;
      case AnalysisKind::boundedness: {
        if (!qs.vp) {
          entry = not_applicable(qs.note);
          break;
        }
        const auto b = boundedness_verdict(traj, *qs.vp, p);
        entry = to_json(b);
        entry["verdict"] = b.pass ? "pass" : "fail";
        break;
      }
      case AnalysisKind::gronwall: {
        if (!q_star) {
          entry = not_applicable(qs.note);
          break;
        }
        const auto tri = cds_gronwall_triple(unperturbed, *q_star);
        const auto g = gronwall_check(tri.grid, tri.u, tri.v, tri.w, kGronwallTol, tri.du);
        entry = to_json(g);
        entry["tolerances"] = {{"inequality", kGronwallTol.inequality}, {"bound", kGronwallTol.bound}};
        entry["verdict"] = g.inequality_ok && g.bound_ok.value_or(false) ? "pass" : "fail";
        break;
      }
      case AnalysisKind::stability: {
        if (!cfg.perturbation) {
          entry = not_applicable("no perturbation configured");
          break;
        }
        const auto s = stability_verdict(unperturbed, traj);
        entry = to_json(s);
        if (q_star) entry["final_dist_qstar"] = (traj.states.back() - *q_star).norm();
        break;
      }
    }
    const std::string verdict = entry.value("verdict", "n/a");
    verdicts[key] = verdict;
    if (verdict == "fail") out.failed = true;
    analyses[key] = entry;
  }

  report["analyses"] = analyses;
  report["verdicts"] = verdicts;
  report["solve"] = Json{{"accepted_steps", traj.accepted_steps},
                         {"rejected_steps", traj.rejected_steps},
                         {"samples", traj.size()},
                         {"t_end", traj.times.back()},
                         {"final_state", to_json(traj.states.back())},
                         {"final_residual", traj.residuals.back()},
                         {"final_dist_qstar", q_star ? Json((traj.states.back() - *q_star).norm()) : Json(nullptr)},
                         {"q_star", q_star ? to_json(*q_star) : Json(nullptr)}};
  if (!qs.note.empty()) report["solve"]["q_star_note"] = qs.note;
  report["status"] = out.failed ? "fail" : "pass";
  out.report = report;

  out.files.emplace_back("trajectory.csv", trajectory_csv(traj, q_star));
  out.files.emplace_back("report.json", dump(report));
  out.files.emplace_back("plot.script", trajectory_plot(traj, q_star));
  return out;
}

Outputs compare_experiment(const ExperimentConfig& cfg, long N) {
  if (N < 0) throw InputError("compare: N must be >= 0");
  const Problem& p = cfg.require_problem();
  const Vector& x0 = cfg.require_x0();
  const QStar qs = find_q_star(p, x0);
  std::optional<Vector> q_star;
  if (qs.vp) q_star = qs.vp->q_star;

  Outputs out;
  Json report{{"N", N}, {"config", config_summary(cfg)}, {"q_star", q_star ? to_json(*q_star) : Json(nullptr)}};
  std::string gap = "n,t,gap\n";

  if (N == 0) {
    const std::string header = trajectory_csv(Trajectory{{}, {}, {}, {}, p, cfg.schedule, cfg.solver, {}, 0, 0}, {});
    report["bridge"] = nullptr;
    report["status"] = "pass";
    out.report = report;
    out.files = {{"continuous.csv", header},
                 {"discrete.csv", iterates_csv(IterateSequence{}, p.dim(), {})},
                 {"gap.csv", gap},
                 {"compare.json", dump(report)}};
    return out;
  }

  SolverConfig solver = cfg.solver;
  solver.t_end = static_cast<double>(N);
  solver.record_stride = 1.0;
  const Trajectory traj = integrate(p, cfg.schedule, x0, solver, cfg.perturbation);
  const IterateSequence seq = iterate_dds(p, sampled(cfg.schedule), x0, N);

  double max_gap = 0.0;
  for (long n = 1; n <= N; ++n) {
    const auto k = static_cast<std::size_t>(n);
    const double g = (traj.states[k] - seq.states[k - 1]).norm();
    max_gap = std::max(max_gap, g);
    gap += std::to_string(n) + ',' + format_double(traj.times[k]) + ',' + format_double(g) + '\n';
  }

  const EulerBridgeReport bridge = euler_dds_equivalence(p, cfg.schedule, x0, N);
  Json bridge_json = to_json(bridge);
  bridge_json["tolerance"] = kBridgeTol;
  bridge_json["verdict"] = bridge.max_gap <= kBridgeTol ? "pass" : "fail";
  out.failed = bridge.max_gap > kBridgeTol;

  report["bridge"] = bridge_json;
  report["max_gap"] = max_gap;
  report["final_gap"] = (traj.states.back() - seq.states.back()).norm();
  if (q_star) {
    report["continuous_final_dist_qstar"] = (traj.states.back() - *q_star).norm();
    report["discrete_final_dist_qstar"] = (seq.states.back() - *q_star).norm();
  }
  report["status"] = out.failed ? "fail" : "pass";
  out.report = report;
  out.files = {{"continuous.csv", trajectory_csv(traj, q_star)},
               {"discrete.csv", iterates_csv(seq, p.dim(), q_star)},
               {"gap.csv", gap},
               {"compare.json", dump(report)}};
  return out;
}

namespace {

struct SweepPoint {
  double K, nu, alpha;
  int dim;
};

struct SweepRow {
  std::optional<double> slope, sup_scaled, final_dist;
  std::string rate_verdict, bound_verdict, error;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + '"';
}

SweepRow sweep_row(const ExperimentConfig& base, const SweepPoint& pt) {
  SweepRow row;
  try {
    Json tree = base.tree;
    tree.erase("sweep");
    if (!base.sweep.dim.empty()) tree = resize_dim(tree, pt.dim);
    if (!base.sweep.K.empty() || !base.sweep.nu.empty()) {
      Json& s = tree["schedule"];
      if (s.value("kind", "") != "power") throw InputError("sweep over K or nu needs a power schedule");
      if (!base.sweep.K.empty()) s["K"] = pt.K;
      if (!base.sweep.nu.empty()) s["nu"] = pt.nu;
    }
    if (!base.sweep.alpha.empty()) {
      Json& f = tree["contraction"];
      if (f.value("kind", "") != "affine") throw InputError("sweep over alpha needs an affine contraction");
      f["alpha"] = pt.alpha;
    }
    const ExperimentConfig cfg = config_from_json(tree);
    const Problem& p = cfg.require_problem();
    const Vector& x0 = cfg.require_x0();
    const Trajectory traj = integrate(p, cfg.schedule, x0, cfg.solver, cfg.perturbation);
    const RateReport rate = fit_rate(traj, pt.nu, cfg.rate_window);
    row.slope = rate.fitted_slope;
    row.sup_scaled = rate.sup_scaled_residual;
    row.rate_verdict = verdict_name(rate.verdict);
    const QStar qs = find_q_star(p, x0);
    if (qs.vp) {
      row.final_dist = (traj.states.back() - qs.vp->q_star).norm();
      row.bound_verdict = boundedness_verdict(traj, *qs.vp, p).pass ? "pass" : "fail";
    } else {
      row.bound_verdict = "n/a";
    }
  } catch (const std::exception& e) {
    row = SweepRow{};
    row.error = e.what();
  }
  return row;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

Outputs sweep_experiment(const ExperimentConfig& cfg, unsigned threads) {
  const Problem& p = cfg.require_problem();
  double K0 = 0.0, nu0 = 0.0;
  if (const auto* ps = std::get_if<PowerSchedule>(&cfg.schedule.shape())) {
    K0 = ps->K;
    nu0 = ps->nu;
  } else if (!cfg.sweep.nu.empty() || !cfg.sweep.K.empty()) {
    throw InputError("sweep over K or nu needs a power schedule");
  } else {
    throw InputError("sweep: the rate fit needs a power schedule");
  }
  const auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  const auto Ks = axis(cfg.sweep.K, K0);
  const auto nus = axis(cfg.sweep.nu, nu0);
  const auto alphas = axis(cfg.sweep.alpha, p.viscosity.alpha());
  const auto dims = cfg.sweep.dim.empty() ? std::vector<int>{p.dim()} : cfg.sweep.dim;

  std::vector<SweepPoint> points;
  for (double K : Ks)
    for (double nu : nus)
      for (double alpha : alphas)
        for (int d : dims) points.push_back({K, nu, alpha, d});

  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) rows[i] = sweep_row(cfg, points[i]);
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(points.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::string csv = "K,nu,alpha,dim,fitted_slope,sup_scaled_residual,final_dist_qstar,rate_verdict,boundedness_verdict,error\n";
  Json report{{"rows", points.size()}, {"errors", 0}};
  int errors = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    const auto& r = rows[i];
    if (!r.error.empty()) ++errors;
    csv += format_double(pt.K) + ',' + format_double(pt.nu) + ',' + format_double(pt.alpha) + ',' +
           std::to_string(pt.dim) + ',' + optional_field(r.slope) + ',' + optional_field(r.sup_scaled) + ',' +
           optional_field(r.final_dist) + ',' + r.rate_verdict + ',' + r.bound_verdict + ',' + csv_field(r.error) +
           '\n';
  }
  report["errors"] = errors;
  Outputs out;
  out.report = report;
  out.files = {{"sweep.csv", csv}};
  return out;
}

Json check_conditions(const ExperimentConfig& cfg) {
  Json out = conditions_json(cfg);
  out["schedule"] = to_json(cfg.schedule);
  out["horizon"] = cfg.solver.t_end;
  return out;
}

void write_outputs(const std::filesystem::path& dir, const Outputs& out) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> temps;
  try {
    for (const auto& [name, content] : out.files) {
      const fs::path tmp = dir / ("." + name + ".tmp");
      temps.push_back(tmp);
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      f << content;
      f.close();
      if (!f) throw std::runtime_error("cannot write " + tmp.string());
    }
    for (std::size_t i = 0; i < temps.size(); ++i) fs::rename(temps[i], dir / out.files[i].first);
  } catch (...) {
    std::error_code ec;
    for (const auto& t : temps) fs::remove(t, ec);
    throw;
  }
}

}  // namespace vflow
