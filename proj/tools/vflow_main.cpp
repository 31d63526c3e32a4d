#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vflow/config.hpp"
#include "vflow/errors.hpp"
#include "vflow/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_end;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", c.seed, "root seed (overrides seed)");
  cmd->add_option("--t-end", c.t_end, "integration horizon (overrides solver.t_end)");
  cmd->add_flag("--quiet", c.quiet, "print nothing on success");
}

vflow::ExperimentConfig load(const Common& c, bool need_problem = true) {
  vflow::Json tree = vflow::load_config_file(c.config);
  if (!tree.is_object()) throw vflow::InputError("config: expected a set of keys");
  if (c.seed) tree["seed"] = *c.seed;
  if (c.t_end) tree["solver"]["t_end"] = *c.t_end;
  if (!c.out.empty()) tree["output_dir"] = c.out;
  return vflow::config_from_json(tree, need_problem);
}

int finish(const vflow::Outputs& out, const std::string& dir, const Common& c) {
  vflow::write_outputs(dir, out);
  if (!c.quiet) {
    for (const auto& [name, content] : out.files) std::printf("wrote %s/%s\n", dir.c_str(), name.c_str());
    if (out.report.contains("verdicts"))
      for (const auto& [k, v] : out.report["verdicts"].items()) std::printf("%-14s %s\n", k.c_str(), v.get<std::string>().c_str());
    if (out.report.contains("bridge") && out.report["bridge"].is_object())
      std::printf("euler bridge max gap %.3g (%s)\n", out.report["bridge"]["max_gap"].get<double>(),
                  out.report["bridge"]["verdict"].get<std::string>().c_str());
    if (out.report.contains("errors")) std::printf("row errors: %d\n", out.report["errors"].get<int>());
  }
  return out.failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the viscosity approximation flow and its discrete iterations"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, sweep_opts, check_opts;
  std::optional<long> steps;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "integrate the flow and evaluate the requested analyses");
  add_common(run, run_opts);
  auto* compare = app.add_subcommand("compare", "flow against the discrete iteration at integer times");
  add_common(compare, cmp_opts);
  compare->add_option("--steps", steps, "number of discrete steps N (overrides compare.N)");
  auto* sweep = app.add_subcommand("sweep", "rate fits over a grid of K, nu, alpha, dim");
  add_common(sweep, sweep_opts);
  sweep->add_option("--threads", threads, "worker threads (default: hardware)");
  auto* check = app.add_subcommand("check", "print the condition flags of the schedule");
  add_common(check, check_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      const auto cfg = load(run_opts);
      return finish(vflow::run_experiment(cfg), cfg.output_dir, run_opts);
    }
    if (compare->parsed()) {
      const auto cfg = load(cmp_opts);
      return finish(vflow::compare_experiment(cfg, steps.value_or(cfg.compare_N)), cfg.output_dir, cmp_opts);
    }
    if (sweep->parsed()) {
      const auto cfg = load(sweep_opts);
      auto out = vflow::sweep_experiment(cfg, threads);
      out.failed = false;
      return finish(out, cfg.output_dir, sweep_opts);
    }
    if (check->parsed()) {
      const auto cfg = load(check_opts, false);
      std::cout << vflow::check_conditions(cfg).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
