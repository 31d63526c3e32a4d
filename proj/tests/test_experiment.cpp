#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vflow/experiment.hpp"
#include "vflow/report_io.hpp"

using namespace vflow;
namespace fs = std::filesystem;

namespace {

const char* kNegation = R"(
dim = 2
x0 = 1, 0
operator.kind = negation
contraction.kind = constant
contraction.value = 0, 0
schedule.kind = power
schedule.K = 2
schedule.nu = 1
solver.t_end = 1000
)";

const char* kRate = R"(
dim = 2
x0 = 3, 1
operator.kind = projection
operator.set.kind = ball
operator.set.center = 2, 0
operator.set.radius = 1
contraction.kind = affine
contraction.alpha = 0.5
contraction.offset = 0, 0
schedule.kind = power
schedule.K = 2
schedule.nu = 1
solver.t_end = 10000
)";

ExperimentConfig load(const std::string& text) { return config_from_json(parse_config_text(text)); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vflow_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(VFLOW_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "exp.cfg";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("run: reference problem") {
  const auto out = run_experiment(load(kNegation));
  CHECK_FALSE(out.failed);
  REQUIRE(out.files.size() == 3);
  CHECK(out.files[0].first == "trajectory.csv");
  CHECK(out.files[1].first == "report.json");
  CHECK(out.files[2].first == "plot.script");
  for (const auto& [k, v] : out.report["verdicts"].items()) CHECK(v == "pass");
  CHECK(out.report["solve"]["final_dist_qstar"].get<double>() < 1e-6);
  CHECK(out.file("plot.script").find("scale y log") != std::string::npos);
}

TEST_CASE("run: all analyses on the rate problem") {
  std::string text = kRate;
  text += "analyses = vp, rate, boundedness, gronwall, conditions\n";
  const auto out = run_experiment(load(text));
  CHECK_FALSE(out.failed);
  CHECK(out.report["verdicts"]["rate"] == "pass");
  CHECK(out.report["verdicts"]["vp"] == "pass");
  CHECK(out.report["analyses"]["conditions"]["continuous"]["flags"].size() == 3);
}

TEST_CASE("run: a failed verdict marks the outputs") {
  std::string text = kRate;
  text += "analyses = rate\n";
  auto cfg = load(text);
  cfg.schedule = ThetaSchedule::power(0.5, 1.0);
  const auto out = run_experiment(cfg);
  CHECK(out.report["verdicts"]["rate"] == "fail");
  CHECK(out.failed);
}

TEST_CASE("run: conditions only skips integration") {
  std::string text = kNegation;
  text += "analyses = conditions\n";
  const auto out = run_experiment(load(text));
  REQUIRE(out.files.size() == 1);
  CHECK(out.files[0].first == "report.json");
  CHECK_FALSE(out.report.contains("solve"));
  CHECK(out.report["analyses"]["conditions"]["discrete"]["flags"].size() == 6);
}

TEST_CASE("run: stability with a perturbation") {
  const std::string text = R"(
dim = 2
x0 = -3, 3
set.kind = ball
set.radius = 5
operator.kind = projection
operator.set.kind = ball
operator.set.radius = 1
contraction.kind = affine
contraction.alpha = 0.5
contraction.offset = 2, 0
schedule.kind = power
schedule.K = 2
schedule.nu = 1
perturbation.kind = power_decay
perturbation.c = 1
perturbation.p = 2
perturbation.direction = 0, 1
perturbation.claim = L1
analyses = stability, gronwall, boundedness
)";
  const auto out = run_experiment(load(text));
  CHECK(out.report["verdicts"]["stability"] == "pass");
  CHECK(out.report["verdicts"]["gronwall"] == "pass");
  CHECK(out.report["analyses"]["stability"]["final_dist_qstar"].get<double>() <= 2e-2);
}

TEST_CASE("run: determinism") {
  std::string text = kRate;
  text += "analyses = vp, rate, boundedness\nseed = 99\n";
  const auto a = run_experiment(load(text));
  const auto b = run_experiment(load(text));
  for (std::size_t i = 0; i < a.files.size(); ++i) CHECK(a.files[i].second == b.files[i].second);
}

TEST_CASE("compare") {
  auto cfg = load(kRate);
  const auto out = compare_experiment(cfg, 100);
  CHECK(out.report["bridge"]["max_gap"].get<double>() <= 1e-13);
  CHECK_FALSE(out.failed);
  const std::string gap = out.file("gap.csv");
  CHECK(gap.rfind("n,t,gap\n1,1,", 0) == 0);
  CHECK(std::count(gap.begin(), gap.end(), '\n') == 101);
  CHECK(out.file("discrete.csv").rfind("n,x_0,x_1,", 0) == 0);

  const auto empty = compare_experiment(cfg, 0);
  CHECK(std::count(empty.file("discrete.csv").begin(), empty.file("discrete.csv").end(), '\n') == 1);
  CHECK_FALSE(empty.failed);

  // long run: both tails near q*
  const auto zoo = compare_experiment(load(kNegation), 1000);
  CHECK(zoo.report["continuous_final_dist_qstar"].get<double>() < 1e-2);
  CHECK(zoo.report["discrete_final_dist_qstar"].get<double>() < 1e-2);
}

TEST_CASE("sweep") {
  std::string text = kRate;
  text += "sweep.K = 0.5, 3\nsweep.nu = 1\n";
  const auto out = sweep_experiment(load(text), 2);
  std::istringstream rows(out.file("sweep.csv"));
  std::string header, low, high;
  std::getline(rows, header);
  std::getline(rows, low);
  std::getline(rows, high);
  CHECK(low.rfind("0.5,1,0.5,2,", 0) == 0);
  CHECK(low.find(",fail,") != std::string::npos);
  CHECK(high.rfind("3,1,0.5,2,", 0) == 0);
  CHECK(high.find(",pass,pass,") != std::string::npos);

  std::string bad = kRate;
  bad += "sweep.nu = 1, 1.5\n";
  const auto errs = sweep_experiment(load(bad));
  CHECK(errs.report["errors"] == 1);
  CHECK(errs.file("sweep.csv").find("nu must lie in (0, 1]") != std::string::npos);

  // a single point reproduces run
  std::string single = kRate;
  single += "sweep.K = 2\nanalyses = rate\n";
  const auto one = sweep_experiment(load(single));
  const auto run = run_experiment(load(single));
  std::istringstream r1(one.file("sweep.csv"));
  std::string line;
  std::getline(r1, line);
  std::getline(r1, line);
  const double slope = run.report["analyses"]["rate"]["fitted_slope"].get<double>();
  CHECK(line.find("," + format_double(slope) + ",") != std::string::npos);

  // sweeping dim pads the vectors
  std::string dims = kRate;
  dims += "sweep.dim = 2, 3\n";
  const auto d = sweep_experiment(load(dims));
  CHECK(d.report["errors"] == 0);
}

TEST_CASE("atomic writes") {
  const fs::path dir = scratch("atomic");
  Outputs out;
  out.files = {{"a.txt", "alpha\n"}, {"b.txt", "beta\n"}};
  write_outputs(dir, out);
  CHECK(slurp(dir / "a.txt") == "alpha\n");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 2);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("cli");
  const fs::path cfg = write_config(dir, std::string(kNegation) + "output_dir = " + (dir / "run").string() + "\n");
  CHECK(cli("run --config " + cfg.string()) == 0);
  CHECK(fs::exists(dir / "run" / "trajectory.csv"));
  CHECK(fs::exists(dir / "run" / "report.json"));
  CHECK(fs::exists(dir / "run" / "plot.script"));

  // identical config and seed: identical bytes
  CHECK(cli("run --config " + cfg.string() + " --seed 5 --out " + (dir / "a").string()) == 0);
  CHECK(cli("run --config " + cfg.string() + " --seed 5 --out " + (dir / "b").string()) == 0);
  for (const char* f : {"trajectory.csv", "report.json", "plot.script"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  // x0 outside C: exit 1 and nothing written
  const fs::path outside = write_config(dir, std::string(kNegation) + "set.kind = ball\nset.radius = 0.5\n");
  CHECK(cli("run --config " + outside.string() + " --out " + (dir / "bad").string()) == 1);
  CHECK_FALSE(fs::exists(dir / "bad"));

  // failed verdict: exit 2
  std::string low = kRate;
  low.replace(low.find("schedule.K = 2"), 14, "schedule.K = 0.5");
  const fs::path fail = write_config(dir, low + "analyses = rate\n");
  CHECK(cli("run --config " + fail.string() + " --out " + (dir / "fail").string()) == 2);

  CHECK(cli("compare --config " + cfg.string() + " --steps 0 --out " + (dir / "cmp").string()) == 0);
  CHECK(fs::exists(dir / "cmp" / "discrete.csv"));
  CHECK(cli("check --config " + cfg.string()) == 0);
  const fs::path sweep = write_config(dir, std::string(kRate) + "sweep.nu = 1, 1.5\n");
  CHECK(cli("sweep --config " + sweep.string() + " --out " + (dir / "sw").string()) == 0);
  CHECK(cli("run") != 0);
  CHECK(cli("run --config /nonexistent/file") != 0);
}
