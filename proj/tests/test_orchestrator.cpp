#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mamic/orchestrator.hpp"

using namespace mamic;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Desk-scale config for fast orchestration tests.
ExperimentConfig tiny_config(TaskId task, Method method) {
  ExperimentConfig c;
  c.task = make_task(task);
  c.method = method;
  c.epochs = 2;
  c.cycles_per_epoch = 3;
  c.episodes_per_cycle = 2;
  c.ddpg_iters_per_cycle = 5;
  c.test_episodes = 10;
  c.batch_size = 32;
  c.ddpg.hidden = {16, 16};
  c.gan.gen_hidden = {16, 16};
  c.gan.disc_hidden = {16, 16};
  c.gan_cadence = 10;
  c.gan_iters_per_burst = 5;
  c.pool_size = 100;
  c.extractor.iterations = 50;
  c.phase_eval_episodes = 10;
  c.seed = 7;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("config: toml parsing, defaults and errors that name the field") {
  const std::string text = R"(
# experiment
[run]
task = "push-hard"
method = "micro-g"
epochs = 3
seed = 11

[ddpg]
gamma = 0.95
)";
  ConfigFile f = ConfigFile::parse_string(text, "inline");
  ExperimentConfig c = config_from_toml(f);
  CHECK(c.task.task == TaskId::PushHard);
  CHECK(c.method == Method::MicroG);
  CHECK(c.epochs == 3);
  CHECK(c.seed == 11);
  CHECK(c.ddpg.gamma == doctest::Approx(0.95));
  CHECK(c.cycles_per_epoch == 50);   // default
  CHECK(c.batch_size == 256);        // default
  CHECK(c.gan_cadence == 100);       // default
  CHECK(c.gan_iters_per_burst == 200);

  // Bad values must name the offending field.
  const std::string bad = "[run]\ntask = \"push-hard\"\nmethod = \"her\"\n"
                          "[ddpg]\ngamma = \"fast\"\n";
  try {
    config_from_toml(ConfigFile::parse_string(bad, "inline"));
    FAIL("expected a config error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }

  const std::string macro_missing =
      "[run]\ntask = \"receptor-push\"\nmethod = \"mamic\"\n";
  try {
    config_from_toml(ConfigFile::parse_string(macro_missing, "inline"));
    FAIL("expected a config error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("demo_path") != std::string::npos);
  }

  CHECK_THROWS(config_from_file("definitely_missing_config.toml"));
}

TEST_CASE("run_experiment: epochs=0 writes an empty metrics file and a checkpoint") {
  TempDir dir("test_run_e0");
  ExperimentConfig c = tiny_config(TaskId::Reach, Method::Her);
  c.epochs = 0;
  RunResult r = run_experiment(c, dir.str());
  CHECK(r.stats.empty());
  CHECK(slurp(dir.str() + "/metrics.csv") ==
        "epoch,test_success,micro_success,alpha,critic_loss,phase\n");
  CHECK(fs::exists(dir.path / "checkpoint" / "actor.net"));
  CHECK(fs::exists(dir.path / "checkpoint" / "meta.json"));
  CHECK(fs::exists(dir.path / "run_summary.json"));
}

TEST_CASE("run_experiment: reproducibility, schedule accounting and wiring counters") {
  TempDir d1("test_run_a"), d2("test_run_b");
  ExperimentConfig c = tiny_config(TaskId::PushHard, Method::MicroG);
  RunResult r1 = run_experiment(c, d1.str());
  RunResult r2 = run_experiment(c, d2.str());

  // Byte-identical deterministic outputs.
  CHECK(slurp(d1.str() + "/metrics.csv") == slurp(d2.str() + "/metrics.csv"));
  CHECK(slurp(d1.str() + "/run_summary.json") == slurp(d2.str() + "/run_summary.json"));
  CHECK(slurp(d1.str() + "/checkpoint/actor.net") ==
        slurp(d2.str() + "/checkpoint/actor.net"));

  // Exactly epochs*cycles*iters DDPG steps, bursts at the cadence.
  const std::size_t steps = 2 * 3 * 5;
  CHECK(r1.ddpg_steps == steps);
  CHECK(r1.gan_bursts == steps / 10);
  CHECK(r1.gan_constructed);
  CHECK(r1.relabel_micro > 0);
  CHECK(r1.relabel_her > 0);
  CHECK(r1.relabel_desired == 0);

  // A different seed changes the metrics.
  ExperimentConfig c2 = c;
  c2.seed = 8;
  TempDir d3("test_run_c");
  run_experiment(c2, d3.str());
  CHECK(slurp(d1.str() + "/metrics.csv") != slurp(d3.str() + "/metrics.csv"));
}

TEST_CASE("run_experiment: her never builds a GAN, ddpg-only never relabels") {
  TempDir d1("test_run_her"), d2("test_run_ddpg");
  ExperimentConfig her = tiny_config(TaskId::PushHard, Method::Her);
  RunResult r_her = run_experiment(her, d1.str());
  CHECK_FALSE(r_her.gan_constructed);
  CHECK(r_her.gan_bursts == 0);
  CHECK(r_her.relabel_her > 0);
  CHECK(r_her.relabel_micro == 0);
  CHECK(r_her.relabel_desired == 0);

  ExperimentConfig ddpg = tiny_config(TaskId::PushHard, Method::DdpgOnly);
  RunResult r_ddpg = run_experiment(ddpg, d2.str());
  CHECK_FALSE(r_ddpg.gan_constructed);
  CHECK(r_ddpg.relabel_her == 0);
  CHECK(r_ddpg.relabel_micro == 0);
  CHECK(r_ddpg.relabel_desired == 0);
  CHECK(r_ddpg.relabel_original == r_ddpg.ddpg_steps * 32);
}

TEST_CASE("run_experiment: micro-sg draws desired-pool goals") {
  TempDir dir("test_run_microsg");
  ExperimentConfig c = tiny_config(TaskId::PushHard, Method::MicroSg);
  RunResult r = run_experiment(c, dir.str());
  CHECK(r.relabel_desired > 0);
  CHECK(r.relabel_micro == 0);
}

TEST_CASE("run_experiment: oracle macro run advances the phase plan") {
  // Push-far with oracle sub-goals: the phase-1 target is the object's own
  // start position, so phase success is immediate and the plan advances
  // after the patience window.
  TempDir dir("test_run_macro");
  ExperimentConfig c = tiny_config(TaskId::PushFar, Method::MacroOnly);
  c.oracle_subgoals = true;
  c.epochs = 5;
  c.phase_patience = 3;
  RunResult r = run_experiment(c, dir.str());
  CHECK(r.final_phase == 1);
  // Phase index in the metrics is monotone non-decreasing.
  std::istringstream in(slurp(dir.str() + "/metrics.csv"));
  std::string line;
  std::getline(in, line);
  int prev = 0;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    const int phase = std::stoi(line.substr(comma + 1));
    CHECK(phase >= prev);
    prev = phase;
  }
  CHECK(prev == 1);
}

TEST_CASE("run_experiment: mamic on receptor trains extractor from demos") {
  TempDir dir("test_run_mamic");
  // Generate a small demo file first.
  TaskSpec spec = make_task(TaskId::ReceptorPush);
  Rng rng(3);
  std::vector<DemoTrajectory> demos;
  for (int i = 0; i < 30; ++i) demos.push_back(scripted_expert(spec, rng));
  fs::create_directories(dir.path);
  const std::string demo_path = dir.str() + "/demos.jsonl";
  save_demos(demos, demo_path);

  ExperimentConfig c = tiny_config(TaskId::ReceptorPush, Method::MaMiC);
  c.demo_path = demo_path;
  c.extractor.iterations = 300;
  RunResult r = run_experiment(c, dir.str());
  CHECK(r.gan_constructed);
  CHECK(fs::exists(dir.path / "signals.csv"));
  CHECK(fs::exists(dir.path / "pairs.csv"));
  CHECK(r.stats.size() == 2);
}

TEST_CASE("evaluate: random actor flounders; same checkpoint and seed repeat exactly") {
  TempDir dir("test_eval_ckpt");
  ExperimentConfig c = tiny_config(TaskId::PushHard, Method::Her);
  c.epochs = 0;  // untrained checkpoint = random-weight actor
  run_experiment(c, dir.str());
  TaskSpec spec = make_task(TaskId::PushHard);
  const double r1 = evaluate(dir.str() + "/checkpoint", spec, 200, 5);
  const double r2 = evaluate(dir.str() + "/checkpoint", spec, 200, 5);
  CHECK(r1 == r2);
  CHECK(r1 < 0.05);

  TaskSpec wrong = make_task(TaskId::PickPlaceLite);
  CHECK_THROWS(evaluate(dir.str() + "/checkpoint", wrong, 10, 5));
}

TEST_CASE("policy improvement: reach with dense relabeling lifts off across seeds") {
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TempDir dir("test_reach_seed" + std::to_string(seed));
    ExperimentConfig c = tiny_config(TaskId::Reach, Method::Her);
    c.epochs = 10;
    c.cycles_per_epoch = 10;
    c.episodes_per_cycle = 2;
    c.ddpg_iters_per_cycle = 10;
    c.batch_size = 64;
    c.ddpg.hidden = {32, 32};
    c.test_episodes = 20;
    c.seed = seed;
    RunResult r = run_experiment(c, dir.str());
    if (r.stats.back().test_success > r.stats.front().test_success) ++improved;
  }
  CHECK(improved >= 4);
}

// --- command-line interface ---------------------------------------------------

namespace {

int run_cli(const std::string& args, const std::string& out_redirect = "") {
  const char* bin = std::getenv("MAMIC_BIN");
  if (!bin) return -999;
  std::string cmd = std::string(bin) + " " + args;
  if (!out_redirect.empty()) cmd += " > " + out_redirect + " 2>&1";
  else cmd += " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli: missing config exits nonzero and names the path") {
  if (!std::getenv("MAMIC_BIN")) return;  // binary location unknown (manual run)
  TempDir dir("test_cli_missing");
  fs::create_directories(dir.path);
  const std::string log = dir.str() + "/err.txt";
  const int rc = run_cli("train definitely_missing.toml", log);
  CHECK(rc == 1);
  CHECK(slurp(log).find("definitely_missing.toml") != std::string::npos);
}

TEST_CASE("cli: gen-demos writes one JSON line per episode") {
  if (!std::getenv("MAMIC_BIN")) return;
  TempDir dir("test_cli_demos");
  fs::create_directories(dir.path);
  const std::string out = dir.str() + "/demos.jsonl";
  const int rc = run_cli("--seed 3 gen-demos push-hard 12 " + out);
  CHECK(rc == 0);
  std::istringstream in(slurp(out));
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 12);
}

TEST_CASE("cli: train + plot-data + evaluate round trip") {
  if (!std::getenv("MAMIC_BIN")) return;
  TempDir dir("test_cli_train");
  fs::create_directories(dir.path);
  const std::string cfg_path = dir.str() + "/exp.toml";
  {
    std::ofstream cfg(cfg_path);
    cfg << "[run]\ntask = \"reach\"\nmethod = \"her\"\nepochs = 1\n"
           "cycles_per_epoch = 2\nepisodes_per_cycle = 2\nddpg_iters_per_cycle = 2\n"
           "test_episodes = 4\nseed = 5\n[ddpg]\nhidden_layers = 2\n"
           "hidden_units = 16\nbatch_size = 16\n";
  }
  const std::string run_dir = dir.str() + "/run";
  CHECK(run_cli("--quiet --out-dir " + run_dir + " train " + cfg_path) == 0);
  CHECK(fs::exists(run_dir + "/metrics.csv"));

  // Identical seed reruns byte-identically.
  const std::string run_dir2 = dir.str() + "/run2";
  CHECK(run_cli("--quiet --out-dir " + run_dir2 + " train " + cfg_path) == 0);
  CHECK(slurp(run_dir + "/metrics.csv") == slurp(run_dir2 + "/metrics.csv"));

  CHECK(run_cli("plot-data " + run_dir) == 0);
  CHECK(fs::exists(run_dir + "/plot/curves.csv"));

  const std::string eval_log = dir.str() + "/eval.txt";
  CHECK(run_cli("--seed 4 evaluate " + run_dir + "/checkpoint reach --episodes 10",
                eval_log) == 0);
  CHECK_FALSE(slurp(eval_log).empty());
}
