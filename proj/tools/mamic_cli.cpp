#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mamic/env.hpp"
#include "mamic/orchestrator.hpp"
#include "mamic/subgoal.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_train(const std::string& config_path, std::int64_t seed_override,
              std::string out_dir, bool quiet) {
  mamic::ExperimentConfig cfg = mamic::config_from_file(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (out_dir.empty())
    out_dir = "runs/" + mamic::task_name(cfg.task.task) + "-" +
              mamic::method_name(cfg.method) + "-seed" + std::to_string(cfg.seed);
  mamic::RunResult result = mamic::run_experiment(cfg, out_dir, quiet);
  if (!quiet)
    std::printf("run complete: %s (final test success %.3f)\n",
                result.run_dir.c_str(), result.final_test_success());
  return 0;
}

int cmd_gen_demos(const std::string& task, int n, const std::string& out,
                  std::uint64_t seed, bool quiet) {
  mamic::TaskSpec spec = mamic::task_from_name(task);
  mamic::Rng rng(mamic::derive_seed(seed, 42));
  std::vector<mamic::DemoTrajectory> demos;
  demos.reserve(n);
  for (int i = 0; i < n; ++i) demos.push_back(mamic::scripted_expert(spec, rng));
  mamic::save_demos(demos, out);
  if (!quiet) std::printf("wrote %d demos to %s\n", n, out.c_str());
  return 0;
}

int cmd_extract(const std::string& demos_path, const std::string& out_dir,
                int num_subgoals, bool quiet) {
  std::vector<mamic::DemoTrajectory> demos = mamic::load_demos(demos_path);
  std::vector<mamic::SubgoalPair> pairs = mamic::extract_subgoals(demos, num_subgoals);
  fs::create_directories(out_dir);
  mamic::save_pairs_csv(pairs, out_dir + "/pairs.csv");
  mamic::save_signals_csv(demos, out_dir + "/signals.csv");
  if (!quiet)
    std::printf("extracted %zu sub-goal pairs from %zu demos into %s\n",
                pairs.size(), demos.size(), out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& task, int episodes,
                 std::uint64_t seed, bool quiet) {
  mamic::TaskSpec spec = mamic::task_from_name(task);
  double rate = mamic::evaluate(ckpt, spec, episodes, mamic::derive_seed(seed, 7));
  if (quiet)
    std::printf("%.6f\n", rate);
  else
    std::printf("success rate over %d episodes: %.6f\n", episodes, rate);
  return 0;
}

// Reshapes a run directory's outputs into tidy long-format CSVs for plotting.
int cmd_plot_data(const std::string& run_dir, bool quiet) {
  const std::string metrics = run_dir + "/metrics.csv";
  std::ifstream in(metrics);
  if (!in) throw std::runtime_error("no metrics.csv under " + run_dir);
  fs::create_directories(run_dir + "/plot");
  std::ofstream out(run_dir + "/plot/curves.csv");
  out << "epoch,series,value\n";
  std::string line;
  std::getline(in, line);  // header
  const std::vector<std::string> names = {"test_success", "micro_success", "alpha",
                                          "critic_loss", "phase"};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != names.size() + 1) continue;
    for (std::size_t i = 0; i < names.size(); ++i)
      out << fields[0] << ',' << names[i] << ',' << fields[i + 1] << '\n';
  }

  // Fig-4 style signal stack, when the run extracted sub-goals.
  const std::string signals = run_dir + "/signals.csv";
  if (fs::exists(signals)) {
    std::ifstream sin(signals);
    std::ofstream sout(run_dir + "/plot/signals.csv");
    sout << "trajectory,step,series,value\n";
    std::getline(sin, line);  // header
    const std::vector<std::string> snames = {"dense", "gradient", "ratio", "p"};
    while (std::getline(sin, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::size_t pos = 0;
      while (true) {
        const auto comma = line.find(',', pos);
        fields.push_back(line.substr(pos, comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (fields.size() != snames.size() + 2) continue;
      for (std::size_t i = 0; i < snames.size(); ++i)
        sout << fields[0] << ',' << fields[1] << ',' << snames[i] << ','
             << fields[i + 2] << '\n';
    }
  }
  if (!quiet) std::printf("wrote %s/plot\n", run_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MaMiC dual-curriculum training harness"};
  app.require_subcommand(1);

  std::int64_t seed = -1;
  std::string out_dir;
  bool quiet = false;
  app.add_option("--seed", seed, "override the run seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::string config_path;
  auto* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("config", config_path, "experiment config file")->required();

  std::string demo_task, demo_out;
  int demo_n = 100;
  auto* gen = app.add_subcommand("gen-demos", "generate scripted expert demos");
  gen->add_option("task", demo_task, "task name, e.g. push-hard")->required();
  gen->add_option("n", demo_n, "number of episodes")->required();
  gen->add_option("out", demo_out, "output JSON-lines file")->required();

  std::string extract_demos, extract_out;
  int num_subgoals = 1;
  auto* extract = app.add_subcommand("extract-subgoals",
                                     "extract sub-goals from demos");
  extract->add_option("demos", extract_demos, "input JSON-lines demo file")->required();
  extract->add_option("out", extract_out, "output directory")->required();
  extract->add_option("--num-subgoals", num_subgoals, "sub-goals per trajectory");

  std::string eval_ckpt, eval_task;
  int eval_episodes = 200;
  auto* eval = app.add_subcommand("evaluate", "evaluate a saved checkpoint");
  eval->add_option("checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval->add_option("task", eval_task, "task name")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");

  std::string plot_run;
  auto* plot = app.add_subcommand("plot-data", "emit tidy CSVs for plotting");
  plot->add_option("run-dir", plot_run, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(config_path, seed, out_dir, quiet);
    if (*gen)
      return cmd_gen_demos(demo_task, demo_n, demo_out,
                           seed >= 0 ? static_cast<std::uint64_t>(seed) : 1, quiet);
    if (*extract) return cmd_extract(extract_demos, extract_out, num_subgoals, quiet);
    if (*eval)
      return cmd_evaluate(eval_ckpt, eval_task, eval_episodes,
                          seed >= 0 ? static_cast<std::uint64_t>(seed) : 1, quiet);
    if (*plot) return cmd_plot_data(plot_run, quiet);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::fprintf(stderr, "error: %s\n", what.c_str());
    // Config and file-resolution problems are usage errors.
    return what.find("config") != std::string::npos ? 1 : 2;
  }
  return 1;
}
