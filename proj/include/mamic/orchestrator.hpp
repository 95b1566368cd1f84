#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mamic/config.hpp"
#include "mamic/ddpg.hpp"
#include "mamic/env.hpp"
#include "mamic/goal_gan.hpp"
#include "mamic/replay.hpp"
#include "mamic/subgoal.hpp"

namespace mamic {

enum class Method { DdpgOnly, Her, MicroG, MicroSg, MacroOnly, MaMiC };

Method method_from_name(std::string_view name);
std::string method_name(Method m);

bool method_uses_gan(Method m);
bool method_uses_phases(Method m);

struct ExperimentConfig {
  TaskSpec task;
  Method method = Method::Her;
  int epochs = 60;
  int cycles_per_epoch = 50;
  int episodes_per_cycle = 2;
  int ddpg_iters_per_cycle = 40;
  int test_episodes = 50;
  std::uint64_t seed = 1;

  DdpgConfig ddpg;
  int batch_size = 256;

  std::size_t buffer_capacity = 1000000;
  double relabel_fraction = 0.8;
  double her_share = 0.5;
  int her_future_k = 4;

  GanConfig gan;
  int gan_cadence = 100;        // DDPG iterations between GAN bursts
  int gan_iters_per_burst = 200;
  std::size_t pool_size = 2000;
  AlphaSchedule alpha_schedule;

  std::string demo_path;        // required for macro methods unless oracle
  int num_subgoals = 1;
  ExtractorConfig extractor;
  bool oracle_subgoals = false;
  double phase_advance_threshold = 0.8;
  int phase_patience = 3;
  int phase_eval_episodes = 50;

  SamplingStrategy strategy() const;
  void validate() const;  // throws naming the offending field
};

ExperimentConfig config_from_file(const std::string& path);
ExperimentConfig config_from_toml(const ConfigFile& file);
void write_config(const ExperimentConfig& cfg, const std::string& path);

struct EpochStats {
  int epoch = 0;
  double test_success = 0.0;
  double micro_success = 0.0;
  double alpha = 0.0;
  double critic_loss = 0.0;
  int phase = 0;
  double wall_ms = 0.0;
};

struct RunResult {
  std::string run_dir;
  std::vector<EpochStats> stats;
  // accounting + ablation-wiring counters
  std::size_t ddpg_steps = 0;
  std::size_t gan_bursts = 0;
  std::size_t relabel_original = 0;
  std::size_t relabel_her = 0;
  std::size_t relabel_micro = 0;
  std::size_t relabel_desired = 0;
  bool gan_constructed = false;
  int final_phase = 0;

  double final_test_success() const {
    return stats.empty() ? 0.0 : stats.back().test_success;
  }
};

// Executes the full training schedule and writes metrics.csv, timing.csv,
// run_summary.json and checkpoint/ into out_dir. Everything except
// timing.csv is a pure function of (config, seed).
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         bool quiet = true);

// Greedy success rate of a saved actor over n_episodes fresh episodes.
double evaluate(const std::string& checkpoint_dir, const TaskSpec& task,
                int n_episodes, std::uint64_t seed);

// Ground-truth sub-goal used by oracle mode: the receptor centre for the
// receptor task, the object's start position otherwise.
Vec3 oracle_subgoal(const TaskSpec& spec, const std::vector<double>& start_state);

}  // namespace mamic
