#pragma once

#include <string>
#include <vector>

#include "mamic/adam.hpp"
#include "mamic/env.hpp"
#include "mamic/mlp.hpp"
#include "mamic/rng.hpp"

namespace mamic {

// Per-trajectory signal stack: dense reward, its first differences, the
// gradient ratio, and the normalized selection probabilities. All four are
// aligned to trajectory indices (length = number of states).
struct SubgoalSignal {
  std::vector<double> dense;
  std::vector<double> gradient;
  std::vector<double> ratio;
  std::vector<double> p;
};

// dense[i] = squared Euclidean distance between achieved_goals[i] and the
// trajectory's desired goal.
std::vector<double> dense_reward_series(const DemoTrajectory& traj);

// gradient[i] = dense[i] - dense[i-1] (gradient[0] = 0). ratio[i] =
// gradient[i] / gradient[i-1] with a flat-segment guard: when the previous
// gradient is below 1e-6 in magnitude the ratio is 1 for flat-to-flat and
// |g|/1e-6 capped at 100 for flat-to-moving (ratio[0..1] = 1).
void gradient_ratio_series(const std::vector<double>& dense,
                           std::vector<double>& gradient_out,
                           std::vector<double>& ratio_out);

// Full signal stack including the min-max normalized |ratio| probabilities.
// The first two indices and the last are excluded from selection and carry
// p = 0.
SubgoalSignal subgoal_signal(const DemoTrajectory& traj);

struct SubgoalPair {
  std::vector<double> start_state;
  Vec3 subgoal;
};

// Per trajectory, takes the num_subgoals highest-p indices (ties resolved
// toward the later index) and pairs the achieved goal there with the
// trajectory's start state.
std::vector<SubgoalPair> extract_subgoals(const std::vector<DemoTrajectory>& trajs,
                                          int num_subgoals);

// Start-state -> sub-goal regressor.
struct SubgoalModel {
  MlpNet regressor;
  bool trained = false;
  Box goal_box;
  double final_mse = 0.0;
  std::vector<double> mse_history;  // one entry per 10-iteration window
};

struct ExtractorConfig {
  std::vector<std::size_t> hidden = {16, 16};
  double learning_rate = 1e-3;
  int batch_size = 64;
  int iterations = 1000;
};

SubgoalModel train_extractor(const std::vector<SubgoalPair>& pairs,
                             const ExtractorConfig& cfg, const Box& goal_box,
                             Rng& rng);

// Deterministic forward pass clipped to the goal box. Throws when untrained.
Vec3 predict_subgoal(const SubgoalModel& model, const std::vector<double>& start_state);

// Diagnostics CSV: one row per (trajectory, step) with the signal stack.
void save_signals_csv(const std::vector<DemoTrajectory>& trajs,
                      const std::string& path);
void save_pairs_csv(const std::vector<SubgoalPair>& pairs, const std::string& path);

}  // namespace mamic
