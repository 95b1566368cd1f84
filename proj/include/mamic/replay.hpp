#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "mamic/env.hpp"
#include "mamic/rng.hpp"

namespace mamic {

// One replay record. `achieved` is the goal-space projection after the step
// (of next_state), so reward == compute_reward(achieved, goal, aux) holds
// for the stored tuple and stays true under relabeling.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = -1.0;
  std::vector<double> next_state;
  Vec3 goal;       // the goal the behavioral policy was conditioned on
  Vec3 achieved;   // achieved goal after this step
  bool aux_flag = false;  // receptor latch of next_state
  std::uint64_t episode_id = 0;
  int step_index = 0;
};

enum class StrategyVariant { PlainHer, MicroG, MicroSg };

struct SamplingStrategy {
  StrategyVariant variant = StrategyVariant::PlainHer;
  double relabel_fraction = 0.8;
  int her_future_k = 4;    // future-k convention behind the 0.8 default
  double her_share = 0.5;  // HER share inside the relabeled portion (micro variants)
};

enum class RelabelTag { Original, Her, Micro, Desired };

struct SampledTransition {
  Transition t;           // goal/reward already rewritten
  RelabelTag tag = RelabelTag::Original;
  int her_source_step = -1;  // step index the HER goal came from
};

using GoalSource = std::function<Vec3(Rng&)>;

// Ring of whole episodes; oldest episodes evicted once the transition
// count exceeds capacity. Episodes stay contiguous for future-goal lookup.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  std::size_t size() const { return size_; }
  std::size_t n_episodes() const { return episodes_.size(); }
  bool empty() const { return size_ == 0; }

  // Transitions must share episode_id and run step_index 0,1,2,...
  void store_episode(std::vector<Transition> episode);

  // Uniformly samples n transitions and applies the strategy's goal
  // relabeling, recomputing rewards with compute_reward.
  std::vector<SampledTransition> sample_minibatch(std::size_t n,
                                                  const SamplingStrategy& strategy,
                                                  const GoalSource& micro_goal_source,
                                                  const GoalSource& desired_goal_source,
                                                  const TaskSpec& spec, Rng& rng) const;

  const std::deque<std::vector<Transition>>& episodes() const { return episodes_; }

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::deque<std::vector<Transition>> episodes_;
  std::vector<std::size_t> cumulative_;  // prefix sums for uniform indexing

  void rebuild_index();
};

}  // namespace mamic
