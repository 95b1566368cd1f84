#pragma once

#include <string>
#include <vector>

#include "mamic/adam.hpp"
#include "mamic/mlp.hpp"
#include "mamic/replay.hpp"
#include "mamic/rng.hpp"

namespace mamic {

// Running mean/std feature normalizer (Welford); normalized values are
// clipped to +-clip standard deviations.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> m2;
  std::size_t count = 0;
  double clip = 5.0;

  explicit Normalizer(std::size_t dim = 0) : mean(dim, 0.0), m2(dim, 0.0) {}
  void update(const std::vector<double>& x);
  void apply(const double* in, double* out, std::size_t n) const;
  std::vector<double> operator()(const std::vector<double>& x) const;
};

struct NoiseConfig {
  double gaussian_sigma = 0.2;
  double random_action_eps = 0.3;
};

struct DdpgConfig {
  std::vector<std::size_t> hidden = {256, 256, 256};
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double gamma = 0.98;
  double tau = 0.05;
  int target_update_period = 0;  // 0: soft update every step; >0: hard copy
  // Quadratic action penalty in the actor objective; keeps the tanh head
  // out of saturation so directions stay finely steerable.
  double action_l2 = 1.0;
  NoiseConfig noise;
};

struct TrainStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

// Goal-conditioned DDPG: critic Q(s,a,g) on TD error, deterministic actor
// pi(s,g) ascending the critic, target networks for the bootstrap.
class DdpgAgent {
 public:
  DdpgAgent(std::size_t obs_dim, std::size_t action_dim, const DdpgConfig& cfg,
            Rng& rng);

  // explore=false: pi(s,g). explore=true: with prob eps a uniform random
  // action, otherwise pi + Gaussian(sigma), clipped to [-1,1].
  std::vector<double> act(const std::vector<double>& state, Vec3 goal, bool explore,
                          Rng& rng) const;

  // y = clip(r + gamma * Q'(s', pi'(s', g), g), [-1/(1-gamma), 0]).
  std::vector<double> td_targets(const std::vector<SampledTransition>& batch) const;

  // Critic TD-loss gradients and actor mean-Q-ascent gradients for a batch;
  // pure (no update), shared by train_step and the gradient checks.
  TrainStats compute_gradients(const std::vector<SampledTransition>& batch,
                               MlpGrads* critic_grads, MlpGrads* actor_grads) const;

  // Diagnostics used by tests: the scalar losses behind compute_gradients.
  double critic_td_loss(const std::vector<SampledTransition>& batch) const;
  double actor_mean_q(const std::vector<SampledTransition>& batch) const;

  TrainStats train_step(const std::vector<SampledTransition>& batch);

  // theta' <- (1-tau) theta' + tau theta (or a hard copy on the period).
  void update_targets();

  void observe_episode(const std::vector<Transition>& episode);

  void save(const std::string& dir) const;
  // Loads the actor (and normalizer stats) only; enough for evaluation.
  static DdpgAgent load_for_eval(const std::string& dir);

  double gamma() const { return cfg_.gamma; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const MlpNet& actor() const { return actor_; }
  const MlpNet& critic() const { return critic_; }
  const MlpNet& target_actor() const { return target_actor_; }
  const MlpNet& target_critic() const { return target_critic_; }
  MlpNet& mutable_critic() { return critic_; }
  MlpNet& mutable_actor() { return actor_; }
  const Normalizer& obs_norm() const { return obs_norm_; }
  Normalizer& mutable_obs_norm() { return obs_norm_; }
  Normalizer& mutable_goal_norm() { return goal_norm_; }

 private:
  DdpgAgent() = default;

  std::vector<double> actor_input(const std::vector<double>& state, Vec3 goal) const;
  Mat batch_actor_input(const std::vector<SampledTransition>& batch, bool next) const;
  Mat batch_critic_input(const std::vector<SampledTransition>& batch) const;

  std::size_t obs_dim_ = 0;
  std::size_t action_dim_ = 0;
  DdpgConfig cfg_;
  MlpNet actor_, critic_, target_actor_, target_critic_;
  AdamState actor_opt_, critic_opt_;
  Normalizer obs_norm_, goal_norm_;
  std::size_t train_steps_ = 0;
};

}  // namespace mamic
