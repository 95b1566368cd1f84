#pragma once

#include <deque>
#include <vector>

#include "mamic/adam.hpp"
#include "mamic/env.hpp"
#include "mamic/mlp.hpp"
#include "mamic/rng.hpp"

namespace mamic {

// Bounded FIFO pools of achieved / desired goals the GAN trains on.
struct GoalPools {
  std::size_t max_size = 2000;
  std::deque<Vec3> achieved;
  std::deque<Vec3> desired;

  void push_achieved(Vec3 g) { push(achieved, g); }
  void push_desired(Vec3 g) { push(desired, g); }
  void clear_desired() { desired.clear(); }

 private:
  void push(std::deque<Vec3>& pool, Vec3 g) {
    pool.push_back(g);
    while (pool.size() > max_size) pool.pop_front();
  }
};

// Least-squares GAN over goal space. The discriminator's real data is an
// alpha-weighted blend of the achieved and desired pools: alpha 0 keeps the
// generator near what the policy already reaches, alpha 1 pulls it onto the
// task's goal distribution.
struct GoalGan {
  MlpNet generator;      // z -> tanh -> scaled into goal_box
  MlpNet discriminator;  // goal -> score
  AdamState gen_opt;
  AdamState disc_opt;
  int z_dim = 4;
  double alpha = 0.0;
  Box goal_box;
};

struct GanConfig {
  int z_dim = 4;
  std::vector<std::size_t> gen_hidden = {128, 128};
  std::vector<std::size_t> disc_hidden = {256, 256};
  double learning_rate = 1e-3;
  int batch_size = 64;
};

GoalGan make_goal_gan(const GanConfig& cfg, const Box& goal_box, Rng& rng);

// z ~ U[0,1]^z_dim through the generator, output scaled into goal_box.
Vec3 sample_micro_goal(const GoalGan& gan, Rng& rng);

struct GanLoss {
  double loss = 0.0;
  MlpGrads grads;
};

// (1-alpha) E[(D(g_a)-1)^2] + alpha E[(D(g_d)-1)^2] + E[D(G(z))^2];
// gradients flow to the discriminator only.
GanLoss disc_loss(const GoalGan& gan, const std::vector<Vec3>& achieved_batch,
                  const std::vector<Vec3>& desired_batch,
                  const std::vector<Vec3>& fake_batch);

// E[(D(G(z))-1)^2]; gradients flow to the generator through a frozen
// discriminator. z_batch is batch_size x z_dim.
GanLoss gen_loss(const GoalGan& gan, const Mat& z_batch);

// Alternating 1:1 discriminator/generator Adam steps on pool samples.
void train_gan(GoalGan& gan, const GoalPools& pools, int iterations, int batch_size,
               Rng& rng);

// Success-driven alpha schedule: alpha steps up once the micro-goal success
// rate has stayed at or above the threshold for patience consecutive epochs.
struct AlphaSchedule {
  double success_threshold = 0.6;
  int patience_epochs = 3;
  double alpha_increment = 0.2;
  int consecutive_hits = 0;
  std::size_t processed = 0;  // epochs already consumed from the history
};

// Consumes any new entries of the chronological success-rate history and
// advances gan.alpha when the rule fires. Returns true if alpha changed.
bool maybe_advance_alpha(AlphaSchedule& schedule, GoalGan& gan,
                         const std::vector<double>& success_rate_history);

}  // namespace mamic
