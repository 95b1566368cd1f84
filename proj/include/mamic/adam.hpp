#pragma once

#include "mamic/mlp.hpp"

namespace mamic {

// Standard Adam with bias correction. Moment shapes mirror the network.
struct AdamState {
  MlpGrads first_moment;
  MlpGrads second_moment;
  std::size_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const MlpNet& net, double learning_rate);

// One Adam update in place; bumps net.version and state.step_count.
void adam_step(MlpNet& net, const MlpGrads& grads, AdamState& state);

}  // namespace mamic
