#include "mamic/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mamic {

namespace {

void update_array(double* p, const double* g, double* m, double* v,
                  std::size_t n, double lr, double b1, double b2, double eps,
                  double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

AdamState make_adam(const MlpNet& net, double learning_rate) {
  AdamState s;
  s.first_moment = zero_grads(net);
  s.second_moment = zero_grads(net);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(MlpNet& net, const MlpGrads& grads, AdamState& state) {
  if (grads.weights.size() != net.n_layers() ||
      state.first_moment.weights.size() != net.n_layers())
    throw std::invalid_argument("adam_step: shape mismatch");
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    if (!grads.weights[l].same_shape(net.weights[l]) ||
        grads.biases[l].size() != net.biases[l].size())
      throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                  std::to_string(l));
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    update_array(net.weights[l].data.data(), grads.weights[l].data.data(),
                 state.first_moment.weights[l].data.data(),
                 state.second_moment.weights[l].data.data(),
                 net.weights[l].data.size(), state.learning_rate, state.beta1,
                 state.beta2, state.epsilon, bc1, bc2);
    update_array(net.biases[l].data(), grads.biases[l].data(),
                 state.first_moment.biases[l].data(),
                 state.second_moment.biases[l].data(), net.biases[l].size(),
                 state.learning_rate, state.beta1, state.beta2, state.epsilon,
                 bc1, bc2);
  }
  net.version += 1;
}

}  // namespace mamic
