#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mamic/mat.hpp"
#include "mamic/rng.hpp"

namespace mamic {

enum class Activation { ReLU, Tanh, Identity, Sigmoid };

// Fully-connected network with explicit backpropagation. weights[l] has
// shape layer_sizes[l] x layer_sizes[l+1] so a batch X (N x in) flows as
// X * W0 ... The hidden activation applies to every layer except the last,
// the output activation to the last only.
struct MlpNet {
  std::vector<std::size_t> layer_sizes;
  std::vector<Mat> weights;
  std::vector<std::vector<double>> biases;
  Activation hidden_activation = Activation::ReLU;
  Activation output_activation = Activation::Identity;
  // Bumped on every parameter change; lets caches detect staleness.
  std::uint64_t version = 0;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t n_layers() const { return weights.size(); }
  std::size_t param_count() const;
};

// Per-layer parameter gradients; shapes mirror MlpNet.
struct MlpGrads {
  std::vector<Mat> weights;
  std::vector<std::vector<double>> biases;

  void scale(double s);
  void add(const MlpGrads& other, double s = 1.0);
};

// Activations and pre-activations of one forward pass, kept for backward.
struct ForwardCache {
  const MlpNet* net = nullptr;
  std::uint64_t version = 0;
  Mat input;
  std::vector<Mat> pre;   // pre-activation per layer
  std::vector<Mat> post;  // post-activation per layer; post.back() is the output

  const Mat& output() const { return post.back(); }
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
MlpNet make_mlp(const std::vector<std::size_t>& layer_sizes,
                Activation hidden, Activation output, Rng& rng);

MlpGrads zero_grads(const MlpNet& net);

Mat forward(const MlpNet& net, const Mat& input);
std::vector<double> forward(const MlpNet& net, const std::vector<double>& input);

ForwardCache forward_cached(const MlpNet& net, Mat input);

// Backpropagates output_grad (N x out, dL/dy per row) through the cached
// pass. Parameter gradients are accumulated into grads (summed over the
// batch); the return value is dL/dinput. Throws if the cache is stale.
Mat backward(const MlpNet& net, const ForwardCache& cache,
             const Mat& output_grad, MlpGrads& grads);

// Checkpoint format: magic "MAMIC-NET-v1" then little-endian binary
// layer sizes, activation tags and parameter arrays. Round-trips
// bit-exactly.
void save_net(const MlpNet& net, const std::string& path);
MlpNet load_net(const std::string& path);
void write_net(const MlpNet& net, std::ostream& out);
MlpNet read_net(std::istream& in);

}  // namespace mamic
