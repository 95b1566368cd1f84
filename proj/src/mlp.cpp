#include "mamic/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mamic {

namespace {

constexpr char kMagic[] = "MAMIC-NET-v1";

void apply_activation(Activation act, Mat& m) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::ReLU:
      for (double& v : m.data)
        if (v < 0.0) v = 0.0;
      return;
    case Activation::Tanh:
      for (double& v : m.data) v = std::tanh(v);
      return;
    case Activation::Sigmoid:
      for (double& v : m.data) v = 1.0 / (1.0 + std::exp(-v));
      return;
  }
}

// Multiplies grad elementwise by act'(pre) using post where cheaper.
void apply_activation_grad(Activation act, const Mat& pre, const Mat& post, Mat& grad) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::ReLU:
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (pre.data[i] <= 0.0) grad.data[i] = 0.0;
      return;
    case Activation::Tanh:
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        grad.data[i] *= 1.0 - post.data[i] * post.data[i];
      return;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        grad.data[i] *= post.data[i] * (1.0 - post.data[i]);
      return;
  }
}

void add_bias_rows(Mat& m, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
  }
}

}  // namespace

std::size_t MlpNet::param_count() const {
  std::size_t n = 0;
  for (const Mat& w : weights) n += w.data.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

void MlpGrads::scale(double s) {
  for (Mat& w : weights)
    for (double& v : w.data) v *= s;
  for (auto& b : biases)
    for (double& v : b) v *= s;
}

void MlpGrads::add(const MlpGrads& other, double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].data.size(); ++i)
      weights[l].data[i] += s * other.weights[l].data[i];
    for (std::size_t i = 0; i < biases[l].size(); ++i)
      biases[l][i] += s * other.biases[l][i];
  }
}

MlpNet make_mlp(const std::vector<std::size_t>& layer_sizes,
                Activation hidden, Activation output, Rng& rng) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("make_mlp: need at least input and output layer");
  MlpNet net;
  net.layer_sizes = layer_sizes;
  net.hidden_activation = hidden;
  net.output_activation = output;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat w(fan_in, fan_out);
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

MlpGrads zero_grads(const MlpNet& net) {
  MlpGrads g;
  for (const Mat& w : net.weights) g.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

Mat forward(const MlpNet& net, const Mat& input) {
  if (input.cols != net.input_dim())
    throw std::invalid_argument("forward: input dim " + std::to_string(input.cols) +
                                " != net input " + std::to_string(net.input_dim()));
  Mat h = input;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    Mat z = matmul(h, net.weights[l]);
    add_bias_rows(z, net.biases[l]);
    apply_activation(l + 1 == net.n_layers() ? net.output_activation
                                             : net.hidden_activation,
                     z);
    h = std::move(z);
  }
  return h;
}

std::vector<double> forward(const MlpNet& net, const std::vector<double>& input) {
  Mat x(1, input.size(), input);
  return forward(net, x).data;
}

ForwardCache forward_cached(const MlpNet& net, Mat input) {
  if (input.cols != net.input_dim())
    throw std::invalid_argument("forward_cached: input dim mismatch");
  ForwardCache cache;
  cache.net = &net;
  cache.version = net.version;
  cache.input = std::move(input);
  const Mat* h = &cache.input;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    Mat z = matmul(*h, net.weights[l]);
    add_bias_rows(z, net.biases[l]);
    cache.pre.push_back(z);
    apply_activation(l + 1 == net.n_layers() ? net.output_activation
                                             : net.hidden_activation,
                     z);
    cache.post.push_back(std::move(z));
    h = &cache.post.back();
  }
  return cache;
}

Mat backward(const MlpNet& net, const ForwardCache& cache,
             const Mat& output_grad, MlpGrads& grads) {
  if (cache.net != &net || cache.version != net.version)
    throw std::logic_error("backward: stale forward cache");
  if (!output_grad.same_shape(cache.post.back()))
    throw std::invalid_argument("backward: output_grad shape mismatch");
  if (grads.weights.size() != net.n_layers()) grads = zero_grads(net);

  Mat delta = output_grad;
  for (std::size_t l = net.n_layers(); l-- > 0;) {
    const Activation act = l + 1 == net.n_layers() ? net.output_activation
                                                   : net.hidden_activation;
    apply_activation_grad(act, cache.pre[l], cache.post[l], delta);
    const Mat& layer_in = l == 0 ? cache.input : cache.post[l - 1];
    // dW = in^T * delta, db = column sums of delta (accumulated).
    Mat dw = matmul_tn(layer_in, delta);
    for (std::size_t i = 0; i < dw.data.size(); ++i)
      grads.weights[l].data[i] += dw.data[i];
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* row = delta.row(i);
      for (std::size_t j = 0; j < delta.cols; ++j) grads.biases[l][j] += row[j];
    }
    delta = matmul_nt(delta, net.weights[l]);
  }
  return delta;
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void write_net(const MlpNet& net, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic) - 1);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_sizes.size()));
  for (std::size_t s : net.layer_sizes)
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(net.hidden_activation));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(net.output_activation));
  for (const Mat& w : net.weights)
    out.write(reinterpret_cast<const char*>(w.data.data()),
              static_cast<std::streamsize>(w.data.size() * sizeof(double)));
  for (const auto& b : net.biases)
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size() * sizeof(double)));
}

MlpNet read_net(std::istream& in) {
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic, expected MAMIC-NET-v1");
  const auto n_sizes = read_pod<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64)
    throw std::runtime_error("checkpoint: implausible layer count");
  MlpNet net;
  for (std::uint32_t i = 0; i < n_sizes; ++i)
    net.layer_sizes.push_back(read_pod<std::uint32_t>(in));
  net.hidden_activation = static_cast<Activation>(read_pod<std::uint8_t>(in));
  net.output_activation = static_cast<Activation>(read_pod<std::uint8_t>(in));
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    Mat w(net.layer_sizes[l], net.layer_sizes[l + 1]);
    in.read(reinterpret_cast<char*>(w.data.data()),
            static_cast<std::streamsize>(w.data.size() * sizeof(double)));
    net.weights.push_back(std::move(w));
  }
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    std::vector<double> b(net.layer_sizes[l + 1]);
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
    net.biases.push_back(std::move(b));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
  return net;
}

void save_net(const MlpNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  write_net(net, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

MlpNet load_net(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_net(in);
}

}  // namespace mamic
