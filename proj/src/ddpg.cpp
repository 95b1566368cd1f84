#include "mamic/ddpg.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace mamic {

void Normalizer::update(const std::vector<double>& x) {
  if (mean.empty()) {
    mean.assign(x.size(), 0.0);
    m2.assign(x.size(), 0.0);
  }
  if (x.size() != mean.size()) throw std::invalid_argument("Normalizer: dim mismatch");
  count += 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    mean[i] += d / static_cast<double>(count);
    m2[i] += d * (x[i] - mean[i]);
  }
}

void Normalizer::apply(const double* in, double* out, std::size_t n) const {
  for (std::size_t i = 0; i < n; ++i) {
    double std_i = 1.0;
    if (count > 1) std_i = std::sqrt(std::max(m2[i] / static_cast<double>(count), 1e-8));
    double v = (in[i] - (count > 0 ? mean[i] : 0.0)) / std_i;
    if (v > clip) v = clip;
    if (v < -clip) v = -clip;
    out[i] = v;
  }
}

std::vector<double> Normalizer::operator()(const std::vector<double>& x) const {
  std::vector<double> out(x.size());
  apply(x.data(), out.data(), x.size());
  return out;
}

namespace {

constexpr std::size_t kGoalDim = 3;

void copy_goal(Vec3 g, double* out) {
  out[0] = g.x;
  out[1] = g.y;
  out[2] = g.z;
}

}  // namespace

DdpgAgent::DdpgAgent(std::size_t obs_dim, std::size_t action_dim,
                     const DdpgConfig& cfg, Rng& rng)
    : obs_dim_(obs_dim), action_dim_(action_dim), cfg_(cfg),
      obs_norm_(obs_dim), goal_norm_(kGoalDim) {
  std::vector<std::size_t> actor_sizes{obs_dim + kGoalDim};
  actor_sizes.insert(actor_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_sizes.push_back(action_dim);
  actor_ = make_mlp(actor_sizes, Activation::ReLU, Activation::Tanh, rng);

  std::vector<std::size_t> critic_sizes{obs_dim + action_dim + kGoalDim};
  critic_sizes.insert(critic_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_sizes.push_back(1);
  critic_ = make_mlp(critic_sizes, Activation::ReLU, Activation::Identity, rng);

  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = make_adam(actor_, cfg.actor_lr);
  critic_opt_ = make_adam(critic_, cfg.critic_lr);
}

std::vector<double> DdpgAgent::actor_input(const std::vector<double>& state,
                                           Vec3 goal) const {
  if (state.size() != obs_dim_) throw std::invalid_argument("act: state dim mismatch");
  std::vector<double> in(obs_dim_ + kGoalDim);
  obs_norm_.apply(state.data(), in.data(), obs_dim_);
  double graw[kGoalDim];
  copy_goal(goal, graw);
  goal_norm_.apply(graw, in.data() + obs_dim_, kGoalDim);
  return in;
}

std::vector<double> DdpgAgent::act(const std::vector<double>& state, Vec3 goal,
                                   bool explore, Rng& rng) const {
  if (explore && rng.uniform() < cfg_.noise.random_action_eps) {
    std::vector<double> a(action_dim_);
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    return a;
  }
  std::vector<double> a = forward(actor_, actor_input(state, goal));
  if (explore) {
    for (double& v : a) {
      v += rng.normal(0.0, cfg_.noise.gaussian_sigma);
      if (v > 1.0) v = 1.0;
      if (v < -1.0) v = -1.0;
    }
  }
  return a;
}

Mat DdpgAgent::batch_actor_input(const std::vector<SampledTransition>& batch,
                                 bool next) const {
  Mat x(batch.size(), obs_dim_ + kGoalDim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i].t;
    const std::vector<double>& s = next ? t.next_state : t.state;
    double* row = x.row(i);
    obs_norm_.apply(s.data(), row, obs_dim_);
    double graw[kGoalDim];
    copy_goal(t.goal, graw);
    goal_norm_.apply(graw, row + obs_dim_, kGoalDim);
  }
  return x;
}

Mat DdpgAgent::batch_critic_input(const std::vector<SampledTransition>& batch) const {
  Mat x(batch.size(), obs_dim_ + action_dim_ + kGoalDim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i].t;
    double* row = x.row(i);
    obs_norm_.apply(t.state.data(), row, obs_dim_);
    for (std::size_t j = 0; j < action_dim_; ++j) row[obs_dim_ + j] = t.action[j];
    double graw[kGoalDim];
    copy_goal(t.goal, graw);
    goal_norm_.apply(graw, row + obs_dim_ + action_dim_, kGoalDim);
  }
  return x;
}

std::vector<double> DdpgAgent::td_targets(
    const std::vector<SampledTransition>& batch) const {
  Mat next_in = batch_actor_input(batch, /*next=*/true);
  Mat next_actions = forward(target_actor_, next_in);
  Mat critic_in(batch.size(), obs_dim_ + action_dim_ + kGoalDim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* ain = next_in.row(i);
    double* row = critic_in.row(i);
    for (std::size_t j = 0; j < obs_dim_; ++j) row[j] = ain[j];
    for (std::size_t j = 0; j < action_dim_; ++j)
      row[obs_dim_ + j] = next_actions(i, j);
    for (std::size_t j = 0; j < kGoalDim; ++j)
      row[obs_dim_ + action_dim_ + j] = ain[obs_dim_ + j];
  }
  Mat q_next = forward(target_critic_, critic_in);
  const double floor = -1.0 / (1.0 - cfg_.gamma);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double v = batch[i].t.reward + cfg_.gamma * q_next(i, 0);
    if (v < floor) v = floor;
    if (v > 0.0) v = 0.0;
    y[i] = v;
  }
  return y;
}

TrainStats DdpgAgent::compute_gradients(const std::vector<SampledTransition>& batch,
                                        MlpGrads* critic_grads,
                                        MlpGrads* actor_grads) const {
  if (batch.empty()) throw std::invalid_argument("compute_gradients: empty batch");
  const std::size_t n = batch.size();
  TrainStats stats;

  // Critic regression onto the TD targets.
  std::vector<double> y = td_targets(batch);
  ForwardCache critic_cache = forward_cached(critic_, batch_critic_input(batch));
  const Mat& q = critic_cache.output();
  Mat qgrad(n, 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = q(i, 0) - y[i];
    loss += e * e;
    qgrad(i, 0) = 2.0 * e / static_cast<double>(n);
  }
  stats.critic_loss = loss / static_cast<double>(n);
  if (critic_grads) {
    *critic_grads = zero_grads(critic_);
    backward(critic_, critic_cache, qgrad, *critic_grads);
  }

  // Actor ascends mean Q(s, pi(s,g), g) through the frozen critic.
  Mat actor_in = batch_actor_input(batch, /*next=*/false);
  ForwardCache actor_cache = forward_cached(actor_, actor_in);
  const Mat& pi = actor_cache.output();
  Mat critic_in(n, obs_dim_ + action_dim_ + kGoalDim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ain = actor_in.row(i);
    double* row = critic_in.row(i);
    for (std::size_t j = 0; j < obs_dim_; ++j) row[j] = ain[j];
    for (std::size_t j = 0; j < action_dim_; ++j) row[obs_dim_ + j] = pi(i, j);
    for (std::size_t j = 0; j < kGoalDim; ++j)
      row[obs_dim_ + action_dim_ + j] = ain[obs_dim_ + j];
  }
  ForwardCache q_cache = forward_cached(critic_, std::move(critic_in));
  const Mat& q_pi = q_cache.output();
  double objective = 0.0;
  Mat ongrad(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    objective += q_pi(i, 0);
    ongrad(i, 0) = -1.0 / static_cast<double>(n);  // descend -mean(Q)
  }
  stats.actor_objective = objective / static_cast<double>(n);
  if (actor_grads) {
    MlpGrads critic_scratch = zero_grads(critic_);  // frozen, gradients unused
    Mat dinput = backward(critic_, q_cache, ongrad, critic_scratch);
    Mat daction(n, action_dim_);
    const double l2 = 2.0 * cfg_.action_l2 / static_cast<double>(n * action_dim_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < action_dim_; ++j)
        daction(i, j) = dinput(i, obs_dim_ + j) + l2 * pi(i, j);
    *actor_grads = zero_grads(actor_);
    backward(actor_, actor_cache, daction, *actor_grads);
  }
  return stats;
}

double DdpgAgent::critic_td_loss(const std::vector<SampledTransition>& batch) const {
  return compute_gradients(batch, nullptr, nullptr).critic_loss;
}

double DdpgAgent::actor_mean_q(const std::vector<SampledTransition>& batch) const {
  return compute_gradients(batch, nullptr, nullptr).actor_objective;
}

TrainStats DdpgAgent::train_step(const std::vector<SampledTransition>& batch) {
  MlpGrads critic_grads, actor_grads;
  TrainStats stats = compute_gradients(batch, &critic_grads, &actor_grads);
  if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.actor_objective))
    throw std::runtime_error("train_step: non-finite loss (critic " +
                             std::to_string(stats.critic_loss) + ", actor " +
                             std::to_string(stats.actor_objective) + ")");
  adam_step(critic_, critic_grads, critic_opt_);
  adam_step(actor_, actor_grads, actor_opt_);
  train_steps_ += 1;
  update_targets();
  return stats;
}

void DdpgAgent::update_targets() {
  const bool hard = cfg_.target_update_period > 0;
  if (hard && train_steps_ % static_cast<std::size_t>(cfg_.target_update_period) != 0)
    return;
  const double tau = hard ? 1.0 : cfg_.tau;
  auto blend = [tau](MlpNet& target, const MlpNet& live) {
    for (std::size_t l = 0; l < live.n_layers(); ++l) {
      for (std::size_t i = 0; i < live.weights[l].data.size(); ++i)
        target.weights[l].data[i] =
            (1.0 - tau) * target.weights[l].data[i] + tau * live.weights[l].data[i];
      for (std::size_t i = 0; i < live.biases[l].size(); ++i)
        target.biases[l][i] =
            (1.0 - tau) * target.biases[l][i] + tau * live.biases[l][i];
    }
    target.version += 1;
  };
  blend(target_actor_, actor_);
  blend(target_critic_, critic_);
}

void DdpgAgent::observe_episode(const std::vector<Transition>& episode) {
  for (const Transition& t : episode) {
    obs_norm_.update(t.state);
    double g[kGoalDim];
    copy_goal(t.goal, g);
    goal_norm_.update({g[0], g[1], g[2]});
    copy_goal(t.achieved, g);
    goal_norm_.update({g[0], g[1], g[2]});
  }
  if (!episode.empty()) obs_norm_.update(episode.back().next_state);
}

namespace {

nlohmann::json normalizer_to_json(const Normalizer& n) {
  return {{"mean", n.mean}, {"m2", n.m2}, {"count", n.count}, {"clip", n.clip}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.m2 = j.at("m2").get<std::vector<double>>();
  n.count = j.at("count").get<std::size_t>();
  n.clip = j.at("clip").get<double>();
  return n;
}

}  // namespace

void DdpgAgent::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_net(actor_, dir + "/actor.net");
  save_net(critic_, dir + "/critic.net");
  save_net(target_actor_, dir + "/target_actor.net");
  save_net(target_critic_, dir + "/target_critic.net");
  nlohmann::json meta;
  meta["obs_dim"] = obs_dim_;
  meta["action_dim"] = action_dim_;
  meta["gamma"] = cfg_.gamma;
  meta["obs_norm"] = normalizer_to_json(obs_norm_);
  meta["goal_norm"] = normalizer_to_json(goal_norm_);
  std::ofstream out(dir + "/meta.json");
  if (!out) throw std::runtime_error("cannot write checkpoint meta: " + dir);
  out << meta.dump(2) << '\n';
}

DdpgAgent DdpgAgent::load_for_eval(const std::string& dir) {
  std::ifstream in(dir + "/meta.json");
  if (!in) throw std::runtime_error("cannot open checkpoint meta: " + dir + "/meta.json");
  nlohmann::json meta = nlohmann::json::parse(in);
  DdpgAgent agent;
  agent.obs_dim_ = meta.at("obs_dim").get<std::size_t>();
  agent.action_dim_ = meta.at("action_dim").get<std::size_t>();
  agent.cfg_.gamma = meta.at("gamma").get<double>();
  agent.actor_ = load_net(dir + "/actor.net");
  if (agent.actor_.input_dim() != agent.obs_dim_ + kGoalDim ||
      agent.actor_.output_dim() != agent.action_dim_)
    throw std::runtime_error("checkpoint: actor shape does not match meta");
  agent.obs_norm_ = normalizer_from_json(meta.at("obs_norm"));
  agent.goal_norm_ = normalizer_from_json(meta.at("goal_norm"));
  return agent;
}

}  // namespace mamic
