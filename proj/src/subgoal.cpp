#include "mamic/subgoal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mamic {

namespace {
constexpr double kFlatEps = 1e-6;
constexpr double kRatioCap = 100.0;
}  // namespace

std::vector<double> dense_reward_series(const DemoTrajectory& traj) {
  std::vector<double> dense;
  dense.reserve(traj.achieved_goals.size());
  for (Vec3 g : traj.achieved_goals) {
    const double d = dist(g, traj.desired_goal);
    dense.push_back(d * d);
  }
  return dense;
}

void gradient_ratio_series(const std::vector<double>& dense,
                           std::vector<double>& gradient_out,
                           std::vector<double>& ratio_out) {
  if (dense.size() < 3)
    throw std::invalid_argument("gradient_ratio_series: need at least 3 samples");
  const std::size_t n = dense.size();
  gradient_out.assign(n, 0.0);
  ratio_out.assign(n, 1.0);
  for (std::size_t i = 1; i < n; ++i) gradient_out[i] = dense[i] - dense[i - 1];
  for (std::size_t i = 2; i < n; ++i) {
    const double g = gradient_out[i];
    const double prev = gradient_out[i - 1];
    if (std::abs(prev) < kFlatEps) {
      // Flat segment: a flat-to-flat step is no event, a flat-to-moving step
      // is the contact moment and must register as a spike.
      ratio_out[i] = std::abs(g) < kFlatEps
                         ? 1.0
                         : std::min(kRatioCap, std::abs(g) / kFlatEps);
    } else {
      ratio_out[i] = g / prev;
    }
  }
}

SubgoalSignal subgoal_signal(const DemoTrajectory& traj) {
  SubgoalSignal s;
  s.dense = dense_reward_series(traj);
  gradient_ratio_series(s.dense, s.gradient, s.ratio);
  const std::size_t n = s.dense.size();
  s.p.assign(n, 0.0);
  // Selection window: endpoints excluded (first two indices and the last).
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double v = std::abs(s.ratio[i]);
    if (!any || v < lo) lo = v;
    if (!any || v > hi) hi = v;
    any = true;
  }
  if (!any) return s;
  const double span = hi - lo;
  for (std::size_t i = 2; i + 1 < n; ++i)
    s.p[i] = span > 0.0 ? (std::abs(s.ratio[i]) - lo) / span : 1.0;
  return s;
}

std::vector<SubgoalPair> extract_subgoals(const std::vector<DemoTrajectory>& trajs,
                                          int num_subgoals) {
  if (num_subgoals < 1)
    throw std::invalid_argument("extract_subgoals: num_subgoals must be >= 1");
  std::vector<SubgoalPair> pairs;
  for (const DemoTrajectory& traj : trajs) {
    if (traj.states.size() < 3)
      throw std::invalid_argument("extract_subgoals: trajectory shorter than 3");
    SubgoalSignal sig = subgoal_signal(traj);
    const std::size_t n = sig.p.size();
    std::vector<std::size_t> idx;
    for (std::size_t i = 2; i + 1 < n; ++i) idx.push_back(i);
    if (idx.size() < static_cast<std::size_t>(num_subgoals))
      throw std::invalid_argument("extract_subgoals: fewer usable indices than requested");
    // Highest p first; equal p resolves toward the later index.
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (sig.p[a] != sig.p[b]) return sig.p[a] > sig.p[b];
      return a > b;
    });
    for (int k = 0; k < num_subgoals; ++k)
      pairs.push_back({traj.start_state(), traj.achieved_goals[idx[k]]});
  }
  return pairs;
}

SubgoalModel train_extractor(const std::vector<SubgoalPair>& pairs,
                             const ExtractorConfig& cfg, const Box& goal_box,
                             Rng& rng) {
  if (pairs.empty()) throw std::invalid_argument("train_extractor: no pairs");
  const std::size_t in_dim = pairs[0].start_state.size();
  std::vector<std::size_t> sizes;
  sizes.push_back(in_dim);
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(3);
  SubgoalModel model;
  model.goal_box = goal_box;
  model.regressor = make_mlp(sizes, Activation::ReLU, Activation::Identity, rng);
  AdamState opt = make_adam(model.regressor, cfg.learning_rate);

  const int bs = std::min<int>(cfg.batch_size, static_cast<int>(pairs.size()));
  double window_sum = 0.0;
  int window_n = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    Mat x(bs, in_dim);
    Mat target(bs, 3);
    for (int r = 0; r < bs; ++r) {
      const SubgoalPair& p = pairs[rng.uniform_index(pairs.size())];
      std::copy(p.start_state.begin(), p.start_state.end(), x.row(r));
      target(r, 0) = p.subgoal.x;
      target(r, 1) = p.subgoal.y;
      target(r, 2) = p.subgoal.z;
    }
    ForwardCache cache = forward_cached(model.regressor, std::move(x));
    const Mat& y = cache.output();
    Mat grad(bs, 3);
    double mse = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      const double e = y.data[i] - target.data[i];
      mse += e * e;
      grad.data[i] = 2.0 * e / static_cast<double>(bs * 3);
    }
    mse /= static_cast<double>(bs * 3);
    MlpGrads grads = zero_grads(model.regressor);
    backward(model.regressor, cache, grad, grads);
    adam_step(model.regressor, grads, opt);
    model.final_mse = mse;
    window_sum += mse;
    if (++window_n == 10) {
      model.mse_history.push_back(window_sum / 10.0);
      window_sum = 0.0;
      window_n = 0;
    }
  }
  model.trained = true;
  return model;
}

Vec3 predict_subgoal(const SubgoalModel& model, const std::vector<double>& start_state) {
  if (!model.trained) throw std::runtime_error("predict_subgoal: model not trained");
  std::vector<double> y = forward(model.regressor, start_state);
  return model.goal_box.clip({y[0], y[1], y[2]});
}

void save_signals_csv(const std::vector<DemoTrajectory>& trajs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "trajectory,step,dense,gradient,ratio,p\n";
  for (std::size_t t = 0; t < trajs.size(); ++t) {
    SubgoalSignal s = subgoal_signal(trajs[t]);
    for (std::size_t i = 0; i < s.dense.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g,%.9g,%.9g,%.9g\n", t, i,
                    s.dense[i], s.gradient[i], s.ratio[i], s.p[i]);
      out << buf;
    }
  }
}

void save_pairs_csv(const std::vector<SubgoalPair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "pair";
  if (!pairs.empty())
    for (std::size_t i = 0; i < pairs[0].start_state.size(); ++i) out << ",s" << i;
  out << ",subgoal_x,subgoal_y,subgoal_z\n";
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out << k;
    char buf[32];
    for (double v : pairs[k].start_state) {
      std::snprintf(buf, sizeof(buf), ",%.9g", v);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.9g", pairs[k].subgoal.x);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.9g", pairs[k].subgoal.y);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.9g\n", pairs[k].subgoal.z);
    out << buf;
  }
}

}  // namespace mamic
