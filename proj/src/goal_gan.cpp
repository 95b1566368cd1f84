#include "mamic/goal_gan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mamic {

namespace {

// The generator ends in tanh; map [-1,1]^3 onto the goal box.
Vec3 scale_to_box(const double* t, const Box& box) {
  auto lerp = [](double lo, double hi, double u) { return lo + (hi - lo) * 0.5 * (u + 1.0); };
  return {lerp(box.lo.x, box.hi.x, t[0]), lerp(box.lo.y, box.hi.y, t[1]),
          lerp(box.lo.z, box.hi.z, t[2])};
}

Mat goals_to_mat(const std::vector<Vec3>& goals) {
  Mat m(goals.size(), 3);
  for (std::size_t i = 0; i < goals.size(); ++i) {
    m(i, 0) = goals[i].x;
    m(i, 1) = goals[i].y;
    m(i, 2) = goals[i].z;
  }
  return m;
}

}  // namespace

GoalGan make_goal_gan(const GanConfig& cfg, const Box& goal_box, Rng& rng) {
  GoalGan gan;
  gan.z_dim = cfg.z_dim;
  gan.goal_box = goal_box;
  std::vector<std::size_t> gen_sizes;
  gen_sizes.push_back(static_cast<std::size_t>(cfg.z_dim));
  gen_sizes.insert(gen_sizes.end(), cfg.gen_hidden.begin(), cfg.gen_hidden.end());
  gen_sizes.push_back(3);
  gan.generator = make_mlp(gen_sizes, Activation::Tanh, Activation::Tanh, rng);
  std::vector<std::size_t> disc_sizes;
  disc_sizes.push_back(3);
  disc_sizes.insert(disc_sizes.end(), cfg.disc_hidden.begin(), cfg.disc_hidden.end());
  disc_sizes.push_back(1);
  gan.discriminator = make_mlp(disc_sizes, Activation::ReLU, Activation::Identity, rng);
  gan.gen_opt = make_adam(gan.generator, cfg.learning_rate);
  gan.disc_opt = make_adam(gan.discriminator, cfg.learning_rate);
  return gan;
}

Vec3 sample_micro_goal(const GoalGan& gan, Rng& rng) {
  std::vector<double> z(gan.z_dim);
  for (double& v : z) v = rng.uniform();
  std::vector<double> t = forward(gan.generator, z);
  Vec3 g = scale_to_box(t.data(), gan.goal_box);
  return gan.goal_box.clip(g);
}

GanLoss disc_loss(const GoalGan& gan, const std::vector<Vec3>& achieved_batch,
                  const std::vector<Vec3>& desired_batch,
                  const std::vector<Vec3>& fake_batch) {
  if (achieved_batch.empty() || desired_batch.empty() || fake_batch.empty())
    throw std::invalid_argument("disc_loss: empty batch");
  const double a = gan.alpha;
  const std::size_t na = achieved_batch.size();
  const std::size_t nd = desired_batch.size();
  const std::size_t nf = fake_batch.size();

  Mat x(na + nd + nf, 3);
  Mat all = goals_to_mat(achieved_batch);
  std::copy(all.data.begin(), all.data.end(), x.data.begin());
  all = goals_to_mat(desired_batch);
  std::copy(all.data.begin(), all.data.end(), x.data.begin() + na * 3);
  all = goals_to_mat(fake_batch);
  std::copy(all.data.begin(), all.data.end(), x.data.begin() + (na + nd) * 3);

  ForwardCache cache = forward_cached(gan.discriminator, std::move(x));
  const Mat& d = cache.output();

  GanLoss out;
  out.grads = zero_grads(gan.discriminator);
  Mat dgrad(d.rows, 1);
  double loss_a = 0.0, loss_d = 0.0, loss_f = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double v = d(i, 0) - 1.0;
    loss_a += v * v;
    dgrad(i, 0) = (1.0 - a) * 2.0 * v / static_cast<double>(na);
  }
  for (std::size_t i = 0; i < nd; ++i) {
    const double v = d(na + i, 0) - 1.0;
    loss_d += v * v;
    dgrad(na + i, 0) = a * 2.0 * v / static_cast<double>(nd);
  }
  for (std::size_t i = 0; i < nf; ++i) {
    const double v = d(na + nd + i, 0);
    loss_f += v * v;
    dgrad(na + nd + i, 0) = 2.0 * v / static_cast<double>(nf);
  }
  out.loss = (1.0 - a) * loss_a / static_cast<double>(na) +
             a * loss_d / static_cast<double>(nd) + loss_f / static_cast<double>(nf);
  backward(gan.discriminator, cache, dgrad, out.grads);
  return out;
}

GanLoss gen_loss(const GoalGan& gan, const Mat& z_batch) {
  if (z_batch.rows == 0) throw std::invalid_argument("gen_loss: empty batch");
  ForwardCache gen_cache = forward_cached(gan.generator, z_batch);
  const Mat& t = gen_cache.output();

  // Scale tanh outputs into the goal box before the discriminator sees them.
  Mat goals(t.rows, 3);
  const Vec3 lo = gan.goal_box.lo, hi = gan.goal_box.hi;
  const double half[3] = {(hi.x - lo.x) * 0.5, (hi.y - lo.y) * 0.5, (hi.z - lo.z) * 0.5};
  const double mid[3] = {(hi.x + lo.x) * 0.5, (hi.y + lo.y) * 0.5, (hi.z + lo.z) * 0.5};
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < 3; ++j) goals(i, j) = mid[j] + half[j] * t(i, j);

  ForwardCache disc_cache = forward_cached(gan.discriminator, std::move(goals));
  const Mat& d = disc_cache.output();

  GanLoss out;
  out.grads = zero_grads(gan.generator);
  Mat dgrad(d.rows, 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < d.rows; ++i) {
    const double v = d(i, 0) - 1.0;
    loss += v * v;
    dgrad(i, 0) = 2.0 * v / static_cast<double>(d.rows);
  }
  out.loss = loss / static_cast<double>(d.rows);

  MlpGrads disc_scratch = zero_grads(gan.discriminator);  // discarded: D frozen
  Mat goal_grad = backward(gan.discriminator, disc_cache, dgrad, disc_scratch);
  for (std::size_t i = 0; i < goal_grad.rows; ++i)
    for (std::size_t j = 0; j < 3; ++j) goal_grad(i, j) *= half[j];
  backward(gan.generator, gen_cache, goal_grad, out.grads);
  return out;
}

namespace {

std::vector<Vec3> sample_pool(const std::deque<Vec3>& pool, int n, Rng& rng) {
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
  return out;
}

}  // namespace

void train_gan(GoalGan& gan, const GoalPools& pools, int iterations, int batch_size,
               Rng& rng) {
  if (iterations <= 0) return;
  if (pools.achieved.empty() || pools.desired.empty())
    throw std::runtime_error("train_gan: empty goal pool");
  for (int it = 0; it < iterations; ++it) {
    std::vector<Vec3> real_a = sample_pool(pools.achieved, batch_size, rng);
    std::vector<Vec3> real_d = sample_pool(pools.desired, batch_size, rng);
    std::vector<Vec3> fake;
    fake.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) fake.push_back(sample_micro_goal(gan, rng));
    GanLoss dl = disc_loss(gan, real_a, real_d, fake);
    adam_step(gan.discriminator, dl.grads, gan.disc_opt);

    Mat z(batch_size, gan.z_dim);
    for (double& v : z.data) v = rng.uniform();
    GanLoss gl = gen_loss(gan, z);
    adam_step(gan.generator, gl.grads, gan.gen_opt);
  }
}

bool maybe_advance_alpha(AlphaSchedule& schedule, GoalGan& gan,
                         const std::vector<double>& success_rate_history) {
  bool advanced = false;
  while (schedule.processed < success_rate_history.size()) {
    const double rate = success_rate_history[schedule.processed++];
    if (rate < 0.0 || rate > 1.0)
      throw std::invalid_argument("maybe_advance_alpha: rate outside [0,1]");
    if (rate >= schedule.success_threshold) {
      schedule.consecutive_hits += 1;
      if (schedule.consecutive_hits >= schedule.patience_epochs) {
        gan.alpha = std::min(1.0, gan.alpha + schedule.alpha_increment);
        schedule.consecutive_hits = 0;
        advanced = true;
      }
    } else {
      schedule.consecutive_hits = 0;
    }
  }
  return advanced;
}

}  // namespace mamic
