#include "mamic/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace mamic {

void ReplayBuffer::store_episode(std::vector<Transition> episode) {
  if (episode.empty()) throw std::invalid_argument("store_episode: empty episode");
  for (std::size_t i = 0; i < episode.size(); ++i) {
    if (episode[i].step_index != static_cast<int>(i))
      throw std::invalid_argument("store_episode: non-contiguous step_index");
    if (episode[i].episode_id != episode[0].episode_id)
      throw std::invalid_argument("store_episode: mixed episode ids");
  }
  size_ += episode.size();
  episodes_.push_back(std::move(episode));
  while (size_ > capacity_ && episodes_.size() > 1) {
    size_ -= episodes_.front().size();
    episodes_.pop_front();
  }
  rebuild_index();
}

void ReplayBuffer::rebuild_index() {
  cumulative_.clear();
  cumulative_.reserve(episodes_.size());
  std::size_t total = 0;
  for (const auto& ep : episodes_) {
    total += ep.size();
    cumulative_.push_back(total);
  }
}

std::vector<SampledTransition> ReplayBuffer::sample_minibatch(
    std::size_t n, const SamplingStrategy& strategy,
    const GoalSource& micro_goal_source, const GoalSource& desired_goal_source,
    const TaskSpec& spec, Rng& rng) const {
  if (empty()) throw std::runtime_error("sample_minibatch: empty buffer");
  std::vector<SampledTransition> batch;
  batch.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t flat = rng.uniform_index(size_);
    const auto ep_it =
        std::upper_bound(cumulative_.begin(), cumulative_.end(), flat);
    const std::size_t ep_idx = static_cast<std::size_t>(ep_it - cumulative_.begin());
    const auto& ep = episodes_[ep_idx];
    const std::size_t base = ep_idx == 0 ? 0 : cumulative_[ep_idx - 1];
    const std::size_t i = flat - base;

    SampledTransition s;
    s.t = ep[i];
    if (rng.uniform() < strategy.relabel_fraction) {
      bool use_her = true;
      if (strategy.variant != StrategyVariant::PlainHer)
        use_her = rng.uniform() < strategy.her_share;
      if (use_her) {
        // Future strategy: a post-step achieved goal from this episode at a
        // state index strictly after the transition's own state.
        const std::size_t j = i + rng.uniform_index(ep.size() - i);
        s.t.goal = ep[j].achieved;
        s.tag = RelabelTag::Her;
        s.her_source_step = static_cast<int>(j);
      } else if (strategy.variant == StrategyVariant::MicroG) {
        s.t.goal = micro_goal_source(rng);
        s.tag = RelabelTag::Micro;
      } else {
        s.t.goal = desired_goal_source(rng);
        s.tag = RelabelTag::Desired;
      }
      s.t.reward = compute_reward(s.t.achieved, s.t.goal, s.t.aux_flag, spec);
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace mamic
