#include "mamic/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "json.hpp"

namespace mamic {

namespace fs = std::filesystem;

Method method_from_name(std::string_view name) {
  if (name == "ddpg") return Method::DdpgOnly;
  if (name == "her") return Method::Her;
  if (name == "micro-g") return Method::MicroG;
  if (name == "micro-sg") return Method::MicroSg;
  if (name == "macro") return Method::MacroOnly;
  if (name == "mamic") return Method::MaMiC;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::DdpgOnly: return "ddpg";
    case Method::Her: return "her";
    case Method::MicroG: return "micro-g";
    case Method::MicroSg: return "micro-sg";
    case Method::MacroOnly: return "macro";
    case Method::MaMiC: return "mamic";
  }
  return "unknown";
}

bool method_uses_gan(Method m) {
  return m == Method::MicroG || m == Method::MicroSg || m == Method::MaMiC;
}

bool method_uses_phases(Method m) {
  return m == Method::MacroOnly || m == Method::MaMiC;
}

SamplingStrategy ExperimentConfig::strategy() const {
  SamplingStrategy s;
  s.relabel_fraction = method == Method::DdpgOnly ? 0.0 : relabel_fraction;
  s.her_share = her_share;
  s.her_future_k = her_future_k;
  switch (method) {
    case Method::MicroG:
    case Method::MaMiC: s.variant = StrategyVariant::MicroG; break;
    case Method::MicroSg: s.variant = StrategyVariant::MicroSg; break;
    default: s.variant = StrategyVariant::PlainHer; break;
  }
  return s;
}

void ExperimentConfig::validate() const {
  auto positive = [](long long v, const char* field) {
    if (v <= 0) throw std::runtime_error(std::string("config field ") + field +
                                         ": must be positive");
  };
  if (epochs < 0) throw std::runtime_error("config field [run] epochs: must be >= 0");
  positive(cycles_per_epoch, "[run] cycles_per_epoch");
  positive(episodes_per_cycle, "[run] episodes_per_cycle");
  positive(ddpg_iters_per_cycle, "[run] ddpg_iters_per_cycle");
  positive(test_episodes, "[run] test_episodes");
  positive(batch_size, "[ddpg] batch_size");
  if (ddpg.gamma <= 0.0 || ddpg.gamma >= 1.0)
    throw std::runtime_error("config field [ddpg] gamma: must be in (0,1)");
  if (ddpg.tau <= 0.0 || ddpg.tau > 1.0)
    throw std::runtime_error("config field [ddpg] tau: must be in (0,1]");
  if (relabel_fraction < 0.0 || relabel_fraction > 1.0)
    throw std::runtime_error("config field [replay] relabel_fraction: must be in [0,1]");
  if (her_share < 0.0 || her_share > 1.0)
    throw std::runtime_error("config field [replay] her_share: must be in [0,1]");
  positive(gan_cadence, "[gan] cadence");
  if (method_uses_gan(method)) positive(gan_iters_per_burst, "[gan] iters_per_burst");
  if (method_uses_phases(method) && !oracle_subgoals && demo_path.empty())
    throw std::runtime_error("config field [macro] demo_path: required for method " +
                             method_name(method));
  if (phase_advance_threshold <= 0.0 || phase_advance_threshold >= 1.0)
    throw std::runtime_error(
        "config field [macro] phase_advance_threshold: must be in (0,1)");
}

namespace {

std::vector<std::size_t> hidden_layers(long long layers, long long units) {
  return std::vector<std::size_t>(static_cast<std::size_t>(layers),
                                  static_cast<std::size_t>(units));
}

}  // namespace

ExperimentConfig config_from_toml(const ConfigFile& f) {
  ExperimentConfig c;
  c.task = task_from_name(f.get_string("run", "task"));
  c.method = method_from_name(f.get_string("run", "method"));
  c.epochs = static_cast<int>(f.get_int("run", "epochs", 60));
  c.cycles_per_epoch = static_cast<int>(f.get_int("run", "cycles_per_epoch", 50));
  c.episodes_per_cycle = static_cast<int>(f.get_int("run", "episodes_per_cycle", 2));
  c.ddpg_iters_per_cycle =
      static_cast<int>(f.get_int("run", "ddpg_iters_per_cycle", 40));
  c.test_episodes = static_cast<int>(f.get_int("run", "test_episodes", 50));
  c.seed = static_cast<std::uint64_t>(f.get_int("run", "seed", 1));
  if (f.has("run", "horizon"))
    c.task.horizon = static_cast<int>(f.get_int("run", "horizon", 50));
  if (f.has("run", "pick_goal_strategy")) {
    const std::string s = f.get_string("run", "pick_goal_strategy");
    if (s == "uniform") c.task.pick_goal = PickGoalStrategy::Uniform;
    else if (s == "non-uniform") c.task.pick_goal = PickGoalStrategy::NonUniform;
    else throw std::runtime_error(
        "config field [run] pick_goal_strategy: expected uniform|non-uniform");
  }

  c.ddpg.hidden = hidden_layers(f.get_int("ddpg", "hidden_layers", 3),
                                f.get_int("ddpg", "hidden_units", 256));
  c.ddpg.actor_lr = f.get_double("ddpg", "actor_lr", 1e-3);
  c.ddpg.critic_lr = f.get_double("ddpg", "critic_lr", 1e-3);
  c.ddpg.gamma = f.get_double("ddpg", "gamma", 0.98);
  c.ddpg.tau = f.get_double("ddpg", "tau", 0.05);
  c.ddpg.target_update_period =
      static_cast<int>(f.get_int("ddpg", "target_update_period", 0));
  c.ddpg.noise.gaussian_sigma = f.get_double("ddpg", "sigma", 0.2);
  c.ddpg.noise.random_action_eps = f.get_double("ddpg", "eps", 0.3);
  c.batch_size = static_cast<int>(f.get_int("ddpg", "batch_size", 256));

  c.buffer_capacity =
      static_cast<std::size_t>(f.get_int("replay", "capacity", 1000000));
  c.relabel_fraction = f.get_double("replay", "relabel_fraction", 0.8);
  c.her_share = f.get_double("replay", "her_share", 0.5);
  c.her_future_k = static_cast<int>(f.get_int("replay", "her_future_k", 4));

  c.gan.z_dim = static_cast<int>(f.get_int("gan", "z_dim", 4));
  c.gan.gen_hidden = hidden_layers(2, f.get_int("gan", "gen_hidden_units", 128));
  c.gan.disc_hidden = hidden_layers(2, f.get_int("gan", "disc_hidden_units", 256));
  c.gan.learning_rate = f.get_double("gan", "learning_rate", 1e-3);
  c.gan.batch_size = static_cast<int>(f.get_int("gan", "batch_size", 64));
  c.gan_cadence = static_cast<int>(f.get_int("gan", "cadence", 100));
  c.gan_iters_per_burst = static_cast<int>(f.get_int("gan", "iters_per_burst", 200));
  c.pool_size = static_cast<std::size_t>(f.get_int("gan", "pool_size", 2000));
  c.alpha_schedule.success_threshold = f.get_double("gan", "alpha_threshold", 0.6);
  c.alpha_schedule.patience_epochs =
      static_cast<int>(f.get_int("gan", "alpha_patience", 3));
  c.alpha_schedule.alpha_increment = f.get_double("gan", "alpha_increment", 0.2);

  c.demo_path = f.get_string("macro", "demo_path", std::string());
  c.num_subgoals = static_cast<int>(f.get_int("macro", "num_subgoals", 1));
  c.extractor.iterations = static_cast<int>(f.get_int("macro", "extractor_iters", 1000));
  c.extractor.hidden = hidden_layers(2, f.get_int("macro", "extractor_hidden_units", 16));
  c.extractor.learning_rate = f.get_double("macro", "extractor_lr", 1e-3);
  c.extractor.batch_size = static_cast<int>(f.get_int("macro", "extractor_batch", 64));
  c.oracle_subgoals = f.get_bool("macro", "oracle_subgoals", false);
  c.phase_advance_threshold = f.get_double("macro", "phase_advance_threshold", 0.8);
  c.phase_patience = static_cast<int>(f.get_int("macro", "phase_patience", 3));
  c.phase_eval_episodes = static_cast<int>(f.get_int("macro", "phase_eval_episodes", 50));

  c.validate();
  return c;
}

ExperimentConfig config_from_file(const std::string& path) {
  return config_from_toml(ConfigFile::parse_file(path));
}

void write_config(const ExperimentConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config copy: " + path);
  char buf[256];
  out << "[run]\n";
  out << "task = \"" << task_name(c.task.task) << "\"\n";
  out << "method = \"" << method_name(c.method) << "\"\n";
  out << "epochs = " << c.epochs << "\n";
  out << "cycles_per_epoch = " << c.cycles_per_epoch << "\n";
  out << "episodes_per_cycle = " << c.episodes_per_cycle << "\n";
  out << "ddpg_iters_per_cycle = " << c.ddpg_iters_per_cycle << "\n";
  out << "test_episodes = " << c.test_episodes << "\n";
  out << "seed = " << c.seed << "\n";
  out << "horizon = " << c.task.horizon << "\n\n";
  out << "[ddpg]\n";
  out << "hidden_layers = " << c.ddpg.hidden.size() << "\n";
  out << "hidden_units = " << (c.ddpg.hidden.empty() ? 0 : c.ddpg.hidden[0]) << "\n";
  std::snprintf(buf, sizeof(buf),
                "actor_lr = %.9g\ncritic_lr = %.9g\ngamma = %.9g\ntau = %.9g\n"
                "sigma = %.9g\neps = %.9g\n",
                c.ddpg.actor_lr, c.ddpg.critic_lr, c.ddpg.gamma, c.ddpg.tau,
                c.ddpg.noise.gaussian_sigma, c.ddpg.noise.random_action_eps);
  out << buf;
  out << "target_update_period = " << c.ddpg.target_update_period << "\n";
  out << "batch_size = " << c.batch_size << "\n\n";
  out << "[replay]\n";
  out << "capacity = " << c.buffer_capacity << "\n";
  std::snprintf(buf, sizeof(buf), "relabel_fraction = %.9g\nher_share = %.9g\n",
                c.relabel_fraction, c.her_share);
  out << buf;
  out << "her_future_k = " << c.her_future_k << "\n\n";
  out << "[gan]\n";
  out << "z_dim = " << c.gan.z_dim << "\n";
  out << "gen_hidden_units = " << (c.gan.gen_hidden.empty() ? 0 : c.gan.gen_hidden[0])
      << "\n";
  out << "disc_hidden_units = "
      << (c.gan.disc_hidden.empty() ? 0 : c.gan.disc_hidden[0]) << "\n";
  std::snprintf(buf, sizeof(buf), "learning_rate = %.9g\n", c.gan.learning_rate);
  out << buf;
  out << "batch_size = " << c.gan.batch_size << "\n";
  out << "cadence = " << c.gan_cadence << "\n";
  out << "iters_per_burst = " << c.gan_iters_per_burst << "\n";
  out << "pool_size = " << c.pool_size << "\n";
  std::snprintf(buf, sizeof(buf), "alpha_threshold = %.9g\nalpha_increment = %.9g\n",
                c.alpha_schedule.success_threshold, c.alpha_schedule.alpha_increment);
  out << buf;
  out << "alpha_patience = " << c.alpha_schedule.patience_epochs << "\n\n";
  out << "[macro]\n";
  out << "demo_path = \"" << c.demo_path << "\"\n";
  out << "num_subgoals = " << c.num_subgoals << "\n";
  out << "extractor_iters = " << c.extractor.iterations << "\n";
  out << "oracle_subgoals = " << (c.oracle_subgoals ? "true" : "false") << "\n";
  std::snprintf(buf, sizeof(buf), "phase_advance_threshold = %.9g\n",
                c.phase_advance_threshold);
  out << buf;
  out << "phase_patience = " << c.phase_patience << "\n";
  out << "phase_eval_episodes = " << c.phase_eval_episodes << "\n";
}

Vec3 oracle_subgoal(const TaskSpec& spec, const std::vector<double>& start_state) {
  if (spec.is_receptor()) return spec.receptor_center;
  // Object position fields of the observation encoding.
  return {start_state[3], start_state[4], start_state[5]};
}

namespace {

struct PhasePlanState {
  int n_subgoal_phases = 0;  // phases 0..n-1 are sub-goal phases, n is final
  int current = 0;
  int consecutive_hits = 0;

  bool final_phase() const { return current >= n_subgoal_phases; }
};

// Everything a run needs, wired per method.
struct RunContext {
  const ExperimentConfig& cfg;
  Env env;
  DdpgAgent agent;
  ReplayBuffer buffer;
  std::unique_ptr<GoalGan> gan;
  GoalPools pools;
  AlphaSchedule alpha_schedule;
  std::vector<double> micro_rate_history;
  std::unique_ptr<SubgoalModel> extractor;
  PhasePlanState phases;
  Rng gan_rng, sample_rng, act_rng, pool_rng;
  std::uint64_t eval_seed_base;
  std::uint64_t episode_counter = 0;

  RunContext(const ExperimentConfig& c, Rng& init_rng)
      : cfg(c),
        env(c.task, derive_seed(c.seed, 10)),
        agent(kObsDim, static_cast<std::size_t>(c.task.action_dim), c.ddpg, init_rng),
        buffer(c.buffer_capacity),
        gan_rng(derive_seed(c.seed, 11)),
        sample_rng(derive_seed(c.seed, 12)),
        act_rng(derive_seed(c.seed, 13)),
        pool_rng(derive_seed(c.seed, 14)),
        eval_seed_base(derive_seed(c.seed, 15)) {
    pools.max_size = c.pool_size;
    alpha_schedule = c.alpha_schedule;
  }

  // The goal distribution of the current phase, given an episode's start.
  Vec3 phase_target(const std::vector<double>& start_state, Vec3 env_goal) {
    if (!method_uses_phases(cfg.method) || phases.final_phase()) return env_goal;
    if (cfg.oracle_subgoals) return oracle_subgoal(cfg.task, start_state);
    return predict_subgoal(*extractor, start_state);
  }

  Vec3 behavioral_goal(const std::vector<double>& start_state, Vec3 env_goal,
                       Vec3 phase_goal) {
    (void)start_state;
    (void)env_goal;
    if (method_uses_gan(cfg.method)) return sample_micro_goal(*gan, gan_rng);
    return phase_goal;  // equals env_goal for non-phased methods
  }
};

struct EpisodeOutcome {
  std::vector<Transition> transitions;
  Vec3 final_achieved;
  Vec3 behavioral_goal;
  Vec3 phase_goal;
  bool micro_hit = false;
};

EpisodeOutcome rollout_training_episode(RunContext& ctx) {
  const TaskSpec& spec = ctx.cfg.task;
  ResetResult r = ctx.env.reset_env();
  std::vector<double> obs = encode_obs(ctx.env.state());
  const Vec3 phase_goal = ctx.phase_target(obs, r.desired_goal);
  const Vec3 goal = ctx.behavioral_goal(obs, r.desired_goal, phase_goal);

  EpisodeOutcome out;
  out.behavioral_goal = goal;
  out.phase_goal = phase_goal;
  const std::uint64_t ep_id = ctx.episode_counter++;
  for (int t = 0; t < spec.horizon; ++t) {
    std::vector<double> action = ctx.agent.act(obs, goal, /*explore=*/true, ctx.act_rng);
    StepResult sr = ctx.env.step_env(action);
    Transition tr;
    tr.state = obs;
    tr.action = action;
    tr.next_state = encode_obs(sr.next_state);
    tr.goal = goal;
    tr.achieved = sr.achieved_goal;
    tr.aux_flag = sr.next_state.receptor_on;
    tr.reward = compute_reward(tr.achieved, goal, tr.aux_flag, spec);
    tr.episode_id = ep_id;
    tr.step_index = t;
    obs = tr.next_state;
    out.transitions.push_back(std::move(tr));
  }
  out.final_achieved = out.transitions.back().achieved;
  out.micro_hit = dist(out.final_achieved, goal) < spec.r_threshold;
  return out;
}

// Greedy rollouts against a goal chooser; returns the success fraction.
// target semantics follow compute_reward (latch included for the receptor).
template <typename GoalFn>
double greedy_eval(const ExperimentConfig& cfg, const DdpgAgent& agent,
                   std::uint64_t seed, int n_episodes, GoalFn&& choose_goal) {
  Env env(cfg.task, seed);
  Rng unused(seed + 1);
  int successes = 0;
  for (int e = 0; e < n_episodes; ++e) {
    ResetResult r = env.reset_env();
    std::vector<double> obs = encode_obs(env.state());
    const Vec3 goal = choose_goal(obs, r.desired_goal);
    bool success = false;
    for (int t = 0; t < cfg.task.horizon; ++t) {
      std::vector<double> a = agent.act(obs, goal, /*explore=*/false, unused);
      StepResult sr = env.step_env(a);
      obs = encode_obs(sr.next_state);
      if (t + 1 == cfg.task.horizon) {
        success = compute_reward(sr.achieved_goal, goal, sr.next_state.receptor_on,
                                 cfg.task) == 0.0;
      }
    }
    if (success) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

void refill_desired_pool(RunContext& ctx) {
  ctx.pools.clear_desired();
  Env sampler(ctx.cfg.task, ctx.pool_rng.raw());
  for (std::size_t i = 0; i < ctx.pools.max_size; ++i) {
    ResetResult r = sampler.reset_env();
    const std::vector<double> obs = encode_obs(sampler.state());
    ctx.pools.push_desired(ctx.phase_target(obs, r.desired_goal));
  }
}

void write_metrics(const std::vector<EpochStats>& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << "epoch,test_success,micro_success,alpha,critic_loss,phase\n";
  char buf[192];
  for (const EpochStats& s : stats) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.9g,%d\n", s.epoch,
                  s.test_success, s.micro_success, s.alpha, s.critic_loss, s.phase);
    out << buf;
  }
}

void write_timing(const std::vector<EpochStats>& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write timing: " + path);
  out << "epoch,wall_ms\n";
  char buf[64];
  for (const EpochStats& s : stats) {
    std::snprintf(buf, sizeof(buf), "%d,%.3f\n", s.epoch, s.wall_ms);
    out << buf;
  }
}

void write_summary(const RunResult& result, const ExperimentConfig& cfg,
                   const std::string& path) {
  nlohmann::json j;
  j["task"] = task_name(cfg.task.task);
  j["method"] = method_name(cfg.method);
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["ddpg_steps"] = result.ddpg_steps;
  j["gan_bursts"] = result.gan_bursts;
  j["gan_constructed"] = result.gan_constructed;
  j["relabel_original"] = result.relabel_original;
  j["relabel_her"] = result.relabel_her;
  j["relabel_micro"] = result.relabel_micro;
  j["relabel_desired"] = result.relabel_desired;
  j["final_phase"] = result.final_phase;
  j["final_test_success"] = result.final_test_success();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         bool quiet) {
  cfg.validate();
  fs::create_directories(out_dir);

  Rng init_rng(derive_seed(cfg.seed, 1));
  RunContext ctx(cfg, init_rng);
  RunResult result;
  result.run_dir = out_dir;

  if (method_uses_gan(cfg.method)) {
    Rng gan_init(derive_seed(cfg.seed, 2));
    ctx.gan = std::make_unique<GoalGan>(make_goal_gan(cfg.gan, goal_sampling_box(cfg.task), gan_init));
    result.gan_constructed = true;
  }
  if (method_uses_phases(cfg.method)) {
    ctx.phases.n_subgoal_phases = cfg.num_subgoals;
    if (!cfg.oracle_subgoals) {
      std::vector<DemoTrajectory> demos = load_demos(cfg.demo_path);
      std::vector<SubgoalPair> pairs = extract_subgoals(demos, cfg.num_subgoals);
      save_signals_csv(demos, out_dir + "/signals.csv");
      save_pairs_csv(pairs, out_dir + "/pairs.csv");
      Rng ext_rng(derive_seed(cfg.seed, 3));
      ctx.extractor = std::make_unique<SubgoalModel>(
          train_extractor(pairs, cfg.extractor, goal_sampling_box(cfg.task), ext_rng));
    }
  }

  write_config(cfg, out_dir + "/config.toml");

  const SamplingStrategy strategy = cfg.strategy();
  GoalSource micro_src = [&ctx](Rng& rng) -> Vec3 {
    if (!ctx.gan) throw std::logic_error("micro goal requested without a GAN");
    return sample_micro_goal(*ctx.gan, rng);
  };
  GoalSource desired_src = [&ctx](Rng& rng) -> Vec3 {
    if (ctx.pools.desired.empty())
      throw std::runtime_error("desired goal pool empty during sampling");
    return ctx.pools.desired[rng.uniform_index(ctx.pools.desired.size())];
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    int micro_hits = 0, episodes = 0;
    double loss_sum = 0.0;
    std::size_t loss_n = 0;

    for (int cycle = 0; cycle < cfg.cycles_per_epoch; ++cycle) {
      for (int ep = 0; ep < cfg.episodes_per_cycle; ++ep) {
        EpisodeOutcome out = rollout_training_episode(ctx);
        ctx.agent.observe_episode(out.transitions);
        ctx.buffer.store_episode(std::move(out.transitions));
        ctx.pools.push_achieved(out.final_achieved);
        ctx.pools.push_desired(out.phase_goal);
        micro_hits += out.micro_hit ? 1 : 0;
        ++episodes;
      }
      for (int it = 0; it < cfg.ddpg_iters_per_cycle; ++it) {
        auto batch = ctx.buffer.sample_minibatch(
            static_cast<std::size_t>(cfg.batch_size), strategy, micro_src,
            desired_src, cfg.task, ctx.sample_rng);
        for (const auto& s : batch) {
          switch (s.tag) {
            case RelabelTag::Original: ++result.relabel_original; break;
            case RelabelTag::Her: ++result.relabel_her; break;
            case RelabelTag::Micro: ++result.relabel_micro; break;
            case RelabelTag::Desired: ++result.relabel_desired; break;
          }
        }
        TrainStats ts = ctx.agent.train_step(batch);
        loss_sum += ts.critic_loss;
        ++loss_n;
        ++result.ddpg_steps;
        if (ctx.gan && result.ddpg_steps % static_cast<std::size_t>(cfg.gan_cadence) == 0) {
          train_gan(*ctx.gan, ctx.pools, cfg.gan_iters_per_burst, cfg.gan.batch_size,
                    ctx.gan_rng);
          ++result.gan_bursts;
        }
      }
    }

    const double micro_rate =
        episodes > 0 ? static_cast<double>(micro_hits) / episodes : 0.0;
    if (ctx.gan) {
      ctx.micro_rate_history.push_back(micro_rate);
      maybe_advance_alpha(ctx.alpha_schedule, *ctx.gan, ctx.micro_rate_history);
    }

    const double test_success =
        greedy_eval(cfg, ctx.agent, derive_seed(ctx.eval_seed_base, epoch),
                    cfg.test_episodes,
                    [](const std::vector<double>&, Vec3 env_goal) { return env_goal; });

    if (method_uses_phases(cfg.method) && !ctx.phases.final_phase()) {
      const double phase_success = greedy_eval(
          cfg, ctx.agent, derive_seed(ctx.eval_seed_base, 100000 + epoch),
          cfg.phase_eval_episodes,
          [&ctx](const std::vector<double>& obs, Vec3 env_goal) {
            return ctx.phase_target(obs, env_goal);
          });
      if (phase_success >= cfg.phase_advance_threshold) {
        if (++ctx.phases.consecutive_hits >= cfg.phase_patience) {
          ctx.phases.current += 1;
          ctx.phases.consecutive_hits = 0;
          if (ctx.gan) refill_desired_pool(ctx);
        }
      } else {
        ctx.phases.consecutive_hits = 0;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.test_success = test_success;
    stats.micro_success = micro_rate;
    stats.alpha = ctx.gan ? ctx.gan->alpha : 0.0;
    stats.critic_loss = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : 0.0;
    stats.phase = ctx.phases.current;
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.stats.push_back(stats);
    if (!quiet)
      std::fprintf(stderr, "[%s/%s seed %llu] epoch %d test %.3f micro %.3f alpha %.2f phase %d\n",
                   task_name(cfg.task.task).c_str(), method_name(cfg.method).c_str(),
                   static_cast<unsigned long long>(cfg.seed), epoch,
                   stats.test_success, stats.micro_success, stats.alpha, stats.phase);
  }

  result.final_phase = ctx.phases.current;
  ctx.agent.save(out_dir + "/checkpoint");
  write_metrics(result.stats, out_dir + "/metrics.csv");
  write_timing(result.stats, out_dir + "/timing.csv");
  write_summary(result, cfg, out_dir + "/run_summary.json");
  return result;
}

double evaluate(const std::string& checkpoint_dir, const TaskSpec& task,
                int n_episodes, std::uint64_t seed) {
  DdpgAgent agent = DdpgAgent::load_for_eval(checkpoint_dir);
  if (agent.action_dim() != static_cast<std::size_t>(task.action_dim))
    throw std::runtime_error("evaluate: checkpoint action dim does not match task");
  Env env(task, seed);
  Rng unused(seed + 1);
  int successes = 0;
  for (int e = 0; e < n_episodes; ++e) {
    env.reset_env();
    std::vector<double> obs = encode_obs(env.state());
    bool success = false;
    for (int t = 0; t < task.horizon; ++t) {
      std::vector<double> a = agent.act(obs, env.desired(), false, unused);
      StepResult sr = env.step_env(a);
      obs = encode_obs(sr.next_state);
      success = sr.is_success;
    }
    if (success) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

}  // namespace mamic
