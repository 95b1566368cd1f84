#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "mamic/env.hpp"

using namespace mamic;

namespace {

Vec3 obs_gripper(const std::vector<double>& obs) { return {obs[0], obs[1], obs[2]}; }
Vec3 obs_object(const std::vector<double>& obs) { return {obs[3], obs[4], obs[5]}; }

}  // namespace

TEST_CASE("reset: push-hard never starts inside the reward threshold") {
  TaskSpec spec = make_task(TaskId::PushHard);
  Rng rng(1);
  double min_d = std::numeric_limits<double>::max();
  for (int i = 0; i < 10000; ++i) {
    ResetResult r = reset(spec, rng);
    min_d = std::min(min_d, dist(r.state.object_pos, r.desired_goal));
  }
  CHECK(min_d > spec.r_threshold);
}

TEST_CASE("reset: slide-hard never starts inside the reward threshold") {
  TaskSpec spec = make_task(TaskId::SlideHard);
  Rng rng(2);
  double min_d = std::numeric_limits<double>::max();
  for (int i = 0; i < 10000; ++i) {
    ResetResult r = reset(spec, rng);
    min_d = std::min(min_d, dist(r.state.object_pos, r.desired_goal));
  }
  CHECK(min_d > spec.r_threshold);
}

TEST_CASE("reset: receptor latch starts off and the initial reward is -1") {
  TaskSpec spec = make_task(TaskId::ReceptorPush);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    ResetResult r = reset(spec, rng);
    CHECK_FALSE(r.state.receptor_on);
    CHECK(compute_reward(achieved_goal(r.state, spec), r.desired_goal,
                         r.state.receptor_on, spec) == -1.0);
  }
}

TEST_CASE("reset: pick-place non-uniform goal lands on the table half the time") {
  TaskSpec spec = make_task(TaskId::PickPlaceLite);
  Rng rng(4);
  int on_table = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    ResetResult r = reset(spec, rng);
    if (r.desired_goal.z == 0.0) ++on_table;
  }
  const double frac = static_cast<double>(on_table) / n;
  CHECK(frac >= 0.45);
  CHECK(frac <= 0.55);
}

TEST_CASE("reset: pick-place uniform strategy keeps every goal in the air") {
  TaskSpec spec = make_task(TaskId::PickPlaceLite);
  spec.pick_goal = PickGoalStrategy::Uniform;
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    ResetResult r = reset(spec, rng);
    CHECK(r.desired_goal.z >= 0.1);
  }
}

TEST_CASE("reset: impossible spec exhausts rejection sampling") {
  TaskSpec spec = make_task(TaskId::PushHard);
  spec.object_start = Box{{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}};
  spec.goal_region = spec.object_start;  // goal always on the object
  Rng rng(6);
  CHECK_THROWS(reset(spec, rng));
}

TEST_CASE("step: zero action leaves the gripper in place") {
  TaskSpec spec = make_task(TaskId::PushHard);
  Rng rng(7);
  ResetResult r = reset(spec, rng);
  StepResult s = step(r.state, {0.0, 0.0}, r.desired_goal, spec);
  CHECK(s.next_state.gripper_pos.x == r.state.gripper_pos.x);
  CHECK(s.next_state.gripper_pos.y == r.state.gripper_pos.y);
  CHECK(s.next_state.object_pos.x == r.state.object_pos.x);
  CHECK(s.reward == -1.0);
}

TEST_CASE("step: non-finite action is a hard error") {
  TaskSpec spec = make_task(TaskId::PushHard);
  Rng rng(8);
  ResetResult r = reset(spec, rng);
  CHECK_THROWS(step(r.state, {std::nan(""), 0.0}, r.desired_goal, spec));
  CHECK_THROWS(step(r.state, {0.0}, r.desired_goal, spec));  // wrong dim
}

TEST_CASE("receptor semantics: on-goal without the latch pays -1") {
  TaskSpec spec = make_task(TaskId::ReceptorPush);
  Rng rng(9);
  ResetResult r = reset(spec, rng);
  EnvState st = r.state;
  st.object_pos = r.desired_goal;  // exactly on the goal, latch off
  st.receptor_on = false;
  StepResult s = step(st, {0.0, 0.0}, r.desired_goal, spec);
  CHECK(s.reward == -1.0);
  CHECK_FALSE(s.is_success);

  st.receptor_on = true;
  st.object_pos = r.desired_goal + Vec3{0.03, 0.0, 0.0};
  s = step(st, {0.0, 0.0}, r.desired_goal, spec);
  CHECK(s.reward == 0.0);
  CHECK(s.is_success);
}

TEST_CASE("compute_reward: threshold is a strict inequality") {
  TaskSpec spec = make_task(TaskId::PushHard);
  CHECK(compute_reward({0.2, 0.2, 0.0}, {0.2, 0.2, 0.0}, std::nullopt, spec) == 0.0);
  // Exactly-representable boundary: distance == r_threshold pays -1.
  spec.r_threshold = 0.25;
  CHECK(compute_reward({0.0, 0.0, 0.0}, {0.25, 0.0, 0.0}, std::nullopt, spec) == -1.0);
  CHECK(compute_reward({0.0, 0.0, 0.0}, {0.2499, 0.0, 0.0}, std::nullopt, spec) == 0.0);
  spec.r_threshold = 0.05;

  TaskSpec receptor = make_task(TaskId::ReceptorPush);
  CHECK(compute_reward({0.5, 0.5, 0.0}, {0.54, 0.5, 0.0}, false, receptor) == -1.0);
  CHECK(compute_reward({0.5, 0.5, 0.0}, {0.54, 0.5, 0.0}, true, receptor) == 0.0);
}

TEST_CASE("determinism: same seed and action sequence replay identically") {
  for (TaskId id : {TaskId::PushHard, TaskId::SlideHard, TaskId::PickPlaceLite,
                    TaskId::ReceptorPush}) {
    TaskSpec spec = make_task(id);
    auto run = [&spec] {
      Env env(spec, 99);
      env.reset_env();
      Rng arng(5);
      std::vector<double> trace;
      for (int t = 0; t < spec.horizon; ++t) {
        std::vector<double> a(spec.action_dim);
        for (double& v : a) v = arng.uniform(-1.0, 1.0);
        StepResult s = env.step_env(a);
        trace.push_back(s.achieved_goal.x);
        trace.push_back(s.achieved_goal.y);
        trace.push_back(s.reward);
      }
      return trace;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("rollouts: rewards are sparse, latch is monotone, step matches compute_reward") {
  for (TaskId id : {TaskId::PushHard, TaskId::SlideHard, TaskId::PickPlaceLite,
                    TaskId::ReceptorPush, TaskId::PushFar, TaskId::SlideFar}) {
    TaskSpec spec = make_task(id);
    Env env(spec, 1234 + static_cast<int>(id));
    Rng arng(77);
    for (int ep = 0; ep < 20; ++ep) {
      env.reset_env();
      bool latched = false;
      for (int t = 0; t < spec.horizon; ++t) {
        std::vector<double> a(spec.action_dim);
        for (double& v : a) v = arng.uniform(-1.0, 1.0);
        StepResult s = env.step_env(a);
        CHECK((s.reward == 0.0 || s.reward == -1.0));
        CHECK(s.is_success == (s.reward == 0.0));
        // Off-policy consistency: recomputing from the logged pieces agrees.
        CHECK(compute_reward(s.achieved_goal, env.desired(),
                             s.next_state.receptor_on, spec) == s.reward);
        if (latched) CHECK(s.next_state.receptor_on);
        latched = s.next_state.receptor_on;
      }
    }
  }
}

TEST_CASE("expert: push-hard approaches first, then drives the object to the goal") {
  TaskSpec spec = make_task(TaskId::PushHard);
  Rng rng(11);
  for (int ep = 0; ep < 25; ++ep) {
    DemoTrajectory d = scripted_expert(spec, rng);
    // Phase boundary: first index where the object moves.
    std::size_t contact = d.states.size();
    for (std::size_t i = 1; i < d.states.size(); ++i) {
      if (dist(obs_object(d.states[i]), obs_object(d.states[i - 1])) > 1e-12) {
        contact = i;
        break;
      }
    }
    REQUIRE(contact < d.states.size());
    CHECK(contact >= 2);  // staging takes at least a step from the start box
    // Phase 1: object untouched, gripper closes in on it.
    const double d_start = dist(obs_gripper(d.states[0]), obs_object(d.states[0]));
    const double d_contact =
        dist(obs_gripper(d.states[contact - 1]), obs_object(d.states[contact - 1]));
    CHECK(d_contact < d_start);
    // Phase 2: object-goal distance never increases.
    for (std::size_t i = contact; i < d.states.size(); ++i) {
      const double prev = dist(obs_object(d.states[i - 1]), d.desired_goal);
      const double cur = dist(obs_object(d.states[i]), d.desired_goal);
      CHECK(cur <= prev + 1e-9);
    }
    CHECK(dist(d.achieved_goals.back(), d.desired_goal) < spec.r_threshold);
  }
}

TEST_CASE("expert: receptor demo latches before it reaches the goal") {
  TaskSpec spec = make_task(TaskId::ReceptorPush);
  Rng rng(12);
  for (int ep = 0; ep < 25; ++ep) {
    DemoTrajectory d = scripted_expert(spec, rng);
    std::size_t latch_idx = d.states.size(), goal_idx = d.states.size();
    for (std::size_t i = 0; i < d.states.size(); ++i) {
      if (latch_idx == d.states.size() &&
          dist(obs_object(d.states[i]), spec.receptor_center) < spec.receptor_radius)
        latch_idx = i;
      if (goal_idx == d.states.size() &&
          dist(obs_object(d.states[i]), d.desired_goal) < spec.r_threshold)
        goal_idx = i;
    }
    REQUIRE(latch_idx < d.states.size());
    REQUIRE(goal_idx < d.states.size());
    CHECK(latch_idx < goal_idx);
  }
}

TEST_CASE("expert: scripted policies solve every episode") {
  struct Load {
    TaskId id;
    int episodes;
  };
  for (Load load : {Load{TaskId::Reach, 200}, Load{TaskId::PushHard, 1000},
                    Load{TaskId::SlideHard, 300}, Load{TaskId::PickPlaceLite, 300},
                    Load{TaskId::ReceptorPush, 300}, Load{TaskId::PushFar, 300},
                    Load{TaskId::SlideFar, 300}}) {
    TaskSpec spec = make_task(load.id);
    Rng rng(1000 + static_cast<int>(load.id));
    int ok = 0;
    for (int ep = 0; ep < load.episodes; ++ep) {
      DemoTrajectory d = scripted_expert(spec, rng);  // throws on failure
      if (dist(d.achieved_goals.back(), d.desired_goal) < spec.r_threshold ||
          !spec.has_object())
        ++ok;
    }
    CHECK(ok == load.episodes);
  }
}

TEST_CASE("demos: JSON-lines round trip preserves every field") {
  TaskSpec spec = make_task(TaskId::PushHard);
  Rng rng(13);
  std::vector<DemoTrajectory> demos;
  for (int i = 0; i < 5; ++i) demos.push_back(scripted_expert(spec, rng));
  const std::string path = "test_demos_roundtrip.jsonl";
  save_demos(demos, path);
  std::vector<DemoTrajectory> loaded = load_demos(path);
  REQUIRE(loaded.size() == demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    CHECK(loaded[i].states == demos[i].states);
    REQUIRE(loaded[i].achieved_goals.size() == demos[i].achieved_goals.size());
    for (std::size_t j = 0; j < demos[i].achieved_goals.size(); ++j)
      CHECK(dist(loaded[i].achieved_goals[j], demos[i].achieved_goals[j]) == 0.0);
    CHECK(dist(loaded[i].desired_goal, demos[i].desired_goal) == 0.0);
  }
  std::filesystem::remove(path);
}
