#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mamic/rng.hpp"

namespace mamic {

// Point in goal space. Planar tasks keep z = 0.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double norm(Vec3 v);
double dist(Vec3 a, Vec3 b);

struct Box {
  Vec3 lo, hi;
  Vec3 sample(Rng& rng) const;
  Vec3 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2}; }
  Vec3 clip(Vec3 v) const;
};

enum class TaskId {
  Reach,
  PushHard,
  SlideHard,
  PickPlaceLite,
  ReceptorPush,
  PushFar,
  SlideFar,
};

// How PickPlaceLite samples its target: NonUniform puts it on the table
// with probability goal_on_table_prob, Uniform always in the air.
enum class PickGoalStrategy { NonUniform, Uniform };

struct TaskSpec {
  TaskId task = TaskId::Reach;
  int horizon = 50;
  double r_threshold = 0.05;
  double max_step = 0.04;
  double gripper_radius = 0.03;
  double object_radius = 0.03;
  double slide_friction = 0.95;
  double receptor_radius = 0.05;
  Vec3 receptor_center;
  Box workspace;          // positions are clipped into this box
  Box gripper_start;
  Box object_start;
  Box goal_region;
  double gripper_x_max = 1.0;  // slide tasks: reach limit of the arm
  PickGoalStrategy pick_goal = PickGoalStrategy::NonUniform;
  double goal_on_table_prob = 0.5;
  int action_dim = 2;

  bool has_object() const { return task != TaskId::Reach; }
  bool is_slide() const { return task == TaskId::SlideHard || task == TaskId::SlideFar; }
  bool is_receptor() const { return task == TaskId::ReceptorPush; }
  bool is_pick() const { return task == TaskId::PickPlaceLite; }
};

TaskSpec make_task(TaskId id);
TaskSpec task_from_name(std::string_view name);
std::string task_name(TaskId id);

// The box generated/predicted goals are confined to: the planar workspace
// with z pinned to 0, or with the air band for the pick task.
Box goal_sampling_box(const TaskSpec& spec);

struct EnvState {
  Vec3 gripper_pos;
  bool gripper_closed = false;
  Vec3 object_pos;
  Vec3 object_vel;
  bool receptor_on = false;
};

struct StepResult {
  EnvState next_state;
  double reward = -1.0;  // always 0 or -1
  Vec3 achieved_goal;
  bool is_success = false;
};

// Goal-space projection of a state: object position, or the gripper for Reach.
Vec3 achieved_goal(const EnvState& state, const TaskSpec& spec);

// Observation encoding fed to all networks:
// [gripper(3), object(3), object-gripper(3), object_vel(3), closed, receptor_on]
constexpr int kObsDim = 14;
std::vector<double> encode_obs(const EnvState& state);

// Sparse reward: 0 iff distance(achieved, desired) < r_threshold, and for
// the receptor task additionally the latch flag must be set. Pure, usable
// off-policy for goal relabeling.
double compute_reward(Vec3 achieved, Vec3 desired, std::optional<bool> receptor_flag,
                      const TaskSpec& spec);

// Samples a start state and desired goal; rejection-sampled so the episode
// never starts solved. Throws after 1000 rejected tries.
struct ResetResult {
  EnvState state;
  Vec3 desired_goal;
};
ResetResult reset(const TaskSpec& spec, Rng& rng);

StepResult step(const EnvState& state, const std::vector<double>& action,
                Vec3 desired_goal, const TaskSpec& spec);

// Convenience wrapper owning spec + state + rng for rollouts.
class Env {
 public:
  Env(TaskSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {}

  const TaskSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }
  Vec3 desired() const { return desired_; }

  ResetResult reset_env() {
    ResetResult r = reset(spec_, rng_);
    state_ = r.state;
    desired_ = r.desired_goal;
    return r;
  }

  StepResult step_env(const std::vector<double>& action) {
    StepResult r = step(state_, action, desired_, spec_);
    state_ = r.next_state;
    return r;
  }

  Rng& rng() { return rng_; }

 private:
  TaskSpec spec_;
  Rng rng_;
  EnvState state_;
  Vec3 desired_;
};

// One state-only demonstration: encoded states s_0..s_T, the matching
// achieved goals, and the episode's desired goal.
struct DemoTrajectory {
  std::vector<std::vector<double>> states;
  std::vector<Vec3> achieved_goals;
  Vec3 desired_goal;

  const std::vector<double>& start_state() const { return states.front(); }
};

// Hand-coded expert; returns a successful state-only trajectory or throws.
DemoTrajectory scripted_expert(const TaskSpec& spec, Rng& rng);

// JSON-lines demo files: one episode per line,
// {"states": [[...]...], "achieved_goals": [[x,y,z]...], "desired_goal": [x,y,z]}
void save_demos(const std::vector<DemoTrajectory>& demos, const std::string& path);
std::vector<DemoTrajectory> load_demos(const std::string& path);

}  // namespace mamic
