#include "mamic/env.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mamic {

double norm(Vec3 v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }
double dist(Vec3 a, Vec3 b) { return norm(a - b); }

Vec3 Box::sample(Rng& rng) const {
  return {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
}

Vec3 Box::clip(Vec3 v) const {
  auto c = [](double x, double a, double b) { return x < a ? a : (x > b ? b : x); };
  return {c(v.x, lo.x, hi.x), c(v.y, lo.y, hi.y), c(v.z, lo.z, hi.z)};
}

namespace {

Box planar(double x0, double y0, double x1, double y1) {
  return Box{{x0, y0, 0.0}, {x1, y1, 0.0}};
}

}  // namespace

TaskSpec make_task(TaskId id) {
  TaskSpec s;
  s.task = id;
  s.gripper_radius = 0.045;
  s.object_radius = 0.045;
  s.workspace = Box{{0.0, 0.0, 0.0}, {1.0, 1.0, 0.5}};
  switch (id) {
    case TaskId::Reach:
      s.gripper_start = planar(0.1, 0.1, 0.9, 0.9);
      s.goal_region = planar(0.1, 0.1, 0.9, 0.9);
      break;
    case TaskId::PushHard:
      // Object and target deliberately sampled from disjoint regions; the
      // gripper starts beside the object as in the base pushing task.
      s.gripper_start = planar(0.12, 0.35, 0.35, 0.65);
      s.object_start = planar(0.2, 0.42, 0.3, 0.58);
      s.goal_region = planar(0.7, 0.3, 0.9, 0.7);
      break;
    case TaskId::SlideHard:
      s.gripper_start = planar(0.15, 0.38, 0.33, 0.62);
      s.object_start = planar(0.28, 0.44, 0.36, 0.56);
      s.goal_region = planar(0.62, 0.38, 0.8, 0.62);
      s.gripper_x_max = 0.48;  // target is beyond the arm's reach
      break;
    case TaskId::PickPlaceLite:
      s.gripper_start = planar(0.2, 0.2, 0.8, 0.8);
      s.object_start = planar(0.3, 0.3, 0.7, 0.7);
      s.goal_region = Box{{0.3, 0.3, 0.1}, {0.7, 0.7, 0.3}};
      s.action_dim = 3;
      break;
    case TaskId::ReceptorPush:
      s.gripper_start = planar(0.14, 0.42, 0.34, 0.58);
      s.object_start = planar(0.24, 0.46, 0.32, 0.54);
      s.goal_region = planar(0.7, 0.42, 0.84, 0.58);
      // Laterally offset so a straight object-to-goal push misses it.
      s.receptor_center = {0.45, 0.72, 0.0};
      break;
    case TaskId::PushFar:
      // Object and target overlap; the gripper starts far away and varied.
      s.gripper_start = planar(0.15, 0.2, 0.3, 0.8);
      s.object_start = planar(0.52, 0.42, 0.66, 0.58);
      s.goal_region = planar(0.52, 0.42, 0.66, 0.58);
      break;
    case TaskId::SlideFar:
      s.gripper_start = planar(0.12, 0.3, 0.25, 0.7);
      s.object_start = planar(0.45, 0.44, 0.53, 0.56);
      s.goal_region = planar(0.52, 0.4, 0.72, 0.6);
      s.gripper_x_max = 0.58;
      break;
  }
  return s;
}

std::string task_name(TaskId id) {
  switch (id) {
    case TaskId::Reach: return "reach";
    case TaskId::PushHard: return "push-hard";
    case TaskId::SlideHard: return "slide-hard";
    case TaskId::PickPlaceLite: return "pick-place-lite";
    case TaskId::ReceptorPush: return "receptor-push";
    case TaskId::PushFar: return "push-far";
    case TaskId::SlideFar: return "slide-far";
  }
  return "unknown";
}

TaskSpec task_from_name(std::string_view name) {
  for (TaskId id : {TaskId::Reach, TaskId::PushHard, TaskId::SlideHard,
                    TaskId::PickPlaceLite, TaskId::ReceptorPush, TaskId::PushFar,
                    TaskId::SlideFar}) {
    if (task_name(id) == name) return make_task(id);
  }
  throw std::invalid_argument("unknown task: " + std::string(name));
}

Box goal_sampling_box(const TaskSpec& spec) {
  Box b;
  b.lo = {0.0, 0.0, 0.0};
  b.hi = {1.0, 1.0, spec.is_pick() ? spec.goal_region.hi.z : 0.0};
  return b;
}

Vec3 achieved_goal(const EnvState& state, const TaskSpec& spec) {
  return spec.has_object() ? state.object_pos : state.gripper_pos;
}

std::vector<double> encode_obs(const EnvState& s) {
  return {s.gripper_pos.x,
          s.gripper_pos.y,
          s.gripper_pos.z,
          s.object_pos.x,
          s.object_pos.y,
          s.object_pos.z,
          s.object_pos.x - s.gripper_pos.x,
          s.object_pos.y - s.gripper_pos.y,
          s.object_pos.z - s.gripper_pos.z,
          s.object_vel.x,
          s.object_vel.y,
          s.object_vel.z,
          s.gripper_closed ? 1.0 : 0.0,
          s.receptor_on ? 1.0 : 0.0};
}

double compute_reward(Vec3 achieved, Vec3 desired, std::optional<bool> receptor_flag,
                      const TaskSpec& spec) {
  bool success = dist(achieved, desired) < spec.r_threshold;
  if (spec.is_receptor()) success = success && receptor_flag.value_or(false);
  return success ? 0.0 : -1.0;
}

ResetResult reset(const TaskSpec& spec, Rng& rng) {
  const double contact = spec.gripper_radius + spec.object_radius;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    EnvState st;
    st.gripper_pos = spec.gripper_start.sample(rng);
    Vec3 goal;
    if (spec.has_object()) {
      st.object_pos = spec.object_start.sample(rng);
      goal = spec.goal_region.sample(rng);
      if (spec.is_pick()) {
        const bool on_table = spec.pick_goal == PickGoalStrategy::NonUniform &&
                              rng.uniform() < spec.goal_on_table_prob;
        if (on_table) goal.z = 0.0;
      }
      if (dist(st.object_pos, goal) <= spec.r_threshold) continue;
      // Never start with the gripper touching (or holding) the object.
      if (dist(st.gripper_pos, st.object_pos) <= contact + 0.01) continue;
      if (spec.is_receptor() &&
          dist(st.object_pos, spec.receptor_center) < spec.receptor_radius)
        continue;
    } else {
      goal = spec.goal_region.sample(rng);
      if (dist(st.gripper_pos, goal) <= spec.r_threshold) continue;
    }
    return {st, goal};
  }
  throw std::runtime_error("reset: rejection sampling exhausted for task " +
                           task_name(spec.task));
}

namespace {

// Displaces the object out of the gripper disc along the center line.
Vec3 resolve_contact(Vec3 object, Vec3 gripper, double contact) {
  Vec3 d = object - gripper;
  d.z = 0.0;
  const double l = norm(d);
  if (l >= contact) return object;
  if (l < 1e-12) return gripper + Vec3{contact, 0.0, 0.0};
  return gripper + d * (contact / l);
}

double clip_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

StepResult step(const EnvState& state, const std::vector<double>& action,
                Vec3 desired_goal, const TaskSpec& spec) {
  if (static_cast<int>(action.size()) != spec.action_dim)
    throw std::invalid_argument("step: action dim " + std::to_string(action.size()) +
                                " != " + std::to_string(spec.action_dim));
  for (double a : action)
    if (!std::isfinite(a)) throw std::invalid_argument("step: non-finite action");

  const double contact = spec.gripper_radius + spec.object_radius;
  EnvState next = state;

  // Glide phase (slide tasks): the object keeps moving and friction decays it.
  if (spec.is_slide() && norm(next.object_vel) > 0.0) {
    Vec3 moved = next.object_pos + next.object_vel;
    Vec3 clipped = spec.workspace.clip(moved);
    next.object_pos = clipped;
    next.object_vel = next.object_vel * spec.slide_friction;
    if (dist(moved, clipped) > 0.0) next.object_vel = {};  // wall stop
  }

  // Gripper kinematics.
  Vec3 g = next.gripper_pos;
  g.x += clip_unit(action[0]) * spec.max_step;
  g.y += clip_unit(action[1]) * spec.max_step;
  double grip_cmd = 0.0;
  if (spec.is_pick()) {
    grip_cmd = clip_unit(action[2]);
    g.z += grip_cmd * spec.max_step;
  }
  g = spec.workspace.clip(g);
  if (g.x > spec.gripper_x_max) g.x = spec.gripper_x_max;

  if (spec.is_pick()) {
    const bool closed = grip_cmd > 0.0;
    const bool can_hold = dist(next.object_pos, next.gripper_pos) <= contact;
    next.gripper_pos = g;
    next.gripper_closed = closed;
    if (closed && can_hold) {
      next.object_pos = g;  // held object rides with the gripper
    } else {
      next.object_pos.z = 0.0;  // released object drops to the table
    }
  } else if (spec.has_object()) {
    Vec3 before = next.object_pos;
    Vec3 resolved = resolve_contact(before, g, contact);
    resolved = spec.workspace.clip(resolved);
    next.gripper_pos = g;
    next.object_pos = resolved;
    if (spec.is_slide() && dist(resolved, before) > 0.0)
      next.object_vel = resolved - before;  // impulse from the hit
  } else {
    next.gripper_pos = g;
  }

  if (spec.is_receptor() &&
      dist(next.object_pos, spec.receptor_center) < spec.receptor_radius)
    next.receptor_on = true;

  StepResult r;
  r.next_state = next;
  r.achieved_goal = achieved_goal(next, spec);
  std::optional<bool> aux;
  if (spec.is_receptor()) aux = next.receptor_on;
  r.reward = compute_reward(r.achieved_goal, desired_goal, aux, spec);
  r.is_success = r.reward == 0.0;
  return r;
}

// --- scripted experts -------------------------------------------------------

namespace {

struct ExpertRun {
  Env env;
  DemoTrajectory traj;
  Vec3 goal;

  ExpertRun(const TaskSpec& spec, Rng& rng) : env(spec, rng.raw()) {
    ResetResult r = env.reset_env();
    goal = r.desired_goal;
    traj.desired_goal = goal;
    record();
  }

  void record() {
    traj.states.push_back(encode_obs(env.state()));
    traj.achieved_goals.push_back(achieved_goal(env.state(), env.spec()));
  }

  int steps_taken() const { return static_cast<int>(traj.states.size()) - 1; }

  bool success(Vec3 target) const {
    std::optional<bool> aux;
    if (env.spec().is_receptor()) aux = env.state().receptor_on;
    return compute_reward(achieved_goal(env.state(), env.spec()), target, aux,
                          env.spec()) == 0.0;
  }

  // One env step from raw displacement (in position units, not action units).
  void move(Vec3 delta, double grip = -1.0) {
    const double m = env.spec().max_step;
    std::vector<double> a = {clip_unit(delta.x / m), clip_unit(delta.y / m)};
    if (env.spec().is_pick()) a.push_back(grip);
    env.step_env(a);
    record();
  }

  void hold(double grip = -1.0) { move({0, 0, 0}, grip); }

  bool exhausted() const { return steps_taken() >= env.spec().horizon; }
};

Vec3 normalized_xy(Vec3 v) {
  v.z = 0.0;
  const double l = norm(v);
  return l < 1e-12 ? Vec3{} : v * (1.0 / l);
}

// Walks the gripper one step toward target, orbiting the object disc so the
// approach never bumps it.
void walk_step(ExpertRun& run, Vec3 target, double grip = -1.0) {
  const TaskSpec& spec = run.env.spec();
  const Vec3 g = run.env.state().gripper_pos;
  const Vec3 obj = run.env.state().object_pos;
  // Strictly inside the staging ring so approach points stay reachable.
  const double avoid = spec.gripper_radius + spec.object_radius + 0.002;
  Vec3 to_target = target - g;
  to_target.z = 0.0;
  const double remain = norm(to_target);
  const double step_len = std::min(spec.max_step, remain);
  if (remain < 1e-12) {
    run.hold(grip);
    return;
  }
  Vec3 dir = to_target * (1.0 / remain);
  Vec3 cand = g + dir * step_len;
  if (spec.has_object() && !spec.is_pick() && dist(cand, obj) < avoid) {
    // Orbit around the object: tangential progress plus a radial component
    // that locks the endpoint onto (or outside) the avoidance ring, so the
    // approach can never displace the object.
    Vec3 radial = normalized_xy(g - obj);
    const double r0 = dist(g, obj);
    Vec3 t1{-radial.y, radial.x, 0.0};
    Vec3 t2{radial.y, -radial.x, 0.0};
    Vec3 tang = (t1.x * dir.x + t1.y * dir.y) >= (t2.x * dir.x + t2.y * dir.y) ? t1 : t2;
    double b = r0 - avoid;  // >0: spiral inward toward the ring, <0: push out
    b = std::max(-0.02, std::min(0.02, b));
    const double a = std::sqrt(std::max(spec.max_step * spec.max_step - b * b, 0.0));
    run.move(tang * a - radial * b, grip);
    return;
  }
  run.move(dir * step_len, grip);
}

// Closed-loop planar push toward target. The gripper stages behind the
// object on the target line, then advances along the gripper-object contact
// line; contact resolution keeps the object exactly on that line, so the
// track is straight and the goal distance decreases monotonically. Returns
// when the object is within stop_dist of target or the horizon runs out.
void push_object_to(ExpertRun& run, Vec3 target, double stop_dist) {
  const TaskSpec& spec = run.env.spec();
  const double contact = spec.gripper_radius + spec.object_radius;
  bool pushing = false;
  while (!run.exhausted()) {
    const Vec3 obj = run.env.state().object_pos;
    const Vec3 g = run.env.state().gripper_pos;
    if (dist(obj, target) <= stop_dist) return;
    const Vec3 d = normalized_xy(target - obj);
    const Vec3 u = normalized_xy(obj - g);
    const double r = dist(g, obj);
    const double align = u.x * d.x + u.y * d.y;
    // Hysteresis: only a precisely staged gripper starts a shove, so the
    // contact line starts on target and the push never needs a mid-course
    // pause (a pause would read as a dynamics change in the demo signal).
    const bool ready = r >= contact - 0.001 && r <= contact + 0.0061;
    if (pushing ? (ready && align >= 0.95) : (ready && align >= 0.9995)) {
      pushing = true;
      run.move(u * spec.max_step);
    } else {
      pushing = false;
      walk_step(run, obj - d * (contact + 0.004));
    }
  }
}

void expert_reach(ExpertRun& run) {
  while (!run.exhausted() && !run.success(run.goal)) walk_step(run, run.goal);
}

void expert_push(ExpertRun& run) {
  push_object_to(run, run.goal, run.env.spec().r_threshold * 0.5);
}

void expert_receptor(ExpertRun& run) {
  const TaskSpec& spec = run.env.spec();
  push_object_to(run, spec.receptor_center, 0.025);
  // Dwell while the receptor latches before lining up the final push.
  run.hold();
  run.hold();
  push_object_to(run, run.goal, spec.r_threshold * 0.5);
}

void expert_slide(ExpertRun& run) {
  const TaskSpec& spec = run.env.spec();
  const double contact = spec.gripper_radius + spec.object_radius;
  const double f = spec.slide_friction;
  const double gap = 0.002;
  // Stage exactly behind the object on the goal line.
  while (!run.exhausted()) {
    const Vec3 obj = run.env.state().object_pos;
    const Vec3 d = normalized_xy(run.goal - obj);
    const Vec3 behind = obj - d * (contact + gap);
    const Vec3 g = run.env.state().gripper_pos;
    if (dist(g, behind) < 1e-9) break;
    if (dist(g, behind) <= spec.max_step) {
      run.move(behind - g);
      break;
    }
    walk_step(run, behind);
  }
  if (run.exhausted()) throw std::runtime_error("slide expert: staging ran out of steps");
  // Single calibrated hit: contact displacement v0 plus the geometric glide
  // must cover the full distance within the remaining steps.
  const Vec3 obj = run.env.state().object_pos;
  const Vec3 d = normalized_xy(run.goal - obj);
  const double distance = dist(obj, run.goal);
  const int remaining = spec.horizon - run.steps_taken() - 1;
  if (remaining < 5) throw std::runtime_error("slide expert: no steps left for the hit");
  const double glide_factor = (1.0 - std::pow(f, remaining)) / (1.0 - f);
  const double v0 = distance / (1.0 + glide_factor);
  if (v0 + gap > spec.max_step)
    throw std::runtime_error("slide expert: required hit speed exceeds max step");
  run.move(d * (v0 + gap));
  while (!run.exhausted() && !run.success(run.goal)) run.hold();
}

void expert_pick(ExpertRun& run) {
  const TaskSpec& spec = run.env.spec();
  const double contact = spec.gripper_radius + spec.object_radius;
  // Approach with the gripper open; z stays on the table.
  while (!run.exhausted() &&
         dist(run.env.state().gripper_pos, run.env.state().object_pos) > contact * 0.5)
    walk_step(run, run.env.state().object_pos, -1.0);
  // Carry toward the goal, barely closed so altitude creeps, not jumps.
  while (!run.exhausted()) {
    const Vec3 g = run.env.state().gripper_pos;
    Vec3 flat_goal = run.goal;
    flat_goal.z = g.z;
    if (dist(g, flat_goal) < 0.004) break;
    walk_step(run, flat_goal, 0.02);
  }
  // Altitude: rise from below to the goal height, then hover.
  while (!run.exhausted() && !run.success(run.goal)) {
    const double dz = run.goal.z - run.env.state().gripper_pos.z;
    if (run.goal.z <= 0.0) {
      run.hold(-1.0);  // open: the object drops onto the table goal
    } else if (dz > 0.001) {
      run.move({0, 0, 0}, clip_unit(dz / spec.max_step));
    } else {
      run.hold(1e-4);
    }
  }
}

}  // namespace

DemoTrajectory scripted_expert(const TaskSpec& spec, Rng& rng) {
  ExpertRun run(spec, rng);
  switch (spec.task) {
    case TaskId::Reach: expert_reach(run); break;
    case TaskId::PushHard:
    case TaskId::PushFar: expert_push(run); break;
    case TaskId::SlideHard:
    case TaskId::SlideFar: expert_slide(run); break;
    case TaskId::PickPlaceLite: expert_pick(run); break;
    case TaskId::ReceptorPush: expert_receptor(run); break;
  }
  if (!run.success(run.goal))
    throw std::runtime_error("scripted expert failed on task " + task_name(spec.task));
  return std::move(run.traj);
}

// --- demo persistence --------------------------------------------------------

void save_demos(const std::vector<DemoTrajectory>& demos, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const DemoTrajectory& d : demos) {
    nlohmann::json j;
    j["states"] = d.states;
    auto goals = nlohmann::json::array();
    for (Vec3 g : d.achieved_goals) goals.push_back({g.x, g.y, g.z});
    j["achieved_goals"] = std::move(goals);
    j["desired_goal"] = {d.desired_goal.x, d.desired_goal.y, d.desired_goal.z};
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<DemoTrajectory> load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open demos: " + path);
  std::vector<DemoTrajectory> demos;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad JSON: " + e.what());
    }
    DemoTrajectory d;
    d.states = j.at("states").get<std::vector<std::vector<double>>>();
    for (const auto& g : j.at("achieved_goals"))
      d.achieved_goals.push_back({g.at(0).get<double>(), g.at(1).get<double>(),
                                  g.at(2).get<double>()});
    const auto& dg = j.at("desired_goal");
    d.desired_goal = {dg.at(0).get<double>(), dg.at(1).get<double>(),
                      dg.at(2).get<double>()};
    if (d.states.size() != d.achieved_goals.size() || d.states.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": states/achieved_goals length mismatch");
    demos.push_back(std::move(d));
  }
  return demos;
}

}  // namespace mamic
