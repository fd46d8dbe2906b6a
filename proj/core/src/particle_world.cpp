#include "ctedd/particle_world.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ctedd {

namespace {

std::atomic<std::uint64_t> g_simulated_steps{0};

Vec2 clamp_to_world(Vec2 p) {
  const double b = kPhysics.world_bound;
  return {std::clamp(p.x, -b, b), std::clamp(p.y, -b, b)};
}

bool inside_world(Vec2 p) {
  const double b = kPhysics.world_bound;
  return p.x >= -b && p.x <= b && p.y >= -b && p.y <= b;
}

double nearest_agent_distance(const WorldState& s, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : s.agents) best = std::min(best, distance(a.position, p));
  return best;
}

// Unit directions at angles 2*pi*k/K. Built from the first quadrant by exact
// 90 degree rotations so that symmetric candidates are exactly symmetric.
std::vector<Vec2> prey_direction_table() {
  const int k_total = kPhysics.prey_directions;
  const int quarter = k_total / 4;
  std::vector<Vec2> dirs(static_cast<std::size_t>(k_total));
  for (int k = 0; k < k_total; ++k) {
    const int q = k % quarter;
    const int quadrant = k / quarter;
    const double angle = 2.0 * std::numbers::pi * q / k_total;
    Vec2 d = q == 0 ? Vec2{1.0, 0.0} : Vec2{std::cos(angle), std::sin(angle)};
    for (int r = 0; r < quadrant; ++r) d = {-d.y, d.x};
    dirs[static_cast<std::size_t>(k)] = d;
  }
  return dirs;
}

const std::vector<Vec2>& prey_directions() {
  static const std::vector<Vec2> table = prey_direction_table();
  return table;
}

bool assign_push_zones(const WorldState& prev, std::size_t agent, std::vector<bool>& used) {
  if (agent == prev.agents.size()) return true;
  for (std::size_t l = 0; l < prev.landmarks.size(); ++l) {
    if (used[l]) continue;
    const Landmark& lm = prev.landmarks[l];
    if (distance(prev.agents[agent].position, lm.position) <= lm.push_zone_radius) {
      used[l] = true;
      if (assign_push_zones(prev, agent + 1, used)) return true;
      used[l] = false;
    }
  }
  return false;
}

}  // namespace

std::string_view env_id_name(EnvId id) {
  switch (id) {
    case EnvId::kCnV1: return "cn-v1";
    case EnvId::kCnV2: return "cn-v2";
    case EnvId::kPf: return "pf";
    case EnvId::kPp: return "pp";
  }
  return "?";
}

EnvId parse_env_id(std::string_view name) {
  for (EnvId id : {EnvId::kCnV1, EnvId::kCnV2, EnvId::kPf, EnvId::kPp}) {
    if (name == env_id_name(id)) return id;
  }
  throw std::invalid_argument("unknown environment id '" + std::string(name) + "' (expected cn-v1, cn-v2, pf, pp)");
}

EnvSpec EnvSpec::make(EnvId id) {
  EnvSpec s;
  s.id = id;
  s.num_agents = 3;
  switch (id) {
    case EnvId::kCnV1: s.num_landmarks = 3; s.episode_length = 25; break;
    case EnvId::kCnV2: s.num_landmarks = 2; s.episode_length = 25; break;
    case EnvId::kPf: s.num_landmarks = 3; s.episode_length = 50; break;
    case EnvId::kPp: s.num_landmarks = 2; s.episode_length = 50; break;
  }
  return s;
}

WorldState reset(const EnvSpec& spec, Rng& rng) {
  const double b = kPhysics.spawn_bound;
  WorldState s;
  s.agents.resize(spec.num_agents);
  for (auto& a : s.agents) {
    a.position.x = rng.uniform(-b, b);
    a.position.y = rng.uniform(-b, b);
  }
  s.landmarks.resize(spec.num_landmarks);
  for (auto& l : s.landmarks) {
    l.position.x = rng.uniform(-b, b);
    l.position.y = rng.uniform(-b, b);
    l.movable = spec.landmarks_have_velocity();
    l.push_zone_radius = spec.id == EnvId::kPf ? kPhysics.push_zone_radius : 0.0;
  }
  return s;
}

WorldState physics_step(const EnvSpec& spec, const WorldState& state, std::span<const Vec2> actions) {
  if (actions.size() != state.agents.size()) {
    throw std::invalid_argument("physics_step: expected " + std::to_string(state.agents.size()) + " actions, got " +
                                std::to_string(actions.size()));
  }
  const PhysicsConstants& k = kPhysics;
  WorldState next = state;
  for (std::size_t i = 0; i < next.agents.size(); ++i) {
    AgentBody& a = next.agents[i];
    const Vec2 u{std::clamp(actions[i].x, -1.0, 1.0), std::clamp(actions[i].y, -1.0, 1.0)};
    const Vec2 v_old = a.velocity;
    Vec2 v = (1.0 - k.damping) * v_old + (k.accel * k.dt) * u;
    const double speed = v.norm();
    if (speed > k.max_speed) v = (k.max_speed / speed) * v;
    a.velocity = v;
    a.acceleration = (1.0 / k.dt) * (v - v_old);
    a.position = clamp_to_world(a.position + k.dt * v);
  }

  switch (spec.id) {
    case EnvId::kCnV1:
    case EnvId::kCnV2:
      break;
    case EnvId::kPf: {
      const bool pushed = push_triggered(state, next);
      for (auto& l : next.landmarks) {
        const Vec2 old = l.position;
        if (pushed) l.position = clamp_to_world({old.x + k.push_dist, old.y});
        l.velocity = (1.0 / k.dt) * (l.position - old);
      }
      break;
    }
    case EnvId::kPp: {
      const std::vector<Vec2> moved = prey_move(next);
      for (std::size_t l = 0; l < next.landmarks.size(); ++l) {
        const Vec2 old = next.landmarks[l].position;
        next.landmarks[l].position = moved[l];
        next.landmarks[l].velocity = (1.0 / k.dt) * (moved[l] - old);
      }
      break;
    }
  }
  next.time_step = state.time_step + 1;
  return next;
}

std::vector<double> observe(const EnvSpec& spec, const WorldState& state, std::size_t agent) {
  if (agent >= state.agents.size()) throw std::out_of_range("observe: agent index out of range");
  std::vector<double> obs;
  obs.reserve(spec.obs_dim());
  const AgentBody& self = state.agents[agent];
  obs.push_back(self.position.x);
  obs.push_back(self.position.y);
  obs.push_back(self.velocity.x);
  obs.push_back(self.velocity.y);
  for (std::size_t j = 0; j < state.agents.size(); ++j) {
    if (j != agent) obs.push_back(distance(self.position, state.agents[j].position));
  }
  for (const auto& l : state.landmarks) obs.push_back(distance(self.position, l.position));
  return obs;
}

std::vector<double> full_state_vector(const EnvSpec& spec, const WorldState& state) {
  std::vector<double> v;
  v.reserve(spec.state_dim());
  for (const auto& a : state.agents) {
    v.insert(v.end(), {a.position.x, a.position.y, a.velocity.x, a.velocity.y});
  }
  for (const auto& l : state.landmarks) {
    v.push_back(l.position.x);
    v.push_back(l.position.y);
    if (spec.landmarks_have_velocity()) {
      v.push_back(l.velocity.x);
      v.push_back(l.velocity.y);
    }
  }
  return v;
}

WorldState state_from_vector(const EnvSpec& spec, std::span<const double> vec, int time_step) {
  if (vec.size() != spec.state_dim()) {
    throw DimensionError("state_from_vector: expected " + std::to_string(spec.state_dim()) + " values, got " +
                         std::to_string(vec.size()));
  }
  WorldState s;
  s.time_step = time_step;
  std::size_t at = 0;
  s.agents.resize(spec.num_agents);
  for (auto& a : s.agents) {
    a.position = {vec[at], vec[at + 1]};
    a.velocity = {vec[at + 2], vec[at + 3]};
    at += 4;
  }
  s.landmarks.resize(spec.num_landmarks);
  for (auto& l : s.landmarks) {
    l.position = {vec[at], vec[at + 1]};
    at += 2;
    l.movable = spec.landmarks_have_velocity();
    l.push_zone_radius = spec.id == EnvId::kPf ? kPhysics.push_zone_radius : 0.0;
    if (spec.landmarks_have_velocity()) {
      l.velocity = {vec[at], vec[at + 1]};
      at += 2;
    }
  }
  return s;
}

std::vector<Mat> observe_batch(const EnvSpec& spec, const Mat& states) {
  if (states.cols() != spec.state_dim()) {
    throw DimensionError("observe_batch: state width " + std::to_string(states.cols()) + " != " +
                         std::to_string(spec.state_dim()));
  }
  const std::size_t n = spec.num_agents;
  const std::size_t landmark_stride = spec.landmarks_have_velocity() ? 4 : 2;
  const std::size_t landmark_base = 4 * n;
  std::vector<Mat> obs(n, Mat(states.rows(), spec.obs_dim()));
  for (std::size_t r = 0; r < states.rows(); ++r) {
    const auto s = states.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      auto o = obs[i].row(r);
      const Vec2 self{s[4 * i], s[4 * i + 1]};
      std::size_t at = 0;
      o[at++] = self.x;
      o[at++] = self.y;
      o[at++] = s[4 * i + 2];
      o[at++] = s[4 * i + 3];
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) o[at++] = distance(self, {s[4 * j], s[4 * j + 1]});
      }
      for (std::size_t l = 0; l < spec.num_landmarks; ++l) {
        const std::size_t base = landmark_base + l * landmark_stride;
        o[at++] = distance(self, {s[base], s[base + 1]});
      }
    }
  }
  return obs;
}

double landmark_coverage_distance(const WorldState& state) {
  double total = 0.0;
  for (const auto& l : state.landmarks) total += nearest_agent_distance(state, l.position);
  return total;
}

int colliding_pairs(const WorldState& state) {
  int pairs = 0;
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    for (std::size_t j = i + 1; j < state.agents.size(); ++j) {
      const auto& a = state.agents[i];
      const auto& b = state.agents[j];
      if (distance(a.position, b.position) < a.collision_radius + b.collision_radius) ++pairs;
    }
  }
  return pairs;
}

double reward_cn_v1([[maybe_unused]] const WorldState& prev, const WorldState& next) {
  return -landmark_coverage_distance(next) - 1.0 * colliding_pairs(next);
}

double reward_cn_v2([[maybe_unused]] const WorldState& prev, const WorldState& next) {
  double r = -landmark_coverage_distance(next) - 1.0 * colliding_pairs(next);

  // Landmark A is the one closest to any agent; exact ties go to index 0.
  std::size_t landmark_a = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < next.landmarks.size(); ++l) {
    const double d = nearest_agent_distance(next, next.landmarks[l].position);
    if (d < best) {
      best = d;
      landmark_a = l;
    }
  }
  // A needs two of the three agents; two or more on the other landmark is a violation.
  int on_other = 0;
  for (const auto& a : next.agents) {
    std::size_t nearest = 0;
    double nd = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < next.landmarks.size(); ++l) {
      const double d = distance(a.position, next.landmarks[l].position);
      if (d < nd) {
        nd = d;
        nearest = l;
      }
    }
    if (nearest != landmark_a) ++on_other;
  }
  if (on_other >= 2) r -= 10.0;
  return r;
}

bool push_triggered(const WorldState& prev, const WorldState& next) {
  if (prev.agents.empty() || prev.agents.size() > prev.landmarks.size()) return false;
  for (std::size_t i = 0; i < prev.agents.size(); ++i) {
    if (!(next.agents[i].position.x > prev.agents[i].position.x)) return false;
  }
  std::vector<bool> used(prev.landmarks.size(), false);
  return assign_push_zones(prev, 0, used);
}

PushOutcome reward_pf(const WorldState& prev, const WorldState& next) {
  PushOutcome out;
  out.pushed = push_triggered(prev, next);
  out.displacement = out.pushed ? kPhysics.push_dist : 0.0;
  out.reward = (out.pushed ? 10.0 : 0.0) - landmark_coverage_distance(next) - 1.0 * colliding_pairs(next);
  return out;
}

std::vector<Vec2> prey_move(const WorldState& state) {
  const PhysicsConstants& k = kPhysics;
  std::vector<Vec2> predicted;
  predicted.reserve(state.agents.size());
  for (const auto& a : state.agents) {
    predicted.push_back(a.position + k.dt * a.velocity + (0.5 * k.dt * k.dt) * a.acceleration);
  }
  const auto& dirs = prey_directions();
  std::vector<Vec2> moved;
  moved.reserve(state.landmarks.size());
  for (const auto& l : state.landmarks) {
    Vec2 best_pos = l.position;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const Vec2& d : dirs) {
      const Vec2 candidate = l.position + k.prey_step * d;
      if (!inside_world(candidate)) continue;
      double score = 0.0;
      for (const Vec2& p : predicted) score += distance(candidate, p);
      if (score > best_score + k.prey_tie_tolerance) {
        best_score = score;
        best_pos = candidate;
      }
    }
    moved.push_back(best_pos);
  }
  return moved;
}

std::vector<bool> captured_landmarks(const WorldState& state) {
  std::vector<bool> captured(state.landmarks.size(), false);
  for (std::size_t l = 0; l < state.landmarks.size(); ++l) {
    captured[l] = !state.agents.empty() &&
                  std::all_of(state.agents.begin(), state.agents.end(), [&](const AgentBody& a) {
                    return distance(a.position, state.landmarks[l].position) <= kPhysics.capture_radius;
                  });
  }
  return captured;
}

double reward_pp([[maybe_unused]] const WorldState& prev, const WorldState& next) {
  const auto captured = captured_landmarks(next);
  const double bonus = 10.0 * static_cast<double>(std::count(captured.begin(), captured.end(), true));
  return bonus - landmark_coverage_distance(next) - 1.0 * colliding_pairs(next);
}

double team_reward(const EnvSpec& spec, const WorldState& prev, const WorldState& next) {
  switch (spec.id) {
    case EnvId::kCnV1: return reward_cn_v1(prev, next);
    case EnvId::kCnV2: return reward_cn_v2(prev, next);
    case EnvId::kPf: return reward_pf(prev, next).reward;
    case EnvId::kPp: return reward_pp(prev, next);
  }
  return 0.0;
}

Environment::Environment(EnvSpec spec, Rng rng) : spec_(spec), rng_(rng) { state_ = ctedd::reset(spec_, rng_); }

const WorldState& Environment::reset() {
  state_ = ctedd::reset(spec_, rng_);
  return state_;
}

StepResult Environment::step(std::span<const Vec2> actions) {
  WorldState next = physics_step(spec_, state_, actions);
  StepResult result;
  result.reward = team_reward(spec_, state_, next);
  if (spec_.id == EnvId::kPp) {
    const auto captured = captured_landmarks(next);
    const double b = kPhysics.spawn_bound;
    for (std::size_t l = 0; l < captured.size(); ++l) {
      if (!captured[l]) continue;
      next.landmarks[l].position = {rng_.uniform(-b, b), rng_.uniform(-b, b)};
      next.landmarks[l].velocity = {};
    }
  }
  state_ = std::move(next);
  result.done = state_.time_step >= spec_.episode_length;
  g_simulated_steps.fetch_add(1, std::memory_order_relaxed);
  return result;
}

std::uint64_t simulated_step_count() { return g_simulated_steps.load(std::memory_order_relaxed); }

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryStep> steps) {
  out << "t,agent_id,px,py,vx,vy,ax,ay,reward\n";
  char buf[256];
  for (const auto& step : steps) {
    for (std::size_t i = 0; i < step.state.agents.size(); ++i) {
      const auto& a = step.state.agents[i];
      const Vec2 u = i < step.actions.size() ? step.actions[i] : Vec2{};
      std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", step.state.time_step, i,
                    a.position.x, a.position.y, a.velocity.x, a.velocity.y, u.x, u.y, step.reward);
      out << buf;
    }
  }
}

}  // namespace ctedd
