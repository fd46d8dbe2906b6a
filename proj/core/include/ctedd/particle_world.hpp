#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctedd/mat.hpp"
#include "ctedd/rng.hpp"

namespace ctedd {

enum class EnvId { kCnV1, kCnV2, kPf, kPp };

// "cn-v1", "cn-v2", "pf", "pp"
std::string_view env_id_name(EnvId id);
EnvId parse_env_id(std::string_view name);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
  double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct PhysicsConstants {
  double dt = 0.1;
  double accel = 5.0;
  double damping = 0.25;
  double max_speed = 1.0;
  double world_bound = 1.5;   // positions clamped to [-bound, bound]^2
  double spawn_bound = 1.0;   // resets place entities in [-spawn, spawn]^2
  double collision_radius = 0.15;
  double push_zone_radius = 0.3;
  double push_dist = 0.05;
  double capture_radius = 0.25;
  double prey_step = 0.08;
  int prey_directions = 16;
  // Prey candidates whose scores differ by less than this are ties.
  double prey_tie_tolerance = 1e-12;
};

inline constexpr PhysicsConstants kPhysics{};

struct EnvSpec {
  EnvId id = EnvId::kCnV1;
  std::size_t num_agents = 3;
  std::size_t num_landmarks = 3;
  int episode_length = 25;
  std::size_t action_dim = 2;

  static EnvSpec make(EnvId id);
  static EnvSpec make(std::string_view name) { return make(parse_env_id(name)); }

  bool landmarks_have_velocity() const { return id == EnvId::kPf || id == EnvId::kPp; }
  // own position (2), own velocity (2), distances to other agents, distances to landmarks
  std::size_t obs_dim() const { return 4 + (num_agents - 1) + num_landmarks; }
  // per agent (px, py, vx, vy), then per landmark (px, py) or (px, py, vx, vy) for PF/PP
  std::size_t state_dim() const { return 4 * num_agents + num_landmarks * (landmarks_have_velocity() ? 4 : 2); }
  std::size_t joint_action_dim() const { return num_agents * action_dim; }
};

struct AgentBody {
  Vec2 position;
  Vec2 velocity;
  Vec2 acceleration;  // realized (v_new - v_old) / dt over the last step
  double collision_radius = kPhysics.collision_radius;
};

struct Landmark {
  Vec2 position;
  Vec2 velocity;
  bool movable = false;
  double push_zone_radius = 0.0;
};

struct WorldState {
  std::vector<AgentBody> agents;
  std::vector<Landmark> landmarks;
  int time_step = 0;
};

WorldState reset(const EnvSpec& spec, Rng& rng);

// Clips each action component to [-1, 1], integrates agents, then applies the
// environment's landmark rule (PF push, PP prey escape).
WorldState physics_step(const EnvSpec& spec, const WorldState& state, std::span<const Vec2> actions);

std::vector<double> observe(const EnvSpec& spec, const WorldState& state, std::size_t agent);
std::vector<double> full_state_vector(const EnvSpec& spec, const WorldState& state);
// Inverse of full_state_vector for the encoded fields. Accelerations are not
// part of the layout and come back zero; time_step is taken from the caller.
WorldState state_from_vector(const EnvSpec& spec, std::span<const double> vec, int time_step = 0);

// Per-agent observation matrices (rows x obs_dim) computed directly from a
// batch of full-state rows.
std::vector<Mat> observe_batch(const EnvSpec& spec, const Mat& states);

// Reward pieces shared by all environments, evaluated on one state.
double landmark_coverage_distance(const WorldState& state);  // sum over landmarks of nearest-agent distance
int colliding_pairs(const WorldState& state);

double reward_cn_v1(const WorldState& prev, const WorldState& next);
double reward_cn_v2(const WorldState& prev, const WorldState& next);

struct PushOutcome {
  double reward = 0.0;
  bool pushed = false;
  double displacement = 0.0;  // x shift applied to every landmark
};
// True when each agent sits in a distinct landmark's push zone at prev and
// every agent's x strictly increases from prev to next.
bool push_triggered(const WorldState& prev, const WorldState& next);
PushOutcome reward_pf(const WorldState& prev, const WorldState& next);

// New prey positions for every landmark (PP).
std::vector<Vec2> prey_move(const WorldState& state);
std::vector<bool> captured_landmarks(const WorldState& state);
double reward_pp(const WorldState& prev, const WorldState& next);

double team_reward(const EnvSpec& spec, const WorldState& prev, const WorldState& next);

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

// One episode-bound simulator instance. PP landmarks captured during a step
// respawn uniformly after the reward is computed.
class Environment {
 public:
  Environment(EnvSpec spec, Rng rng);

  const WorldState& reset();
  StepResult step(std::span<const Vec2> actions);

  const WorldState& state() const { return state_; }
  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  Rng rng_;
  WorldState state_;
};

// Total Environment::step calls in this process; used to assert that
// offline stages never touch a simulator.
std::uint64_t simulated_step_count();

struct TrajectoryStep {
  WorldState state;  // state before the actions are applied
  std::vector<Vec2> actions;
  double reward = 0.0;
};

// CSV columns: t,agent_id,px,py,vx,vy,ax,ay,reward where (ax, ay) is the
// agent's action at step t.
void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryStep> steps);

}  // namespace ctedd
