#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ctedd/adam.hpp"
#include "ctedd/particle_world.hpp"
#include "ctedd/policy_networks.hpp"
#include "ctedd/replay_buffer.hpp"
#include "ctedd/rng.hpp"

namespace ctedd {

struct TrainConfig {
  double gamma = 0.95;
  std::size_t batch = 1024;
  double lr_ctedd = 0.005;
  double lr_maddpg = 0.01;
  double tau = 0.01;
  std::size_t learn_interval = 100;
  double alpha_start = 0.1;
  double alpha_end = 0.001;
  std::uint64_t alpha_steps = 3'000'000;
  std::optional<double> sigma_fixed;
  double grad_clip = 0.5;
  std::size_t buffer_capacity = ReplayBuffer::kDefaultCapacity;
  double maddpg_noise = 0.1;
  double maddpg_noise_decay = 0.999;  // per episode

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct AlphaSchedule {
  double start = 0.1;
  double end = 0.001;
  std::uint64_t horizon_steps = 3'000'000;
};

// Linear from start to end over horizon_steps, constant end afterwards.
double alpha_at(const AlphaSchedule& schedule, std::uint64_t step);

struct OptimizerSettings {
  double lr = 0.005;
  double grad_clip = 0.5;  // <= 0 disables clipping
  AdamSettings adam{};
};

// Maps a batch of next states to the joint actions used in the TD target.
using TargetActionFn = std::function<Mat(const Mat& next_states)>;

struct TdOptions {
  double gamma = 0.95;
  // When false, done flags mark time-limit ends and the target keeps
  // bootstrapping through them.
  bool done_is_terminal = true;
};

// TD targets r + gamma * (1 - done) * Q_target(s', target_actions(s')).
std::vector<double> td_targets(const CentralQNet& q, const ParamStore& q_target, const TargetActionFn& target_actions,
                               const Batch& batch, const TdOptions& td);

// One Adam step on sum_B (Q(s, a) - y)^2. Returns the loss before the step.
// Throws NumericError on a non-finite loss.
double q_update(CentralQNet& q, const ParamStore& q_target, const TargetActionFn& target_actions, const Batch& batch,
                const TdOptions& td, const OptimizerSettings& opt);

// (1/|B|) sum_B Q(s, mu_theta(s)).
double dpg_objective(const GlobalPolicyNet& net, const ActionCritic& critic, const Mat& states);
// Adds the gradient of -dpg_objective into theta grads.
void dpg_gradient(GlobalPolicyNet& net, const ActionCritic& critic, const Mat& states);
// Ascent step on theta (trunk and deterministic heads); omega untouched.
void dpg_update(GlobalPolicyNet& net, const ActionCritic& critic, const Mat& states, const OptimizerSettings& opt);

// Q(s, a) - Q(s, mu_theta(s)) per row, with a the executed joint actions.
std::vector<double> exploration_advantage(const GlobalPolicyNet& net, const ActionCritic& critic, const Batch& batch);
// Adds minus the ascent direction for omega into omega grads:
//   (1/|B|) sum_B dlog_pi_i(s, a_i)/domega_i * adv + alpha * sum_B dH_i/domega_i.
// log_pi is evaluated at the pre-clip samples.
void exploration_gradient(GlobalPolicyNet& net, const ActionCritic& critic, const Batch& batch, double alpha);
// Returns false (and changes nothing) on an empty batch.
bool exploration_update(GlobalPolicyNet& net, const ActionCritic& critic, const Batch& batch, double alpha,
                        const OptimizerSettings& opt);

// target <- (1 - tau) * target + tau * online. Throws StructureError on mismatch.
void soft_update(ParamStore& target, const ParamStore& online, double tau);

// d(-(1/|B|) sum_B Q(s, local_actions(obs(s))))/d(params), accumulated into
// the local net's grads through the message channel.
void maddpg_policy_gradient(LocalCommPolicyNet& net, const ActionCritic& critic, const Mat& states,
                            std::span<const Mat> observations);

struct MaddpgTargets {
  const ParamStore& local;
  const ParamStore& q;
};

// TD step on the critic with target local actions from observations of s',
// then a deterministic policy step on the local nets.
double maddpg_train_step(LocalCommPolicyNet& net, CentralQNet& q, const MaddpgTargets& targets, const EnvSpec& spec,
                         const Batch& batch, const TdOptions& td, const OptimizerSettings& opt);

// Sampling and learning loop state shared by both algorithms.
struct LearnerStats {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;  // completed
  std::uint64_t learn_iterations = 0;
  double last_q_loss = 0.0;
};

class Learner {
 public:
  virtual ~Learner() = default;

  // Advances n environment steps, learning every learn_interval steps.
  void advance(std::uint64_t n);

  const LearnerStats& stats() const { return stats_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const EnvSpec& spec() const { return spec_; }
  const TrainConfig& config() const { return config_; }

  // Deterministic joint action for evaluation.
  virtual std::vector<Vec2> act_deterministic(const WorldState& state) const = 0;

 protected:
  Learner(EnvSpec spec, TrainConfig config, std::uint64_t seed);

  struct Action {
    std::vector<double> executed;
    std::vector<double> sampled;  // pre-clip; may be empty
  };
  virtual Action act_explore(const WorldState& state, Rng& rng) = 0;
  virtual void learn() = 0;
  virtual void on_episode_end() {}

  EnvSpec spec_;
  TrainConfig config_;
  ReplayBuffer buffer_;
  Rng replay_rng_;
  LearnerStats stats_;

 private:
  Environment env_;
  Rng explore_rng_;
};

class CteddLearner final : public Learner {
 public:
  CteddLearner(EnvSpec spec, TrainConfig config, std::uint64_t seed);

  const GlobalPolicyNet& policy() const { return policy_; }
  const CentralQNet& critic() const { return q_; }
  const ParamStore& theta_target() const { return theta_target_; }
  const ParamStore& q_target() const { return q_target_; }
  double current_alpha() const;

  std::vector<Vec2> act_deterministic(const WorldState& state) const override;

 private:
  Action act_explore(const WorldState& state, Rng& rng) override;
  void learn() override;

  GlobalPolicyNet policy_;
  CentralQNet q_;
  ParamStore theta_target_;
  ParamStore q_target_;
};

class MaddpgLearner final : public Learner {
 public:
  MaddpgLearner(EnvSpec spec, TrainConfig config, std::size_t msg_dim, std::uint64_t seed);

  const LocalCommPolicyNet& policy() const { return policy_; }
  const CentralQNet& critic() const { return q_; }
  double noise_std() const { return noise_std_; }

  std::vector<Vec2> act_deterministic(const WorldState& state) const override;

 private:
  Action act_explore(const WorldState& state, Rng& rng) override;
  void learn() override;
  void on_episode_end() override { noise_std_ *= config_.maddpg_noise_decay; }

  LocalCommPolicyNet policy_;
  CentralQNet q_;
  ParamStore local_target_;
  ParamStore q_target_;
  double noise_std_;
};

// Per-agent actions from a joint vector.
std::vector<Vec2> to_vec2_actions(std::span<const double> joint);

}  // namespace ctedd
