#include "ctedd/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ctedd/gaussian.hpp"

namespace ctedd {

namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string("TrainConfig: ") + field + " must be positive");
}

void step_store(ParamStore& params, const OptimizerSettings& opt) {
  if (opt.grad_clip > 0.0) params.clip_grad_norm(opt.grad_clip);
  AdamSettings adam = opt.adam;
  adam.lr = opt.lr;
  adam_step(params, adam);
}

template <class Net, class Dims>
Net build(Dims dims, Rng rng) {
  return Net(dims, rng);
}

}  // namespace

void TrainConfig::validate() const {
  require_positive(gamma, "gamma");
  require_positive(static_cast<double>(batch), "batch");
  require_positive(lr_ctedd, "lr_ctedd");
  require_positive(lr_maddpg, "lr_maddpg");
  require_positive(tau, "tau");
  require_positive(static_cast<double>(learn_interval), "learn_interval");
  require_positive(alpha_start, "alpha_start");
  require_positive(alpha_end, "alpha_end");
  require_positive(static_cast<double>(alpha_steps), "alpha_steps");
  require_positive(grad_clip, "grad_clip");
  require_positive(static_cast<double>(buffer_capacity), "buffer_capacity");
  require_positive(maddpg_noise, "maddpg_noise");
  require_positive(maddpg_noise_decay, "maddpg_noise_decay");
  if (gamma > 1.0) throw std::invalid_argument("TrainConfig: gamma must not exceed 1");
  if (tau > 1.0) throw std::invalid_argument("TrainConfig: tau must not exceed 1");
  if (alpha_start < alpha_end) throw std::invalid_argument("TrainConfig: alpha_start must be >= alpha_end");
  if (sigma_fixed && !(*sigma_fixed > 0.0 && *sigma_fixed <= kSigmaMax)) {
    throw std::invalid_argument("TrainConfig: sigma_fixed must lie in (0, 1]");
  }
}

double alpha_at(const AlphaSchedule& schedule, std::uint64_t step) {
  if (schedule.horizon_steps == 0 || step >= schedule.horizon_steps) return schedule.end;
  const double frac = static_cast<double>(step) / static_cast<double>(schedule.horizon_steps);
  const double a = schedule.start + (schedule.end - schedule.start) * frac;
  return std::clamp(a, std::min(schedule.start, schedule.end), std::max(schedule.start, schedule.end));
}

std::vector<double> td_targets(const CentralQNet& q, const ParamStore& q_target, const TargetActionFn& target_actions,
                               const Batch& batch, const TdOptions& td) {
  const std::size_t n = batch.size();
  std::vector<double> y(batch.rewards);
  if (td.gamma == 0.0) return y;
  const Mat next_actions = target_actions(batch.next_states);
  const Mat q_next = q.value_with(q_target, batch.next_states, next_actions);
  for (std::size_t b = 0; b < n; ++b) {
    const double keep = td.done_is_terminal ? 1.0 - batch.dones[b] : 1.0;
    y[b] += td.gamma * keep * q_next(b, 0);
  }
  return y;
}

double q_update(CentralQNet& q, const ParamStore& q_target, const TargetActionFn& target_actions, const Batch& batch,
                const TdOptions& td, const OptimizerSettings& opt) {
  if (batch.size() == 0) throw std::invalid_argument("q_update: empty batch");
  const std::vector<double> y = td_targets(q, q_target, target_actions, batch, td);
  const MlpOutput out = q.forward(batch.states, batch.joint_actions);

  Mat dy(batch.size(), 1);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double err = out.y(b, 0) - y[b];
    loss += err * err;
    dy(b, 0) = 2.0 * err;
  }
  if (!std::isfinite(loss)) throw NumericError("q_update: non-finite loss");

  ParamStore& params = q.params();
  params.zero_grad();
  ctedd::backward(out.tape, dy, params);
  step_store(params, opt);
  return loss;
}

double dpg_objective(const GlobalPolicyNet& net, const ActionCritic& critic, const Mat& states) {
  const Mat joint = join_actions(net.means(states));
  return sum(critic.value(states, joint)) / static_cast<double>(states.rows());
}

void dpg_gradient(GlobalPolicyNet& net, const ActionCritic& critic, const Mat& states) {
  const auto pass = net.forward(states, false);
  std::vector<Mat> means;
  means.reserve(pass.mean.size());
  for (const auto& m : pass.mean) means.push_back(m.y);
  const Mat joint = join_actions(means);
  Mat da = critic.action_gradient(states, joint);
  scale_inplace(da, -1.0 / static_cast<double>(states.rows()));
  const std::vector<Mat> d_mean = split_actions(da, net.dims().num_agents);
  net.backward_mean(pass, d_mean);
}

void dpg_update(GlobalPolicyNet& net, const ActionCritic& critic, const Mat& states, const OptimizerSettings& opt) {
  if (states.rows() == 0) return;
  net.theta().zero_grad();
  dpg_gradient(net, critic, states);
  step_store(net.theta(), opt);
}

std::vector<double> exploration_advantage(const GlobalPolicyNet& net, const ActionCritic& critic, const Batch& batch) {
  const Mat mu = join_actions(net.means(batch.states));
  const Mat q_sampled = critic.value(batch.states, batch.joint_actions);
  const Mat q_mean = critic.value(batch.states, mu);
  std::vector<double> adv(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) adv[b] = q_sampled(b, 0) - q_mean(b, 0);
  return adv;
}

void exploration_gradient(GlobalPolicyNet& net, const ActionCritic& critic, const Batch& batch, double alpha) {
  const std::size_t n = batch.size();
  const std::size_t ad = net.dims().action_dim;
  const std::vector<double> adv = exploration_advantage(net, critic, batch);
  const auto pass = net.forward(batch.states, true);
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<Mat> d_std;
  d_std.reserve(net.dims().num_agents);
  for (std::size_t i = 0; i < net.dims().num_agents; ++i) {
    const Mat& mu = pass.mean[i].y;
    const Mat& sd = pass.std[i].y;
    Mat g(n, ad);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t d = 0; d < ad; ++d) {
        const double s = sd(b, d);
        const double dev = batch.sampled_actions(b, i * ad + d) - mu(b, d);
        const double dlogp = (dev * dev - s * s) / (s * s * s);
        const double dentropy = 1.0 / s;
        // negated: the optimizer descends
        g(b, d) = -(inv_n * adv[b] * dlogp + alpha * dentropy);
      }
    }
    d_std.push_back(std::move(g));
  }
  net.backward_std(pass, d_std);
}

bool exploration_update(GlobalPolicyNet& net, const ActionCritic& critic, const Batch& batch, double alpha,
                        const OptimizerSettings& opt) {
  if (batch.size() == 0) return false;
  net.omega().zero_grad();
  exploration_gradient(net, critic, batch, alpha);
  step_store(net.omega(), opt);
  return true;
}

void soft_update(ParamStore& target, const ParamStore& online, double tau) {
  if (!target.same_structure(online)) throw StructureError("soft_update: parameter structures differ");
  auto& t = target.entries();
  const auto& o = online.entries();
  for (std::size_t e = 0; e < t.size(); ++e) {
    Mat& tv = t[e].value;
    const Mat& ov = o[e].value;
    auto dst = tv.data();
    const auto src = ov.data();
    for (std::size_t k = 0; k < tv.size(); ++k) dst[k] = (1.0 - tau) * dst[k] + tau * src[k];
  }
}

void maddpg_policy_gradient(LocalCommPolicyNet& net, const ActionCritic& critic, const Mat& states,
                            std::span<const Mat> observations) {
  const auto pass = net.forward(observations);
  const Mat joint = join_actions(pass.actions);
  Mat da = critic.action_gradient(states, joint);
  scale_inplace(da, -1.0 / static_cast<double>(states.rows()));
  const std::vector<Mat> d_actions = split_actions(da, net.dims().num_agents);
  net.backward(pass, d_actions);
}

double maddpg_train_step(LocalCommPolicyNet& net, CentralQNet& q, const MaddpgTargets& targets, const EnvSpec& spec,
                         const Batch& batch, const TdOptions& td, const OptimizerSettings& opt) {
  const TargetActionFn target_fn = [&](const Mat& next_states) {
    const std::vector<Mat> obs = observe_batch(spec, next_states);
    return join_actions(net.actions_with(targets.local, obs));
  };
  const double loss = q_update(q, targets.q, target_fn, batch, td, opt);

  const QNetCritic critic(q);
  const std::vector<Mat> obs = observe_batch(spec, batch.states);
  net.params().zero_grad();
  maddpg_policy_gradient(net, critic, batch.states, obs);
  step_store(net.params(), opt);
  return loss;
}

std::vector<Vec2> to_vec2_actions(std::span<const double> joint) {
  if (joint.size() % 2 != 0) throw DimensionError("to_vec2_actions: odd joint action width");
  std::vector<Vec2> out(joint.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {joint[2 * i], joint[2 * i + 1]};
  return out;
}

// ---------------------------------------------------------------------------

Learner::Learner(EnvSpec spec, TrainConfig config, std::uint64_t seed)
    : spec_(spec),
      config_(config),
      buffer_(config.buffer_capacity),
      replay_rng_(Rng(seed).split(StreamTag::kReplay)),
      env_(spec, Rng(seed).split(StreamTag::kEnvironment)),
      explore_rng_(Rng(seed).split(StreamTag::kExploration)) {
  config_.validate();
}

void Learner::advance(std::uint64_t n) {
  for (std::uint64_t k = 0; k < n; ++k) {
    const WorldState& before = env_.state();
    Transition t;
    t.state = full_state_vector(spec_, before);
    Action a = act_explore(before, explore_rng_);
    const StepResult r = env_.step(to_vec2_actions(a.executed));
    t.next_state = full_state_vector(spec_, env_.state());
    t.joint_action = std::move(a.executed);
    t.sampled_action = std::move(a.sampled);
    t.reward = r.reward;
    t.done = r.done;
    t.t_global = stats_.env_steps;
    buffer_.push(std::move(t));
    ++stats_.env_steps;

    if (r.done) {
      ++stats_.episodes;
      on_episode_end();
      env_.reset();
    }
    if (stats_.env_steps % config_.learn_interval == 0) {
      learn();
    }
  }
}

CteddLearner::CteddLearner(EnvSpec spec, TrainConfig config, std::uint64_t seed)
    : Learner(spec, config, seed),
      policy_(build<GlobalPolicyNet>(GlobalPolicyNet::Dims{spec.state_dim(), spec.num_agents, spec.action_dim},
                                     Rng(seed).split(StreamTag::kInit).split(1))),
      q_(build<CentralQNet>(CentralQNet::Dims{spec.state_dim(), spec.joint_action_dim()},
                            Rng(seed).split(StreamTag::kInit).split(2))),
      theta_target_(policy_.theta()),
      q_target_(q_.params()) {}

double CteddLearner::current_alpha() const {
  return alpha_at({config_.alpha_start, config_.alpha_end, config_.alpha_steps}, stats_.env_steps);
}

std::vector<Vec2> CteddLearner::act_deterministic(const WorldState& state) const {
  const auto s = full_state_vector(spec_, state);
  const Mat joint = join_actions(policy_.means(Mat::row_vector(s)));
  return to_vec2_actions(joint.row(0));
}

Learner::Action CteddLearner::act_explore(const WorldState& state, Rng& rng) {
  const auto s = full_state_vector(spec_, state);
  const auto samples = sample_actions(policy_, s, rng, config_.sigma_fixed);
  Action a;
  for (const auto& smp : samples) {
    a.executed.insert(a.executed.end(), smp.action.begin(), smp.action.end());
    const auto pre = smp.pre_clip();
    a.sampled.insert(a.sampled.end(), pre.begin(), pre.end());
  }
  return a;
}

void CteddLearner::learn() {
  // The on-policy slice is consumed every interval so it never spans an
  // older policy, even before learning starts.
  const auto recent = buffer_.recent_batch();
  if (buffer_.size() < config_.batch) return;

  const OptimizerSettings opt{config_.lr_ctedd, config_.grad_clip, {}};
  const TdOptions td{config_.gamma, false};
  const Batch batch = make_batch(buffer_.sample_uniform(config_.batch, replay_rng_));

  const TargetActionFn target_fn = [this](const Mat& next_states) {
    return join_actions(policy_.means_with(theta_target_, next_states));
  };
  stats_.last_q_loss = q_update(q_, q_target_, target_fn, batch, td, opt);

  const QNetCritic critic(q_);
  dpg_update(policy_, critic, batch.states, opt);
  if (!config_.sigma_fixed) {
    exploration_update(policy_, critic, make_batch(recent), current_alpha(), opt);
  }
  soft_update(theta_target_, policy_.theta(), config_.tau);
  soft_update(q_target_, q_.params(), config_.tau);
  ++stats_.learn_iterations;
}

MaddpgLearner::MaddpgLearner(EnvSpec spec, TrainConfig config, std::size_t msg_dim, std::uint64_t seed)
    : Learner(spec, config, seed),
      policy_(build<LocalCommPolicyNet>(
          LocalCommPolicyNet::Dims{spec.num_agents, spec.obs_dim(), msg_dim, spec.action_dim},
          Rng(seed).split(StreamTag::kInit).split(3))),
      q_(build<CentralQNet>(CentralQNet::Dims{spec.state_dim(), spec.joint_action_dim()},
                            Rng(seed).split(StreamTag::kInit).split(2))),
      local_target_(policy_.params()),
      q_target_(q_.params()),
      noise_std_(config_.maddpg_noise) {
  if (config_.sigma_fixed) throw std::invalid_argument("sigma_fixed applies to ctedd only");
}

std::vector<Vec2> MaddpgLearner::act_deterministic(const WorldState& state) const {
  std::vector<Mat> obs;
  for (std::size_t i = 0; i < spec_.num_agents; ++i) obs.push_back(Mat::row_vector(observe(spec_, state, i)));
  const Mat joint = join_actions(policy_.forward(obs).actions);
  return to_vec2_actions(joint.row(0));
}

Learner::Action MaddpgLearner::act_explore(const WorldState& state, Rng& rng) {
  const auto mean = act_deterministic(state);
  Action a;
  for (const Vec2& m : mean) {
    for (double v : {m.x, m.y}) a.executed.push_back(std::clamp(v + noise_std_ * rng.normal(), -1.0, 1.0));
  }
  return a;
}

void MaddpgLearner::learn() {
  buffer_.recent_batch();
  if (buffer_.size() < config_.batch) return;
  const OptimizerSettings opt{config_.lr_maddpg, config_.grad_clip, {}};
  const TdOptions td{config_.gamma, false};
  const Batch batch = make_batch(buffer_.sample_uniform(config_.batch, replay_rng_));
  stats_.last_q_loss = maddpg_train_step(policy_, q_, {local_target_, q_target_}, spec_, batch, td, opt);
  soft_update(local_target_, policy_.params(), config_.tau);
  soft_update(q_target_, q_.params(), config_.tau);
  ++stats_.learn_iterations;
}

}  // namespace ctedd
