#pragma once

// Small closed-form training problems shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctedd/particle_world.hpp"
#include "ctedd/policy_networks.hpp"
#include "ctedd/rng.hpp"
#include "ctedd/training.hpp"
#include "oracles.hpp"
#include "synthetic_critics.hpp"
#include "test_support.hpp"

namespace testing_support {

inline ctedd::Mat random_states(const ctedd::EnvSpec& spec, std::size_t rows, ctedd::Rng& rng) {
  ctedd::Mat m(rows, spec.state_dim());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto v = ctedd::full_state_vector(spec, random_state(spec, rng));
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

// Batch of transitions with random states and uniform joint actions.
inline ctedd::Batch random_batch(const ctedd::EnvSpec& spec, std::size_t rows, ctedd::Rng& rng) {
  ctedd::Batch b;
  b.states = random_states(spec, rows, rng);
  b.next_states = random_states(spec, rows, rng);
  b.joint_actions = ctedd::Mat(rows, spec.joint_action_dim());
  for (double& v : b.joint_actions.data()) v = rng.uniform(-1, 1);
  b.sampled_actions = b.joint_actions;
  for (std::size_t r = 0; r < rows; ++r) {
    b.rewards.push_back(rng.uniform(-3, 0));
    b.dones.push_back(0.0);
    b.t_global.push_back(r);
  }
  return b;
}

// Sampled actions drawn from the net's own Gaussians, executed actions clipped.
inline ctedd::Batch on_policy_batch(const ctedd::EnvSpec& spec, const ctedd::GlobalPolicyNet& net, std::size_t rows,
                                    ctedd::Rng& rng) {
  ctedd::Batch b = random_batch(spec, rows, rng);
  const auto mu = net.means(b.states);
  const auto sd = net.stds(b.states);
  const std::size_t ad = spec.action_dim;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < spec.num_agents; ++i) {
      for (std::size_t d = 0; d < ad; ++d) {
        const double x = mu[i](r, d) + sd[i](r, d) * rng.normal();
        b.sampled_actions(r, ad * i + d) = x;
        b.joint_actions(r, ad * i + d) = std::clamp(x, -1.0, 1.0);
      }
    }
  }
  return b;
}

inline double mean_std(const ctedd::GlobalPolicyNet& net, const ctedd::Mat& states) {
  double total = 0.0;
  std::size_t n = 0;
  for (const ctedd::Mat& sd : net.stds(states)) {
    total += ctedd::sum(sd);
    n += sd.size();
  }
  return total / static_cast<double>(n);
}

struct DpgRun {
  int steps = 0;
  double max_error = 0.0;
};

// Adam on theta against Q = -|a - a*|^2 until every mean is within tol.
inline DpgRun dpg_to_fixed_point(std::uint64_t seed, int max_steps = 2000, double tol = 1e-3) {
  const ctedd::EnvSpec spec = ctedd::EnvSpec::make(ctedd::EnvId::kCnV1);
  ctedd::Rng rng(seed);
  ctedd::GlobalPolicyNet net({spec.state_dim(), spec.num_agents, spec.action_dim}, rng);
  const std::vector<double> target{0.3, -0.5, 0.7, 0.1, -0.2, -0.8};
  const QuadraticCritic critic(target);
  const ctedd::Mat states = random_states(spec, 32, rng);
  const ctedd::OptimizerSettings opt{0.005, 0.0, {}};
  DpgRun run;
  run.max_error = 1.0;
  while (run.steps < max_steps && run.max_error >= tol) {
    ctedd::dpg_update(net, critic, states, opt);
    ++run.steps;
    const ctedd::Mat mu = ctedd::join_actions(net.means(states));
    run.max_error = 0.0;
    for (std::size_t r = 0; r < mu.rows(); ++r) {
      for (std::size_t c = 0; c < mu.cols(); ++c) run.max_error = std::max(run.max_error, std::fabs(mu(r, c) - target[c]));
    }
  }
  return run;
}

// Mean std after each of `updates` exploration steps on a fixed batch.
// positive: zero advantage with alpha = 10. negative: advantage <= 0
// everywhere with alpha = 0.
inline std::vector<double> std_trajectory(std::uint64_t seed, bool positive, int updates = 100) {
  const ctedd::EnvSpec spec = ctedd::EnvSpec::make(ctedd::EnvId::kCnV1);
  ctedd::Rng rng(seed);
  ctedd::GlobalPolicyNet net({spec.state_dim(), spec.num_agents, spec.action_dim}, rng);
  const ctedd::Batch b = on_policy_batch(spec, net, positive ? 32 : 256, rng);
  const ConstantCritic flat;
  const PeakAtMeanCritic peak(net);
  const ctedd::ActionCritic& critic = positive ? static_cast<const ctedd::ActionCritic&>(flat) : peak;
  // small enough that no std reaches the upper clamp within 100 steps
  const ctedd::OptimizerSettings opt{1e-4, 0.0, {}};
  std::vector<double> out{mean_std(net, b.states)};
  for (int k = 0; k < updates; ++k) {
    ctedd::exploration_update(net, critic, b, positive ? 10.0 : 0.0, opt);
    out.push_back(mean_std(net, b.states));
  }
  return out;
}

struct ToyMdpRun {
  std::vector<std::vector<double>> learned;  // [state][action]
  std::vector<std::vector<double>> optimal;
  double max_error = 0.0;
};

// Three one-hot states, one-dimensional joint action in {-1, +1}, greedy
// target actions under the target critic.
inline ToyMdpRun toy_mdp(std::uint64_t seed, int iterations = 6000) {
  const std::vector<std::vector<int>> next{{0, 1}, {0, 2}, {1, 2}};
  const std::vector<std::vector<double>> reward{{0.0, 0.0}, {0.0, 1.0}, {0.2, 0.5}};
  const double gamma = 0.5;

  ctedd::Rng init(seed);
  ctedd::CentralQNet q({3, 1, ctedd::kHiddenUnits}, init);
  ctedd::ParamStore target = q.params();

  ctedd::Batch b;
  b.states = ctedd::Mat(6, 3);
  b.next_states = ctedd::Mat(6, 3);
  b.joint_actions = ctedd::Mat(6, 1);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      const std::size_t r = 2 * s + a;
      b.states(r, s) = 1.0;
      b.next_states(r, static_cast<std::size_t>(next[s][a])) = 1.0;
      b.joint_actions(r, 0) = a == 0 ? -1.0 : 1.0;
      b.rewards.push_back(reward[s][a]);
      b.dones.push_back(0.0);
      b.t_global.push_back(r);
    }
  }
  b.sampled_actions = b.joint_actions;

  const ctedd::TargetActionFn greedy = [&](const ctedd::Mat& s) {
    ctedd::Mat lo(s.rows(), 1), hi(s.rows(), 1);
    lo.fill(-1.0);
    hi.fill(1.0);
    const ctedd::Mat ql = q.value_with(target, s, lo);
    const ctedd::Mat qh = q.value_with(target, s, hi);
    ctedd::Mat best(s.rows(), 1);
    for (std::size_t r = 0; r < s.rows(); ++r) best(r, 0) = qh(r, 0) > ql(r, 0) ? 1.0 : -1.0;
    return best;
  };
  const ctedd::OptimizerSettings opt{1e-3, 0.0, {}};
  for (int k = 0; k < iterations; ++k) {
    ctedd::q_update(q, target, greedy, b, {gamma, false}, opt);
    ctedd::soft_update(target, q.params(), 0.05);
  }

  ToyMdpRun run;
  run.optimal = oracle::value_iteration(next, reward, gamma);
  const ctedd::Mat v = q.value(b.states, b.joint_actions);
  run.learned.assign(3, std::vector<double>(2));
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      run.learned[s][a] = v(2 * s + a, 0);
      run.max_error = std::max(run.max_error, std::fabs(run.learned[s][a] - run.optimal[s][a]));
    }
  }
  return run;
}

}  // namespace testing_support
