#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctedd/mat.hpp"
#include "ctedd/mlp.hpp"
#include "ctedd/param_store.hpp"

namespace ctedd {

class Rng;

inline constexpr std::size_t kHiddenUnits = 64;

// Scalar team critic plus its gradient with respect to the joint action.
// Joint actions are laid out agent-major: (a_0x, a_0y, a_1x, ...).
class ActionCritic {
 public:
  virtual ~ActionCritic() = default;
  virtual Mat value(const Mat& states, const Mat& joint_actions) const = 0;  // rows x 1
  // d(sum of rows of Q)/d(joint_actions), same shape as joint_actions.
  virtual Mat action_gradient(const Mat& states, const Mat& joint_actions) const = 0;
};

// Global mixed policy: a shared relu trunk over the full state, then for
// every agent a deterministic head (relu -> tanh) and a standard-deviation
// head (relu -> bounded softplus). Trunk and deterministic heads form the
// theta store; standard-deviation heads form the omega store.
class GlobalPolicyNet {
 public:
  struct Dims {
    std::size_t state_dim = 0;
    std::size_t num_agents = 0;
    std::size_t action_dim = 2;
    std::size_t hidden = kHiddenUnits;
  };

  struct Pass {
    MlpOutput trunk;
    std::vector<MlpOutput> mean;  // per agent, rows x action_dim
    std::vector<MlpOutput> std;   // empty when not requested
  };

  GlobalPolicyNet(Dims dims, Rng& rng);
  // Adopts existing stores (checkpoint load); structure is validated.
  GlobalPolicyNet(Dims dims, ParamStore theta, ParamStore omega);

  const Dims& dims() const { return dims_; }
  ParamStore& theta() { return theta_; }
  const ParamStore& theta() const { return theta_; }
  ParamStore& omega() { return omega_; }
  const ParamStore& omega() const { return omega_; }

  LayerStack trunk_layers() const;
  LayerStack mean_head_layers(std::size_t agent) const;
  LayerStack std_head_layers(std::size_t agent) const;

  Pass forward(const Mat& states, bool with_std = true) const;

  // Per-agent means computed with an arbitrary theta store (online or target).
  std::vector<Mat> means_with(const ParamStore& theta, const Mat& states) const;
  std::vector<Mat> means(const Mat& states) const { return means_with(theta_, states); }
  std::vector<Mat> stds(const Mat& states) const;

  // Accumulate into theta grads (mean heads and trunk).
  void backward_mean(const Pass& pass, std::span<const Mat> d_mean);
  // Accumulate into omega grads only; the trunk receives nothing.
  void backward_std(const Pass& pass, std::span<const Mat> d_std);

  // theta and omega merged into one store, for checkpoints.
  ParamStore merged() const;
  static GlobalPolicyNet from_merged(Dims dims, const ParamStore& merged);

 private:
  Dims dims_;
  ParamStore theta_;
  ParamStore omega_;
};

// Centralized Q-network over (full state ++ joint action), two relu hidden
// layers and a linear scalar output.
class CentralQNet {
 public:
  struct Dims {
    std::size_t state_dim = 0;
    std::size_t joint_action_dim = 0;
    std::size_t hidden = kHiddenUnits;
  };

  CentralQNet(Dims dims, Rng& rng);
  CentralQNet(Dims dims, ParamStore params);

  const Dims& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.state_dim + dims_.joint_action_dim; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  LayerStack layers() const;

  Mat input(const Mat& states, const Mat& joint_actions) const;
  MlpOutput forward(const Mat& states, const Mat& joint_actions) const;
  Mat value_with(const ParamStore& params, const Mat& states, const Mat& joint_actions) const;
  Mat value(const Mat& states, const Mat& joint_actions) const { return value_with(params_, states, joint_actions); }
  // Gradient of sum(Q) with respect to the joint action, using the given store.
  Mat action_gradient_with(const ParamStore& params, const Mat& states, const Mat& joint_actions) const;

 private:
  Dims dims_;
  ParamStore params_;
};

// ActionCritic view over a Q-network's online parameters.
class QNetCritic final : public ActionCritic {
 public:
  explicit QNetCritic(const CentralQNet& net) : net_(net) {}
  Mat value(const Mat& states, const Mat& joint_actions) const override { return net_.value(states, joint_actions); }
  Mat action_gradient(const Mat& states, const Mat& joint_actions) const override {
    return net_.action_gradient_with(net_.params(), states, joint_actions);
  }

 private:
  const CentralQNet& net_;
};

// Local communicating policies. Agent i's part 1 maps its observation to a
// message (relu -> tanh, msg_dim outputs); part 2 maps its observation plus
// the messages of every other agent (in agent order) to an action
// (relu -> tanh). msg_dim may be 0, which removes part 1.
class LocalCommPolicyNet {
 public:
  struct Dims {
    std::size_t num_agents = 0;
    std::size_t obs_dim = 0;
    std::size_t msg_dim = 1;
    std::size_t action_dim = 2;
    std::size_t hidden = kHiddenUnits;
  };

  struct Pass {
    std::vector<MlpOutput> message;  // per agent; empty when msg_dim == 0
    std::vector<MlpOutput> action;   // per agent
    std::vector<Mat> messages;
    std::vector<Mat> actions;
  };

  LocalCommPolicyNet(Dims dims, Rng& rng);
  LocalCommPolicyNet(Dims dims, ParamStore params);

  const Dims& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t action_input_dim() const { return dims_.obs_dim + (dims_.num_agents - 1) * dims_.msg_dim; }

  LayerStack message_layers(std::size_t agent) const;
  LayerStack action_layers(std::size_t agent) const;

  // Closed-form parameter count for the layout above.
  static std::size_t expected_parameter_count(const Dims& dims);

  // All part-1 messages are produced first; each part 2 then consumes its
  // own observation and the others' messages.
  Pass forward_with(const ParamStore& params, std::span<const Mat> observations) const;
  Pass forward(std::span<const Mat> observations) const { return forward_with(params_, observations); }
  std::vector<Mat> actions_with(const ParamStore& params, std::span<const Mat> observations) const {
    return forward_with(params, observations).actions;
  }

  // Backpropagates per-agent action gradients through part 2, across the
  // message channel, and into part 1.
  void backward(const Pass& pass, std::span<const Mat> d_actions);

 private:
  Dims dims_;
  ParamStore params_;
};

// Joint action matrix from per-agent blocks.
Mat join_actions(std::span<const Mat> per_agent);
// Splits a joint action matrix into per-agent blocks.
std::vector<Mat> split_actions(const Mat& joint, std::size_t num_agents);

}  // namespace ctedd
