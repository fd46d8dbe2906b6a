#include "ctedd/policy_networks.hpp"

#include <stdexcept>

#include "ctedd/rng.hpp"

namespace ctedd {

namespace {

std::string agent_prefix(const char* kind, std::size_t agent) { return kind + std::to_string(agent); }

ParamStore select_prefixed(const ParamStore& source, const std::vector<std::string>& prefixes) {
  ParamStore out;
  for (const auto& e : source.entries()) {
    for (const auto& p : prefixes) {
      if (e.name.rfind(p, 0) == 0) {
        out.add(e.name, e.value);
        break;
      }
    }
  }
  return out;
}

void require_rows(const Mat& m, std::size_t cols, const char* what) {
  if (m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected width " + std::to_string(cols) + ", got " +
                         m.shape_string());
  }
}

}  // namespace

Mat join_actions(std::span<const Mat> per_agent) { return hconcat(per_agent); }

std::vector<Mat> split_actions(const Mat& joint, std::size_t num_agents) {
  if (num_agents == 0 || joint.cols() % num_agents != 0) {
    throw DimensionError("split_actions: width " + std::to_string(joint.cols()) + " not divisible by agents");
  }
  const std::size_t a = joint.cols() / num_agents;
  std::vector<Mat> out;
  out.reserve(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) out.push_back(slice_cols(joint, i * a, a));
  return out;
}

// ---------------------------------------------------------------------------
// GlobalPolicyNet

GlobalPolicyNet::GlobalPolicyNet(Dims dims, Rng& rng) : dims_(dims) {
  const std::size_t h = dims_.hidden;
  init_mlp(theta_, trunk_layers(), {dims_.state_dim, h}, rng);
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    init_mlp(theta_, mean_head_layers(i), {h, h, dims_.action_dim}, rng);
  }
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    init_mlp(omega_, std_head_layers(i), {h, h, dims_.action_dim}, rng);
  }
}

GlobalPolicyNet::GlobalPolicyNet(Dims dims, ParamStore theta, ParamStore omega)
    : dims_(dims), theta_(std::move(theta)), omega_(std::move(omega)) {
  Rng scratch(0);
  GlobalPolicyNet reference(dims_, scratch);
  if (!theta_.same_structure(reference.theta_) || !omega_.same_structure(reference.omega_)) {
    throw StructureError("GlobalPolicyNet: parameter layout does not match dimensions");
  }
}

LayerStack GlobalPolicyNet::trunk_layers() const { return {{"trunk", Activation::kRelu}}; }

LayerStack GlobalPolicyNet::mean_head_layers(std::size_t agent) const {
  const std::string p = agent_prefix("det", agent);
  return {{p + ".hidden", Activation::kRelu}, {p + ".out", Activation::kTanh}};
}

LayerStack GlobalPolicyNet::std_head_layers(std::size_t agent) const {
  const std::string p = agent_prefix("std", agent);
  return {{p + ".hidden", Activation::kRelu}, {p + ".out", Activation::kBoundedSoftplus}};
}

GlobalPolicyNet::Pass GlobalPolicyNet::forward(const Mat& states, bool with_std) const {
  require_rows(states, dims_.state_dim, "GlobalPolicyNet::forward");
  Pass pass;
  pass.trunk = forward_mlp(theta_, trunk_layers(), states);
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    pass.mean.push_back(forward_mlp(theta_, mean_head_layers(i), pass.trunk.y));
  }
  if (with_std) {
    for (std::size_t i = 0; i < dims_.num_agents; ++i) {
      pass.std.push_back(forward_mlp(omega_, std_head_layers(i), pass.trunk.y));
    }
  }
  return pass;
}

std::vector<Mat> GlobalPolicyNet::means_with(const ParamStore& theta, const Mat& states) const {
  require_rows(states, dims_.state_dim, "GlobalPolicyNet::means");
  const Mat trunk = evaluate_mlp(theta, trunk_layers(), states);
  std::vector<Mat> out;
  out.reserve(dims_.num_agents);
  for (std::size_t i = 0; i < dims_.num_agents; ++i) out.push_back(evaluate_mlp(theta, mean_head_layers(i), trunk));
  return out;
}

std::vector<Mat> GlobalPolicyNet::stds(const Mat& states) const {
  require_rows(states, dims_.state_dim, "GlobalPolicyNet::stds");
  const Mat trunk = evaluate_mlp(theta_, trunk_layers(), states);
  std::vector<Mat> out;
  out.reserve(dims_.num_agents);
  for (std::size_t i = 0; i < dims_.num_agents; ++i) out.push_back(evaluate_mlp(omega_, std_head_layers(i), trunk));
  return out;
}

void GlobalPolicyNet::backward_mean(const Pass& pass, std::span<const Mat> d_mean) {
  if (d_mean.size() != dims_.num_agents || pass.mean.size() != dims_.num_agents) {
    throw StructureError("backward_mean: one gradient block per agent required");
  }
  Mat d_trunk(pass.trunk.y.rows(), pass.trunk.y.cols());
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    add_inplace(d_trunk, backward(pass.mean[i].tape, d_mean[i], theta_));
  }
  backward(pass.trunk.tape, d_trunk, theta_);
}

void GlobalPolicyNet::backward_std(const Pass& pass, std::span<const Mat> d_std) {
  if (d_std.size() != dims_.num_agents || pass.std.size() != dims_.num_agents) {
    throw StructureError("backward_std: forward pass lacks std heads or gradient count mismatch");
  }
  for (std::size_t i = 0; i < dims_.num_agents; ++i) backward(pass.std[i].tape, d_std[i], omega_);
}

ParamStore GlobalPolicyNet::merged() const {
  ParamStore out;
  for (const auto& e : theta_.entries()) out.add(e.name, e.value);
  for (const auto& e : omega_.entries()) out.add(e.name, e.value);
  return out;
}

GlobalPolicyNet GlobalPolicyNet::from_merged(Dims dims, const ParamStore& merged) {
  return GlobalPolicyNet(dims, select_prefixed(merged, {"trunk.", "det"}), select_prefixed(merged, {"std"}));
}

// ---------------------------------------------------------------------------
// CentralQNet

CentralQNet::CentralQNet(Dims dims, Rng& rng) : dims_(dims) {
  const std::size_t h = dims_.hidden;
  init_mlp(params_, layers(), {input_dim(), h, h, 1}, rng);
}

CentralQNet::CentralQNet(Dims dims, ParamStore params) : dims_(dims), params_(std::move(params)) {
  Rng scratch(0);
  CentralQNet reference(dims_, scratch);
  if (!params_.same_structure(reference.params_)) {
    throw StructureError("CentralQNet: parameter layout does not match dimensions");
  }
}

LayerStack CentralQNet::layers() const {
  return {{"q.h1", Activation::kRelu}, {"q.h2", Activation::kRelu}, {"q.out", Activation::kLinear}};
}

Mat CentralQNet::input(const Mat& states, const Mat& joint_actions) const {
  require_rows(states, dims_.state_dim, "CentralQNet state");
  require_rows(joint_actions, dims_.joint_action_dim, "CentralQNet joint action");
  const Mat parts[] = {states, joint_actions};
  return hconcat(parts);
}

MlpOutput CentralQNet::forward(const Mat& states, const Mat& joint_actions) const {
  return forward_mlp(params_, layers(), input(states, joint_actions));
}

Mat CentralQNet::value_with(const ParamStore& params, const Mat& states, const Mat& joint_actions) const {
  return evaluate_mlp(params, layers(), input(states, joint_actions));
}

Mat CentralQNet::action_gradient_with(const ParamStore& params, const Mat& states, const Mat& joint_actions) const {
  const MlpOutput out = forward_mlp(params, layers(), input(states, joint_actions));
  const Mat d_input = backward_input(out.tape, Mat(out.y.rows(), 1, 1.0), params);
  return slice_cols(d_input, dims_.state_dim, dims_.joint_action_dim);
}

// ---------------------------------------------------------------------------
// LocalCommPolicyNet

LocalCommPolicyNet::LocalCommPolicyNet(Dims dims, Rng& rng) : dims_(dims) {
  if (dims_.num_agents == 0) throw std::invalid_argument("LocalCommPolicyNet: need at least one agent");
  const std::size_t h = dims_.hidden;
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    if (dims_.msg_dim > 0) init_mlp(params_, message_layers(i), {dims_.obs_dim, h, dims_.msg_dim}, rng);
    init_mlp(params_, action_layers(i), {action_input_dim(), h, dims_.action_dim}, rng);
  }
}

LocalCommPolicyNet::LocalCommPolicyNet(Dims dims, ParamStore params) : dims_(dims), params_(std::move(params)) {
  Rng scratch(0);
  LocalCommPolicyNet reference(dims_, scratch);
  if (!params_.same_structure(reference.params_)) {
    throw StructureError("LocalCommPolicyNet: parameter layout does not match dimensions");
  }
}

LayerStack LocalCommPolicyNet::message_layers(std::size_t agent) const {
  const std::string p = agent_prefix("agent", agent) + ".msg";
  return {{p + ".hidden", Activation::kRelu}, {p + ".out", Activation::kTanh}};
}

LayerStack LocalCommPolicyNet::action_layers(std::size_t agent) const {
  const std::string p = agent_prefix("agent", agent) + ".act";
  return {{p + ".hidden", Activation::kRelu}, {p + ".out", Activation::kTanh}};
}

std::size_t LocalCommPolicyNet::expected_parameter_count(const Dims& d) {
  const std::size_t part1 = d.msg_dim == 0 ? 0 : d.obs_dim * d.hidden + d.hidden + d.hidden * d.msg_dim + d.msg_dim;
  const std::size_t part2_in = d.obs_dim + (d.num_agents - 1) * d.msg_dim;
  const std::size_t part2 = part2_in * d.hidden + d.hidden + d.hidden * d.action_dim + d.action_dim;
  return d.num_agents * (part1 + part2);
}

LocalCommPolicyNet::Pass LocalCommPolicyNet::forward_with(const ParamStore& params,
                                                          std::span<const Mat> observations) const {
  if (observations.size() != dims_.num_agents) {
    throw DimensionError("LocalCommPolicyNet: expected " + std::to_string(dims_.num_agents) + " observations");
  }
  for (const Mat& o : observations) require_rows(o, dims_.obs_dim, "LocalCommPolicyNet observation");

  Pass pass;
  const std::size_t rows = observations.front().rows();
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    if (dims_.msg_dim > 0) {
      pass.message.push_back(forward_mlp(params, message_layers(i), observations[i]));
      pass.messages.push_back(pass.message.back().y);
    } else {
      pass.messages.emplace_back(rows, 0);
    }
  }
  for (std::size_t i = 0; i < dims_.num_agents; ++i) {
    std::vector<Mat> parts;
    parts.reserve(dims_.num_agents);
    parts.push_back(observations[i]);
    if (dims_.msg_dim > 0) {
      for (std::size_t j = 0; j < dims_.num_agents; ++j) {
        if (j != i) parts.push_back(pass.messages[j]);
      }
    }
    pass.action.push_back(forward_mlp(params, action_layers(i), hconcat(parts)));
    pass.actions.push_back(pass.action.back().y);
  }
  return pass;
}

void LocalCommPolicyNet::backward(const Pass& pass, std::span<const Mat> d_actions) {
  const std::size_t n = dims_.num_agents;
  const std::size_t c = dims_.msg_dim;
  if (d_actions.size() != n || pass.action.size() != n) {
    throw StructureError("LocalCommPolicyNet::backward: one gradient block per agent required");
  }
  const std::size_t rows = d_actions.front().rows();
  std::vector<Mat> d_messages(n, Mat(rows, c));
  for (std::size_t i = 0; i < n; ++i) {
    const Mat d_input = ctedd::backward(pass.action[i].tape, d_actions[i], params_);
    if (c == 0) continue;
    std::size_t at = dims_.obs_dim;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      add_inplace(d_messages[j], slice_cols(d_input, at, c));
      at += c;
    }
  }
  if (c == 0) return;
  for (std::size_t j = 0; j < n; ++j) ctedd::backward(pass.message[j].tape, d_messages[j], params_);
}

}  // namespace ctedd
