#pragma once

#include <cstdint>
#include <vector>

#include "ctedd/particle_world.hpp"
#include "ctedd/policy_networks.hpp"
#include "ctedd/replay_buffer.hpp"

namespace ctedd {

struct DistillConfig {
  std::size_t batch = 1024;
  std::size_t repetitions_per_batch = 4;
  double lr = 0.005;
  std::size_t msg_dim = 1;
  double grad_clip = 0.0;  // <= 0 disables clipping
  // Tail of the buffer kept out of training and used for fidelity.
  double holdout_fraction = 0.1;

  void validate() const;
};

struct DistillBatch {
  Mat states;
  std::vector<Mat> teacher_targets;  // per agent, rows x action_dim
  std::vector<std::uint64_t> t_global;
};

// Consecutive, non-overlapping windows of stored states in t_global order
// over chronological indices [begin, end). The last window may be short.
class ChronologicalBatcher {
 public:
  ChronologicalBatcher(const ReplayBuffer& buffer, const GlobalPolicyNet& teacher, std::size_t batch_size);
  ChronologicalBatcher(const ReplayBuffer& buffer, const GlobalPolicyNet& teacher, std::size_t batch_size,
                       std::size_t begin, std::size_t end);

  std::size_t batch_count() const;
  bool next(DistillBatch& out);

 private:
  const ReplayBuffer& buffer_;
  const GlobalPolicyNet& teacher_;
  std::size_t batch_size_;
  std::size_t begin_;
  std::size_t end_;
  std::size_t cursor_;
};

DistillBatch make_distill_batch(const ReplayBuffer& buffer, const GlobalPolicyNet& teacher, std::size_t begin,
                                std::size_t end);

// (1/|B|) sum_B sum_i ||mu_i(s) - a_hat_i(o_i(s), messages)||^2
double distill_loss(const LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch);
// Accumulates d(distill_loss)/d(params) and returns the loss.
double distill_gradient(LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch);
// One clipped Adam step on the batch; returns the loss before the step.
double distill_step(LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch,
                    const DistillConfig& config);

struct DistillTracePoint {
  std::size_t batch_index = 0;
  std::uint64_t t_global_max = 0;
  double loss = 0.0;  // on arrival, before the batch's first step
};

struct DistillResult {
  std::vector<DistillTracePoint> trace;
  std::size_t train_samples = 0;
  std::size_t holdout_begin = 0;  // chronological index of the first held-out sample
};

// One chronological pass over the non-held-out part of the buffer with
// repetitions_per_batch steps per window. Never touches a simulator.
DistillResult distill_train(LocalCommPolicyNet& students, const GlobalPolicyNet& teacher, const EnvSpec& spec,
                            const ReplayBuffer& buffer, const DistillConfig& config);

std::size_t holdout_begin(std::size_t buffer_size, double holdout_fraction);

struct FidelityReport {
  std::vector<double> mse;     // per agent, mean over probes of ||mu_i - a_hat_i||^2 / action_dim
  std::vector<double> cosine;  // per agent, mean per-probe cosine similarity
  double loss = 0.0;           // distill_loss on the probes
  std::size_t probes = 0;
};

FidelityReport fidelity_report(const LocalCommPolicyNet& students, const GlobalPolicyNet& teacher, const EnvSpec& spec,
                               const Mat& probe_states);

}  // namespace ctedd
