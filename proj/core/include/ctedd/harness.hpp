#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctedd/config.hpp"
#include "ctedd/distillation.hpp"
#include "ctedd/gradcheck.hpp"
#include "ctedd/particle_world.hpp"
#include "ctedd/policy_networks.hpp"
#include "ctedd/rng.hpp"
#include "ctedd/svg_plot.hpp"
#include "ctedd/training.hpp"

namespace ctedd {

// Joint action for one state. The Rng is the episode's action stream;
// deterministic policies ignore it.
using JointPolicyFn = std::function<std::vector<Vec2>(const WorldState&, Rng&)>;

struct EvalResult {
  double mean_return = 0.0;
  double ci95 = 0.0;  // 1.96 * sample std / sqrt(n); NaN for n < 2
  std::vector<double> returns;
};

EvalResult summarize_returns(std::vector<double> returns);

// Stream every evaluation of a given seed draws its episodes from.
Rng evaluation_stream(std::uint64_t seed);

// Runs `episodes` undiscounted episodes on fresh environments. Episode e
// uses base.split(e); results are reduced in episode order, so the outcome
// does not depend on `threads`. The policy must be safe to call
// concurrently when threads > 1.
EvalResult evaluate_policy(const EnvSpec& spec, const JointPolicyFn& policy, std::size_t episodes, const Rng& base,
                           std::size_t threads = 1);

JointPolicyFn random_policy(const EnvSpec& spec);
JointPolicyFn zero_policy(const EnvSpec& spec);
// Deterministic heads only.
JointPolicyFn global_policy_fn(const GlobalPolicyNet& net, const EnvSpec& spec);
JointPolicyFn local_policy_fn(const LocalCommPolicyNet& net, const EnvSpec& spec);

struct TrainArtifacts {
  std::filesystem::path dir;
  std::filesystem::path policy;
  std::filesystem::path critic;
  std::filesystem::path buffer;
  std::filesystem::path metrics;
  std::vector<MetricsRow> rows;
  LearnerStats stats;
};

// Sampling/learning loop with an evaluation row every eval_every steps,
// then persists the policy, critic, replay buffer and metrics under
// config.output_dir. A failed write removes what this run already wrote.
TrainArtifacts run_train(const ExperimentConfig& config, std::ostream* log = nullptr);

struct DistillRequest {
  std::filesystem::path buffer;
  std::filesystem::path teacher;
  std::size_t msg_dim = 1;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;  // empty: <teacher dir>/distill_c<msg_dim>
  DistillConfig config;
  std::size_t eval_episodes = 0;  // > 0 also evaluates teacher and student
  std::size_t eval_threads = 1;
};

struct DistillArtifacts {
  std::filesystem::path dir;
  std::filesystem::path student;
  std::filesystem::path trace;
  std::filesystem::path fidelity;
  DistillResult result;
  FidelityReport report;  // on the held-out tail
  std::optional<EvalResult> teacher_eval;
  std::optional<EvalResult> student_eval;
};

// Throws InputError for missing files or artifacts that disagree on
// environment or dimensions.
DistillArtifacts run_distill(const DistillRequest& request, std::ostream* log = nullptr);

EvalResult run_eval(const std::filesystem::path& policy_path, EnvId env, std::size_t episodes, std::uint64_t seed,
                    std::size_t threads = 1);

struct GradcheckOptions {
  double h = 1e-6;
  std::size_t batch = 3;
  double tolerance = 1e-4;
  bool inject_fault = false;  // doubles the analytic gradient of the entry with the largest one
  std::uint64_t seed = 0;
};

struct GradcheckCase {
  std::string name;
  GradCheckReport report;
};

std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& options);

}  // namespace ctedd
