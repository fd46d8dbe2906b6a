#include <benchmark/benchmark.h>

#include <string>

#include "ctedd/mlp.hpp"
#include "ctedd/particle_world.hpp"
#include "ctedd/policy_networks.hpp"
#include "ctedd/rng.hpp"
#include "ctedd/training.hpp"

using namespace ctedd;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1, 1);
  return m;
}

const LayerStack kQLayers{{"h1", Activation::kRelu}, {"h2", Activation::kRelu}, {"out", Activation::kLinear}};

void BM_MlpForward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  ParamStore p;
  init_mlp(p, kQLayers, {24, 64, 64, 1}, rng);
  const Mat x = random_mat(rows, 24, rng);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_mlp(p, kQLayers, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(128)->Arg(1024);

void BM_MlpForwardBackward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  ParamStore p;
  init_mlp(p, kQLayers, {24, 64, 64, 1}, rng);
  const Mat x = random_mat(rows, 24, rng);
  Mat dy(rows, 1);
  dy.fill(1.0);
  for (auto _ : state) {
    p.zero_grad();
    const MlpOutput out = forward_mlp(p, kQLayers, x);
    benchmark::DoNotOptimize(backward(out.tape, dy, p));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(128)->Arg(1024);

void BM_EnvStep(benchmark::State& state) {
  const auto id = static_cast<EnvId>(state.range(0));
  const EnvSpec spec = EnvSpec::make(id);
  Environment env(spec, Rng(3));
  Rng rng(4);
  std::vector<Vec2> actions(spec.num_agents);
  for (auto _ : state) {
    for (auto& a : actions) a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (env.step(actions).done) env.reset();
  }
  state.SetLabel(std::string(env_id_name(id)));
}
BENCHMARK(BM_EnvStep)
    ->Arg(static_cast<int>(EnvId::kCnV1))
    ->Arg(static_cast<int>(EnvId::kCnV2))
    ->Arg(static_cast<int>(EnvId::kPf))
    ->Arg(static_cast<int>(EnvId::kPp));

void BM_QUpdate(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const EnvSpec spec = EnvSpec::make(EnvId::kCnV1);
  Rng rng(5);
  CentralQNet q({spec.state_dim(), spec.joint_action_dim()}, rng);
  const ParamStore target = q.params();
  Batch b;
  b.states = random_mat(rows, spec.state_dim(), rng);
  b.next_states = random_mat(rows, spec.state_dim(), rng);
  b.joint_actions = random_mat(rows, spec.joint_action_dim(), rng);
  b.sampled_actions = b.joint_actions;
  b.rewards.assign(rows, -1.0);
  b.dones.assign(rows, 0.0);
  b.t_global.assign(rows, 0);
  const Mat next_actions = random_mat(rows, spec.joint_action_dim(), rng);
  const TargetActionFn fn = [&](const Mat&) { return next_actions; };
  const OptimizerSettings opt{1e-4, 0.5, {}};
  for (auto _ : state) benchmark::DoNotOptimize(q_update(q, target, fn, b, {0.95, false}, opt));
}
BENCHMARK(BM_QUpdate)->Arg(1024);

void BM_CteddLearnerSteps(benchmark::State& state) {
  const EnvSpec spec = EnvSpec::make(EnvId::kCnV1);
  TrainConfig cfg;
  cfg.batch = 256;
  for (auto _ : state) {
    CteddLearner l(spec, cfg, 7);
    l.advance(1000);
    benchmark::DoNotOptimize(l.stats().learn_iterations);
  }
}
BENCHMARK(BM_CteddLearnerSteps)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
