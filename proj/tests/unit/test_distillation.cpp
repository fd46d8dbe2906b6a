#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ctedd/distillation.hpp"
#include "ctedd/particle_world.hpp"
#include "ctedd/policy_networks.hpp"
#include "ctedd/replay_buffer.hpp"
#include "ctedd/rng.hpp"
#include "ctedd/training.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ctedd;

namespace {

const EnvSpec kCn = EnvSpec::make(EnvId::kCnV1);

ReplayBuffer state_buffer(std::size_t n, std::uint64_t seed) {
  ReplayBuffer buf(n);
  Rng rng(seed);
  for (std::size_t t = 0; t < n; ++t) {
    Transition tr;
    tr.state = full_state_vector(kCn, testing_support::random_state(kCn, rng));
    tr.next_state = tr.state;
    tr.joint_action.assign(kCn.joint_action_dim(), 0.0);
    // gaps in t_global are allowed; only order matters
    tr.t_global = 3 * t + 1;
    buf.push(std::move(tr));
  }
  return buf;
}

GlobalPolicyNet teacher(std::uint64_t seed) {
  Rng rng(seed);
  return GlobalPolicyNet({kCn.state_dim(), kCn.num_agents, 2}, rng);
}

LocalCommPolicyNet student(std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return LocalCommPolicyNet({kCn.num_agents, kCn.obs_dim(), c, 2}, rng);
}

// Teacher whose deterministic heads output tanh(bias) everywhere.
GlobalPolicyNet constant_teacher(const std::vector<double>& bias) {
  GlobalPolicyNet t = teacher(1);
  for (std::size_t i = 0; i < kCn.num_agents; ++i) {
    const std::string p = "det" + std::to_string(i) + ".out";
    t.theta().value(p + ".W").fill(0.0);
    Mat& b = t.theta().value(p + ".b");
    b(0, 0) = bias[2 * i];
    b(0, 1) = bias[2 * i + 1];
  }
  return t;
}

std::vector<std::vector<std::vector<double>>> nested(const std::vector<Mat>& per_agent) {
  std::vector<std::vector<std::vector<double>>> out;
  for (const Mat& m : per_agent) {
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
    out.push_back(std::move(rows));
  }
  return out;
}

Mat tail_states(const ReplayBuffer& buf, std::size_t begin) {
  return make_distill_batch(buf, teacher(1), begin, buf.size()).states;
}

}  // namespace

TEST(ChronologicalBatches, SizesForThreeThousand) {
  const ReplayBuffer buf = state_buffer(3000, 1);
  const GlobalPolicyNet t = teacher(2);
  ChronologicalBatcher batcher(buf, t, 1024);
  EXPECT_EQ(batcher.batch_count(), 3u);
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> all;
  DistillBatch b;
  while (batcher.next(b)) {
    sizes.push_back(b.states.rows());
    all.insert(all.end(), b.t_global.begin(), b.t_global.end());
    const auto mu = t.means(b.states);
    for (std::size_t i = 0; i < kCn.num_agents; ++i) {
      for (std::size_t k = 0; k < mu[i].size(); ++k) {
        EXPECT_NEAR(b.teacher_targets[i].data()[k], mu[i].data()[k], 1e-15);
      }
    }
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{1024, 1024, 952}));
  EXPECT_EQ(all.size(), 3000u);
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
}

TEST(ChronologicalBatches, FollowsEvictionOrder) {
  ReplayBuffer buf = state_buffer(10, 3);
  Transition extra = buf.chronological(0);
  extra.t_global = 1000;
  buf.push(extra);
  const GlobalPolicyNet t = teacher(4);
  ChronologicalBatcher batcher(buf, t, 4);
  DistillBatch b;
  std::uint64_t last = 0;
  while (batcher.next(b)) last = b.t_global.back();
  EXPECT_EQ(last, 1000u);
}

TEST(ChronologicalBatches, EmptyBufferThrows) {
  const ReplayBuffer empty(5);
  const GlobalPolicyNet t = teacher(5);
  EXPECT_THROW(ChronologicalBatcher(empty, t, 16), std::invalid_argument);
}

TEST(DistillLoss, ZeroForPerfectStudent) {
  const GlobalPolicyNet t = constant_teacher({0, 0, 0, 0, 0, 0});
  LocalCommPolicyNet s = student(1, 6);
  for (auto& e : s.params().entries()) e.value.fill(0.0);
  const ReplayBuffer buf = state_buffer(20, 7);
  EXPECT_EQ(distill_loss(s, kCn, make_distill_batch(buf, t, 0, 20)), 0.0);
}

TEST(DistillLoss, SingleSampleExample) {
  const ReplayBuffer buf = state_buffer(1, 8);
  DistillBatch b;
  b.states = make_distill_batch(buf, teacher(1), 0, 1).states;
  LocalCommPolicyNet s = student(1, 9);
  for (auto& e : s.params().entries()) e.value.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) b.teacher_targets.push_back(Mat::from_rows({{0.1, 0.0}}));
  b.t_global = {1};
  EXPECT_NEAR(distill_loss(s, kCn, b), 0.03, 1e-15);
}

TEST(DistillLoss, MatchesOracle) {
  for (std::size_t c : {1u, 3u}) {
    const GlobalPolicyNet t = teacher(10 + c);
    const LocalCommPolicyNet s = student(c, 20 + c);
    const ReplayBuffer buf = state_buffer(50, 30 + c);
    const DistillBatch b = make_distill_batch(buf, t, 0, 50);
    const auto actions = s.forward(observe_batch(kCn, b.states)).actions;
    const double want = oracle::distill_loss(nested(b.teacher_targets), nested(actions));
    EXPECT_NEAR(distill_loss(s, kCn, b), want, 1e-12);
  }
}

// Zero deterministic heads: the teacher outputs 0 everywhere.
TEST(DistillTrain, ConstantTeacherIsLearnedInOnePass) {
  const GlobalPolicyNet t = constant_teacher({0, 0, 0, 0, 0, 0});
  LocalCommPolicyNet s = student(1, 40);
  const ReplayBuffer buf = state_buffer(150000, 41);
  const DistillConfig cfg;
  const DistillResult r = distill_train(s, t, kCn, buf, cfg);
  EXPECT_EQ(r.holdout_begin, 135000u);
  EXPECT_EQ(r.trace.size(), 132u);
  const DistillBatch held = make_distill_batch(buf, t, r.holdout_begin, buf.size());
  EXPECT_LT(distill_loss(s, kCn, held), 1e-4);
}

TEST(DistillTrain, TeacherFrozenAndBufferUntouched) {
  const GlobalPolicyNet t = teacher(42);
  const ParamStore theta = t.theta(), omega = t.omega();
  const ReplayBuffer buf = state_buffer(3000, 43);
  const std::uint64_t pushed = buf.total_pushed();
  for (std::size_t c : {1u, 3u}) {
    LocalCommPolicyNet s = student(c, 44);
    DistillConfig cfg;
    cfg.msg_dim = c;
    const DistillResult r = distill_train(s, t, kCn, buf, cfg);
    EXPECT_EQ(r.trace.size(), 3u);
    EXPECT_EQ(r.trace.back().t_global_max, buf.chronological(r.holdout_begin - 1).t_global);
  }
  EXPECT_TRUE(t.theta().values_equal(theta));
  EXPECT_TRUE(t.omega().values_equal(omega));
  EXPECT_EQ(t.theta().step_count(), theta.step_count());
  EXPECT_EQ(buf.total_pushed(), pushed);
}

TEST(DistillTrain, RepeatedBatchLossNonIncreasing) {
  const int trials = 40;
  int good = 0;
  for (int k = 0; k < trials; ++k) {
    const GlobalPolicyNet t = teacher(100 + k);
    LocalCommPolicyNet s = student(k % 2 ? 3 : 1, 200 + k);
    const ReplayBuffer buf = state_buffer(1024, 300 + k);
    const DistillBatch b = make_distill_batch(buf, t, 0, 1024);
    DistillConfig cfg;
    cfg.msg_dim = s.dims().msg_dim;
    cfg.lr = 3e-4;
    double prev = distill_step(s, kCn, b, cfg);
    bool monotone = true;
    for (int step = 0; step < 30; ++step) {
      const double now = distill_step(s, kCn, b, cfg);
      if (now > prev) monotone = false;
      prev = now;
    }
    if (monotone) ++good;
  }
  EXPECT_GE(good, trials * 95 / 100);
}

TEST(DistillTrain, Errors) {
  const GlobalPolicyNet t = teacher(50);
  LocalCommPolicyNet s = student(3, 51);
  const ReplayBuffer buf = state_buffer(100, 52);
  DistillConfig cfg;
  cfg.msg_dim = 1;
  EXPECT_THROW(distill_train(s, t, kCn, buf, cfg), std::invalid_argument);
  cfg.msg_dim = 3;
  EXPECT_THROW(distill_train(s, t, kCn, ReplayBuffer(4), cfg), std::invalid_argument);
  cfg.repetitions_per_batch = 0;
  EXPECT_THROW(distill_train(s, t, kCn, buf, cfg), std::invalid_argument);
}

TEST(DistillTrain, HoldoutBoundary) {
  EXPECT_EQ(holdout_begin(3000, 0.1), 2700u);
  EXPECT_EQ(holdout_begin(10, 0.0), 10u);
  EXPECT_EQ(holdout_begin(1, 0.1), 1u);
}

TEST(Fidelity, IdentityRigIsExact) {
  const std::vector<double> bias{0.4, -0.3, 0.1, 0.6, -0.5, 0.2};
  const GlobalPolicyNet t = constant_teacher(bias);
  LocalCommPolicyNet s = student(3, 60);
  for (auto& e : s.params().entries()) e.value.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    Mat& b = s.params().value("agent" + std::to_string(i) + ".act.out.b");
    b(0, 0) = bias[2 * i];
    b(0, 1) = bias[2 * i + 1];
  }
  const ReplayBuffer buf = state_buffer(40, 61);
  const FidelityReport rep = fidelity_report(s, t, kCn, tail_states(buf, 0));
  EXPECT_EQ(rep.probes, 40u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rep.mse[i], 0.0);
    EXPECT_NEAR(rep.cosine[i], 1.0, 1e-15);
  }
  EXPECT_EQ(rep.loss, 0.0);
}

TEST(Fidelity, UntrainedStudentIsFinite) {
  const GlobalPolicyNet t = teacher(62);
  const LocalCommPolicyNet s = student(1, 63);
  const ReplayBuffer buf = state_buffer(64, 64);
  const FidelityReport rep = fidelity_report(s, t, kCn, tail_states(buf, 32));
  ASSERT_EQ(rep.mse.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(std::isfinite(rep.mse[i]));
    EXPECT_GE(rep.cosine[i], -1.0);
    EXPECT_LE(rep.cosine[i], 1.0);
  }
  EXPECT_THROW(fidelity_report(s, t, kCn, Mat(0, kCn.state_dim())), std::invalid_argument);
}

// Paired runs on one random teacher and buffer per seed.
TEST(Fidelity, WiderChannelNoWorseInMedian) {
  std::vector<double> c1, c3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GlobalPolicyNet t = teacher(70 + seed);
    const ReplayBuffer buf = state_buffer(20000, 80 + seed);
    for (std::size_t c : {1u, 3u}) {
      LocalCommPolicyNet s = student(c, 90 + seed);
      DistillConfig cfg;
      cfg.msg_dim = c;
      const DistillResult r = distill_train(s, t, kCn, buf, cfg);
      const FidelityReport rep = fidelity_report(s, t, kCn, tail_states(buf, r.holdout_begin));
      double m = 0.0;
      for (double v : rep.mse) m += v;
      (c == 1 ? c1 : c3).push_back(m / 3.0);
    }
  }
  std::sort(c1.begin(), c1.end());
  std::sort(c3.begin(), c3.end());
  EXPECT_LE(c3[2], c1[2]);
}
