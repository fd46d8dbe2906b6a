// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances and time limits are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctedd/checkpoint.hpp"
#include "ctedd/config.hpp"
#include "ctedd/harness.hpp"
#include "ctedd/particle_world.hpp"
#include "ctedd/replay_buffer.hpp"
#include "ctedd/training.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"
#include "test_support.hpp"

using namespace ctedd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120;
constexpr double kOracleTol = 1e-12;
constexpr int kOraclePairs = 10000;
constexpr double kOracleSeconds = 60;
constexpr double kDpgTol = 1e-3;
constexpr int kDpgMaxSteps = 2000;
constexpr double kDpgSeconds = 30;
constexpr double kEq5Seconds = 30;
constexpr double kToyTol = 1e-2;
constexpr double kToySeconds = 60;
constexpr std::uint64_t kDeskSteps = 50'000;
constexpr double kBaselineCiMultiple = 3.0;
constexpr double kLearnSeconds = 20 * 60;
// Held-out L_D bound as a fraction of the held-out teacher-action variance
// (summed over agents and action dimensions). Frozen after calibration.
constexpr double kDistillVarianceFraction = 0.8;
constexpr double kReturnGap = 0.15;
constexpr double kDistillSeconds = 10 * 60;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

struct Context {
  fs::path work;
  size_t eval_threads = 1;
  std::map<std::uint64_t, TrainArtifacts> teachers;  // CN-V1 desk runs by seed
  double teacher_seconds = 0.0;
};

ExperimentConfig desk_config(EnvId env, std::uint64_t seed, const fs::path& out, std::size_t threads) {
  ExperimentConfig c;
  c.env = env;
  c.seed = seed;
  c.total_env_steps = kDeskSteps;
  c.eval_every = 10'000;
  c.eval_episodes = 400;
  c.eval_threads = threads;
  c.output_dir = out;
  return c;
}

const TrainArtifacts& teacher(Context& ctx, std::uint64_t seed) {
  auto it = ctx.teachers.find(seed);
  if (it != ctx.teachers.end()) return it->second;
  const auto t0 = Clock::now();
  TrainArtifacts art =
      run_train(desk_config(EnvId::kCnV1, seed, ctx.work / ("cn-v1-seed" + std::to_string(seed)), ctx.eval_threads));
  ctx.teacher_seconds += seconds_since(t0);
  return ctx.teachers.emplace(seed, std::move(art)).first->second;
}

// ---- criteria --------------------------------------------------------------

Outcome gradient_gate(Context&) {
  const auto t0 = Clock::now();
  GradcheckOptions opt;
  opt.tolerance = kGradTol;
  const auto cases = run_gradcheck(opt);
  double worst = 0.0;
  std::string worst_name;
  bool ok = !cases.empty();
  for (const auto& c : cases) {
    ok = ok && c.report.passed(kGradTol);
    if (c.report.max_relative_error >= worst) {
      worst = c.report.max_relative_error;
      worst_name = c.name;
    }
  }
  const double secs = seconds_since(t0);
  return {ok && secs < kGradSeconds, std::to_string(cases.size()) + " checks, worst " + fmt("%.2e", worst) + " (" +
                                          worst_name + "), " + fmt("%.1fs", secs)};
}

Outcome reward_oracles(Context&) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t compared = 0;
  for (EnvId id : {EnvId::kCnV1, EnvId::kCnV2, EnvId::kPf, EnvId::kPp}) {
    const EnvSpec spec = EnvSpec::make(id);
    Rng rng(Rng(2024).split(static_cast<std::uint64_t>(id) + 1));
    for (int k = 0; k < kOraclePairs; ++k) {
      const WorldState prev = testing_support::random_state(spec, rng);
      std::vector<Vec2> actions(spec.num_agents);
      for (auto& a : actions) a = {rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3)};
      const WorldState next = physics_step(spec, prev, actions);
      const auto op = testing_support::to_oracle(prev), on = testing_support::to_oracle(next);
      double want = 0.0;
      switch (id) {
        case EnvId::kCnV1: want = oracle::cn_v1(on); break;
        case EnvId::kCnV2: want = oracle::cn_v2(on); break;
        case EnvId::kPf: want = oracle::pf(op, on, nullptr); break;
        case EnvId::kPp: want = oracle::pp(on); break;
      }
      worst = std::max(worst, std::fabs(team_reward(spec, prev, next) - want));
      ++compared;
      if (id == EnvId::kPp) {
        const auto got = prey_move(prev);
        const auto ref = oracle::prey(op);
        for (std::size_t l = 0; l < got.size(); ++l) {
          worst = std::max({worst, std::fabs(got[l].x - ref[l][0]), std::fabs(got[l].y - ref[l][1])});
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < kOracleSeconds,
          std::to_string(compared) + " pairs + prey moves, max |diff| " + fmt("%.2e", worst) + ", " +
              fmt("%.1fs", secs)};
}

Outcome ddpg_sanity(Context&) {
  const auto t0 = Clock::now();
  const auto run = testing_support::dpg_to_fixed_point(11, kDpgMaxSteps, kDpgTol);
  const double secs = seconds_since(t0);
  return {run.max_error < kDpgTol && secs < kDpgSeconds,
          "max |mu - a*| " + fmt("%.2e", run.max_error) + " after " + std::to_string(run.steps) + " steps, " +
              fmt("%.1fs", secs)};
}

Outcome exploration_behaviour(Context&) {
  const auto t0 = Clock::now();
  const EnvSpec spec = EnvSpec::make(EnvId::kCnV1);
  Rng rng(31);
  const GlobalPolicyNet net({spec.state_dim(), spec.num_agents, spec.action_dim}, rng);
  const CentralQNet q({spec.state_dim(), spec.joint_action_dim()}, rng);
  Batch at_mean = testing_support::random_batch(spec, 64, rng);
  at_mean.joint_actions = join_actions(net.means(at_mean.states));
  double max_adv = 0.0;
  for (double a : exploration_advantage(net, QNetCritic(q), at_mean)) max_adv = std::max(max_adv, std::fabs(a));

  const auto up = testing_support::std_trajectory(25, true);
  const auto down = testing_support::std_trajectory(27, false);
  bool rising = true, falling = true;
  for (std::size_t k = 1; k < up.size(); ++k) rising = rising && up[k] > up[k - 1];
  for (std::size_t k = 1; k < down.size(); ++k) falling = falling && down[k] < down[k - 1];
  const double secs = seconds_since(t0);
  return {max_adv == 0.0 && rising && falling && secs < kEq5Seconds,
          "(a) max |adv| " + fmt("%.1e", max_adv) + "; (b) sigma " + fmt("%.4f", up.front()) + " -> " +
              fmt("%.4f", up.back()) + (rising ? " strictly up" : " NOT monotone") + "; (c) sigma " +
              fmt("%.4f", down.front()) + " -> " + fmt("%.4f", down.back()) +
              (falling ? " strictly down" : " NOT monotone") + ", " + fmt("%.1fs", secs)};
}

Outcome toy_mdp(Context&) {
  const auto t0 = Clock::now();
  const auto run = testing_support::toy_mdp(7);
  const double secs = seconds_since(t0);
  return {run.max_error < kToyTol && secs < kToySeconds,
          "max |Q - Q*| " + fmt("%.2e", run.max_error) + ", " + fmt("%.1fs", secs)};
}

Outcome desk_learning(Context& ctx) {
  const EnvSpec spec = EnvSpec::make(EnvId::kCnV1);
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const TrainArtifacts& art = teacher(ctx, seed);
    const EvalResult base = evaluate_policy(spec, random_policy(spec), 400, evaluation_stream(seed), ctx.eval_threads);
    const double final_return = art.rows.empty() ? -INFINITY : art.rows.back().mean_return;
    const double bar = base.mean_return + kBaselineCiMultiple * base.ci95;
    const bool pass = final_return > bar;
    ok = ok && pass;
    detail += "seed " + std::to_string(seed) + ": " + fmt("%.2f", final_return) + (pass ? " > " : " <= ") +
              fmt("%.2f", bar) + "; ";
  }
  ok = ok && ctx.teacher_seconds < kLearnSeconds;
  return {ok, detail + "training " + fmt("%.0fs", ctx.teacher_seconds)};
}

// Sum over agents and action dimensions of the teacher-action variance on
// the held-out tail.
double heldout_teacher_variance(const ReplayBuffer& buf, const GlobalPolicyNet& t, std::size_t begin) {
  const DistillBatch b = make_distill_batch(buf, t, begin, buf.size());
  double total = 0.0;
  for (const Mat& m : b.teacher_targets) {
    for (std::size_t d = 0; d < m.cols(); ++d) {
      double mean = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, d);
      mean /= static_cast<double>(m.rows());
      double var = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) var += (m(r, d) - mean) * (m(r, d) - mean);
      total += var / static_cast<double>(m.rows());
    }
  }
  return total;
}

Outcome distillation_fidelity(Context& ctx) {
  bool ok = true;
  std::string detail;
  double secs = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const TrainArtifacts& art = teacher(ctx, seed);
    const auto t0 = Clock::now();
    const GlobalPolicyNet t = load_global_policy(art.policy);
    const LoadedBuffer loaded = load_buffer(art.buffer);
    const double var = heldout_teacher_variance(loaded.buffer, t, holdout_begin(loaded.buffer.size(), 0.1));
    const double bound = kDistillVarianceFraction * var;
    detail += "seed " + std::to_string(seed) + " [var " + fmt("%.3f", var) + "]";
    for (std::size_t c : {1u, 3u}) {
      DistillRequest req;
      req.buffer = art.buffer;
      req.teacher = art.policy;
      req.msg_dim = c;
      req.seed = seed;
      req.eval_episodes = 400;
      req.eval_threads = ctx.eval_threads;
      const DistillArtifacts d = run_distill(req);
      const double teacher_ret = d.teacher_eval->mean_return;
      const double student_ret = d.student_eval->mean_return;
      const double gap = std::fabs(student_ret - teacher_ret) / std::fabs(teacher_ret);
      const bool loss_ok = d.report.loss < bound;
      const bool ret_ok = gap <= kReturnGap;
      ok = ok && loss_ok && ret_ok;
      detail += " c=" + std::to_string(c) + ": L_D " + fmt("%.3f", d.report.loss) + (loss_ok ? "<" : ">=") +
                fmt("%.3f", bound) + ", return " + fmt("%.2f", student_ret) + " vs " + fmt("%.2f", teacher_ret) +
                " gap " + fmt("%.1f%%", 100 * gap) + (ret_ok ? "" : " (over 15%)") + ";";
    }
    secs += seconds_since(t0);
    detail += " ";
  }
  ok = ok && secs < kDistillSeconds;
  return {ok, detail + fmt("%.0fs", secs)};
}

Outcome sample_reuse(Context& ctx) {
  const TrainArtifacts& art = teacher(ctx, kSeeds.front());
  const std::string before = testing_support::slurp(art.buffer);
  const std::uint64_t steps0 = simulated_step_count();
  for (std::size_t c : {1u, 3u}) {
    DistillRequest req;
    req.buffer = art.buffer;
    req.teacher = art.policy;
    req.msg_dim = c;
    req.seed = 99;
    req.output_dir = ctx.work / ("reuse_c" + std::to_string(c));
    run_distill(req);
  }
  const std::uint64_t delta = simulated_step_count() - steps0;
  const bool same = testing_support::slurp(art.buffer) == before;
  return {delta == 0 && same, "env steps during c=1,3 distillation: " + std::to_string(delta) +
                                  (same ? "; buffer file unchanged" : "; buffer file CHANGED")};
}

Outcome alpha_schedule(Context&) {
  const AlphaSchedule s{0.1, 0.001, 3'000'000};
  bool ok = alpha_at(s, 0) == 0.1 && alpha_at(s, 3'000'000) == 0.001;
  for (std::uint64_t t : {3'000'001ull, 4'500'000ull, 100'000'000ull}) ok = ok && alpha_at(s, t) == 0.001;
  double prev = alpha_at(s, 0);
  for (std::uint64_t t = 1; t <= 3'100'000; t += 997) {
    const double a = alpha_at(s, t);
    ok = ok && a <= prev;
    prev = a;
  }
  return {ok, "alpha(0)=" + fmt("%g", alpha_at(s, 0)) + ", alpha(1.5M)=" + fmt("%g", alpha_at(s, 1'500'000)) +
                  ", alpha(3M)=" + fmt("%g", alpha_at(s, 3'000'000)) + ", alpha(1e8)=" + fmt("%g", alpha_at(s, 100'000'000))};
}

Outcome determinism(Context& ctx) {
  std::vector<TrainArtifacts> runs;
  for (const char* tag : {"det_a", "det_b"}) {
    ExperimentConfig c = desk_config(EnvId::kCnV1, 4, ctx.work / tag, ctx.eval_threads);
    c.total_env_steps = 10'000;
    c.eval_every = 5'000;
    c.eval_episodes = 50;
    runs.push_back(run_train(c));
  }
  std::string bad;
  std::size_t compared = 0;
  for (const auto& f : {runs[0].metrics, runs[0].policy, manifest_path_for(runs[0].policy), runs[0].critic,
                        manifest_path_for(runs[0].critic), runs[0].buffer}) {
    const fs::path other = runs[1].dir / f.filename();
    ++compared;
    if (testing_support::slurp(f) != testing_support::slurp(other)) bad += " " + f.filename().string();
  }
  return {bad.empty(), std::to_string(compared) + " files compared" + (bad.empty() ? ", all identical" : "; differ:" + bad)};
}

Outcome ablation_plumbing(Context& ctx) {
  std::vector<PlotSeries> series;
  std::string detail;
  bool ok = true;
  std::vector<std::uint64_t> grid;
  for (double sigma : {0.4, 0.6, 0.8}) {
    ExperimentConfig c = desk_config(EnvId::kPf, 1, ctx.work / ("pf-sigma" + fmt("%.1f", sigma)), ctx.eval_threads);
    c.eval_episodes = 100;
    c.train.sigma_fixed = sigma;
    const TrainArtifacts art = run_train(c);
    const auto rows = parse_metrics_csv(testing_support::slurp(art.metrics), art.metrics.string());
    std::vector<std::uint64_t> steps;
    for (const auto& r : rows) {
      steps.push_back(r.env_steps);
      ok = ok && std::isfinite(r.mean_return);
    }
    if (grid.empty()) grid = steps;
    ok = ok && !rows.empty() && steps == grid;
    series.push_back({c.variant(), rows});
    detail += c.variant() + " final " + (rows.empty() ? std::string("n/a") : fmt("%.2f", rows.back().mean_return)) + "; ";
  }
  const fs::path svg = ctx.work / "pf_sigma_ablation.svg";
  const std::string text = render_svg(series, {800, 480, "PF sigma-fixed ablation"});
  write_file_atomic(svg, [&](std::ostream& o) { o << text; });
  for (const auto& s : series) ok = ok && text.find(s.label) != std::string::npos;
  return {ok, detail + "plot " + svg.string()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctedd acceptance runner"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "ctedd_acceptance").string();
  std::size_t threads = 1;
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--work-dir", work, "directory for training artifacts");
  app.add_option("--threads", threads, "evaluation threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.work = work;
  ctx.eval_threads = threads;
  fs::remove_all(ctx.work);
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"gradient gate", gradient_gate},
      {"reward oracles", reward_oracles},
      {"DDPG sanity", ddpg_sanity},
      {"exploration update behaviour", exploration_behaviour},
      {"toy-MDP TD check", toy_mdp},
      {"desk-scale learning", desk_learning},
      {"distillation fidelity", distillation_fidelity},
      {"sample reuse", sample_reuse},
      {"alpha schedule", alpha_schedule},
      {"determinism", determinism},
      {"ablation plumbing", ablation_plumbing},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int n = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    try {
      o = criteria[k].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
