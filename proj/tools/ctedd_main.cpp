#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctedd/checkpoint.hpp"
#include "ctedd/config.hpp"
#include "ctedd/harness.hpp"
#include "ctedd/svg_plot.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kBadInput = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ctedd::InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_overrides(ctedd::ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ctedd::InputError("--set expects key=value, got '" + kv + "'");
    ctedd::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

std::string ci_text(double ci) {
  char buf[64];
  if (std::isnan(ci)) return "nan";
  std::snprintf(buf, sizeof(buf), "%.6f", ci);
  return buf;
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed,
              const std::optional<std::string>& sigma, const std::optional<std::string>& out,
              const std::optional<std::uint64_t>& steps, const std::vector<std::string>& sets, bool quiet) {
  ctedd::ExperimentConfig cfg = ctedd::load_config(config_path);
  apply_overrides(cfg, sets);
  if (seed) cfg.seed = *seed;
  if (sigma) ctedd::apply_config_value(cfg, "sigma_fixed", *sigma);
  if (out) cfg.output_dir = *out;
  if (steps) cfg.total_env_steps = *steps;
  const auto art = ctedd::run_train(cfg, quiet ? nullptr : &std::cerr);
  std::cout << "policy  " << art.policy.string() << "\n"
            << "critic  " << art.critic.string() << "\n"
            << "buffer  " << art.buffer.string() << " (" << art.stats.env_steps << " transitions)\n"
            << "metrics " << art.metrics.string() << "\n";
  return kOk;
}

int cmd_distill(const ctedd::DistillRequest& req, const std::optional<std::string>& config_path) {
  ctedd::DistillRequest r = req;
  if (config_path) r.config = ctedd::load_config(*config_path).distill;
  const auto art = ctedd::run_distill(r, &std::cerr);
  std::cout << "student  " << art.student.string() << "\n"
            << "trace    " << art.trace.string() << "\n"
            << "fidelity " << art.fidelity.string() << "\n"
            << "heldout_loss " << art.report.loss << "\n";
  if (art.teacher_eval && art.student_eval) {
    std::cout << "teacher_return " << art.teacher_eval->mean_return << " ci95 " << ci_text(art.teacher_eval->ci95)
              << "\n"
              << "student_return " << art.student_eval->mean_return << " ci95 " << ci_text(art.student_eval->ci95)
              << "\n";
  }
  return kOk;
}

int cmd_eval(const std::string& policy, const std::string& env, std::size_t episodes, std::uint64_t seed,
             std::size_t threads) {
  ctedd::EnvId id;
  try {
    id = ctedd::parse_env_id(env);
  } catch (const std::invalid_argument& e) {
    throw ctedd::InputError(e.what());
  }
  ctedd::EvalResult r;
  if (policy == "random" || policy == "zero") {
    const ctedd::EnvSpec spec = ctedd::EnvSpec::make(id);
    const auto fn = policy == "random" ? ctedd::random_policy(spec) : ctedd::zero_policy(spec);
    r = ctedd::evaluate_policy(spec, fn, episodes, ctedd::evaluation_stream(seed), threads);
  } else {
    r = ctedd::run_eval(policy, id, episodes, seed, threads);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.10g", r.mean_return);
  std::cout << "mean_return,ci95,episodes\n" << buf << "," << ci_text(r.ci95) << "," << episodes << "\n";
  return kOk;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out, const std::string& title) {
  std::vector<ctedd::PlotSeries> series;
  std::vector<std::string> origin;
  for (const auto& f : files) {
    const auto rows = ctedd::parse_metrics_csv(read_file(f), f);
    std::vector<std::string> order;
    std::map<std::string, std::vector<ctedd::MetricsRow>> by_variant;
    for (const auto& r : rows) {
      if (!by_variant.count(r.variant)) order.push_back(r.variant);
      by_variant[r.variant].push_back(r);
    }
    if (rows.empty()) order.push_back(std::filesystem::path(f).stem().string());
    for (const auto& v : order) {
      series.push_back({v, by_variant[v]});
      const std::filesystem::path p(f);
      origin.push_back(p.parent_path().filename().string() + "/" + p.filename().string());
    }
  }
  // Runs of the same variant (seeds, ablations) are told apart by file.
  std::map<std::string, int> uses;
  for (const auto& s : series) ++uses[s.label];
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (uses[series[k].label] > 1) series[k].label += " (" + origin[k] + ")";
  }
  ctedd::PlotOptions opt;
  opt.title = title;
  const std::string svg = ctedd::render_svg(series, opt);
  ctedd::write_file_atomic(out, [&](std::ostream& o) { o << svg; });
  std::cout << "wrote " << out << " (" << series.size() << " series)\n";
  return kOk;
}

int cmd_gradcheck(const ctedd::GradcheckOptions& opt) {
  const auto cases = ctedd::run_gradcheck(opt);
  bool ok = true;
  for (const auto& c : cases) {
    const bool pass = c.report.passed(opt.tolerance);
    ok = ok && pass;
    std::printf("%-4s %-32s max_rel_err=%.3e checked=%zu worst=%s\n", pass ? "ok" : "FAIL", c.name.c_str(),
                c.report.max_relative_error, c.report.checked, c.report.worst_parameter.c_str());
    if (!pass) {
      for (const auto& name : c.report.failing_entries(opt.tolerance)) std::printf("     failing: %s\n", name.c_str());
    }
  }
  std::printf("%s: %zu checks, tolerance %.0e\n", ok ? "PASS" : "FAIL", cases.size(), opt.tolerance);
  return ok ? kOk : kRuntimeFailure;
}

int cmd_rollout(const std::optional<std::string>& policy, const std::string& env, std::uint64_t seed,
                const std::string& out) {
  const ctedd::EnvSpec spec = ctedd::EnvSpec::make(env);
  std::optional<ctedd::LoadedPolicy> loaded;
  ctedd::JointPolicyFn fn = ctedd::zero_policy(spec);
  if (policy && *policy == "random") {
    fn = ctedd::random_policy(spec);
  } else if (policy && *policy != "zero") {
    loaded = ctedd::load_policy(*policy);
    if (auto* g = std::get_if<ctedd::GlobalPolicyNet>(&*loaded)) {
      fn = ctedd::global_policy_fn(*g, spec);
    } else {
      fn = ctedd::local_policy_fn(std::get<ctedd::LocalCommPolicyNet>(*loaded), spec);
    }
  }
  const ctedd::Rng ep = ctedd::evaluation_stream(seed).split(0);
  ctedd::Environment e(spec, ep.split(ctedd::StreamTag::kEnvironment));
  ctedd::Rng act = ep.split(ctedd::StreamTag::kExploration);
  std::vector<ctedd::TrajectoryStep> steps;
  for (;;) {
    ctedd::TrajectoryStep s;
    s.state = e.state();
    s.actions = fn(e.state(), act);
    const auto r = e.step(s.actions);
    s.reward = r.reward;
    steps.push_back(std::move(s));
    if (r.done) break;
  }
  ctedd::write_file_atomic(out, [&](std::ostream& o) { ctedd::write_trajectory_csv(o, steps); });
  std::cout << "wrote " << out << " (" << steps.size() << " steps)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctedd: centralized training and exploration with policy distillation"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train CTEDD or MADDPG and write checkpoints, buffer and metrics");
  std::string config_path;
  std::optional<std::uint64_t> seed_opt, steps_opt;
  std::optional<std::string> sigma_opt, out_opt, distill_cfg;
  std::vector<std::string> sets;
  bool quiet = false;
  train->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed_opt, "override the config seed");
  train->add_option("--sigma-fixed", sigma_opt, "fixed exploration std (ablation)")
      ->check(CLI::IsMember({"0.4", "0.6", "0.8"}));
  train->add_option("--out", out_opt, "output directory");
  train->add_option("--steps", steps_opt, "override total_env_steps");
  train->add_option("--set", sets, "override any config key: key=value");
  train->add_flag("--quiet", quiet, "no progress on stderr");

  auto* distill = app.add_subcommand("distill", "distill local students from a trained global policy");
  ctedd::DistillRequest dreq;
  std::string buffer_path, teacher_path, distill_out;
  distill->add_option("--buffer", buffer_path, "replay.buf from a training run")->required();
  distill->add_option("--teacher", teacher_path, "global_policy.net from a training run")->required();
  distill->add_option("--msg-dim", dreq.msg_dim, "message dimension")->required()->check(CLI::IsMember({1, 3}));
  distill->add_option("--seed", dreq.seed, "student initialisation seed");
  distill->add_option("--out", distill_out, "output directory (default: <teacher dir>/distill_c<c>)");
  distill->add_option("--config", distill_cfg, "config file supplying distillation settings");
  distill->add_option("--eval-episodes", dreq.eval_episodes, "also evaluate teacher and student");
  distill->add_option("--threads", dreq.eval_threads, "evaluation worker threads")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "evaluate a policy checkpoint with deterministic actions");
  std::string policy_path, env_id;
  std::size_t episodes = 400, threads = 1;
  std::uint64_t eval_seed = 0;
  eval->add_option("--policy", policy_path, "policy .net file, or the baselines 'random' / 'zero'")->required();
  eval->add_option("--env", env_id, "cn-v1, cn-v2, pf or pp")->required();
  eval->add_option("--episodes", episodes, "number of episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "render metrics.csv files as an SVG learning-curve chart");
  std::vector<std::string> metric_files;
  std::string plot_out, title = "evaluation return";
  plot->add_option("metrics", metric_files, "metrics.csv files")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--output", plot_out, "output SVG")->required();
  plot->add_option("--title", title, "chart title");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every network gradient");
  ctedd::GradcheckOptions gopt;
  gradcheck->add_flag("--inject-fault", gopt.inject_fault, "double one analytic gradient (self-test)");
  gradcheck->add_option("--seed", gopt.seed, "seed for weights and probe states");

  auto* rollout = app.add_subcommand("rollout", "dump one evaluation episode as a trajectory CSV");
  std::optional<std::string> rollout_policy;
  std::string rollout_env, rollout_out;
  std::uint64_t rollout_seed = 0;
  rollout->add_option("--policy", rollout_policy, "policy .net file, or 'zero' / 'random'");
  rollout->add_option("--env", rollout_env, "environment id")->required();
  rollout->add_option("--seed", rollout_seed, "evaluation seed");
  rollout->add_option("-o,--output", rollout_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }

  try {
    if (*train) return cmd_train(config_path, seed_opt, sigma_opt, out_opt, steps_opt, sets, quiet);
    if (*distill) {
      dreq.buffer = buffer_path;
      dreq.teacher = teacher_path;
      dreq.output_dir = distill_out;
      return cmd_distill(dreq, distill_cfg);
    }
    if (*eval) return cmd_eval(policy_path, env_id, episodes, eval_seed, threads);
    if (*plot) return cmd_plot(metric_files, plot_out, title);
    if (*gradcheck) return cmd_gradcheck(gopt);
    if (*rollout) return cmd_rollout(rollout_policy, rollout_env, rollout_seed, rollout_out);
  } catch (const ctedd::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const ctedd::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kBadInput;
}
