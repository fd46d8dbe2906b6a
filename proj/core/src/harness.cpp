#include "ctedd/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "ctedd/checkpoint.hpp"
#include "ctedd/gaussian.hpp"
#include "ctedd/replay_buffer.hpp"

namespace ctedd {

EvalResult summarize_returns(std::vector<double> returns) {
  EvalResult r;
  r.returns = std::move(returns);
  const std::size_t n = r.returns.size();
  if (n == 0) {
    r.mean_return = std::numeric_limits<double>::quiet_NaN();
    r.ci95 = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double total = 0.0;
  for (double v : r.returns) total += v;
  r.mean_return = total / static_cast<double>(n);
  if (n < 2) {
    r.ci95 = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double ss = 0.0;
  for (double v : r.returns) ss += (v - r.mean_return) * (v - r.mean_return);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(n));
  return r;
}

Rng evaluation_stream(std::uint64_t seed) { return Rng(seed).split(StreamTag::kEvaluation); }

EvalResult evaluate_policy(const EnvSpec& spec, const JointPolicyFn& policy, std::size_t episodes, const Rng& base,
                           std::size_t threads) {
  std::vector<double> returns(episodes, 0.0);
  auto run_episode = [&](std::size_t e) {
    const Rng ep = base.split(e);
    Environment env(spec, ep.split(StreamTag::kEnvironment));
    Rng action_rng = ep.split(StreamTag::kExploration);
    double total = 0.0;
    for (;;) {
      const auto actions = policy(env.state(), action_rng);
      const StepResult r = env.step(actions);
      total += r.reward;
      if (r.done) break;
    }
    returns[e] = total;
  };

  threads = std::max<std::size_t>(1, std::min(threads, episodes));
  if (threads == 1) {
    for (std::size_t e = 0; e < episodes; ++e) run_episode(e);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t e = w; e < episodes; e += threads) run_episode(e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  return summarize_returns(std::move(returns));
}

JointPolicyFn random_policy(const EnvSpec& spec) {
  const std::size_t n = spec.num_agents;
  return [n](const WorldState&, Rng& rng) {
    std::vector<Vec2> a(n);
    for (auto& v : a) {
      v.x = rng.uniform(-1.0, 1.0);
      v.y = rng.uniform(-1.0, 1.0);
    }
    return a;
  };
}

JointPolicyFn zero_policy(const EnvSpec& spec) {
  const std::size_t n = spec.num_agents;
  return [n](const WorldState&, Rng&) { return std::vector<Vec2>(n); };
}

JointPolicyFn global_policy_fn(const GlobalPolicyNet& net, const EnvSpec& spec) {
  return [&net, spec](const WorldState& state, Rng&) {
    const auto s = full_state_vector(spec, state);
    const Mat joint = join_actions(net.means(Mat::row_vector(s)));
    return to_vec2_actions(joint.row(0));
  };
}

JointPolicyFn local_policy_fn(const LocalCommPolicyNet& net, const EnvSpec& spec) {
  return [&net, spec](const WorldState& state, Rng&) {
    std::vector<Mat> obs;
    obs.reserve(spec.num_agents);
    for (std::size_t i = 0; i < spec.num_agents; ++i) obs.push_back(Mat::row_vector(observe(spec, state, i)));
    const Mat joint = join_actions(net.forward(obs).actions);
    return to_vec2_actions(joint.row(0));
  };
}

namespace {

// Remembers files written by one command so a failure can remove them all.
class ArtifactSet {
 public:
  void add(std::filesystem::path p) { written_.push_back(std::move(p)); }
  void commit() { written_.clear(); }
  ~ArtifactSet() {
    std::error_code ec;
    for (const auto& p : written_) std::filesystem::remove(p, ec);
  }

 private:
  std::vector<std::filesystem::path> written_;
};

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

void save_tracked(ArtifactSet& set, const std::filesystem::path& net_path, const ParamStore& params,
                  const Manifest& manifest) {
  set.add(net_path);
  set.add(manifest_path_for(net_path));
  save_network(net_path, params, manifest);
}

void write_text_tracked(ArtifactSet& set, const std::filesystem::path& path, const std::string& text) {
  set.add(path);
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

}  // namespace

TrainArtifacts run_train(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const EnvSpec spec = EnvSpec::make(config.env);
  const std::string env_name(env_id_name(config.env));

  std::unique_ptr<Learner> learner;
  CteddLearner* ctedd = nullptr;
  MaddpgLearner* maddpg = nullptr;
  if (config.algorithm == Algorithm::kCtedd) {
    auto l = std::make_unique<CteddLearner>(spec, config.train, config.seed);
    ctedd = l.get();
    learner = std::move(l);
  } else {
    auto l = std::make_unique<MaddpgLearner>(spec, config.train, config.msg_dim, config.seed);
    maddpg = l.get();
    learner = std::move(l);
  }

  TrainArtifacts art;
  art.dir = config.output_dir;
  make_dir(art.dir);

  const auto t0 = std::chrono::steady_clock::now();
  const Rng eval_base = evaluation_stream(config.seed);
  const Learner& view = *learner;
  const JointPolicyFn acting = [&view](const WorldState& s, Rng&) { return view.act_deterministic(s); };

  while (learner->stats().env_steps < config.total_env_steps) {
    const std::uint64_t done = learner->stats().env_steps;
    const std::uint64_t to_eval = config.eval_every - done % config.eval_every;
    learner->advance(std::min(to_eval, config.total_env_steps - done));
    const auto& st = learner->stats();
    if (st.env_steps % config.eval_every != 0) continue;
    const EvalResult ev = evaluate_policy(spec, acting, config.eval_episodes, eval_base, config.eval_threads);
    MetricsRow row;
    row.env_steps = st.env_steps;
    row.episodes = st.episodes;
    row.variant = config.variant();
    row.mean_return = ev.mean_return;
    row.ci95 = ev.ci95;
    if (config.record_wallclock) {
      row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    art.rows.push_back(row);
    if (log) *log << "[" << row.variant << "] " << format_metrics_row(row) << "\n" << std::flush;
  }
  art.stats = learner->stats();

  ArtifactSet written;
  if (ctedd) {
    art.policy = art.dir / "global_policy.net";
    Manifest m = make_manifest(ctedd->policy(), env_name);
    m.seed = config.seed;
    m.env_steps = art.stats.env_steps;
    save_tracked(written, art.policy, ctedd->policy().merged(), m);
    art.critic = art.dir / "critic.net";
    Manifest qm = make_manifest(ctedd->critic(), env_name, spec.num_agents);
    qm.seed = config.seed;
    qm.env_steps = art.stats.env_steps;
    save_tracked(written, art.critic, ctedd->critic().params(), qm);
  } else {
    art.policy = art.dir / "local_policy.net";
    Manifest m = make_manifest(maddpg->policy(), env_name, config.variant());
    m.seed = config.seed;
    m.env_steps = art.stats.env_steps;
    save_tracked(written, art.policy, maddpg->policy().params(), m);
    art.critic = art.dir / "critic.net";
    Manifest qm = make_manifest(maddpg->critic(), env_name, spec.num_agents);
    qm.seed = config.seed;
    qm.env_steps = art.stats.env_steps;
    save_tracked(written, art.critic, maddpg->critic().params(), qm);
  }

  art.buffer = art.dir / "replay.buf";
  const BufferHeader header{env_name, static_cast<std::uint32_t>(spec.num_agents),
                            static_cast<std::uint32_t>(spec.state_dim()), static_cast<std::uint32_t>(spec.action_dim)};
  written.add(art.buffer);
  write_file_atomic(art.buffer, [&](std::ostream& out) { write_buffer(out, header, learner->buffer()); });

  art.metrics = art.dir / "metrics.csv";
  std::ostringstream metrics;
  write_metrics_csv(metrics, art.rows);
  write_text_tracked(written, art.metrics, metrics.str());
  write_text_tracked(written, art.dir / "config.txt", render_config(config));
  written.commit();
  return art;
}

DistillArtifacts run_distill(const DistillRequest& req, std::ostream* log) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(req.buffer, ec)) throw InputError("no such buffer file: " + req.buffer.string());
  if (!std::filesystem::is_regular_file(req.teacher, ec)) {
    throw InputError("no such teacher file: " + req.teacher.string());
  }
  if (req.msg_dim != 1 && req.msg_dim != 3) throw InputError("message dim must be 1 or 3");
  DistillConfig cfg = req.config;
  cfg.msg_dim = req.msg_dim;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  Manifest tm;
  const GlobalPolicyNet teacher = load_global_policy(req.teacher, &tm);
  LoadedBuffer loaded = [&] {
    try {
      return load_buffer(req.buffer);
    } catch (const FormatError& e) {
      throw InputError(req.buffer.string() + ": " + e.what());
    }
  }();
  const BufferHeader& bh = loaded.header;
  if (bh.env_id != tm.env_id || bh.num_agents != tm.num_agents || bh.state_dim != tm.state_dim ||
      bh.action_dim != tm.action_dim) {
    throw InputError("buffer (" + bh.env_id + ", N=" + std::to_string(bh.num_agents) +
                     ", state_dim=" + std::to_string(bh.state_dim) + ") does not match teacher manifest (" +
                     tm.env_id + ", N=" + std::to_string(tm.num_agents) +
                     ", state_dim=" + std::to_string(tm.state_dim) + ")");
  }
  if (loaded.buffer.empty()) throw InputError(req.buffer.string() + ": buffer holds no transitions");
  const EnvSpec spec = EnvSpec::make(bh.env_id);

  Rng init = Rng(req.seed).split(StreamTag::kDistillation);
  LocalCommPolicyNet students({spec.num_agents, spec.obs_dim(), cfg.msg_dim, spec.action_dim}, init);

  DistillArtifacts art;
  art.dir = req.output_dir.empty() ? req.teacher.parent_path() / ("distill_c" + std::to_string(cfg.msg_dim))
                                   : req.output_dir;
  make_dir(art.dir);

  art.result = distill_train(students, teacher, spec, loaded.buffer, cfg);
  const std::size_t hb = art.result.holdout_begin;
  const std::size_t probe_begin = hb < loaded.buffer.size() ? hb : 0;
  art.report = fidelity_report(students, teacher, spec,
                               make_distill_batch(loaded.buffer, teacher, probe_begin, loaded.buffer.size()).states);
  if (log) {
    *log << "distilled c=" << cfg.msg_dim << " over " << art.result.train_samples << " samples, held-out L_D "
         << art.report.loss << "\n";
  }

  if (req.eval_episodes > 0) {
    const Rng base = evaluation_stream(req.seed);
    art.teacher_eval = evaluate_policy(spec, global_policy_fn(teacher, spec), req.eval_episodes, base, req.eval_threads);
    art.student_eval = evaluate_policy(spec, local_policy_fn(students, spec), req.eval_episodes, base, req.eval_threads);
  }

  ArtifactSet written;
  art.student = art.dir / "student.net";
  Manifest sm = make_manifest(students, bh.env_id, "CTEDD-L-" + std::to_string(cfg.msg_dim));
  sm.seed = req.seed;
  sm.env_steps = tm.env_steps;
  save_tracked(written, art.student, students.params(), sm);

  std::ostringstream trace;
  trace << "batch_index,t_global_max,loss\n";
  for (const auto& p : art.result.trace) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu,%llu,%.17g\n", p.batch_index, static_cast<unsigned long long>(p.t_global_max),
                  p.loss);
    trace << buf;
  }
  art.trace = art.dir / "distill_trace.csv";
  write_text_tracked(written, art.trace, trace.str());

  std::ostringstream fid;
  fid << "agent,mse,cosine,heldout_loss,probes\n";
  for (std::size_t i = 0; i < art.report.mse.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%zu\n", i, art.report.mse[i], art.report.cosine[i],
                  art.report.loss, art.report.probes);
    fid << buf;
  }
  art.fidelity = art.dir / "fidelity.csv";
  write_text_tracked(written, art.fidelity, fid.str());
  written.commit();
  return art;
}

EvalResult run_eval(const std::filesystem::path& policy_path, EnvId env, std::size_t episodes, std::uint64_t seed,
                    std::size_t threads) {
  if (episodes == 0) throw InputError("episodes must be positive");
  Manifest m;
  const LoadedPolicy policy = load_policy(policy_path, &m);
  if (m.env_id != env_id_name(env)) {
    throw InputError(policy_path.string() + " was trained on " + m.env_id + ", not " + std::string(env_id_name(env)));
  }
  const EnvSpec spec = EnvSpec::make(env);
  const JointPolicyFn fn = std::holds_alternative<GlobalPolicyNet>(policy)
                               ? global_policy_fn(std::get<GlobalPolicyNet>(policy), spec)
                               : local_policy_fn(std::get<LocalCommPolicyNet>(policy), spec);
  return evaluate_policy(spec, fn, episodes, evaluation_stream(seed), threads);
}

// ---------------------------------------------------------------------------

namespace {

Mat random_weights(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat m(rows, cols);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

double weighted_sum(std::span<const Mat> ys, std::span<const Mat> weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const auto a = ys[i].data();
    const auto w = weights[i].data();
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * w[k];
  }
  return s;
}

// States visited by a short random rollout, so every environment feature
// takes realistic values.
Mat sample_states(const EnvSpec& spec, std::size_t count, Rng& rng) {
  Environment env(spec, rng.split(StreamTag::kEnvironment));
  Rng act = rng.split(StreamTag::kExploration);
  Mat states(count, spec.state_dim());
  const auto policy = random_policy(spec);
  for (std::size_t r = 0; r < count; ++r) {
    for (int k = 0; k < 3; ++k) {
      if (env.step(policy(env.state(), act)).done) env.reset();
    }
    const auto s = full_state_vector(spec, env.state());
    std::copy(s.begin(), s.end(), states.row(r).begin());
  }
  return states;
}

GradientFn with_fault(GradientFn g, bool inject) {
  if (!inject) return g;
  return [g = std::move(g)](ParamStore& p) {
    g(p);
    // the largest gradient, so the error clears the absolute floor
    ParamEntry* worst = &p.entries().front();
    for (auto& e : p.entries()) {
      if (max_abs(e.grad) > max_abs(worst->grad)) worst = &e;
    }
    scale_inplace(worst->grad, 2.0);
  };
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& opt) {
  std::vector<GradcheckCase> cases;
  auto check = [&](const std::string& name, const ScalarLoss& loss, GradientFn grad, ParamStore& params) {
    cases.push_back({name, finite_diff_check(loss, with_fault(std::move(grad), opt.inject_fault), params, opt.h)});
  };

  const Rng root = Rng(opt.seed).split(StreamTag::kGradcheck);
  for (EnvId id : {EnvId::kCnV1, EnvId::kCnV2, EnvId::kPf, EnvId::kPp}) {
    const EnvSpec spec = EnvSpec::make(id);
    const std::string env(env_id_name(id));
    Rng rng = root.split(static_cast<std::uint64_t>(id) + 1);
    const std::size_t n = spec.num_agents;
    const std::size_t ad = spec.action_dim;
    const Mat states = sample_states(spec, opt.batch, rng);

    GlobalPolicyNet global({spec.state_dim(), n, ad}, rng);
    std::vector<Mat> w_mean, w_std;
    for (std::size_t i = 0; i < n; ++i) {
      w_mean.push_back(random_weights(opt.batch, ad, rng));
      w_std.push_back(random_weights(opt.batch, ad, rng));
    }

    check(
        env + "/global.mean", [&](const ParamStore& th) { return weighted_sum(global.means_with(th, states), w_mean); },
        [&](ParamStore&) {
          const auto pass = global.forward(states, false);
          global.backward_mean(pass, w_mean);
        },
        global.theta());

    check(
        env + "/global.std", [&](const ParamStore&) { return weighted_sum(global.stds(states), w_std); },
        [&](ParamStore&) {
          const auto pass = global.forward(states, true);
          global.backward_std(pass, w_std);
        },
        global.omega());

    CentralQNet q({spec.state_dim(), spec.joint_action_dim()}, rng);
    Mat joint = random_weights(opt.batch, spec.joint_action_dim(), rng);
    for (auto& v : joint.data()) v = std::tanh(v);
    const Mat w_q = random_weights(opt.batch, 1, rng);

    check(
        env + "/central_q",
        [&](const ParamStore& p) {
          const Mat y = q.value_with(p, states, joint);
          return weighted_sum(std::span<const Mat>(&y, 1), std::span<const Mat>(&w_q, 1));
        },
        [&](ParamStore& p) {
          const auto out = q.forward(states, joint);
          ctedd::backward(out.tape, w_q, p);
        },
        q.params());

    ParamStore actions;
    actions.add("joint_action", joint);
    check(
        env + "/central_q.action",
        [&](const ParamStore& a) { return sum(q.value(states, a.value("joint_action"))); },
        [&](ParamStore& a) {
          add_inplace(a.grad("joint_action"), q.action_gradient_with(q.params(), states, a.value("joint_action")));
        },
        actions);

    const QNetCritic critic(q);
    check(
        env + "/global.dpg", [&](const ParamStore&) { return -dpg_objective(global, critic, states); },
        [&](ParamStore&) { dpg_gradient(global, critic, states); }, global.theta());

    Batch batch;
    batch.states = states;
    batch.joint_actions = joint;
    batch.sampled_actions = joint;
    for (auto& v : batch.sampled_actions.data()) v *= 1.3;
    batch.rewards.assign(opt.batch, 0.0);
    batch.dones.assign(opt.batch, 0.0);
    batch.t_global.assign(opt.batch, 0);
    const double alpha = 0.1;
    const std::vector<double> adv = exploration_advantage(global, critic, batch);
    check(
        env + "/global.exploration",
        [&](const ParamStore&) {
          const auto mu = global.means(states);
          const auto sd = global.stds(states);
          double j = 0.0;
          for (std::size_t b = 0; b < opt.batch; ++b) {
            for (std::size_t i = 0; i < n; ++i) {
              const auto x = batch.sampled_actions.row(b).subspan(i * ad, ad);
              j += adv[b] / static_cast<double>(opt.batch) * gaussian_log_prob(mu[i].row(b), sd[i].row(b), x);
              j += alpha * gaussian_entropy(sd[i].row(b));
            }
          }
          return -j;
        },
        [&](ParamStore&) { exploration_gradient(global, critic, batch, alpha); }, global.omega());

    const auto obs = observe_batch(spec, states);
    for (std::size_t c : {std::size_t{1}, std::size_t{3}}) {
      LocalCommPolicyNet local({n, spec.obs_dim(), c, ad}, rng);
      std::vector<Mat> w_act;
      for (std::size_t i = 0; i < n; ++i) w_act.push_back(random_weights(opt.batch, ad, rng));
      const std::string tag = env + "/local.c" + std::to_string(c);
      check(
          tag, [&](const ParamStore& p) { return weighted_sum(local.actions_with(p, obs), w_act); },
          [&](ParamStore&) {
            const auto pass = local.forward(obs);
            local.backward(pass, w_act);
          },
          local.params());

      check(
          tag + ".maddpg",
          [&](const ParamStore& p) {
            const Mat a = join_actions(local.actions_with(p, obs));
            return -sum(q.value(states, a)) / static_cast<double>(opt.batch);
          },
          [&](ParamStore&) { maddpg_policy_gradient(local, critic, states, obs); }, local.params());

      DistillBatch db;
      db.states = states;
      db.teacher_targets = global.means(states);
      check(
          tag + ".distill",
          [&](const ParamStore&) { return distill_loss(local, spec, db); },
          [&](ParamStore&) { distill_gradient(local, spec, db); }, local.params());
    }
  }
  return cases;
}

}  // namespace ctedd
