#include "ctedd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ctedd/checkpoint.hpp"

namespace ctedd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InputError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InputError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InputError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto sz = [](std::size_t ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.*f = static_cast<std::size_t>(to_u64(k, v));
      };
    };
    auto u64 = [](std::uint64_t ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*f = to_u64(k, v); };
    };
    auto tr_d = [](double TrainConfig::*f) {
      return [f](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.*f = to_double(k, v); };
    };
    auto tr_sz = [](std::size_t TrainConfig::*f) {
      return [f](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.train.*f = static_cast<std::size_t>(to_u64(k, v));
      };
    };
    auto ds_d = [](double DistillConfig::*f) {
      return [f](ExperimentConfig& c, const std::string& k, const std::string& v) { c.distill.*f = to_double(k, v); };
    };
    auto ds_sz = [](std::size_t DistillConfig::*f) {
      return [f](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.distill.*f = static_cast<std::size_t>(to_u64(k, v));
      };
    };

    t["env_id"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      try {
        c.env = parse_env_id(v);
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }
    };
    t["algorithm"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.algorithm = parse_algorithm(v);
    };
    t["message_dim"] = sz(&ExperimentConfig::msg_dim);
    t["seed"] = u64(&ExperimentConfig::seed);
    t["total_env_steps"] = u64(&ExperimentConfig::total_env_steps);
    t["eval_every"] = u64(&ExperimentConfig::eval_every);
    t["eval_episodes"] = sz(&ExperimentConfig::eval_episodes);
    t["eval_threads"] = sz(&ExperimentConfig::eval_threads);
    t["output_dir"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; };
    t["record_wallclock"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.record_wallclock = to_bool(k, v);
    };

    t["gamma"] = tr_d(&TrainConfig::gamma);
    t["batch"] = tr_sz(&TrainConfig::batch);
    t["lr_ctedd"] = tr_d(&TrainConfig::lr_ctedd);
    t["lr_maddpg"] = tr_d(&TrainConfig::lr_maddpg);
    t["tau"] = tr_d(&TrainConfig::tau);
    t["learn_interval"] = tr_sz(&TrainConfig::learn_interval);
    t["alpha_start"] = tr_d(&TrainConfig::alpha_start);
    t["alpha_end"] = tr_d(&TrainConfig::alpha_end);
    t["alpha_steps"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.train.alpha_steps = to_u64(k, v);
    };
    t["sigma_fixed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "none" || v.empty()) {
        c.train.sigma_fixed.reset();
      } else {
        c.train.sigma_fixed = to_double(k, v);
      }
    };
    t["grad_clip"] = tr_d(&TrainConfig::grad_clip);
    t["buffer_capacity"] = tr_sz(&TrainConfig::buffer_capacity);
    t["maddpg_noise"] = tr_d(&TrainConfig::maddpg_noise);
    t["maddpg_noise_decay"] = tr_d(&TrainConfig::maddpg_noise_decay);

    t["distill_batch"] = ds_sz(&DistillConfig::batch);
    t["repetitions_per_batch"] = ds_sz(&DistillConfig::repetitions_per_batch);
    t["distill_lr"] = ds_d(&DistillConfig::lr);
    t["distill_message_dim"] = ds_sz(&DistillConfig::msg_dim);
    t["distill_grad_clip"] = ds_d(&DistillConfig::grad_clip);
    t["holdout_fraction"] = ds_d(&DistillConfig::holdout_fraction);
    return t;
  }();
  return table;
}

}  // namespace

const char* algorithm_name(Algorithm a) { return a == Algorithm::kCtedd ? "ctedd" : "maddpg"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "ctedd") return Algorithm::kCtedd;
  if (name == "maddpg") return Algorithm::kMaddpg;
  throw InputError("unknown algorithm '" + name + "' (expected ctedd or maddpg)");
}

void ExperimentConfig::validate() const {
  try {
    train.validate();
    distill.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (eval_episodes == 0) throw InputError("eval_episodes must be positive");
  if (eval_every == 0) throw InputError("eval_every must be positive");
  if (eval_threads == 0) throw InputError("eval_threads must be positive");
  if (train.sigma_fixed && algorithm != Algorithm::kCtedd) throw InputError("sigma_fixed is only valid with ctedd");
}

std::string ExperimentConfig::variant() const {
  if (algorithm == Algorithm::kCtedd) {
    if (!train.sigma_fixed) return "CTEDD-G";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "CTEDD-G-sigma%g", *train.sigma_fixed);
    return buf;
  }
  return "MADDPG-" + std::to_string(msg_dim);
}

void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw InputError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    bool in_quotes = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') in_quotes = !in_quotes;
      if (body[i] == '#' && !in_quotes) {
        body.resize(i);
        break;
      }
    }
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw InputError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    try {
      apply_config_value(config, key, value);
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "env_id = " << env_id_name(c.env) << "\n";
  o << "algorithm = " << algorithm_name(c.algorithm) << "\n";
  o << "message_dim = " << c.msg_dim << "\n";
  o << "seed = " << c.seed << "\n";
  o << "total_env_steps = " << c.total_env_steps << "\n";
  o << "eval_every = " << c.eval_every << "\n";
  o << "eval_episodes = " << c.eval_episodes << "\n";
  o << "eval_threads = " << c.eval_threads << "\n";
  o << "output_dir = \"" << c.output_dir.string() << "\"\n";
  o << "record_wallclock = " << (c.record_wallclock ? "true" : "false") << "\n";
  o << "gamma = " << fmt_double(c.train.gamma) << "\n";
  o << "batch = " << c.train.batch << "\n";
  o << "lr_ctedd = " << fmt_double(c.train.lr_ctedd) << "\n";
  o << "lr_maddpg = " << fmt_double(c.train.lr_maddpg) << "\n";
  o << "tau = " << fmt_double(c.train.tau) << "\n";
  o << "learn_interval = " << c.train.learn_interval << "\n";
  o << "alpha_start = " << fmt_double(c.train.alpha_start) << "\n";
  o << "alpha_end = " << fmt_double(c.train.alpha_end) << "\n";
  o << "alpha_steps = " << c.train.alpha_steps << "\n";
  o << "sigma_fixed = " << (c.train.sigma_fixed ? fmt_double(*c.train.sigma_fixed) : std::string("none")) << "\n";
  o << "grad_clip = " << fmt_double(c.train.grad_clip) << "\n";
  o << "buffer_capacity = " << c.train.buffer_capacity << "\n";
  o << "maddpg_noise = " << fmt_double(c.train.maddpg_noise) << "\n";
  o << "maddpg_noise_decay = " << fmt_double(c.train.maddpg_noise_decay) << "\n";
  o << "distill_batch = " << c.distill.batch << "\n";
  o << "repetitions_per_batch = " << c.distill.repetitions_per_batch << "\n";
  o << "distill_lr = " << fmt_double(c.distill.lr) << "\n";
  o << "distill_message_dim = " << c.distill.msg_dim << "\n";
  o << "distill_grad_clip = " << fmt_double(c.distill.grad_clip) << "\n";
  o << "holdout_fraction = " << fmt_double(c.distill.holdout_fraction) << "\n";
  return o.str();
}

}  // namespace ctedd
