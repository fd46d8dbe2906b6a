#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ctedd/distillation.hpp"
#include "ctedd/particle_world.hpp"
#include "ctedd/training.hpp"

namespace ctedd {

enum class Algorithm { kCtedd, kMaddpg };

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct ExperimentConfig {
  EnvId env = EnvId::kCnV1;
  Algorithm algorithm = Algorithm::kCtedd;
  std::size_t msg_dim = 1;  // MADDPG local nets; distillation students use distill.msg_dim
  std::uint64_t seed = 0;
  std::uint64_t total_env_steps = 50'000;
  std::uint64_t eval_every = 10'000;
  std::size_t eval_episodes = 400;
  std::size_t eval_threads = 1;
  std::filesystem::path output_dir = "run";
  // Off by default so metrics.csv is a pure function of (config, seed).
  bool record_wallclock = false;
  TrainConfig train;
  DistillConfig distill;

  // Throws InputError.
  void validate() const;
  std::string variant() const;
};

// Flat `key = value` lines; '#' starts a comment; string values may be
// quoted. Unknown keys and malformed values raise InputError with the line
// number.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies one key/value pair; used by the parser and for CLI overrides.
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

// Canonical `key = value` rendering; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& config);

}  // namespace ctedd
