#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "ctedd/particle_world.hpp"
#include "ctedd/rng.hpp"
#include "oracles.hpp"

namespace testing_support {

inline oracle::World to_oracle(const ctedd::WorldState& s) {
  oracle::World w;
  for (const auto& a : s.agents) {
    w.agents.push_back({{a.position.x, a.position.y}, {a.velocity.x, a.velocity.y}, {a.acceleration.x, a.acceleration.y}});
  }
  for (const auto& l : s.landmarks) {
    w.landmarks.push_back({l.position.x, l.position.y});
    w.landmark_vel.push_back({l.velocity.x, l.velocity.y});
  }
  return w;
}

// Random state with agents sometimes clustered near landmarks so bonus and
// collision branches are exercised.
inline ctedd::WorldState random_state(const ctedd::EnvSpec& spec, ctedd::Rng& rng) {
  ctedd::WorldState s = ctedd::reset(spec, rng);
  for (auto& a : s.agents) {
    if (rng.uniform() < 0.5) {
      const auto& l = s.landmarks[rng.index(s.landmarks.size())];
      a.position = {l.position.x + rng.uniform(-0.3, 0.3), l.position.y + rng.uniform(-0.3, 0.3)};
    }
    a.velocity = {rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7)};
    a.acceleration = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
  }
  return s;
}

inline unsigned long unique_counter() {
  static unsigned long n = 0;
  return static_cast<unsigned long>(::getpid()) * 100000ul + ++n;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("ctedd_test_" + tag + "_" + std::to_string(unique_counter()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing_support
