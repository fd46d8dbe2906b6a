#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ctedd/mat.hpp"

namespace ctedd {

class GlobalPolicyNet;
class Rng;

// One agent's exploratory action a = clip(mean + epsilon * std, -1, 1).
struct GaussianActionSample {
  std::vector<double> action;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> epsilon;

  std::vector<double> pre_clip() const;
};

// Diagonal Gaussian log-density. Throws std::invalid_argument unless std > 0.
double gaussian_log_prob(std::span<const double> mean, std::span<const double> std, std::span<const double> x);
// sum_d (0.5 * ln(2 pi e) + ln std_d)
double gaussian_entropy(std::span<const double> std);

// Samples every agent's action for one state. std_override replaces the
// learned standard deviations (fixed-sigma ablation, or 0 for pure means).
std::vector<GaussianActionSample> sample_actions(const GlobalPolicyNet& net, std::span<const double> state, Rng& rng,
                                                 std::optional<double> std_override = std::nullopt);

}  // namespace ctedd
