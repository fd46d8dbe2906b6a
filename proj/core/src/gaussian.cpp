#include "ctedd/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ctedd/policy_networks.hpp"
#include "ctedd/rng.hpp"

namespace ctedd {

std::vector<double> GaussianActionSample::pre_clip() const {
  std::vector<double> x(mean.size());
  for (std::size_t d = 0; d < mean.size(); ++d) x[d] = mean[d] + epsilon[d] * std[d];
  return x;
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> std, std::span<const double> x) {
  if (mean.size() != std.size() || mean.size() != x.size()) {
    throw DimensionError("gaussian_log_prob: dimension mismatch");
  }
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    if (!(std[d] > 0.0)) throw std::invalid_argument("gaussian_log_prob: std must be positive");
    const double z = (x[d] - mean[d]) / std[d];
    lp += -0.5 * z * z - std::log(std[d]) - half_log_two_pi;
  }
  return lp;
}

double gaussian_entropy(std::span<const double> std) {
  const double half_log_two_pi_e = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (double s : std) {
    if (!(s > 0.0)) throw std::invalid_argument("gaussian_entropy: std must be positive");
    h += half_log_two_pi_e + std::log(s);
  }
  return h;
}

std::vector<GaussianActionSample> sample_actions(const GlobalPolicyNet& net, std::span<const double> state, Rng& rng,
                                                 std::optional<double> std_override) {
  const Mat s = Mat::row_vector(state);
  const std::vector<Mat> means = net.means(s);
  std::vector<Mat> stds;
  if (!std_override) stds = net.stds(s);

  std::vector<GaussianActionSample> out(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    auto& sample = out[i];
    const auto mu = means[i].row(0);
    sample.mean.assign(mu.begin(), mu.end());
    if (std_override) {
      sample.std.assign(mu.size(), *std_override);
    } else {
      const auto sd = stds[i].row(0);
      sample.std.assign(sd.begin(), sd.end());
    }
    sample.epsilon.resize(mu.size());
    sample.action.resize(mu.size());
    for (std::size_t d = 0; d < mu.size(); ++d) {
      sample.epsilon[d] = rng.normal();
      sample.action[d] = std::clamp(sample.mean[d] + sample.epsilon[d] * sample.std[d], -1.0, 1.0);
    }
  }
  return out;
}

}  // namespace ctedd
