#pragma once

#include <vector>

#include "ctedd/policy_networks.hpp"

namespace testing_support {

using ctedd::ActionCritic;
using ctedd::GlobalPolicyNet;
using ctedd::Mat;

// Q(s, a) = -sum (a - target)^2 with a fixed target joint action.
class QuadraticCritic final : public ActionCritic {
 public:
  explicit QuadraticCritic(std::vector<double> target) : target_(std::move(target)) {}
  Mat value(const Mat& s, const Mat& a) const override {
    Mat q(s.rows(), 1);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) q(r, 0) -= (a(r, c) - target_[c]) * (a(r, c) - target_[c]);
    }
    return q;
  }
  Mat action_gradient(const Mat&, const Mat& a) const override {
    Mat g(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) g(r, c) = -2.0 * (a(r, c) - target_[c]);
    }
    return g;
  }

 private:
  std::vector<double> target_;
};

class ConstantCritic final : public ActionCritic {
 public:
  Mat value(const Mat& s, const Mat&) const override { return Mat(s.rows(), 1); }
  Mat action_gradient(const Mat&, const Mat& a) const override { return Mat(a.rows(), a.cols()); }
};

// Q(s, a) = -|a - mu(s)|^2 around the net's current (fixed) means.
class PeakAtMeanCritic final : public ActionCritic {
 public:
  explicit PeakAtMeanCritic(const GlobalPolicyNet& net) : net_(net) {}
  Mat value(const Mat& s, const Mat& a) const override {
    const Mat mu = ctedd::join_actions(net_.means(s));
    Mat q(s.rows(), 1);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) q(r, 0) -= (a(r, c) - mu(r, c)) * (a(r, c) - mu(r, c));
    }
    return q;
  }
  Mat action_gradient(const Mat& s, const Mat& a) const override {
    const Mat mu = ctedd::join_actions(net_.means(s));
    Mat g(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) g(r, c) = -2.0 * (a(r, c) - mu(r, c));
    }
    return g;
  }

 private:
  const GlobalPolicyNet& net_;
};

}  // namespace testing_support
