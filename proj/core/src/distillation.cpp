#include "ctedd/distillation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctedd/adam.hpp"

namespace ctedd {

void DistillConfig::validate() const {
  if (batch == 0) throw std::invalid_argument("DistillConfig: batch must be positive");
  if (repetitions_per_batch == 0) throw std::invalid_argument("DistillConfig: repetitions_per_batch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("DistillConfig: lr must be positive");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw std::invalid_argument("DistillConfig: holdout_fraction must lie in [0, 1)");
  }
}

ChronologicalBatcher::ChronologicalBatcher(const ReplayBuffer& buffer, const GlobalPolicyNet& teacher,
                                           std::size_t batch_size)
    : ChronologicalBatcher(buffer, teacher, batch_size, 0, buffer.size()) {}

ChronologicalBatcher::ChronologicalBatcher(const ReplayBuffer& buffer, const GlobalPolicyNet& teacher,
                                           std::size_t batch_size, std::size_t begin, std::size_t end)
    : buffer_(buffer), teacher_(teacher), batch_size_(batch_size), begin_(begin), end_(end), cursor_(begin) {
  if (buffer.empty()) throw std::invalid_argument("ChronologicalBatcher: empty buffer");
  if (batch_size == 0) throw std::invalid_argument("ChronologicalBatcher: batch size must be positive");
  if (begin > end || end > buffer.size()) throw std::out_of_range("ChronologicalBatcher: bad range");
}

std::size_t ChronologicalBatcher::batch_count() const { return (end_ - begin_ + batch_size_ - 1) / batch_size_; }

bool ChronologicalBatcher::next(DistillBatch& out) {
  if (cursor_ >= end_) return false;
  const std::size_t stop = std::min(end_, cursor_ + batch_size_);
  out = make_distill_batch(buffer_, teacher_, cursor_, stop);
  cursor_ = stop;
  return true;
}

DistillBatch make_distill_batch(const ReplayBuffer& buffer, const GlobalPolicyNet& teacher, std::size_t begin,
                                std::size_t end) {
  if (begin >= end || end > buffer.size()) throw std::out_of_range("make_distill_batch: bad range");
  DistillBatch b;
  const std::size_t sd = buffer.chronological(begin).state.size();
  b.states = Mat(end - begin, sd);
  b.t_global.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const Transition& t = buffer.chronological(i);
    std::copy(t.state.begin(), t.state.end(), b.states.row(i - begin).begin());
    b.t_global.push_back(t.t_global);
  }
  b.teacher_targets = teacher.means(b.states);
  return b;
}

namespace {

double loss_and_residuals(const LocalCommPolicyNet::Pass& pass, const DistillBatch& batch, std::vector<Mat>* residuals) {
  const double n = static_cast<double>(batch.states.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < pass.actions.size(); ++i) {
    Mat r = pass.actions[i] - batch.teacher_targets[i];
    loss += squared_norm(r);
    if (residuals) {
      scale_inplace(r, 2.0 / n);
      residuals->push_back(std::move(r));
    }
  }
  return loss / n;
}

void check_dims(const LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch) {
  if (students.dims().num_agents != spec.num_agents || batch.teacher_targets.size() != spec.num_agents) {
    throw DimensionError("distillation: agent count mismatch");
  }
  if (batch.states.rows() == 0) throw std::invalid_argument("distillation: empty batch");
}

}  // namespace

double distill_loss(const LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch) {
  check_dims(students, spec, batch);
  const auto obs = observe_batch(spec, batch.states);
  return loss_and_residuals(students.forward(obs), batch, nullptr);
}

double distill_gradient(LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch) {
  check_dims(students, spec, batch);
  const auto obs = observe_batch(spec, batch.states);
  const auto pass = students.forward(obs);
  std::vector<Mat> d_actions;
  const double loss = loss_and_residuals(pass, batch, &d_actions);
  students.backward(pass, d_actions);
  return loss;
}

double distill_step(LocalCommPolicyNet& students, const EnvSpec& spec, const DistillBatch& batch,
                    const DistillConfig& config) {
  ParamStore& params = students.params();
  params.zero_grad();
  const double loss = distill_gradient(students, spec, batch);
  if (!std::isfinite(loss)) throw NumericError("distill_step: non-finite loss");
  if (config.grad_clip > 0.0) params.clip_grad_norm(config.grad_clip);
  adam_step(params, config.lr);
  return loss;
}

std::size_t holdout_begin(std::size_t buffer_size, double holdout_fraction) {
  const auto held = static_cast<std::size_t>(std::floor(static_cast<double>(buffer_size) * holdout_fraction));
  return buffer_size - std::min(held, buffer_size);
}

DistillResult distill_train(LocalCommPolicyNet& students, const GlobalPolicyNet& teacher, const EnvSpec& spec,
                            const ReplayBuffer& buffer, const DistillConfig& config) {
  config.validate();
  if (students.dims().msg_dim != config.msg_dim) {
    throw std::invalid_argument("distill_train: student message dim " + std::to_string(students.dims().msg_dim) +
                                " does not match config " + std::to_string(config.msg_dim));
  }
  if (buffer.empty()) throw std::invalid_argument("distill_train: empty buffer");

  DistillResult result;
  result.holdout_begin = holdout_begin(buffer.size(), config.holdout_fraction);
  if (result.holdout_begin == 0) return result;
  result.train_samples = result.holdout_begin;

  ChronologicalBatcher batcher(buffer, teacher, config.batch, 0, result.holdout_begin);
  DistillBatch batch;
  std::size_t index = 0;
  while (batcher.next(batch)) {
    DistillTracePoint point{index++, batch.t_global.back(), 0.0};
    for (std::size_t rep = 0; rep < config.repetitions_per_batch; ++rep) {
      const double loss = distill_step(students, spec, batch, config);
      if (rep == 0) point.loss = loss;
    }
    result.trace.push_back(point);
  }
  return result;
}

FidelityReport fidelity_report(const LocalCommPolicyNet& students, const GlobalPolicyNet& teacher, const EnvSpec& spec,
                               const Mat& probe_states) {
  if (probe_states.rows() == 0) throw std::invalid_argument("fidelity_report: no probe states");
  DistillBatch batch;
  batch.states = probe_states;
  batch.teacher_targets = teacher.means(probe_states);
  const auto obs = observe_batch(spec, probe_states);
  const auto pass = students.forward(obs);

  FidelityReport report;
  report.probes = probe_states.rows();
  report.loss = loss_and_residuals(pass, batch, nullptr);
  const double n = static_cast<double>(report.probes);
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const Mat& t = batch.teacher_targets[i];
    const Mat& a = pass.actions[i];
    report.mse.push_back(squared_norm(a - t) / static_cast<double>(t.size()));
    double cos_sum = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double dot = 0.0, nt = 0.0, na = 0.0;
      for (std::size_t d = 0; d < t.cols(); ++d) {
        dot += t(r, d) * a(r, d);
        nt += t(r, d) * t(r, d);
        na += a(r, d) * a(r, d);
      }
      constexpr double kTiny = 1e-24;
      if (nt < kTiny && na < kTiny) {
        cos_sum += 1.0;
      } else if (nt >= kTiny && na >= kTiny) {
        cos_sum += dot / std::sqrt(nt * na);
      }
    }
    report.cosine.push_back(cos_sum / n);
  }
  return report;
}

}  // namespace ctedd
