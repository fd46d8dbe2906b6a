#include "ctedd/replay_buffer.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "ctedd/param_store.hpp"
#include "ctedd/rng.hpp"

namespace ctedd {

namespace {
constexpr char kBufMagic[8] = {'C', 'T', 'E', 'D', 'D', 'B', 'U', 'F'};
}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (total_pushed_ > 0 && t.t_global <= chronological(size_ - 1).t_global) {
    throw std::invalid_argument("ReplayBuffer::push: t_global must strictly increase");
  }
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++total_pushed_;
}

const Transition& ReplayBuffer::chronological(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample_uniform(std::size_t k, Rng& rng) const {
  if (size_ == 0) throw std::runtime_error("ReplayBuffer: cannot sample from an empty buffer");
  std::vector<const Transition*> out;
  out.reserve(k);
  for (std::size_t n = 0; n < k; ++n) out.push_back(&ring_[rng.index(size_)]);
  return out;
}

std::size_t ReplayBuffer::pending_recent() const {
  return static_cast<std::size_t>(std::min<std::uint64_t>(total_pushed_ - recent_marker_, size_));
}

std::vector<const Transition*> ReplayBuffer::recent_batch() {
  const std::size_t n = pending_recent();
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = size_ - n; i < size_; ++i) out.push_back(&chronological(i));
  recent_marker_ = total_pushed_;
  return out;
}

Batch make_batch(std::span<const Transition* const> transitions) {
  Batch b;
  if (transitions.empty()) return b;
  const std::size_t n = transitions.size();
  const std::size_t sd = transitions.front()->state.size();
  const std::size_t ad = transitions.front()->joint_action.size();
  b.states = Mat(n, sd);
  b.next_states = Mat(n, sd);
  b.joint_actions = Mat(n, ad);
  b.sampled_actions = Mat(n, ad);
  b.rewards.reserve(n);
  b.dones.reserve(n);
  b.t_global.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& t = *transitions[r];
    if (t.state.size() != sd || t.next_state.size() != sd || t.joint_action.size() != ad) {
      throw DimensionError("make_batch: inconsistent transition widths");
    }
    std::copy(t.state.begin(), t.state.end(), b.states.row(r).begin());
    std::copy(t.next_state.begin(), t.next_state.end(), b.next_states.row(r).begin());
    std::copy(t.joint_action.begin(), t.joint_action.end(), b.joint_actions.row(r).begin());
    const auto& sampled = t.sampled_action.size() == ad ? t.sampled_action : t.joint_action;
    std::copy(sampled.begin(), sampled.end(), b.sampled_actions.row(r).begin());
    b.rewards.push_back(t.reward);
    b.dones.push_back(t.done ? 1.0 : 0.0);
    b.t_global.push_back(t.t_global);
  }
  return b;
}

void write_buffer(std::ostream& out, const BufferHeader& header, const ReplayBuffer& buffer) {
  using namespace binary_io;
  out.write(kBufMagic, sizeof(kBufMagic));
  write_u32(out, kBufferFormatVersion);
  write_string(out, header.env_id);
  write_u32(out, header.num_agents);
  write_u32(out, header.state_dim);
  write_u32(out, header.action_dim);
  write_u64(out, buffer.size());
  const std::size_t joint = static_cast<std::size_t>(header.num_agents) * header.action_dim;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Transition& t = buffer.chronological(i);
    if (t.state.size() != header.state_dim || t.next_state.size() != header.state_dim ||
        t.joint_action.size() != joint) {
      throw DimensionError("write_buffer: transition does not match header dimensions");
    }
    write_f64(out, static_cast<double>(t.t_global));
    for (double v : t.state) write_f64(out, v);
    for (double v : t.next_state) write_f64(out, v);
    for (double v : t.joint_action) write_f64(out, v);
    write_f64(out, t.reward);
    write_f64(out, t.done ? 1.0 : 0.0);
  }
}

LoadedBuffer read_buffer(std::istream& in, std::size_t capacity) {
  using namespace binary_io;
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != 8 || !std::equal(magic, magic + 8, kBufMagic)) throw FormatError("not a CTEDDBUF replay file");
  const std::uint32_t version = read_u32(in);
  if (version != kBufferFormatVersion) throw FormatError("unsupported replay version " + std::to_string(version));
  BufferHeader h;
  h.env_id = read_string(in, 64);
  h.num_agents = read_u32(in);
  h.state_dim = read_u32(in);
  h.action_dim = read_u32(in);
  const std::uint64_t count = read_u64(in);
  LoadedBuffer loaded{h, ReplayBuffer(std::max<std::size_t>(capacity, static_cast<std::size_t>(count)))};
  const std::size_t joint = static_cast<std::size_t>(h.num_agents) * h.action_dim;
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    t.t_global = static_cast<std::uint64_t>(read_f64(in));
    t.state.resize(h.state_dim);
    t.next_state.resize(h.state_dim);
    t.joint_action.resize(joint);
    for (double& v : t.state) v = read_f64(in);
    for (double& v : t.next_state) v = read_f64(in);
    for (double& v : t.joint_action) v = read_f64(in);
    t.reward = read_f64(in);
    t.done = read_f64(in) != 0.0;
    loaded.buffer.push(std::move(t));
  }
  return loaded;
}

void save_buffer(const std::filesystem::path& path, const BufferHeader& header, const ReplayBuffer& buffer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_buffer(out, header, buffer);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedBuffer load_buffer(const std::filesystem::path& path, std::size_t capacity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_buffer(in, capacity);
}

}  // namespace ctedd
