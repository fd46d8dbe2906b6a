#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctedd/mat.hpp"

namespace ctedd {

class Rng;

struct Transition {
  std::vector<double> state;
  std::vector<double> next_state;
  std::vector<double> joint_action;  // executed (clipped) actions
  double reward = 0.0;
  std::uint64_t t_global = 0;
  bool done = false;
  // Pre-clip Gaussian sample behind joint_action. In-memory only; empty when
  // the behaviour policy was not the global Gaussian policy.
  std::vector<double> sampled_action;
};

// FIFO ring of transitions. Chronological index 0 is the oldest record.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 1'000'000;

  explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity);

  // t_global must strictly increase across pushes.
  void push(Transition t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  std::uint64_t total_pushed() const { return total_pushed_; }

  const Transition& chronological(std::size_t i) const;

  // k draws with replacement, uniform over current contents.
  std::vector<const Transition*> sample_uniform(std::size_t k, Rng& rng) const;

  // Transitions pushed since the previous recent_batch() call, oldest first,
  // limited to what is still stored. Advances the marker.
  std::vector<const Transition*> recent_batch();
  std::size_t pending_recent() const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::uint64_t total_pushed_ = 0;
  std::uint64_t recent_marker_ = 0;  // total_pushed_ at last recent_batch()
};

// Column-stacked view of a set of transitions.
struct Batch {
  Mat states;
  Mat next_states;
  Mat joint_actions;
  Mat sampled_actions;  // pre-clip; equals joint_actions where unavailable
  std::vector<double> rewards;
  std::vector<double> dones;
  std::vector<std::uint64_t> t_global;

  std::size_t size() const { return rewards.size(); }
};

Batch make_batch(std::span<const Transition* const> transitions);

// replay.buf: magic "CTEDDBUF", u32 version, env id (u32 length + UTF-8),
// u32 num_agents, u32 state_dim, u32 action_dim (per agent), u64 record
// count, then fixed-width little-endian f64 records
// <t_global, s, s_next, joint_action, reward, done> in chronological order.
inline constexpr std::uint32_t kBufferFormatVersion = 1;

struct BufferHeader {
  std::string env_id;
  std::uint32_t num_agents = 0;
  std::uint32_t state_dim = 0;
  std::uint32_t action_dim = 0;
};

struct LoadedBuffer {
  BufferHeader header;
  ReplayBuffer buffer;
};

void write_buffer(std::ostream& out, const BufferHeader& header, const ReplayBuffer& buffer);
LoadedBuffer read_buffer(std::istream& in, std::size_t capacity = ReplayBuffer::kDefaultCapacity);
void save_buffer(const std::filesystem::path& path, const BufferHeader& header, const ReplayBuffer& buffer);
LoadedBuffer load_buffer(const std::filesystem::path& path, std::size_t capacity = ReplayBuffer::kDefaultCapacity);

}  // namespace ctedd
