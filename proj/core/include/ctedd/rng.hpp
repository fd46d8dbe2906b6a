#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace ctedd {

// Subsystem tags used to derive independent streams from one experiment seed.
enum class StreamTag : std::uint64_t {
  kInit = 1,
  kEnvironment = 2,
  kExploration = 3,
  kReplay = 4,
  kEvaluation = 5,
  kDistillation = 6,
  kGradcheck = 7,
};

// Counter-based generator: the n-th output is a pure function of (key, n),
// so streams can be split without sharing state. Uniform and normal variates
// are produced by our own transforms to keep sequences identical across
// standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ull)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + mix(counter_++)); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  // Independent child stream; does not advance this stream.
  Rng split(std::uint64_t tag) const;
  Rng split(StreamTag tag) const { return split(static_cast<std::uint64_t>(tag)); }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ctedd
