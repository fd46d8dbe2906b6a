#include "ctedd/rng.hpp"

#include <cmath>
#include <numbers>

namespace ctedd {

double Rng::normal() {
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling removes modulo bias.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = max() - (max() % bound);
  std::uint64_t x = (*this)();
  while (x >= limit) x = (*this)();
  return static_cast<std::size_t>(x % bound);
}

Rng Rng::split(std::uint64_t tag) const {
  return Rng(FromKey{}, mix(key_ ^ mix(tag + 0x3c6ef372fe94f82bull)));
}

}  // namespace ctedd
