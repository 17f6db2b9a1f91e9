#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xlp {

/// Seeded generator whose outputs are identical on every conforming platform.
///
/// The standard distributions (uniform_int_distribution, normal_distribution, std::shuffle)
/// are implementation-defined, so all derived draws here are computed from the raw
/// mt19937_64 stream, which the standard pins down exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  bool bernoulli(double p) { return uniform01() < p; }
  /// Standard normal via Box-Muller (one draw per call, no cached spare).
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic child seed for a named purpose.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace xlp
