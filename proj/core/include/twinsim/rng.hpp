#pragma once

#include <cstdint>
#include <string_view>

namespace twinsim {

// Deterministic 64-bit generator (splitmix64) with pinned sampling
// transforms. <random> distributions are implementation-defined, so every
// draw here is spelled out to keep (scenario, seed) results identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // [0, 1) with 53 random bits.
  double next_unit();

  double next_uniform(double lo, double hi);

  // Inverse-CDF transform, rate > 0.
  double next_exponential(double rate);

  // Box-Muller, one draw per call, no cached spare.
  double next_normal(double mean, double stddev);

  std::uint64_t next_below(std::uint64_t n);

  // splitmix64 finalizer, used for seed derivation.
  static std::uint64_t mix(std::uint64_t x);

  // Stream seed for (root, stream): adding streams never perturbs others.
  static std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream);

  // FNV-1a 64; stable across platforms, unlike std::hash.
  static std::uint64_t hash_id(std::string_view id);

 private:
  std::uint64_t state_;
};

}  // namespace twinsim
