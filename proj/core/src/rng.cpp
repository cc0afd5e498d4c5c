#include "twinsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace twinsim {

std::uint64_t Rng::mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix(state_);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_unit();
}

double Rng::next_exponential(double rate) {
  // -ln(1-u)/rate, u in [0,1) so the argument stays in (0,1]
  return -std::log(1.0 - next_unit()) / rate;
}

double Rng::next_normal(double mean, double stddev) {
  double u1 = 1.0 - next_unit();  // (0, 1]
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  // modulo bias is < 2^-53 for the sizes used here
  return next_u64() % n;
}

std::uint64_t Rng::stream_seed(std::uint64_t root, std::uint64_t stream) {
  return mix(mix(root) ^ stream);
}

std::uint64_t Rng::hash_id(std::string_view id) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace twinsim
