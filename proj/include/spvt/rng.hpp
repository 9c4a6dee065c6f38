#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace spvt {

// Counter-based pseudo-random generator. A stream is keyed by
// (global seed, purpose tag, stream index), so every stochastic consumer
// owns an independent, reproducible sequence regardless of call order
// elsewhere in the program.
class Rng {
 public:
  Rng(uint64_t seed, std::string_view purpose, uint64_t index = 0) {
    uint64_t k = mix(seed ^ 0x5bf0f1e6u);
    k = mix(k ^ fnv1a(purpose));
    key_ = mix(k ^ (index * 0x9e3779b97f4a7c15ull + 1));
  }

  uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ull;
    return mix(key_ ^ counter_);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n), n >= 1.
  uint64_t next_below(uint64_t n) {
    // Modulo bias is < 2^-53 for every n used here.
    return static_cast<uint64_t>(uniform01() * static_cast<double>(n));
  }

  // Standard normal via Box-Muller (no cached spare, keeps the stream pure).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  // splitmix64 finalizer.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace spvt
