// Deterministic random number generation. Every random decision in a run is
// drawn from one 64-bit seed through named substreams, so any component can
// be replayed in isolation and runs are bit-reproducible across platforms.
#pragma once

#include <cstdint>
#include <string_view>

namespace kdlab {

// SplitMix64. Fully specified arithmetic, no platform-dependent behavior.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased via rejection.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

 private:
  uint64_t state_;
};

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable combination of two seeds (splitmix finalizer over the pair).
constexpr uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named substream of a run seed, e.g. substream(seed, "shuffle").
inline Rng substream(uint64_t seed, std::string_view name) {
  return Rng(mix_seed(seed, fnv1a64(name)));
}

inline Rng substream(uint64_t seed, std::string_view name, uint64_t index) {
  return Rng(mix_seed(mix_seed(seed, fnv1a64(name)), index));
}

}  // namespace kdlab
