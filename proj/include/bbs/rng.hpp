#pragma once

#include <cstdint>

namespace bbs {

// SplitMix64: fully specified, fast, and identical on every platform.
// Used both as the sample-level generator and as the mixer that derives
// independent per-sample streams from (master seed, sample index), so
// parallel sampling is order-independent.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1. Uses 128-bit multiply, bias < 2^-64.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream seed for sample `index` under `master`. Documented scheme:
// mix the master seed with the golden-gamma multiple of (index+1).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64((index + 1) * 0x9e3779b97f4a7c15ULL));
}

}  // namespace bbs
