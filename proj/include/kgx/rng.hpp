#pragma once

// Counter-based randomness: value = mix(seed, stream, counter).  Stateless by
// construction, so a sample's draws depend only on its indices — never on how
// samples are split across worker threads.  Estimates are therefore
// bit-identical for any worker count, which the test suite pins.

#include <cstdint>

namespace kgx {

// splitmix64 finalizer (Stafford mix 13).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// Derived base for a (seed, stream) substream.
inline std::uint64_t substream_base(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + kGolden) ^ mix64(stream * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull);
}

// i-th word of a substream.
inline std::uint64_t rng_word(std::uint64_t base, std::uint64_t i) {
  return mix64(base + i * kGolden);
}

// 53-bit mantissa uniform in [0, 1).
inline double u53(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

inline double uniform53(std::uint64_t base, std::uint64_t i) { return u53(rng_word(base, i)); }

}  // namespace kgx
