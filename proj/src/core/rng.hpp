#pragma once

#include <cstdint>
#include <random>

namespace slrcmi::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic per-stream seed derivation. Every resampling replicate /
// simulation replicate / MC chunk gets its own engine seeded from
// (master seed, stream id), so results do not depend on how work is
// scheduled across threads.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (stream + 1));
  std::uint64_t z = splitmix64(s);
  z ^= splitmix64(s);
  return z ? z : 0x1ull;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

// Bounded draw via modulo; bias is negligible for n << 2^64 and the mapping
// is stable across platforms, unlike std::uniform_int_distribution.
inline std::size_t uniform_index(std::mt19937_64& eng, std::size_t n) {
  return static_cast<std::size_t>(eng() % n);
}

}  // namespace slrcmi::rng
