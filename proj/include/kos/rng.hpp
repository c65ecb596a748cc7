#ifndef KOS_RNG_HPP
#define KOS_RNG_HPP

#include <cstdint>
#include <random>

namespace kos {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent engine per (seed, stream) pair.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull)));
}

// Uniform double in [lo, hi) built from raw engine bits, so values do not
// depend on the standard library's distribution implementation.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

// Uniform integer in [lo, hi], inclusive. Modulo bias is negligible for the
// small ranges used here.
inline std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(rng() % span);
}

}  // namespace kos

#endif  // KOS_RNG_HPP
