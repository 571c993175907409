#pragma once

// Counter-based pseudo-randomness. Every draw is a pure function of
// (seed, stream tag, up to three counters), mixed with SplitMix64, so draw
// order and threading never change results. Uniforms take the top 53 bits;
// normals use Box-Muller on two uniforms drawn from sub-streams 0 and 1.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lfrefine::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                            std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ tag);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

// Uniform in [0, 1).
constexpr double uniform(std::uint64_t k) noexcept {
  return static_cast<double>(k >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                      std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  return uniform(key(seed, tag, a, b, c));
}

inline double normal(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                     std::uint64_t b = 0) noexcept {
  const std::uint64_t base = key(seed, tag, a, b);
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform(splitmix64(base ^ 0));
  const double u2 = uniform(splitmix64(base ^ 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace lfrefine::rng
