// SPDX-License-Identifier: Apache-2.0
//
// Portable seeded sampling. The standard distributions are
// implementation-defined, so the draws here are built directly on the raw
// mt19937_64 stream to keep outputs identical across standard libraries.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mrkit::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Independent stream seed for item `index` under `base`.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 0x632be59bd9b4e019ull));
}

using Engine = std::mt19937_64;

/// Uniform on [0, 1).
inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform01(e); }

/// Uniform integer on [lo, hi].
inline std::uint64_t uniform_int(Engine& e, std::uint64_t lo, std::uint64_t hi) {
  return lo + static_cast<std::uint64_t>(uniform01(e) * static_cast<double>(hi - lo + 1));
}

/// Standard normal via Box-Muller.
inline double normal(Engine& e) {
  const double u1 = 1.0 - uniform01(e);  // (0, 1]
  const double u2 = uniform01(e);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mrkit::rng
