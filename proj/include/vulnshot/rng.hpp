#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace vulnshot::rng {

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// mt19937_64 seeded from (seed, fnv1a(key)) through std::seed_seq.
inline std::mt19937_64 keyed(std::uint64_t seed, std::string_view key) {
  const std::uint64_t h = fnv1a(key);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform in [0, bound), bound > 0, by rejection sampling.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - kMax % bound;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

}  // namespace vulnshot::rng
