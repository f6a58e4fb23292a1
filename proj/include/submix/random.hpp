#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace submix {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Per-partition seed: splitmix64 chained over the run seed, the FNV-1a hash of
/// the task id and the FNV-1a hash of the template tag. Depends only on its
/// three inputs, so adding or removing tasks never perturbs other partitions.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view task_id,
                                 std::string_view tag) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a64(task_id));
  h = splitmix64(h ^ fnv1a64(tag));
  return h;
}

/// Unbiased draw in [0, bound) by rejection; bit-reproducible across standard
/// libraries, unlike std::uniform_int_distribution.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

/// First `count` entries of a seeded Fisher-Yates shuffle of 0..n-1, in draw order.
inline std::vector<std::size_t> shuffled_prefix(std::size_t n, std::size_t count,
                                                std::uint64_t seed) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::mt19937_64 rng(seed);
  if (count > n) count = n;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace submix
