#pragma once

#include <cstdint>
#include <random>

namespace interfere {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named substreams of a master seed. Every randomized routine draws from its
// own substream so that, e.g., re-seeding the cbr arm never perturbs the cr arm.
enum class Stream : std::uint64_t {
  arm_split = 1,
  cr_arm = 2,
  cbr_arm = 3,
  stratum = 4,
  replication = 5,
  noise = 6,
  shuffle = 7,
  graph = 8,
  table = 9,
  subsample = 10,
  tie_break = 11,
};

/// Seed of substream (`stream`, `index`) under `seed`. Pure function.
constexpr std::uint64_t substream(std::uint64_t seed, Stream stream,
                                  std::uint64_t index = 0) noexcept {
  const std::uint64_t tagged = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
  return splitmix64(tagged + splitmix64(index));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Engine(substream(seed, stream, index));
}

}  // namespace interfere
