#pragma once

#include <cstdint>
#include <random>

namespace subsde {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used only to derive stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under root seed `root`.
///
/// Splitting rule: seed = splitmix64(root XOR splitmix64(index + 1)). Every
/// Monte Carlo path i of a batch draws from Rng(stream_seed(root, i)), so a
/// batch is reproducible independently of how it is partitioned across
/// worker threads.
constexpr std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(root ^ splitmix64(index + 1));
}

inline Rng make_stream(std::uint64_t root, std::uint64_t index) {
  return Rng(stream_seed(root, index));
}

}  // namespace subsde
