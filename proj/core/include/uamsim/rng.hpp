#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uamsim {

/// Derives an independent named sub-stream seed from a master seed, so that
/// all randomness in a run flows from one manifest seed ("env", "init",
/// "rollout", ...).
inline std::uint64_t substream_seed(std::uint64_t master, std::string_view name) {
  // FNV-1a over the name, then a splitmix64 finalizer over the combination.
  std::uint64_t h = 14695981039346656037ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view name) {
  return std::mt19937_64(substream_seed(master, name));
}

}  // namespace uamsim
