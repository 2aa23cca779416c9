#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace pourbench {

/// One round of the SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// FNV-1a, for turning names into stable stream tags.
constexpr std::uint64_t stable_hash(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Derives an independent RNG stream seed from a master seed and a path of
/// tags (scenario index, container, pour index, ...). Order matters.
constexpr std::uint64_t derive_seed(
    std::uint64_t master, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t t : tags) s = splitmix64(s ^ splitmix64(t));
  return s;
}

}  // namespace pourbench
