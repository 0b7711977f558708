#ifndef TASC_RANDOM_HPP
#define TASC_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tasc {

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based child seed: the same (root, path) always yields the same
/// value, independent of the order in which children are requested.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace tasc

#endif  // TASC_RANDOM_HPP
