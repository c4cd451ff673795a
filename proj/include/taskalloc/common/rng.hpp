#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace taskalloc {

/// Engine used everywhere randomness is needed. mt19937_64's output sequence is
/// fixed by the standard; the distributions in <random> are not, so sampling
/// goes through the helpers below instead.
using Engine = std::mt19937_64;

/// splitmix64 finalizer. Used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed split scheme: root seed -> episode seed -> subsystem seed.
/// `derive_seed(seed, k)` is the seed of the k-th child of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t child) noexcept {
  return mix64(seed ^ mix64(child + 0x632be59bd9b4e019ULL));
}

/// Subsystem seed from a stable label (FNV-1a of the label as the child index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// Uniform integer in [lo, hi], portable across standard libraries.
std::int64_t uniform_int(Engine& eng, std::int64_t lo, std::int64_t hi);

/// Uniform double in [0, 1) from the top 53 bits.
double uniform_unit(Engine& eng);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace taskalloc
