#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace priorflow {

using Rng = std::mt19937_64;

/// Named substreams. Every random draw in the library is keyed by
/// (master seed, stream, index) so results never depend on evaluation order.
enum class Stream : std::uint64_t {
  Latent = 0x4c41544eULL,
  Noise = 0x4e4f4953ULL,
  Data = 0x44415441ULL,
  Directions = 0x44495253ULL,
  ObsNodes = 0x4f42534eULL,
  Init = 0x494e4954ULL,
  Inner = 0x494e4e52ULL,
  Iteration = 0x49544552ULL,
  Operator = 0x4f504552ULL,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable hash of (master, tag, index); used to seed per-sample generators.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) noexcept;

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) noexcept {
  return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

void fill_standard_normal(Rng& rng, std::span<double> out);

}  // namespace priorflow
