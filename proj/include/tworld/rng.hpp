#pragma once

#include <array>
#include <cstdint>

#include "tworld/grid.hpp"

namespace tworld {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Named noise streams; a stream plus a seed selects an independent key.
enum class NoiseStream : std::uint32_t {
  Init = 0,
  Occupied = 1,
  ForwardNoise = 2,
  Renoise = 3,
};

/// Standard normal keyed on (seed, stream, sub-stream, coordinate, channel).
/// The value does not depend on world dims or on evaluation order.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, NoiseStream stream = NoiseStream::Init, std::uint32_t substream = 0);

  double normal(const Coord& p, int channel) const;
  /// Uniform in (0, 1).
  double uniform(const Coord& p, int channel, int word = 0) const;

 private:
  std::array<std::uint32_t, 4> block(const Coord& p, int channel) const;

  std::array<std::uint32_t, 2> key_;
};

/// Fills a dense world with i.i.d. standard normals from `source`.
DenseWorld fill_noise(const Coord& dims, int channels, const NoiseSource& source);

DenseWorld init_noise(const Coord& dims, int channels, std::uint64_t seed);

}  // namespace tworld
