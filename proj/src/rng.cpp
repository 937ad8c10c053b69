#include "tworld/rng.hpp"

#include <cmath>
#include <numbers>

namespace tworld {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53;
constexpr std::uint32_t kMulB = 0xCD9E8D57;
constexpr std::uint32_t kWeylA = 0x9E3779B9;
constexpr std::uint32_t kWeylB = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = std::uint64_t(a) * b;
  hi = std::uint32_t(p >> 32);
  lo = std::uint32_t(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// 53 random bits mapped into the open interval (0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t(hi) << 21) ^ (std::uint64_t(lo) >> 11);  // 53 bits
  return (double(bits & ((1ull << 53) - 1)) + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMulA, ctr[0], hi0, lo0);
    mulhilo(kMulB, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

NoiseSource::NoiseSource(std::uint64_t seed, NoiseStream stream, std::uint32_t substream) {
  std::uint64_t k = seed;
  if (stream != NoiseStream::Init || substream != 0)
    k = splitmix64(seed ^ splitmix64((std::uint64_t(stream) << 32) | substream));
  key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
}

std::array<std::uint32_t, 4> NoiseSource::block(const Coord& p, int channel) const {
  return philox4x32({std::uint32_t(p.x()), std::uint32_t(p.y()), std::uint32_t(p.z()), std::uint32_t(channel)}, key_);
}

double NoiseSource::uniform(const Coord& p, int channel, int word) const {
  const auto r = block(p, channel);
  return word == 0 ? to_unit(r[0], r[1]) : to_unit(r[2], r[3]);
}

double NoiseSource::normal(const Coord& p, int channel) const {
  const auto r = block(p, channel);
  const double u1 = to_unit(r[0], r[1]);
  const double u2 = to_unit(r[2], r[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DenseWorld fill_noise(const Coord& dims, int channels, const NoiseSource& source) {
  DenseWorld world(dims, channels);
  float* out = world.data().data();
  for (int x = 0; x < dims.x(); ++x)
    for (int y = 0; y < dims.y(); ++y)
      for (int z = 0; z < dims.z(); ++z)
        for (int c = 0; c < channels; ++c) *out++ = float(source.normal(Coord(x, y, z), c));
  return world;
}

DenseWorld init_noise(const Coord& dims, int channels, std::uint64_t seed) {
  return fill_noise(dims, channels, NoiseSource(seed, NoiseStream::Init));
}

}  // namespace tworld
