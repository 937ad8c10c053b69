#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <span>
#include <string>

#include "tworld/blend.hpp"
#include "tworld/grid.hpp"

namespace tworld {

/// Numerator and denominator lattices of the blended tile average.
struct Accumulator {
  DenseWorldT<double> num;
  Eigen::ArrayXd den;

  Accumulator(const Coord& dims, int channels) : num(dims, channels, 0.0), den(Eigen::ArrayXd::Zero(voxel_count(dims))) {}
};

/// Half-open slab [begin, end) along x; scatter only touches voxels inside it.
struct XRange {
  int begin = 0;
  int end = 0;
};

/// num += beta * value per channel and den += beta over the tile footprint
/// clipped to `slab`. Voxels outside the footprint are untouched.
template <typename Scalar>
void scatter_accumulate(Accumulator& acc, std::span<const Scalar> tile_values, int channels, const BlendMask& mask,
                        const Coord& origin, XRange slab) {
  const int S = mask.size;
  const Coord& dims = acc.num.dims();
  if (channels != acc.num.channels()) throw ShapeError("tile channel count does not match accumulator");
  if (std::int64_t(tile_values.size()) != std::int64_t(S) * S * S * channels)
    throw ShapeError("tile of " + std::to_string(tile_values.size()) + " values does not match mask of size " +
                     std::to_string(S) + " with " + std::to_string(channels) + " channels");
  check_tile_bounds(dims, origin, S);
  const int x0 = std::max(origin.x(), slab.begin);
  const int x1 = std::min(origin.x() + S, slab.end);
  for (int gx = x0; gx < x1; ++gx) {
    const int x = gx - origin.x();
    for (int y = 0; y < S; ++y) {
      const std::int64_t g = linear_index(dims, Coord(gx, origin.y() + y, origin.z()));
      const std::int64_t l = (std::int64_t(x) * S + y) * S;
      for (int z = 0; z < S; ++z) {
        const double beta = mask.weights[l + z];
        acc.den[g + z] += beta;
        double* num = acc.num.data().data() + (g + z) * channels;
        const Scalar* val = tile_values.data() + (l + z) * channels;
        for (int c = 0; c < channels; ++c) num[c] += beta * double(val[c]);
      }
    }
  }
}

template <typename Scalar>
void scatter_accumulate(Accumulator& acc, std::span<const Scalar> tile_values, int channels, const BlendMask& mask,
                        const Coord& origin) {
  scatter_accumulate(acc, tile_values, channels, mask, origin, XRange{0, acc.num.dims().x()});
}

}  // namespace tworld
