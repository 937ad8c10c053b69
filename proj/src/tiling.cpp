#include "tworld/tiling.hpp"

#include <algorithm>
#include <string>

namespace tworld {

std::vector<int> axis_origins(int dim, int tile_size, int stride) {
  if (stride <= 0) throw ShapeError("stride must be positive, got " + std::to_string(stride));
  if (tile_size <= 0) throw ShapeError("tile size must be positive, got " + std::to_string(tile_size));
  if (tile_size > dim)
    throw ShapeError("world smaller than tile: extent " + std::to_string(dim) + " < tile " + std::to_string(tile_size));
  std::vector<int> out;
  const int last = dim - tile_size;
  for (int o = 0;; o += stride) {
    const int clamped = std::min(o, last);
    if (out.empty() || out.back() != clamped) out.push_back(clamped);
    if (clamped == last) break;
  }
  return out;
}

namespace {

TileLayout layout_from_axes(const Coord& dims, int tile_size, int stride) {
  TileLayout layout{dims, tile_size, stride, {}};
  const auto xs = axis_origins(dims.x(), tile_size, stride);
  const auto ys = axis_origins(dims.y(), tile_size, stride);
  const auto zs = axis_origins(dims.z(), tile_size, stride);
  layout.origins.reserve(xs.size() * ys.size() * zs.size());
  for (int x : xs)
    for (int y : ys)
      for (int z : zs) layout.origins.emplace_back(x, y, z);
  return layout;
}

}  // namespace

TileLayout plan_tiles(const Coord& dims, int tile_size, int stride) {
  if (stride > tile_size)
    throw ShapeError("stride " + std::to_string(stride) + " exceeds tile size " + std::to_string(tile_size));
  return layout_from_axes(dims, tile_size, stride);
}

TileLayout decode_layout(const Coord& dims, int tile_size) { return layout_from_axes(dims, tile_size, tile_size); }

CoverageReport coverage_check(const TileLayout& layout) {
  const Coord& dims = layout.dims;
  const int S = layout.tile_size;
  CoverageReport report;
  report.counts.assign(std::size_t(voxel_count(dims)), 0);
  for (const auto& o : layout.origins) {
    check_tile_bounds(dims, o, S);
    for (int x = 0; x < S; ++x)
      for (int y = 0; y < S; ++y) {
        auto base = linear_index(dims, o + Coord(x, y, 0));
        for (int z = 0; z < S; ++z) ++report.counts[std::size_t(base + z)];
      }
  }
  const auto [lo, hi] = std::minmax_element(report.counts.begin(), report.counts.end());
  report.min_count = *lo;
  report.max_count = *hi;
  report.histogram.assign(std::size_t(report.max_count) + 1, 0);
  for (int c : report.counts) ++report.histogram[std::size_t(c)];
  return report;
}

void require_full_coverage(const TileLayout& layout) {
  const auto report = coverage_check(layout);
  if (!report.ok()) {
    for (std::size_t i = 0; i < report.counts.size(); ++i)
      if (report.counts[i] == 0)
        throw CoverageError("voxel " + to_string(unlinear_index(layout.dims, std::int64_t(i))) +
                            " is not covered by any tile");
  }
}

}  // namespace tworld
