#pragma once

#include <cstdint>
#include <vector>

#include "tworld/grid.hpp"

namespace tworld {

/// Overlapping cubic tile decomposition of a world.
struct TileLayout {
  Coord dims = Coord::Zero();
  int tile_size = 0;
  int stride = 0;
  std::vector<Coord> origins;  // canonical order

  std::size_t size() const { return origins.size(); }
};

/// Origins 0, s, 2s, ... per axis with the last one clamped to dim - S.
std::vector<int> axis_origins(int dim, int tile_size, int stride);

TileLayout plan_tiles(const Coord& dims, int tile_size, int stride);

/// Stride-S layout for tiled decoding; clamped edge tiles may overlap.
TileLayout decode_layout(const Coord& dims, int tile_size);

struct CoverageReport {
  int min_count = 0;
  int max_count = 0;
  std::vector<std::int64_t> histogram;  // histogram[k] = voxels covered exactly k times
  std::vector<int> counts;              // per voxel, canonical order

  bool ok() const { return min_count >= 1; }
};

CoverageReport coverage_check(const TileLayout& layout);

/// Throws CoverageError unless every voxel is covered and all tiles are in bounds.
void require_full_coverage(const TileLayout& layout);

}  // namespace tworld
