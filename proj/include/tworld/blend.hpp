#pragma once

#include <Eigen/Core>

#include <vector>

#include "tworld/grid.hpp"
#include "tworld/tiling.hpp"

namespace tworld {

enum class MaskKind { Cosine, Box };

/// S^3 per-local-voxel blend weights; separable product of a 1D profile.
struct BlendMask {
  MaskKind kind = MaskKind::Cosine;
  int size = 0;
  Eigen::ArrayXd profile;  // length S
  Eigen::ArrayXd weights;  // length S^3, local canonical order

  double at(const Coord& local) const {
    return weights[(std::int64_t(local.x()) * size + local.y()) * size + local.z()];
  }
};

/// cos(pi((d+1)/(S+1) - 1/2)) for d in {0..S-1}, else 0.
double cosine_profile(int d, int size);

/// Product of the per-axis profiles; exactly 0 outside {0..S-1}^3.
double cosine_weight(const Coord& local, int size);

/// Cached per size; the reference stays valid for the process lifetime.
const BlendMask& build_mask(int size);

/// Uniform weights; the no-blending ablation.
const BlendMask& box_mask(int size);

const BlendMask& make_mask(MaskKind kind, int size);

enum class DownsampleMode {
  Recompute,    // evaluate the same profile at the smaller size
  AveragePool,  // mean of each factor^3 block
};

BlendMask downsample_mask(const BlendMask& mask, int factor, DownsampleMode mode = DownsampleMode::Recompute);

/// Normalized weights beta_i / sum(beta) of every tile covering `voxel`, in layout order.
std::vector<double> normalized_weights_at(const TileLayout& layout, const BlendMask& mask, const Coord& voxel);

/// Per-voxel sum of normalized weights over covering tiles (1 wherever covered).
Eigen::ArrayXd normalized_weight_sums(const TileLayout& layout, const BlendMask& mask);

}  // namespace tworld
