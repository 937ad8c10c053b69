#pragma once

#include <string>
#include <vector>

#include "tworld/denoiser.hpp"
#include "tworld/grid.hpp"
#include "tworld/inpaint.hpp"
#include "tworld/sampler.hpp"
#include "tworld/tiling.hpp"

namespace tworld {

/// Single untiled Euler update over the whole grid. Needs a size-flexible denoiser.
DenseWorld reference_step(const DenseWorld& world, double t, double dt, const Denoiser& denoiser,
                          const std::string& condition, const GuidanceConfig& guidance);

/// Untiled run over a whole schedule, seeded exactly like run_diffusion.
DenseWorld reference_run(const RunConfig& config, const Denoiser& denoiser, const std::string& condition);

/// Interior planes of a layout: position p separates voxels p-1 and p on `axis`.
struct SeamFace {
  int axis = 0;
  int position = 0;
  double max = 0.0;
  double mean = 0.0;
};

struct SeamReport {
  std::vector<SeamFace> faces;
  double max = 0.0;
  double mean = 0.0;  // over every voxel pair and channel on every face
};

/// Plane positions per axis where some tile face lies strictly inside the world.
std::vector<SeamFace> layout_faces(const TileLayout& layout);

/// Max and mean |value(p) - value(p + normal)| across each interior tile face.
SeamReport seam_discontinuity(const DenseWorld& world, const TileLayout& layout);

struct BaselineOptions {
  int overlap = 0;     // 0 selects the run's stride
  double sigma = 0.0;  // blur of the known-region mask inside each tile
};

/// Tiles generated one after another in canonical order; each tile's overlap with
/// already-generated content is held fixed by RePaint restricted to the tile.
RunResult autoregressive_baseline(const RunConfig& config, const Denoiser& denoiser, const BaselineOptions& options = {});

}  // namespace tworld
