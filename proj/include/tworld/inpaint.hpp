#pragma once

#include <cstdint>

#include "tworld/denoiser.hpp"
#include "tworld/grid.hpp"
#include "tworld/rng.hpp"
#include "tworld/sampler.hpp"

namespace tworld {

/// Per-voxel keep weight in [0, 1] (1 = keep ground truth).
struct KeepMask {
  DenseWorldT<double> values;  // C = 1
  double sigma = 0.0;
};

/// Normalized Gaussian taps for offsets -R..R, R = ceil(3 sigma).
Eigen::ArrayXd gaussian_kernel(double sigma);

/// Half-sample symmetric reflection into [0, n).
int reflect_index(int i, int n);

/// Separable Gaussian blur with reflective boundary; sigma = 0 is the identity.
KeepMask blur_mask(const DenseWorldT<double>& binary, double sigma);

/// Keep mask used during re-imposition: the blurred mask, raised to 1 wherever
/// the binary mask is 1 so hard-masked voxels are reproduced exactly.
KeepMask keep_mask_from_binary(const DenseWorld& binary, double sigma);

/// (1 - t) x0 + t eps with eps from `noise`, keyed on coordinate + `offset`.
DenseWorld forward_noise(const DenseWorld& x0, double t, const NoiseSource& noise, const Coord& offset = Coord::Zero());
DenseWorld forward_noise(const DenseWorld& x0, double t, std::uint64_t seed);

/// Moves a sample on the linear path from t_from to t_to > t_from.
DenseWorld renoise(const DenseWorld& x, double t_from, double t_to, const NoiseSource& noise,
                   const Coord& offset = Coord::Zero());

/// m * known + (1 - m) * generated per voxel and channel.
void impose(DenseWorld& generated, const DenseWorld& known, const KeepMask& mask);

struct RepaintOptions {
  double sigma = 1.5;
  int resample = 1;             // r: passes per step
  Coord noise_offset = Coord::Zero();  // global position of the world's (0,0,0) for noise keys
};

/// RePaint-style generation conditioned on `ground_truth` where `binary_mask` is 1.
RunResult repaint_run(const RunConfig& config, const DenseWorld& ground_truth, const DenseWorld& binary_mask,
                      const RepaintOptions& options, const Denoiser& denoiser, const ProgressFn& progress = {});

}  // namespace tworld
