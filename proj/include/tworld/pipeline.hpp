#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tworld/denoiser.hpp"
#include "tworld/grid.hpp"
#include "tworld/sampler.hpp"

namespace tworld {

/// Maps a block of latent voxels to a (possibly upsampled) payload block.
/// decode() must be a pure function of its input block and origin.
class Decoder {
 public:
  virtual ~Decoder() = default;

  virtual std::string name() const = 0;
  virtual int output_channels(int input_channels) const = 0;
  /// Spatial upsampling factor of the output block.
  virtual int scale() const { return 1; }
  virtual bool probabilistic() const { return false; }
  /// True when each output voxel depends only on its own input voxel.
  virtual bool pointwise() const { return true; }
  virtual DenseWorld decode(const DenseWorld& block, const Coord& origin) const = 0;
};

class IdentityDecoder final : public Decoder {
 public:
  std::string name() const override { return "identity"; }
  int output_channels(int input_channels) const override { return input_channels; }
  DenseWorld decode(const DenseWorld& block, const Coord&) const override { return block; }
};

/// out = W * in + b per voxel, replicated over a factor^3 block when upsampling.
class LinearDecoder final : public Decoder {
 public:
  LinearDecoder(Eigen::MatrixXd weights, Eigen::VectorXd bias, int upsample = 1);

  std::string name() const override;
  int output_channels(int input_channels) const override;
  int scale() const override { return upsample_; }
  DenseWorld decode(const DenseWorld& block, const Coord& origin) const override;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  int upsample_;
};

/// Adds slope * (x' + y' + z') / S for local position (x', y', z'): every
/// decoded tile carries its own ramp, so tile borders show up as jumps.
class LocalRampDecoder final : public Decoder {
 public:
  explicit LocalRampDecoder(double slope) : slope_(slope) {}

  std::string name() const override { return "ramp"; }
  int output_channels(int input_channels) const override { return input_channels; }
  bool pointwise() const override { return false; }
  DenseWorld decode(const DenseWorld& block, const Coord& origin) const override;

 private:
  double slope_;
};

/// Non-overlapping stride-S decode; clamped edge overlap is resolved by the
/// later tile in canonical order.
DenseWorld decode_tiled(const DenseWorld& world, const Decoder& decoder, int tile_size, int threads = 1);

/// Applies the decoder once to the whole grid.
DenseWorld decode_whole(const DenseWorld& world, const Decoder& decoder);

/// Coordinates whose (single-channel) value is strictly greater than zero.
std::vector<Coord> threshold_occupancy(const DenseWorld& occupancy);

/// Standard normal values on the given coordinates, keyed by global position.
SparseWorld noise_occupied(const Coord& dims, const std::vector<Coord>& coords, int channels, std::uint64_t seed);

struct TwoStageConfig {
  RunConfig stage1;          // dense structure stage; tile_size is the latent tile
  int stage2_channels = 8;
  int stage2_stride = 0;     // 0 selects half the stage-2 tile
  int decode_tile = 0;       // 0 selects the stage-2 tile
};

struct TwoStageResult {
  DenseWorld stage1;          // dense latent at t=0
  DenseWorld occupancy;       // structure decoder output (C = 1)
  SparseWorld stage2;         // sparse latent at t=0
  DenseWorld decoded;         // final payload, zero outside the occupancy
  std::vector<Coord> occupied;
  std::vector<std::string> warnings;
  std::uint64_t denoiser_calls = 0;
  std::vector<StepRecord> steps;
};

/// Dense stage -> structure decode -> threshold -> noised sparse stage -> tiled decode.
/// The stage-2 tile is the stage-1 tile times the structure decoder's scale;
/// the stage-1 mask is the stage-2 mask downsampled by that factor.
TwoStageResult run_two_stage(const TwoStageConfig& config, const Denoiser& stage1, const Decoder& structure,
                             const Denoiser& stage2, const Decoder& decoder, const ProgressFn& progress = {});

struct Point {
  float x = 0, y = 0, z = 0;
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Voxels whose first three channels exceed `threshold` in any component
/// (optionally only occupied ones). Positions are voxel centres scaled so one
/// tile spans a unit cube; colours are the first three channels clamped to [0, 1].
std::vector<Point> collect_points(const DenseWorld& grid, double threshold, int tile_size,
                                  const std::vector<Coord>* occupied = nullptr);

/// Binary little-endian PLY with x, y, z float and red, green, blue uchar.
void write_pointcloud(std::ostream& out, const std::vector<Point>& points);
void save_pointcloud(const std::string& path, const std::vector<Point>& points);
std::vector<Point> read_pointcloud(std::istream& in);
std::vector<Point> load_pointcloud(const std::string& path);

}  // namespace tworld
