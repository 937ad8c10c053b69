#include "tworld/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tworld/binary_io.hpp"
#include "tworld/blend.hpp"
#include "tworld/rng.hpp"
#include "tworld/tiling.hpp"

namespace tworld {

LinearDecoder::LinearDecoder(Eigen::MatrixXd weights, Eigen::VectorXd bias, int upsample)
    : weights_(std::move(weights)), bias_(std::move(bias)), upsample_(upsample) {
  if (bias_.size() != weights_.rows()) throw ShapeError("decoder bias length must equal the output channel count");
  if (upsample_ < 1) throw ShapeError("decoder upsample factor must be >= 1");
}

std::string LinearDecoder::name() const {
  return "linear " + std::to_string(weights_.rows()) + "x" + std::to_string(weights_.cols()) +
         (upsample_ > 1 ? " up" + std::to_string(upsample_) : "");
}

int LinearDecoder::output_channels(int input_channels) const {
  if (input_channels != weights_.cols())
    throw ShapeError("linear decoder expects " + std::to_string(weights_.cols()) + " input channels, got " +
                     std::to_string(input_channels));
  return int(weights_.rows());
}

DenseWorld LinearDecoder::decode(const DenseWorld& block, const Coord&) const {
  const int out_c = output_channels(block.channels());
  const Coord out_dims = block.dims() * upsample_;
  DenseWorld out(out_dims, out_c);
  for (int x = 0; x < out_dims.x(); ++x)
    for (int y = 0; y < out_dims.y(); ++y)
      for (int z = 0; z < out_dims.z(); ++z) {
        const Coord p(x, y, z);
        const Eigen::VectorXd in = block.voxel(p / upsample_).cast<double>().matrix();
        out.voxel(p) = (weights_ * in + bias_).cast<float>().array();
      }
  return out;
}

DenseWorld LocalRampDecoder::decode(const DenseWorld& block, const Coord&) const {
  DenseWorld out = block;
  const Coord e = block.dims();
  const double size = double(e.maxCoeff());
  for (int x = 0; x < e.x(); ++x)
    for (int y = 0; y < e.y(); ++y)
      for (int z = 0; z < e.z(); ++z) {
        const float ramp = float(slope_ * double(x + y + z) / size);
        out.voxel(Coord(x, y, z)) += ramp;
      }
  return out;
}

DenseWorld decode_tiled(const DenseWorld& world, const Decoder& decoder, int tile_size, int threads) {
  if (decoder.probabilistic()) throw CapabilityError("stride-S tiled decoding requires a non-probabilistic decoder");
  const TileLayout layout = decode_layout(world.dims(), tile_size);
  const int f = decoder.scale();
  const int out_c = decoder.output_channels(world.channels());
  const Coord out_tile = Coord::Constant(tile_size * f);

  std::vector<DenseWorld> blocks(layout.size());
  Executor(threads).parallel_for(layout.size(), [&](std::size_t i) {
    const Coord& o = layout.origins[i];
    blocks[i] = decoder.decode(extract_box(world, o, Coord::Constant(tile_size)), o);
    if ((blocks[i].dims() != out_tile).any() || blocks[i].channels() != out_c)
      throw ShapeError("decoder returned a block of " + to_string(blocks[i].dims()) + " x " +
                       std::to_string(blocks[i].channels()) + " for tile at " + to_string(o) + ", expected " +
                       to_string(out_tile) + " x " + std::to_string(out_c));
  });

  DenseWorld out(world.dims() * f, out_c);
  for (std::size_t i = 0; i < layout.size(); ++i) write_box(out, layout.origins[i] * f, blocks[i]);
  return out;
}

DenseWorld decode_whole(const DenseWorld& world, const Decoder& decoder) { return decoder.decode(world, Coord::Zero()); }

std::vector<Coord> threshold_occupancy(const DenseWorld& occupancy) {
  if (occupancy.channels() != 1) throw ShapeError("occupancy grid must have exactly one channel");
  std::vector<Coord> out;
  for (std::int64_t v = 0; v < occupancy.voxels(); ++v)
    if (occupancy.data()[v] > 0.0f) out.push_back(unlinear_index(occupancy.dims(), v));
  return out;
}

SparseWorld noise_occupied(const Coord& dims, const std::vector<Coord>& coords, int channels, std::uint64_t seed) {
  const NoiseSource noise(seed, NoiseStream::Occupied);
  SparseWorld::Array values(std::int64_t(coords.size()) * channels);
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (int c = 0; c < channels; ++c) values[std::int64_t(i) * channels + c] = float(noise.normal(coords[i], c));
  return SparseWorld(dims, channels, coords, std::move(values));
}

TwoStageResult run_two_stage(const TwoStageConfig& config, const Denoiser& stage1, const Decoder& structure,
                             const Denoiser& stage2, const Decoder& decoder, const ProgressFn& progress) {
  const RunConfig& c1 = config.stage1;
  const int factor = structure.scale();
  if (structure.output_channels(c1.channels) != 1)
    throw ShapeError("structure decoder must produce a single occupancy channel");
  const int S2 = c1.tile_size * factor;
  const Coord dims2 = c1.dims * factor;

  TwoStageResult result;
  auto on_step = [&](const StepRecord& r) {
    result.steps.push_back(r);
    if (progress) progress(r);
  };

  // Stage 1: dense latent with the large-tile mask downsampled to latent resolution.
  const BlendMask mask1 = downsample_mask(make_mask(c1.mask, S2), factor);
  {
    const TileLayout layout = plan_tiles(c1.dims, c1.tile_size, c1.resolved_stride());
    require_full_coverage(layout);
    const Executor executor(c1.threads);
    CountingDenoiser counter(stage1);
    const StepContext ctx{layout, mask1, counter, c1.prompts, c1.guidance, executor};
    DenseWorld world = init_noise(c1.dims, c1.channels, c1.seed);
    for (int k = c1.schedule.steps(); k >= 1; --k) {
      const auto before = counter.calls();
      try {
        world = tiled_step(world, c1.schedule.t(k), c1.schedule.dt(k), ctx);
      } catch (const Error& e) {
        throw StepError(k, std::string("stage 1: ") + e.what());
      }
      on_step({k, c1.schedule.t(k), c1.schedule.dt(k), layout.size(), 0.0, counter.calls() - before});
    }
    result.stage1 = std::move(world);
    result.denoiser_calls += counter.calls();
  }

  result.occupancy = decode_tiled(result.stage1, structure, c1.tile_size, c1.threads);
  result.occupied = threshold_occupancy(result.occupancy);
  const int C2 = config.stage2_channels;
  result.stage2 = noise_occupied(dims2, result.occupied, C2, c1.seed);
  if (result.occupied.empty()) {
    result.warnings.push_back("occupancy is empty after thresholding; nothing to generate in stage 2");
    result.decoded = DenseWorld(dims2, decoder.output_channels(C2));
    return result;
  }

  // Stage 2: sparse latent on occupied voxels.
  {
    const int stride2 = config.stage2_stride > 0 ? config.stage2_stride : std::max(1, S2 / 2);
    const TileLayout layout = plan_tiles(dims2, S2, stride2);
    require_full_coverage(layout);
    const Executor executor(c1.threads);
    CountingDenoiser counter(stage2);
    PromptGrid prompts2 = c1.prompts;
    if (prompts2.cell_size > 0) prompts2.cell_size *= factor;
    const StepContext ctx2{layout, make_mask(c1.mask, S2), counter, prompts2, c1.guidance, executor};
    SparseWorld world = result.stage2;
    for (int k = c1.schedule.steps(); k >= 1; --k) {
      const auto before = counter.calls();
      try {
        world = sparse_tiled_step(world, c1.schedule.t(k), c1.schedule.dt(k), ctx2);
      } catch (const Error& e) {
        throw StepError(k, std::string("stage 2: ") + e.what());
      }
      on_step({k, c1.schedule.t(k), c1.schedule.dt(k), layout.size(), 0.0, counter.calls() - before});
    }
    result.stage2 = std::move(world);
    result.denoiser_calls += counter.calls();
  }

  const int decode_tile = config.decode_tile > 0 ? config.decode_tile : S2;
  DenseWorld decoded = decode_tiled(densify(result.stage2, 0.0f), decoder, decode_tile, c1.threads);
  if (decoder.scale() == 1) {
    // Only occupied voxels carry content.
    DenseWorld masked(decoded.dims(), decoded.channels());
    for (const auto& p : result.occupied) masked.voxel(p) = decoded.voxel(p);
    decoded = std::move(masked);
  }
  result.decoded = std::move(decoded);
  return result;
}

std::vector<Point> collect_points(const DenseWorld& grid, double threshold, int tile_size,
                                  const std::vector<Coord>* occupied) {
  if (grid.channels() < 3) throw ShapeError("point-cloud export needs at least three channels");
  if (tile_size < 1) throw ShapeError("tile size must be >= 1");
  const double scale = 1.0 / tile_size;
  auto to_u8 = [](float v) { return std::uint8_t(std::lround(std::clamp(double(v), 0.0, 1.0) * 255.0)); };
  std::vector<Point> points;
  auto emit = [&](const Coord& p) {
    const auto v = grid.voxel(p);
    if (!(v.head(3) > float(threshold)).any()) return;
    points.push_back({float((p.x() + 0.5) * scale), float((p.y() + 0.5) * scale), float((p.z() + 0.5) * scale),
                      to_u8(v[0]), to_u8(v[1]), to_u8(v[2])});
  };
  if (occupied) {
    for (const auto& p : *occupied) emit(p);
  } else {
    for (std::int64_t i = 0; i < grid.voxels(); ++i) emit(unlinear_index(grid.dims(), i));
  }
  return points;
}

void write_pointcloud(std::ostream& out, const std::vector<Point>& points) {
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  for (const auto& p : points) {
    le::write<float>(out, p.x);
    le::write<float>(out, p.y);
    le::write<float>(out, p.z);
    le::write<std::uint8_t>(out, p.r);
    le::write<std::uint8_t>(out, p.g);
    le::write<std::uint8_t>(out, p.b);
  }
  if (!out) throw FormatError("failed writing point cloud");
}

void save_pointcloud(const std::string& path, const std::vector<Point>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_pointcloud(out, points);
}

std::vector<Point> read_pointcloud(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError("not a PLY file");
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool binary_le = false;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string kind;
      ss >> kind;
      binary_le = kind == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ss >> name >> count;
      if (name != "vertex") throw FormatError("unexpected PLY element " + name);
    } else if (word == "property") {
      std::string type, name;
      ss >> type >> name;
      properties.push_back(type + " " + name);
    }
  }
  if (line != "end_header") throw FormatError("PLY header is not terminated");
  if (!binary_le) throw FormatError("only binary_little_endian PLY is supported");
  const std::vector<std::string> expected = {"float x",     "float y",     "float z",
                                             "uchar red", "uchar green", "uchar blue"};
  if (properties != expected) throw FormatError("unexpected PLY vertex properties");
  std::vector<Point> points(count);
  for (auto& p : points) {
    p.x = le::read<float>(in);
    p.y = le::read<float>(in);
    p.z = le::read<float>(in);
    p.r = le::read<std::uint8_t>(in);
    p.g = le::read<std::uint8_t>(in);
    p.b = le::read<std::uint8_t>(in);
  }
  return points;
}

std::vector<Point> load_pointcloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open point cloud " + path);
  return read_pointcloud(in);
}

}  // namespace tworld
