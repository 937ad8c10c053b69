#include "tworld/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tworld/rng.hpp"

namespace tworld {

DenseWorld reference_step(const DenseWorld& world, double t, double dt, const Denoiser& denoiser,
                          const std::string& condition, const GuidanceConfig& guidance) {
  if (!denoiser.capabilities().arbitrary_size)
    throw CapabilityError("reference step needs a denoiser that accepts the whole grid " + to_string(world.dims()));
  const Executor serial(1);
  const DenoiserRequest request{std::span<const float>(world.data().data(), std::size_t(world.data().size())), t,
                                condition, Coord::Zero(), world.dims(), world.channels()};
  const auto velocity = guided_velocities(std::span<const DenoiserRequest>(&request, 1), denoiser, guidance, serial);
  return DenseWorld(world.dims(), world.channels(), euler_update(request.values, velocity.front(), dt));
}

DenseWorld reference_run(const RunConfig& config, const Denoiser& denoiser, const std::string& condition) {
  DenseWorld world = init_noise(config.dims, config.channels, config.seed);
  for (int k = config.schedule.steps(); k >= 1; --k)
    world = reference_step(world, config.schedule.t(k), config.schedule.dt(k), denoiser, condition, config.guidance);
  return world;
}

std::vector<SeamFace> layout_faces(const TileLayout& layout) {
  std::vector<SeamFace> faces;
  for (int axis = 0; axis < 3; ++axis) {
    std::set<int> planes;
    for (const auto& o : layout.origins) {
      if (o[axis] > 0) planes.insert(o[axis]);
      if (o[axis] + layout.tile_size < layout.dims[axis]) planes.insert(o[axis] + layout.tile_size);
    }
    for (int p : planes) faces.push_back({axis, p, 0.0, 0.0});
  }
  return faces;
}

SeamReport seam_discontinuity(const DenseWorld& world, const TileLayout& layout) {
  if ((world.dims() != layout.dims).any()) throw ShapeError("layout does not match world dims");
  SeamReport report;
  report.faces = layout_faces(layout);
  const Coord& dims = world.dims();
  const int C = world.channels();
  double total = 0.0;
  std::int64_t pairs = 0;
  for (auto& face : report.faces) {
    const int a = face.axis;
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    double sum = 0.0;
    std::int64_t n = 0;
    for (int i = 0; i < dims[b]; ++i)
      for (int j = 0; j < dims[c]; ++j) {
        Coord lo, hi;
        lo[a] = face.position - 1;
        hi[a] = face.position;
        lo[b] = hi[b] = i;
        lo[c] = hi[c] = j;
        for (int ch = 0; ch < C; ++ch) {
          const double d = std::abs(double(world.at(hi, ch)) - double(world.at(lo, ch)));
          face.max = std::max(face.max, d);
          sum += d;
          ++n;
        }
      }
    face.mean = n ? sum / double(n) : 0.0;
    report.max = std::max(report.max, face.max);
    total += sum;
    pairs += n;
  }
  report.mean = pairs ? total / double(pairs) : 0.0;
  return report;
}

RunResult autoregressive_baseline(const RunConfig& config, const Denoiser& denoiser, const BaselineOptions& options) {
  const int S = config.tile_size;
  const int overlap = options.overlap > 0 ? options.overlap : config.resolved_stride();
  if (overlap >= S) throw ShapeError("baseline overlap must be smaller than the tile size");
  const TileLayout layout = plan_tiles(config.dims, S, S - overlap);
  require_full_coverage(layout);

  DenseWorld world(config.dims, config.channels);
  DenseWorld generated(config.dims, 1);
  RunResult result;
  for (const auto& origin : layout.origins) {
    RunConfig tile = config;
    tile.dims = Coord::Constant(S);
    tile.stride = S;
    tile.prompts = uniform_prompt(condition_for_tile(config.prompts, origin, S));
    const DenseWorld known = extract_box(world, origin, tile.dims);
    const DenseWorld mask = extract_box(generated, origin, tile.dims);
    RepaintOptions repaint{options.sigma, 1, origin};
    RunResult part = repaint_run(tile, known, mask, repaint, denoiser);
    write_box(world, origin, part.world);
    write_box(generated, origin, DenseWorld(tile.dims, 1, 1.0f));
    result.denoiser_calls += part.denoiser_calls;
    result.steps.insert(result.steps.end(), part.steps.begin(), part.steps.end());
  }
  result.world = std::move(world);
  return result;
}

}  // namespace tworld
