#include "tworld/sampler.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "tworld/accumulate.hpp"
#include "tworld/rng.hpp"

namespace tworld {

Schedule Schedule::uniform(int steps) {
  if (steps < 1) throw ShapeError("schedule needs at least one step");
  std::vector<double> times(std::size_t(steps) + 1);
  for (int k = 0; k <= steps; ++k) times[std::size_t(k)] = double(k) / double(steps);
  return Schedule{std::move(times)};
}

Schedule Schedule::from_times(std::vector<double> times) {
  if (times.size() < 2) throw ShapeError("schedule needs at least one step");
  if (times.front() != 0.0 || times.back() != 1.0) throw ShapeError("schedule must start at t=0 and end at t=1");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw ShapeError("schedule times must be strictly increasing in k");
  return Schedule{std::move(times)};
}

Eigen::ArrayXf cfg_velocity(const Eigen::ArrayXf& v_cond, const Eigen::ArrayXf& v_uncond, double scale) {
  if (v_cond.size() != v_uncond.size()) throw ShapeError("conditional and unconditional velocities differ in shape");
  if (scale == 1.0) return v_cond;
  Eigen::ArrayXf out(v_cond.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = float(double(v_uncond[i]) + scale * (double(v_cond[i]) - double(v_uncond[i])));
  return out;
}

Eigen::ArrayXf euler_update(std::span<const float> values, const Eigen::ArrayXf& velocity, double dt) {
  if (std::int64_t(values.size()) != velocity.size()) throw ShapeError("velocity does not match tile shape");
  Eigen::ArrayXf out(velocity.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = float(double(values[std::size_t(i)]) - dt * double(velocity[i]));
  return out;
}

std::vector<Eigen::ArrayXf> guided_velocities(std::span<const DenoiserRequest> conditional, const Denoiser& denoiser,
                                              const GuidanceConfig& guidance, const Executor& executor) {
  if (!std::isfinite(guidance.scale)) throw ShapeError("guidance scale must be finite");
  const auto caps = denoiser.capabilities();
  std::vector<DenoiserRequest> requests(conditional.begin(), conditional.end());
  const std::size_t n = conditional.size();
  if (guidance.needs_unconditional()) {
    for (std::size_t i = 0; i < n; ++i) {
      DenoiserRequest uncond = conditional[i];
      uncond.condition.clear();
      requests.push_back(std::move(uncond));
    }
  }
  for (const auto& r : requests) check_request(r, caps);

  auto responses = denoiser.velocity_batch(requests, executor);
  if (responses.size() != requests.size()) throw DenoiserError("denoiser returned the wrong number of responses");
  for (std::size_t i = 0; i < requests.size(); ++i) check_response(requests[i], responses[i]);

  std::vector<Eigen::ArrayXf> out(n);
  executor.parallel_for(n, [&](std::size_t i) {
    out[i] = guidance.needs_unconditional()
                 ? cfg_velocity(responses[i].velocity, responses[n + i].velocity, guidance.scale)
                 : std::move(responses[i].velocity);
  });
  return out;
}

namespace {

void check_context(const Coord& dims, const StepContext& ctx, double dt) {
  if (!(dt > 0.0)) throw ShapeError("step size must be positive");
  if (ctx.mask.size != ctx.layout.tile_size) throw ShapeError("mask size does not match layout tile size");
  if ((ctx.layout.dims != dims).any())
    throw ShapeError("layout dims " + to_string(ctx.layout.dims) + " do not match world " + to_string(dims));
}

std::vector<XRange> slabs(int extent, int count) {
  count = std::max(1, std::min(count, extent));
  std::vector<XRange> out;
  for (int i = 0; i < count; ++i) out.push_back({extent * i / count, extent * (i + 1) / count});
  return out;
}

}  // namespace

DenseWorld tiled_step(const DenseWorld& world, double t, double dt, const StepContext& ctx) {
  check_context(world.dims(), ctx, dt);
  const auto& origins = ctx.layout.origins;
  const int S = ctx.layout.tile_size;
  const int C = world.channels();
  const std::size_t T = origins.size();

  std::vector<TileView> tiles(T);
  ctx.executor.parallel_for(T, [&](std::size_t i) { tiles[i] = extract_tile(world, origins[i], S); });

  std::vector<DenoiserRequest> requests(T);
  for (std::size_t i = 0; i < T; ++i)
    requests[i] = DenoiserRequest{std::span<const float>(tiles[i].values.data(), std::size_t(tiles[i].values.size())), t,
                                  condition_for_tile(ctx.prompts, origins[i], S), origins[i], Coord::Constant(S), C};
  auto velocities = guided_velocities(requests, ctx.denoiser, ctx.guidance, ctx.executor);

  std::vector<Eigen::ArrayXf> updated(T);
  ctx.executor.parallel_for(T, [&](std::size_t i) { updated[i] = euler_update(requests[i].values, velocities[i], dt); });

  Accumulator acc(world.dims(), C);
  const auto parts = slabs(world.dims().x(), ctx.executor.threads());
  ctx.executor.parallel_for(parts.size(), [&](std::size_t p) {
    for (std::size_t i = 0; i < T; ++i)
      scatter_accumulate<float>(acc, std::span<const float>(updated[i].data(), std::size_t(updated[i].size())), C,
                                ctx.mask, origins[i], parts[p]);
  });

  DenseWorld out(world.dims(), C);
  ctx.executor.parallel_for(parts.size(), [&](std::size_t p) {
    const std::int64_t plane = std::int64_t(world.dims().y()) * world.dims().z();
    for (std::int64_t v = parts[p].begin * plane; v < parts[p].end * plane; ++v) {
      const double den = acc.den[v];
      if (!(den > 0.0))
        throw CoverageError("voxel " + to_string(unlinear_index(world.dims(), v)) + " is not covered by any tile");
      for (int c = 0; c < C; ++c) out.data()[v * C + c] = float(acc.num.data()[v * C + c] / den);
    }
  });
  return out;
}

SparseWorld sparse_tiled_step(const SparseWorld& world, double t, double dt, const StepContext& ctx) {
  check_context(world.dims(), ctx, dt);
  if (world.empty()) return world;
  const auto& origins = ctx.layout.origins;
  const int S = ctx.layout.tile_size;
  const int C = world.channels();
  const std::int64_t block = std::int64_t(S) * S * S * C;

  // Tiles with no occupied voxel contribute nothing and are not evaluated.
  std::vector<SparseTile> all(origins.size());
  ctx.executor.parallel_for(origins.size(), [&](std::size_t i) { all[i] = sparse_extract_tile(world, origins[i], S); });
  std::vector<SparseTile> tiles;
  for (auto& tile : all)
    if (!tile.members.empty()) tiles.push_back(std::move(tile));
  const std::size_t T = tiles.size();

  std::vector<Eigen::ArrayXf> blocks(T);
  ctx.executor.parallel_for(T, [&](std::size_t i) {
    blocks[i] = Eigen::ArrayXf::Zero(block);
    const auto& tile = tiles[i];
    for (std::size_t k = 0; k < tile.members.size(); ++k) {
      const auto l = linear_index(Coord::Constant(S), tile.local[k]);
      blocks[i].segment(l * C, C) = tile.values.segment(std::int64_t(k) * C, C);
    }
  });

  std::vector<DenoiserRequest> requests(T);
  for (std::size_t i = 0; i < T; ++i)
    requests[i] = DenoiserRequest{std::span<const float>(blocks[i].data(), std::size_t(block)), t,
                                  condition_for_tile(ctx.prompts, tiles[i].origin, S), tiles[i].origin,
                                  Coord::Constant(S), C};
  auto velocities = guided_velocities(requests, ctx.denoiser, ctx.guidance, ctx.executor);

  std::vector<Eigen::ArrayXf> updated(T);
  ctx.executor.parallel_for(T, [&](std::size_t i) { updated[i] = euler_update(requests[i].values, velocities[i], dt); });

  // Entry ranges of an x-slab are contiguous because keys are x-major.
  const std::size_t n = world.size();
  Eigen::ArrayXd num = Eigen::ArrayXd::Zero(std::int64_t(n) * C);
  Eigen::ArrayXd den = Eigen::ArrayXd::Zero(std::int64_t(n));
  const auto parts = slabs(world.dims().x(), ctx.executor.threads());
  ctx.executor.parallel_for(parts.size(), [&](std::size_t p) {
    for (std::size_t i = 0; i < T; ++i) {
      const auto& tile = tiles[i];
      for (std::size_t k = 0; k < tile.members.size(); ++k) {
        const int gx = tile.origin.x() + tile.local[k].x();
        if (gx < parts[p].begin || gx >= parts[p].end) continue;
        const auto l = linear_index(Coord::Constant(S), tile.local[k]);
        const double beta = ctx.mask.weights[l];
        const auto e = std::int64_t(tile.members[k]);
        den[e] += beta;
        for (int c = 0; c < C; ++c) num[e * C + c] += beta * double(updated[i][l * C + c]);
      }
    }
  });

  SparseWorld out = world;
  for (std::size_t e = 0; e < n; ++e) {
    if (!(den[std::int64_t(e)] > 0.0))
      throw CoverageError("occupied voxel " + to_string(world.coord(e)) + " is not covered by any tile");
    for (int c = 0; c < C; ++c)
      out.values()[std::int64_t(e) * C + c] = float(num[std::int64_t(e) * C + c] / den[std::int64_t(e)]);
  }
  return out;
}

RunResult run_schedule(DenseWorld initial, const RunConfig& config, const Denoiser& denoiser, const StepHook& hook,
                       const ProgressFn& progress) {
  const TileLayout layout = plan_tiles(config.dims, config.tile_size, config.resolved_stride());
  require_full_coverage(layout);
  if ((initial.dims() != config.dims).any() || initial.channels() != config.channels)
    throw ShapeError("initial world does not match the run configuration");
  const BlendMask& mask = make_mask(config.mask, config.tile_size);
  const Executor executor(config.threads);
  CountingDenoiser counter(denoiser);
  const StepContext ctx{layout, mask, counter, config.prompts, config.guidance, executor};

  RunResult result{std::move(initial), {}, 0};
  const Schedule& schedule = config.schedule;
  for (int k = schedule.steps(); k >= 1; --k) {
    const auto start = std::chrono::steady_clock::now();
    const auto calls_before = counter.calls();
    try {
      result.world = tiled_step(result.world, schedule.t(k), schedule.dt(k), ctx);
      if (hook) hook(k, schedule.t(k - 1), result.world);
    } catch (const Error& e) {
      throw StepError(k, e.what());
    }
    const StepRecord record{k, schedule.t(k), schedule.dt(k), layout.size(),
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(),
                            counter.calls() - calls_before};
    result.steps.push_back(record);
    if (progress) progress(record);
  }
  result.denoiser_calls = counter.calls();
  return result;
}

RunResult run_diffusion(const RunConfig& config, const Denoiser& denoiser, const ProgressFn& progress) {
  return run_schedule(init_noise(config.dims, config.channels, config.seed), config, denoiser, {}, progress);
}

}  // namespace tworld
