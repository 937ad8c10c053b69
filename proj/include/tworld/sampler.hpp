#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tworld/blend.hpp"
#include "tworld/denoiser.hpp"
#include "tworld/grid.hpp"
#include "tworld/parallel.hpp"
#include "tworld/prompts.hpp"
#include "tworld/tiling.hpp"

namespace tworld {

/// Times t_N = 1 > ... > t_0 = 0; times[k] is t_k.
struct Schedule {
  std::vector<double> times;

  static Schedule uniform(int steps);
  /// Validates strict monotonicity and the exact endpoints.
  static Schedule from_times(std::vector<double> times);

  int steps() const { return int(times.size()) - 1; }
  double t(int k) const { return times[std::size_t(k)]; }
  double dt(int k) const { return times[std::size_t(k)] - times[std::size_t(k) - 1]; }
};

struct GuidanceConfig {
  double scale = 7.5;

  /// g == 1 needs only the conditional pass.
  bool needs_unconditional() const { return scale != 1.0; }
};

/// v_uncond + g (v_cond - v_uncond); g == 1 returns v_cond exactly.
Eigen::ArrayXf cfg_velocity(const Eigen::ArrayXf& v_cond, const Eigen::ArrayXf& v_uncond, double scale);

/// values - dt * velocity, rounded once to float.
Eigen::ArrayXf euler_update(std::span<const float> values, const Eigen::ArrayXf& velocity, double dt);

/// Everything a tiled update needs besides the world itself.
struct StepContext {
  const TileLayout& layout;
  const BlendMask& mask;
  const Denoiser& denoiser;
  const PromptGrid& prompts;
  GuidanceConfig guidance;
  const Executor& executor;
};

/// Guided velocities for a set of tile payloads. Issues one conditional
/// request per tile plus one unconditional request when g != 1.
std::vector<Eigen::ArrayXf> guided_velocities(std::span<const DenoiserRequest> conditional, const Denoiser& denoiser,
                                              const GuidanceConfig& guidance, const Executor& executor);

/// One blended Euler step over every tile of the layout. Accumulation is
/// performed per x-slab in canonical tile order, so the result is bitwise
/// independent of the executor's thread count.
DenseWorld tiled_step(const DenseWorld& world, double t, double dt, const StepContext& ctx);

/// The same update restricted to occupied voxels; weights still come from
/// the dense mask at each voxel's local position.
SparseWorld sparse_tiled_step(const SparseWorld& world, double t, double dt, const StepContext& ctx);

struct StepRecord {
  int index = 0;  // k, counting down from N to 1
  double t = 0.0;
  double dt = 0.0;
  std::size_t tiles = 0;
  double seconds = 0.0;
  std::uint64_t calls = 0;  // denoiser requests issued during this step
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Failure inside a step; carries the step index.
class StepError : public Error {
 public:
  StepError(int step, const std::string& what) : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct RunConfig {
  Coord dims = Coord::Constant(16);
  int channels = 1;
  int tile_size = 16;
  int stride = 0;  // 0 selects tile_size / 2
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::uniform(25);
  GuidanceConfig guidance;
  PromptGrid prompts = uniform_prompt("scene");
  MaskKind mask = MaskKind::Cosine;
  int threads = 1;

  int resolved_stride() const { return stride > 0 ? stride : std::max(1, tile_size / 2); }
};

struct RunResult {
  DenseWorld world;
  std::vector<StepRecord> steps;
  std::uint64_t denoiser_calls = 0;
};

/// Called after each step with the step index and the new time; may modify the world.
using StepHook = std::function<void(int step, double t_next, DenseWorld& world)>;

/// Integrates from t=1 to t=0 starting at `initial`.
RunResult run_schedule(DenseWorld initial, const RunConfig& config, const Denoiser& denoiser,
                       const StepHook& hook = {}, const ProgressFn& progress = {});

/// Seeds the world with counter-based noise and integrates to t=0.
RunResult run_diffusion(const RunConfig& config, const Denoiser& denoiser, const ProgressFn& progress = {});

}  // namespace tworld
