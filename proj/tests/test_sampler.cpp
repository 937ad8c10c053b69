#include <doctest.h>

#include "support.hpp"
#include "tworld/analytic.hpp"
#include "tworld/oracle.hpp"
#include "tworld/rng.hpp"
#include "tworld/sampler.hpp"

using namespace tworld;

namespace {

// Velocity depends on the condition: "" gives (x - 1)/t, anything else (x + 2)/t.
class SplitDenoiser final : public Denoiser {
 public:
  std::string name() const override { return "split"; }
  DenoiserCapabilities capabilities() const override { return {true, 0, 0, true, true}; }
  DenoiserResponse velocity(const DenoiserRequest& r) const override {
    const double mu = r.condition.empty() ? 1.0 : -2.0;
    Eigen::ArrayXf v(std::int64_t(r.values.size()));
    for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float((r.values[i] - mu) / r.t);
    return {v, kNoFlags};
  }
};

class FailingDenoiser final : public Denoiser {
 public:
  explicit FailingDenoiser(bool nan) : nan_(nan) {}
  std::string name() const override { return "failing"; }
  DenoiserCapabilities capabilities() const override { return {true, 0, 0, true, true}; }
  DenoiserResponse velocity(const DenoiserRequest& r) const override {
    if (r.t < 0.5) {
      if (!nan_) throw DenoiserError("late failure");
      return {Eigen::ArrayXf::Constant(std::int64_t(r.values.size()), NAN), kNoFlags};
    }
    return {Eigen::ArrayXf::Zero(std::int64_t(r.values.size())), kNoFlags};
  }

 private:
  bool nan_;
};

RunConfig small_config() {
  RunConfig c;
  c.dims = Coord(12, 8, 8);
  c.channels = 2;
  c.tile_size = 8;
  c.schedule = Schedule::uniform(6);
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("uniform schedule and validation") {
  const auto s = Schedule::uniform(4);
  CHECK(s.steps() == 4);
  CHECK(s.t(4) == 1.0);
  CHECK(s.t(0) == 0.0);
  CHECK(s.dt(2) == doctest::Approx(0.25));
  CHECK_THROWS_AS(Schedule::from_times({0.0, 0.6, 0.5, 1.0}), ShapeError);
  CHECK_THROWS_AS(Schedule::from_times({0.0, 0.9}), ShapeError);
  CHECK_NOTHROW(Schedule::from_times({0.0, 0.2, 1.0}));
}

TEST_CASE("guidance combination identities") {
  Eigen::ArrayXf c(3), u(3);
  c << 1.5f, -2.0f, 0.25f;
  u << 0.5f, 4.0f, -1.0f;
  CHECK((cfg_velocity(c, u, 1.0) == c).all());
  CHECK((cfg_velocity(c, u, 0.0) == u).all());
  const auto g = cfg_velocity(c, u, 7.5);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == float(double(u[i]) + 7.5 * (double(c[i]) - double(u[i]))));
  CHECK_FALSE(GuidanceConfig{1.0}.needs_unconditional());
}

TEST_CASE("guided velocities issue one or two requests per tile") {
  SplitDenoiser inner;
  CountingDenoiser counting(inner);
  std::vector<float> x(8, 3.0f);
  std::vector<DenoiserRequest> reqs(3, DenoiserRequest{x, 0.5, "a", Coord::Zero(), Coord::Constant(2), 1});
  Executor ex(2);
  auto v = guided_velocities(reqs, counting, {7.5}, ex);
  CHECK(counting.calls() == 6);
  CHECK(v[0][0] == float(4.0 + 7.5 * (10.0 - 4.0)));
  counting.reset();
  v = guided_velocities(reqs, counting, {1.0}, ex);
  CHECK(counting.calls() == 3);
  CHECK(v[2][0] == 10.0f);
}

TEST_CASE("a tiled step with a pointwise field equals the untiled step") {
  const auto world = test::random_world(Coord(12, 10, 8), 3, 5);
  PointTargetDenoiser d(0.3);
  Executor ex(1);
  const auto prompts = uniform_prompt("scene");
  for (const auto& [S, s] : {std::pair{8, 4}, std::pair{4, 1}, std::pair{8, 8}}) {
    const auto layout = plan_tiles(world.dims(), S, s);
    StepContext ctx{layout, build_mask(S), d, prompts, {7.5}, ex};
    const auto tiled = tiled_step(world, 0.8, 0.04, ctx);
    const auto whole = reference_step(world, 0.8, 0.04, d, "scene", {7.5});
    CHECK(test::max_abs_diff(tiled, whole) <= 1e-6);
  }
}

TEST_CASE("the point-target field lands on its target") {
  auto config = small_config();
  PointTargetDenoiser d(0.75);
  const auto result = run_diffusion(config, d);
  CHECK((result.world.data().cast<double>() - 0.75).abs().maxCoeff() < 1e-6);
  CHECK(result.steps.size() == 6);
  CHECK(result.steps.front().index == 6);
  const auto layout = plan_tiles(config.dims, 8, 4);
  CHECK(result.denoiser_calls == layout.size() * 6 * 2);
}

TEST_CASE("guidance scale one and zero pick a single branch") {
  auto config = small_config();
  SplitDenoiser split;
  config.guidance.scale = 1.0;
  const auto cond = run_diffusion(config, split);
  CHECK((cond.world.data() == cond.world.data()(0)).all());
  CHECK(cond.world.data()(0) == doctest::Approx(-2.0).epsilon(1e-6));
  config.guidance.scale = 0.0;
  const auto uncond = run_diffusion(config, split);
  CHECK(uncond.world.data()(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("results do not depend on the thread count") {
  auto config = small_config();
  MixtureDenoiser d({{0.5, -1.0}, {0.5, 1.0}});
  config.threads = 1;
  const auto one = run_diffusion(config, d);
  for (int threads : {2, 3, 8}) {
    config.threads = threads;
    CHECK(run_diffusion(config, d).world == one.world);
  }
}

TEST_CASE("denoiser failures carry the step index and tile origin") {
  auto config = small_config();
  try {
    run_diffusion(config, FailingDenoiser(false));
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.step() == 2);
    CHECK(std::string(e.what()).find("late failure") != std::string::npos);
  }
  try {
    run_diffusion(config, FailingDenoiser(true));
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(std::string(e.what()).find("(0,0,0)") != std::string::npos);
  }
}

TEST_CASE("progress records one line per step") {
  auto config = small_config();
  std::vector<StepRecord> seen;
  run_diffusion(config, ZeroDenoiser(), [&](const StepRecord& r) { seen.push_back(r); });
  REQUIRE(seen.size() == 6);
  const auto tiles = plan_tiles(config.dims, 8, 4).size();
  for (std::size_t i = 0; i < seen.size(); ++i) {
    CHECK(seen[i].index == int(6 - i));
    CHECK(seen[i].tiles == tiles);
    CHECK(seen[i].calls == tiles * 2);
  }
}

TEST_CASE("sparse step equals the dense step on occupied voxels") {
  const auto dense = test::random_world(Coord(12, 12, 8), 2, 21);
  const auto sparse = sparsify(dense, 0.8f);
  REQUIRE(sparse.size() > 0);
  PointTargetDenoiser d(0.1);
  Executor ex(2);
  const auto prompts = uniform_prompt("scene");
  const auto layout = plan_tiles(dense.dims(), 8, 4);
  StepContext ctx{layout, build_mask(8), d, prompts, {7.5}, ex};
  const auto s_next = sparse_tiled_step(sparse, 0.6, 0.2, ctx);
  const auto d_next = tiled_step(densify(sparse, 0.0f), 0.6, 0.2, ctx);
  REQUIRE(s_next.size() == sparse.size());
  for (std::size_t i = 0; i < s_next.size(); ++i)
    for (int c = 0; c < 2; ++c) CHECK(s_next.value(i)[c] == d_next.at(s_next.coord(i), c));
}
