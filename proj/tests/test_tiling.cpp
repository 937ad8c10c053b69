#include <doctest.h>

#include <random>

#include "tworld/accumulate.hpp"
#include "tworld/blend.hpp"
#include "tworld/tiling.hpp"

using namespace tworld;

namespace {

// Coverage count of every voxel by direct enumeration of tile footprints.
std::vector<int> brute_counts(const TileLayout& layout) {
  std::vector<int> counts(std::size_t(voxel_count(layout.dims)), 0);
  for (const auto& o : layout.origins)
    for (int x = 0; x < layout.tile_size; ++x)
      for (int y = 0; y < layout.tile_size; ++y)
        for (int z = 0; z < layout.tile_size; ++z) ++counts[std::size_t(linear_index(layout.dims, o + Coord(x, y, z)))];
  return counts;
}

}  // namespace

TEST_CASE("axis origins step by the stride and clamp the last tile") {
  CHECK(axis_origins(24, 8, 4) == std::vector<int>{0, 4, 8, 12, 16});
  CHECK(axis_origins(20, 8, 8) == std::vector<int>{0, 8, 12});
  CHECK(axis_origins(8, 8, 4) == std::vector<int>{0});
  CHECK(axis_origins(17, 16, 8) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(axis_origins(7, 8, 4), ShapeError);
  CHECK_THROWS_AS(plan_tiles(Coord(16, 16, 16), 8, 9), ShapeError);
  CHECK_THROWS_AS(plan_tiles(Coord(16, 16, 16), 8, 0), ShapeError);
}

TEST_CASE("coverage report agrees with footprint enumeration") {
  for (const auto& [dims, S, s] : {std::tuple{Coord(32, 32, 16), 16, 8}, std::tuple{Coord(20, 13, 9), 8, 3},
                                    std::tuple{Coord(9, 9, 9), 4, 4}}) {
    const auto layout = plan_tiles(dims, S, s);
    const auto report = coverage_check(layout);
    const auto counts = brute_counts(layout);
    CHECK(report.counts == counts);
    CHECK(report.min_count == *std::min_element(counts.begin(), counts.end()));
    CHECK(report.max_count == *std::max_element(counts.begin(), counts.end()));
    std::int64_t total = 0;
    for (std::size_t k = 0; k < report.histogram.size(); ++k) {
      CHECK(report.histogram[k] == std::count(counts.begin(), counts.end(), int(k)));
      total += report.histogram[k];
    }
    CHECK(total == voxel_count(dims));
    CHECK(report.ok());
    CHECK_NOTHROW(require_full_coverage(layout));
  }
}

TEST_CASE("a layout with a gap fails the coverage check") {
  TileLayout layout{Coord(12, 4, 4), 4, 4, {Coord(0, 0, 0), Coord(8, 0, 0)}};
  const auto report = coverage_check(layout);
  CHECK(report.min_count == 0);
  CHECK(report.histogram[0] == 4 * 4 * 4);
  CHECK_THROWS_AS(require_full_coverage(layout), CoverageError);
}

TEST_CASE("decode layout is stride S with a clamped edge tile") {
  const auto layout = decode_layout(Coord(20, 16, 8), 8);
  CHECK(layout.stride == 8);
  CHECK(layout.size() == 3 * 2 * 1);
  CHECK((layout.origins.back() == Coord(12, 8, 0)).all());
}

TEST_CASE("cosine profile matches the closed form") {
  for (int S = 1; S <= 16; ++S)
    for (int d = -2; d < S + 2; ++d) {
      const double expected = (d < 0 || d >= S) ? 0.0 : std::cos(M_PI * ((d + 1.0) / (S + 1.0) - 0.5));
      CHECK(std::abs(cosine_profile(d, S) - expected) <= 1e-15);
    }
  CHECK(cosine_profile(0, 1) == 1.0);
  CHECK(cosine_weight(Coord(0, 0, 0), 1) == 1.0);
  CHECK(cosine_weight(Coord(0, 16, 0), 16) == 0.0);
}

TEST_CASE("cosine mask is symmetric, positive inside and peaks at the centre") {
  const auto& m = build_mask(9);
  CHECK(m.profile.size() == 9);
  for (int d = 0; d < 9; ++d) {
    CHECK(m.profile[d] > 0.0);
    CHECK(m.profile[d] == doctest::Approx(m.profile[8 - d]).epsilon(1e-15));
  }
  CHECK(m.profile[4] == 1.0);
  CHECK(m.at(Coord(1, 2, 3)) == doctest::Approx(m.profile[1] * m.profile[2] * m.profile[3]).epsilon(1e-15));
  CHECK(&build_mask(9) == &m);
  CHECK((box_mask(5).weights == 1.0).all());
}

TEST_CASE("normalized weights sum to one on random layouts") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int S = std::array{4, 8}[rng() % 2];
    const int s = 1 + int(rng() % unsigned(S));
    const Coord dims(S + int(rng() % 10), S + int(rng() % 10), S + int(rng() % 6));
    const auto layout = plan_tiles(dims, S, s);
    const auto sums = normalized_weight_sums(layout, build_mask(S));
    CHECK((sums - 1.0).abs().maxCoeff() < 1e-12);
  }
  const auto layout = plan_tiles(Coord(12, 8, 8), 8, 4);
  const auto w = normalized_weights_at(layout, build_mask(8), Coord(5, 0, 0));
  REQUIRE(w.size() == 2);
  const double b0 = cosine_profile(5, 8), b1 = cosine_profile(1, 8);
  CHECK(w[0] == doctest::Approx(b0 / (b0 + b1)).epsilon(1e-14));
}

TEST_CASE("mask downsampling") {
  const auto small = downsample_mask(build_mask(16), 4);
  CHECK(small.size == 4);
  CHECK((small.weights - build_mask(4).weights).abs().maxCoeff() < 1e-15);

  const auto& big = build_mask(8);
  const auto pooled = downsample_mask(big, 2, DownsampleMode::AveragePool);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) {
        double sum = 0;
        for (int dx = 0; dx < 2; ++dx)
          for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz) sum += big.at(Coord(2 * x + dx, 2 * y + dy, 2 * z + dz));
        CHECK(pooled.at(Coord(x, y, z)) == doctest::Approx(sum / 8).epsilon(1e-14));
      }
  CHECK_THROWS_AS(downsample_mask(big, 3), ShapeError);
}

TEST_CASE("scatter accumulation adds beta-weighted tile values") {
  const auto& mask = build_mask(4);
  Accumulator acc(Coord(6, 4, 4), 2);
  std::vector<float> tile(4 * 4 * 4 * 2);
  for (std::size_t i = 0; i < tile.size(); ++i) tile[i] = float(i % 7) - 3.0f;
  scatter_accumulate<float>(acc, tile, 2, mask, Coord(2, 0, 0));
  scatter_accumulate<float>(acc, tile, 2, mask, Coord(0, 0, 0));
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) {
        double den = 0, num1 = 0;
        for (int ox : {2, 0}) {
          const Coord l(x - ox, y, z);
          if (!covers(l, 4)) continue;
          const double b = mask.at(l);
          den += b;
          num1 += b * tile[std::size_t(((l.x() * 4 + l.y()) * 4 + l.z()) * 2 + 1)];
        }
        const Coord p(x, y, z);
        CHECK(acc.den[linear_index(acc.num.dims(), p)] == doctest::Approx(den).epsilon(1e-15));
        CHECK(acc.num.at(p, 1) == doctest::Approx(num1).epsilon(1e-15));
      }
  CHECK_THROWS_AS(scatter_accumulate<float>(acc, std::span<const float>(tile).first(10), 2, mask, Coord(0, 0, 0)),
                  ShapeError);
}
