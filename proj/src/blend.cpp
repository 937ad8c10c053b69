#include "tworld/blend.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace tworld {

double cosine_profile(int d, int size) {
  if (d < 0 || d >= size) return 0.0;
  return std::cos(std::numbers::pi * (double(d + 1) / double(size + 1) - 0.5));
}

double cosine_weight(const Coord& local, int size) {
  if (!covers(local, size)) return 0.0;
  return cosine_profile(local.x(), size) * cosine_profile(local.y(), size) * cosine_profile(local.z(), size);
}

namespace {

BlendMask separable_mask(MaskKind kind, Eigen::ArrayXd profile) {
  const int S = int(profile.size());
  BlendMask mask{kind, S, std::move(profile), Eigen::ArrayXd(std::int64_t(S) * S * S)};
  std::int64_t i = 0;
  for (int x = 0; x < S; ++x)
    for (int y = 0; y < S; ++y)
      for (int z = 0; z < S; ++z) mask.weights[i++] = mask.profile[x] * mask.profile[y] * mask.profile[z];
  return mask;
}

BlendMask compute_mask(MaskKind kind, int size) {
  if (size < 1) throw ShapeError("mask size must be >= 1, got " + std::to_string(size));
  Eigen::ArrayXd profile(size);
  for (int d = 0; d < size; ++d) profile[d] = kind == MaskKind::Cosine ? cosine_profile(d, size) : 1.0;
  return separable_mask(kind, std::move(profile));
}

}  // namespace

const BlendMask& make_mask(MaskKind kind, int size) {
  static std::mutex mutex;
  static std::map<std::pair<MaskKind, int>, std::unique_ptr<const BlendMask>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{kind, size}];
  if (!slot) slot = std::make_unique<const BlendMask>(compute_mask(kind, size));
  return *slot;
}

const BlendMask& build_mask(int size) { return make_mask(MaskKind::Cosine, size); }

const BlendMask& box_mask(int size) { return make_mask(MaskKind::Box, size); }

BlendMask downsample_mask(const BlendMask& mask, int factor, DownsampleMode mode) {
  if (factor < 1 || mask.size % factor != 0)
    throw ShapeError("downsample factor " + std::to_string(factor) + " does not divide mask size " +
                     std::to_string(mask.size));
  const int small = mask.size / factor;
  if (mode == DownsampleMode::Recompute) return compute_mask(mask.kind, small);

  BlendMask out{mask.kind, small, Eigen::ArrayXd::Zero(small), Eigen::ArrayXd::Zero(std::int64_t(small) * small * small)};
  for (int d = 0; d < small; ++d) out.profile[d] = mask.profile.segment(d * factor, factor).mean();
  const double norm = 1.0 / (double(factor) * factor * factor);
  for (int x = 0; x < mask.size; ++x)
    for (int y = 0; y < mask.size; ++y)
      for (int z = 0; z < mask.size; ++z) {
        const auto dst = (std::int64_t(x / factor) * small + y / factor) * small + z / factor;
        out.weights[dst] += norm * mask.at(Coord(x, y, z));
      }
  return out;
}

std::vector<double> normalized_weights_at(const TileLayout& layout, const BlendMask& mask, const Coord& voxel) {
  if (mask.size != layout.tile_size) throw ShapeError("mask size does not match layout tile size");
  std::vector<double> betas;
  double total = 0.0;
  for (const auto& o : layout.origins) {
    const Coord local = map_global_to_local(voxel, o);
    if (!covers(local, mask.size)) continue;
    betas.push_back(mask.at(local));
    total += betas.back();
  }
  for (auto& b : betas) b /= total;
  return betas;
}

Eigen::ArrayXd normalized_weight_sums(const TileLayout& layout, const BlendMask& mask) {
  if (mask.size != layout.tile_size) throw ShapeError("mask size does not match layout tile size");
  const Coord& dims = layout.dims;
  const int S = mask.size;
  Eigen::ArrayXd den = Eigen::ArrayXd::Zero(voxel_count(dims));
  Eigen::ArrayXd sums = Eigen::ArrayXd::Zero(voxel_count(dims));
  auto for_each = [&](auto&& fn) {
    for (const auto& o : layout.origins)
      for (int x = 0; x < S; ++x)
        for (int y = 0; y < S; ++y) {
          const auto g = linear_index(dims, o + Coord(x, y, 0));
          const auto l = (std::int64_t(x) * S + y) * S;
          for (int z = 0; z < S; ++z) fn(g + z, mask.weights[l + z]);
        }
  };
  for_each([&](std::int64_t g, double beta) { den[g] += beta; });
  for_each([&](std::int64_t g, double beta) { sums[g] += beta / den[g]; });
  return sums;
}

}  // namespace tworld
