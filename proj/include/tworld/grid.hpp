#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tworld/errors.hpp"

namespace tworld {

/// Integer lattice coordinate (x, y, z). Components may be negative for
/// local coordinates that fall outside a tile.
using Coord = Eigen::Array3i;

inline std::string to_string(const Coord& c) {
  return "(" + std::to_string(c.x()) + "," + std::to_string(c.y()) + "," + std::to_string(c.z()) + ")";
}

inline std::int64_t voxel_count(const Coord& dims) {
  return std::int64_t(dims.x()) * dims.y() * dims.z();
}

/// Canonical linearization: x-major, then y, then z.
inline std::int64_t linear_index(const Coord& dims, const Coord& p) {
  return (std::int64_t(p.x()) * dims.y() + p.y()) * dims.z() + p.z();
}

inline Coord unlinear_index(const Coord& dims, std::int64_t i) {
  const std::int64_t z = i % dims.z();
  i /= dims.z();
  const std::int64_t y = i % dims.y();
  return Coord(int(i / dims.y()), int(y), int(z));
}

inline bool in_bounds(const Coord& dims, const Coord& p) {
  return (p >= 0).all() && (p < dims).all();
}

/// Global to tile-local coordinate. The result lies in {0..S-1}^3 iff the
/// tile at `origin` covers `g`; anything else marks non-coverage.
inline Coord map_global_to_local(const Coord& g, const Coord& origin) { return g - origin; }

inline bool covers(const Coord& local, int size) { return (local >= 0).all() && (local < size).all(); }

/// Dense X*Y*Z*C lattice in canonical order (x, y, z, channel).
template <typename Scalar>
class DenseWorldT {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  DenseWorldT() : dims_(0, 0, 0) {}

  DenseWorldT(const Coord& dims, int channels, Scalar fill = Scalar(0)) : dims_(dims), channels_(channels) {
    if ((dims <= 0).any()) throw ShapeError("world dims must be positive, got " + to_string(dims));
    if (channels < 1) throw ShapeError("world channels must be >= 1");
    data_ = Array::Constant(voxel_count(dims) * channels, fill);
  }

  DenseWorldT(const Coord& dims, int channels, Array data) : dims_(dims), channels_(channels), data_(std::move(data)) {
    if ((dims <= 0).any()) throw ShapeError("world dims must be positive, got " + to_string(dims));
    if (channels < 1) throw ShapeError("world channels must be >= 1");
    if (data_.size() != voxel_count(dims) * channels)
      throw ShapeError("world data length " + std::to_string(data_.size()) + " does not match dims " +
                       to_string(dims) + " x " + std::to_string(channels));
  }

  const Coord& dims() const { return dims_; }
  int channels() const { return channels_; }
  std::int64_t voxels() const { return voxel_count(dims_); }

  Array& data() { return data_; }
  const Array& data() const { return data_; }

  std::int64_t offset(const Coord& p) const { return linear_index(dims_, p) * channels_; }

  Scalar& at(const Coord& p, int c = 0) { return data_[offset(p) + c]; }
  Scalar at(const Coord& p, int c = 0) const { return data_[offset(p) + c]; }

  auto voxel(const Coord& p) { return data_.segment(offset(p), channels_); }
  auto voxel(const Coord& p) const { return data_.segment(offset(p), channels_); }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const DenseWorldT& a, const DenseWorldT& b) {
    return (a.dims_ == b.dims_).all() && a.channels_ == b.channels_ && (a.data_ == b.data_).all();
  }

  template <typename Other>
  DenseWorldT<Other> cast() const {
    return DenseWorldT<Other>(dims_, channels_, data_.template cast<Other>().eval());
  }

 private:
  Coord dims_;
  int channels_ = 1;
  Array data_;
};

using DenseWorld = DenseWorldT<float>;

/// S^3*C values copied out of a world, in local canonical order.
template <typename Scalar>
struct TileViewT {
  Coord origin = Coord::Zero();
  int size = 0;
  int channels = 1;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> values;

  Coord dims() const { return Coord::Constant(size); }
};

using TileView = TileViewT<float>;

/// Throws BoundsError naming the first offending axis.
inline void check_tile_bounds(const Coord& dims, const Coord& origin, int size) {
  static constexpr const char* kAxis[] = {"x", "y", "z"};
  if (size < 1) throw ShapeError("tile size must be >= 1");
  for (int a = 0; a < 3; ++a) {
    if (origin[a] < 0 || origin[a] + size > dims[a])
      throw BoundsError("tile at origin " + to_string(origin) + " of size " + std::to_string(size) +
                        " exceeds world on axis " + kAxis[a] + " (extent " + std::to_string(dims[a]) + ")");
  }
}

/// Copies an axis-aligned box out of `world`.
template <typename Scalar>
DenseWorldT<Scalar> extract_box(const DenseWorldT<Scalar>& world, const Coord& origin, const Coord& box) {
  for (int a = 0; a < 3; ++a)
    if (origin[a] < 0 || origin[a] + box[a] > world.dims()[a])
      throw BoundsError("box at " + to_string(origin) + " of extent " + to_string(box) + " exceeds world " +
                        to_string(world.dims()));
  DenseWorldT<Scalar> out(box, world.channels());
  const int c = world.channels();
  const std::int64_t run = std::int64_t(box.z()) * c;
  for (int x = 0; x < box.x(); ++x)
    for (int y = 0; y < box.y(); ++y)
      out.data().segment(out.offset(Coord(x, y, 0)), run) =
          world.data().segment(world.offset(origin + Coord(x, y, 0)), run);
  return out;
}

/// Writes `block` into `world` at `origin` (overwrite, no blending).
template <typename Scalar>
void write_box(DenseWorldT<Scalar>& world, const Coord& origin, const DenseWorldT<Scalar>& block) {
  if (block.channels() != world.channels()) throw ShapeError("block channel count does not match world");
  const Coord box = block.dims();
  for (int a = 0; a < 3; ++a)
    if (origin[a] < 0 || origin[a] + box[a] > world.dims()[a])
      throw BoundsError("box at " + to_string(origin) + " of extent " + to_string(box) + " exceeds world " +
                        to_string(world.dims()));
  const std::int64_t run = std::int64_t(box.z()) * world.channels();
  for (int x = 0; x < box.x(); ++x)
    for (int y = 0; y < box.y(); ++y)
      world.data().segment(world.offset(origin + Coord(x, y, 0)), run) =
          block.data().segment(block.offset(Coord(x, y, 0)), run);
}

template <typename Scalar>
TileViewT<Scalar> extract_tile(const DenseWorldT<Scalar>& world, const Coord& origin, int size) {
  check_tile_bounds(world.dims(), origin, size);
  auto box = extract_box(world, origin, Coord::Constant(size));
  return TileViewT<Scalar>{origin, size, world.channels(), std::move(box.data())};
}

/// Sparse set of occupied voxels, strictly sorted by canonical index.
template <typename Scalar>
class SparseWorldT {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  SparseWorldT() : dims_(0, 0, 0) {}
  SparseWorldT(const Coord& dims, int channels) : dims_(dims), channels_(channels) {
    if ((dims <= 0).any()) throw ShapeError("world dims must be positive, got " + to_string(dims));
    if (channels < 1) throw ShapeError("world channels must be >= 1");
  }

  /// Takes coordinates (any order, unique) with row-major values (n x C).
  SparseWorldT(const Coord& dims, int channels, std::vector<Coord> coords, Array values)
      : SparseWorldT(dims, channels) {
    if (values.size() != std::int64_t(coords.size()) * channels)
      throw ShapeError("sparse values length does not match entry count");
    std::vector<std::int64_t> order(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (!in_bounds(dims, coords[i])) throw BoundsError("sparse coordinate " + to_string(coords[i]) + " out of bounds");
      order[i] = std::int64_t(i);
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      return linear_index(dims, coords[a]) < linear_index(dims, coords[b]);
    });
    keys_.resize(coords.size());
    values_.resize(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      keys_[i] = linear_index(dims, coords[order[i]]);
      if (i > 0 && keys_[i] == keys_[i - 1])
        throw ShapeError("duplicate sparse coordinate " + to_string(coords[order[i]]));
      values_.segment(std::int64_t(i) * channels, channels) = values.segment(order[i] * channels, channels);
    }
  }

  const Coord& dims() const { return dims_; }
  int channels() const { return channels_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  Coord coord(std::size_t i) const { return unlinear_index(dims_, keys_[i]); }
  std::int64_t key(std::size_t i) const { return keys_[i]; }
  const std::vector<std::int64_t>& keys() const { return keys_; }

  auto value(std::size_t i) { return values_.segment(std::int64_t(i) * channels_, channels_); }
  auto value(std::size_t i) const { return values_.segment(std::int64_t(i) * channels_, channels_); }

  Array& values() { return values_; }
  const Array& values() const { return values_; }

  /// Entry index of `p`, or -1 when unoccupied.
  std::int64_t find(const Coord& p) const {
    if (!in_bounds(dims_, p)) return -1;
    const auto k = linear_index(dims_, p);
    auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
    return (it != keys_.end() && *it == k) ? std::int64_t(it - keys_.begin()) : -1;
  }

  friend bool operator==(const SparseWorldT& a, const SparseWorldT& b) {
    return (a.dims_ == b.dims_).all() && a.channels_ == b.channels_ && a.keys_ == b.keys_ &&
           a.values_.size() == b.values_.size() && (a.values_ == b.values_).all();
  }

 private:
  Coord dims_;
  int channels_ = 1;
  std::vector<std::int64_t> keys_;
  Array values_;
};

using SparseWorld = SparseWorldT<float>;

/// Occupied voxels of a tile, re-expressed in local coordinates.
template <typename Scalar>
struct SparseTileT {
  Coord origin = Coord::Zero();
  int size = 0;
  int channels = 1;
  std::vector<Coord> local;            // local coordinates, canonical order
  std::vector<std::size_t> members;    // entry indices into the source world
  Eigen::Array<Scalar, Eigen::Dynamic, 1> values;  // members.size() x C
};

using SparseTile = SparseTileT<float>;

template <typename Scalar>
SparseTileT<Scalar> sparse_extract_tile(const SparseWorldT<Scalar>& world, const Coord& origin, int size) {
  check_tile_bounds(world.dims(), origin, size);
  SparseTileT<Scalar> tile{origin, size, world.channels(), {}, {}, {}};
  const int c = world.channels();
  const Coord& dims = world.dims();
  const auto& keys = world.keys();
  // Each (x, y) column of the tile is a contiguous key range.
  for (int x = 0; x < size; ++x)
    for (int y = 0; y < size; ++y) {
      const auto lo = linear_index(dims, origin + Coord(x, y, 0));
      const auto hi = lo + size;
      for (auto it = std::lower_bound(keys.begin(), keys.end(), lo); it != keys.end() && *it < hi; ++it) {
        const auto i = std::size_t(it - keys.begin());
        tile.members.push_back(i);
        tile.local.push_back(world.coord(i) - origin);
      }
    }
  tile.values.resize(std::int64_t(tile.members.size()) * c);
  for (std::size_t k = 0; k < tile.members.size(); ++k)
    tile.values.segment(std::int64_t(k) * c, c) = world.value(tile.members[k]);
  return tile;
}

/// Voxels with any channel strictly above `threshold`.
template <typename Scalar>
SparseWorldT<Scalar> sparsify(const DenseWorldT<Scalar>& world, Scalar threshold) {
  std::vector<Coord> coords;
  std::vector<Scalar> vals;
  const int c = world.channels();
  for (std::int64_t i = 0; i < world.voxels(); ++i) {
    auto v = world.data().segment(i * c, c);
    if ((v > threshold).any()) {
      coords.push_back(unlinear_index(world.dims(), i));
      for (int k = 0; k < c; ++k) vals.push_back(v[k]);
    }
  }
  typename SparseWorldT<Scalar>::Array values =
      Eigen::Map<const typename SparseWorldT<Scalar>::Array>(vals.data(), Eigen::Index(vals.size()));
  return SparseWorldT<Scalar>(world.dims(), c, std::move(coords), std::move(values));
}

template <typename Scalar>
DenseWorldT<Scalar> densify(const SparseWorldT<Scalar>& sparse, Scalar fill) {
  DenseWorldT<Scalar> out(sparse.dims(), sparse.channels(), fill);
  for (std::size_t i = 0; i < sparse.size(); ++i) out.voxel(sparse.coord(i)) = sparse.value(i);
  return out;
}

}  // namespace tworld
