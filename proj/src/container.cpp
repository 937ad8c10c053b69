#include "tworld/container.hpp"

#include <fstream>
#include <limits>

#include "tworld/binary_io.hpp"

namespace tworld {

namespace {

constexpr char kMagic[4] = {'T', 'W', 'L', 'D'};

void write_header(std::ostream& out, const Coord& dims, int channels, std::uint8_t flag) {
  out.write(kMagic, 4);
  le::write<std::uint16_t>(out, kContainerVersion);
  for (int a = 0; a < 3; ++a) le::write<std::uint32_t>(out, std::uint32_t(dims[a]));
  le::write<std::uint32_t>(out, std::uint32_t(channels));
  le::write<std::uint8_t>(out, flag);
}

void write_floats(std::ostream& out, const float* data, std::int64_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(float)));
  } else {
    for (std::int64_t i = 0; i < n; ++i) le::write<float>(out, data[i]);
  }
}

void read_floats(std::istream& in, float* data, std::int64_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(data), std::streamsize(n * sizeof(float))))
      throw FormatError("unexpected end of file in world payload");
  } else {
    for (std::int64_t i = 0; i < n; ++i) data[i] = le::read<float>(in);
  }
}

int checked_dim(std::uint32_t v, const char* what) {
  if (v == 0 || v > std::uint32_t(std::numeric_limits<int>::max()))
    throw FormatError(std::string("invalid ") + what + " in world container: " + std::to_string(v));
  return int(v);
}

}  // namespace

void write_world(std::ostream& out, const DenseWorld& world) {
  write_header(out, world.dims(), world.channels(), 0);
  write_floats(out, world.data().data(), world.data().size());
  if (!out) throw FormatError("failed writing world container");
}

void write_world(std::ostream& out, const SparseWorld& world) {
  write_header(out, world.dims(), world.channels(), 1);
  le::write<std::uint64_t>(out, world.size());
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Coord p = world.coord(i);
    for (int a = 0; a < 3; ++a) le::write<std::uint32_t>(out, std::uint32_t(p[a]));
    write_floats(out, world.values().data() + std::int64_t(i) * world.channels(), world.channels());
  }
  if (!out) throw FormatError("failed writing world container");
}

WorldVariant read_world(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a world container (bad magic)");
  const auto version = le::read<std::uint16_t>(in);
  if (version != kContainerVersion)
    throw FormatError("unsupported world container version " + std::to_string(version));
  Coord dims;
  dims.x() = checked_dim(le::read<std::uint32_t>(in), "x extent");
  dims.y() = checked_dim(le::read<std::uint32_t>(in), "y extent");
  dims.z() = checked_dim(le::read<std::uint32_t>(in), "z extent");
  const int channels = checked_dim(le::read<std::uint32_t>(in), "channel count");
  const auto flag = le::read<std::uint8_t>(in);
  if (flag == 0) {
    DenseWorld world(dims, channels);
    read_floats(in, world.data().data(), world.data().size());
    return world;
  }
  if (flag != 1) throw FormatError("unknown world container layout flag " + std::to_string(flag));
  const auto count = le::read<std::uint64_t>(in);
  if (count > std::uint64_t(voxel_count(dims))) throw FormatError("sparse entry count exceeds world volume");
  std::vector<Coord> coords(count);
  SparseWorld::Array values(std::int64_t(count) * channels);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (int a = 0; a < 3; ++a) coords[i][a] = int(le::read<std::uint32_t>(in));
    read_floats(in, values.data() + std::int64_t(i) * channels, channels);
  }
  return SparseWorld(dims, channels, std::move(coords), std::move(values));
}

void save_world(const std::string& path, const DenseWorld& world) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_world(out, world);
}

void save_world(const std::string& path, const SparseWorld& world) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_world(out, world);
}

WorldVariant load_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open world container " + path);
  return read_world(in);
}

DenseWorld load_dense_world(const std::string& path) {
  auto world = load_world(path);
  if (auto* dense = std::get_if<DenseWorld>(&world)) return std::move(*dense);
  return densify(std::get<SparseWorld>(world), 0.0f);
}

}  // namespace tworld
