#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "tworld/grid.hpp"

namespace tworld {

/// "TWLD" world container, little-endian:
///   magic[4] "TWLD", version u16, dims 3 x u32, channels u32, flag u8 (0 dense, 1 sparse)
///   dense:  X*Y*Z*C f32 in canonical order
///   sparse: count u64, then per entry 3 x u32 coordinates and C f32
inline constexpr std::uint16_t kContainerVersion = 1;

using WorldVariant = std::variant<DenseWorld, SparseWorld>;

void write_world(std::ostream& out, const DenseWorld& world);
void write_world(std::ostream& out, const SparseWorld& world);
WorldVariant read_world(std::istream& in);

void save_world(const std::string& path, const DenseWorld& world);
void save_world(const std::string& path, const SparseWorld& world);
WorldVariant load_world(const std::string& path);

/// Loads a container that must hold a dense world (a sparse one is densified with 0).
DenseWorld load_dense_world(const std::string& path);

}  // namespace tworld
