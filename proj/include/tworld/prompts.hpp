#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tworld/grid.hpp"

namespace tworld {

/// Conditions laid out on a coarse 3D grid of cells (outer index x, middle y,
/// innermost list z). Each cell spans `cell_size` voxels per axis.
struct PromptGrid {
  Coord cells = Coord::Ones();
  int cell_size = 0;  // 0 until bound to a tile size
  std::vector<std::string> prompts;  // canonical order

  const std::string& at(const Coord& cell) const { return prompts[std::size_t(linear_index(cells, cell))]; }
  Coord extent() const { return cells * cell_size; }
};

/// Parses `[[["a"], ["b"]], [["c"], ["d"]]]`, optionally preceded by `name =`.
/// Trailing commas are accepted; ragged or empty input is rejected with the
/// path of the offending element.
PromptGrid parse_prompt_grid(std::string_view text);

PromptGrid load_prompt_grid(const std::string& path);

PromptGrid uniform_prompt(std::string prompt);

/// Serializes back to the nested-list syntax.
std::string format_prompt_grid(const PromptGrid& grid);

/// Condition of the cell containing the tile's centre voxel (origin + S/2).
/// A grid with cell_size 0 uses `tile_size` as its cell size.
const std::string& condition_for_tile(const PromptGrid& grid, const Coord& origin, int tile_size);

}  // namespace tworld
