#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rqvqa/kernels.hpp"
#include "rqvqa/preproc.hpp"

namespace rqvqa::gms {

struct Cell {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct Offset {
  int dx = 0;
  int dy = 0;
};

/// Grid mini-cube sampling plan. Cells and offsets are row-major over the
/// grid: index = row * grid_count + col. One offset per cell, shared by every
/// frame the plan is applied to.
struct Plan {
  int frame_width = 0;
  int frame_height = 0;
  int grid_count = 0;
  int patch_size = 0;
  std::uint64_t seed = 0;
  std::vector<Cell> cells;
  std::vector<Offset> offsets;

  int fragment_size() const noexcept { return grid_count * patch_size; }
  /// Source-pixel origin of the patch taken from cell `index`.
  int source_x(std::size_t index) const { return cells[index].x + offsets[index].dx; }
  int source_y(std::size_t index) const { return cells[index].y + offsets[index].dy; }
};

struct FragmentVolume {
  std::vector<Frame> frames;
  Plan plan;
};

inline constexpr int kDefaultGridCount = 7;
inline constexpr int kDefaultPatchSize = 32;

/// Cells are the floor partition of each axis into grid_count parts; the
/// remainder goes to the last row/column.
Plan make_plan(int width, int height, int grid_count, int patch_size, std::uint64_t seed);

/// Seed for re-drawing offsets at a training epoch.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch);

FragmentVolume sample_fragments(std::span<const Frame> frames, const Plan& plan,
                                Exec exec = Exec::Parallel);

}  // namespace rqvqa::gms
