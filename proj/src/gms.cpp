#include "rqvqa/gms.hpp"

#include <string>

#include "rqvqa/error.hpp"
#include "rqvqa/random.hpp"

namespace rqvqa::gms {

Plan make_plan(int width, int height, int grid_count, int patch_size, std::uint64_t seed) {
  if (grid_count < 1) fail(ErrorCode::InvalidArgument, "grid_count must be >= 1");
  if (patch_size < 1) fail(ErrorCode::InvalidArgument, "patch_size must be >= 1");
  const int cell_w = width / grid_count;
  const int cell_h = height / grid_count;
  if (cell_w < patch_size || cell_h < patch_size) {
    fail(ErrorCode::Geometry, "cell (0,0) is " + std::to_string(cell_w) + "x" + std::to_string(cell_h) +
                                  ", smaller than patch " + std::to_string(patch_size));
  }

  Plan plan;
  plan.frame_width = width;
  plan.frame_height = height;
  plan.grid_count = grid_count;
  plan.patch_size = patch_size;
  plan.seed = seed;
  plan.cells.reserve(static_cast<std::size_t>(grid_count) * grid_count);
  plan.offsets.reserve(plan.cells.capacity());

  Rng rng(seed);
  for (int row = 0; row < grid_count; ++row) {
    for (int col = 0; col < grid_count; ++col) {
      Cell c{col * cell_w, row * cell_h, cell_w, cell_h};
      if (col == grid_count - 1) c.width = width - c.x;
      if (row == grid_count - 1) c.height = height - c.y;
      std::uniform_int_distribution<int> dx(0, c.width - patch_size);
      std::uniform_int_distribution<int> dy(0, c.height - patch_size);
      const int ox = dx(rng);
      plan.offsets.push_back({ox, dy(rng)});
      plan.cells.push_back(c);
    }
  }
  return plan;
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, static_cast<std::uint64_t>(epoch));
}

FragmentVolume sample_fragments(std::span<const Frame> frames, const Plan& plan, Exec exec) {
  std::vector<PatchCopy> copies;
  copies.reserve(plan.cells.size());
  for (int row = 0; row < plan.grid_count; ++row) {
    for (int col = 0; col < plan.grid_count; ++col) {
      const auto i = static_cast<std::size_t>(row * plan.grid_count + col);
      copies.push_back({plan.source_x(i), plan.source_y(i), col * plan.patch_size,
                        row * plan.patch_size, plan.patch_size});
    }
  }

  FragmentVolume volume;
  volume.plan = plan;
  volume.frames.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Frame& f = frames[t];
    if (f.width != plan.frame_width || f.height != plan.frame_height) {
      fail(ErrorCode::Geometry, "frame " + std::to_string(t) + " is " + std::to_string(f.width) + "x" +
                                    std::to_string(f.height) + ", plan expects " +
                                    std::to_string(plan.frame_width) + "x" +
                                    std::to_string(plan.frame_height));
    }
    volume.frames.push_back(exec == Exec::Serial
                                ? kernels::serial::assemble_patches(f, copies, plan.fragment_size())
                                : kernels::omp::assemble_patches(f, copies, plan.fragment_size()));
  }
  return volume;
}

}  // namespace rqvqa::gms
