#include <benchmark/benchmark.h>

#include <random>

#include "rqvqa/gms.hpp"
#include "rqvqa/kernels.hpp"

using namespace rqvqa;

namespace {

Frame noise_frame(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Frame f(w, h);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng());
  return f;
}

std::vector<PatchCopy> grid_patches(int side, int grid, int patch) {
  std::vector<PatchCopy> out;
  const int cell = side / grid;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) out.push_back({gx * cell, gy * cell, gx * patch, gy * patch, patch});
  return out;
}

template <Frame (*Fn)(const Frame&, int, int)>
void BM_Resize(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Frame src = noise_frame(side * 16 / 9, side, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(src, 384 * 16 / 9, 384));
  state.SetItemsProcessed(state.iterations() * 384 * (384 * 16 / 9));
}

template <PixelMoments (*Fn)(const Frame&)>
void BM_PixelMoments(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Frame f = noise_frame(side, side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f));
  state.SetItemsProcessed(state.iterations() * side * side);
}

template <DiffMoments (*Fn)(const Frame&, const Frame&)>
void BM_DiffMoments(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Frame a = noise_frame(side, side, 3), b = noise_frame(side, side, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(state.iterations() * side * side);
}

template <Frame (*Fn)(const Frame&, std::span<const PatchCopy>, int)>
void BM_Assemble(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Frame f = noise_frame(side, side, 5);
  const auto patches = grid_patches(side, gms::kDefaultGridCount, gms::kDefaultPatchSize);
  const int out = gms::kDefaultGridCount * gms::kDefaultPatchSize;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f, patches, out));
  state.SetItemsProcessed(state.iterations() * out * out);
}

}  // namespace

BENCHMARK(BM_Resize<kernels::serial::resize_bilinear>)->Name("resize/serial")->Arg(720)->Arg(1080);
BENCHMARK(BM_Resize<kernels::omp::resize_bilinear>)->Name("resize/omp")->Arg(720)->Arg(1080);
BENCHMARK(BM_PixelMoments<kernels::serial::pixel_moments>)->Name("pixel_moments/serial")->Arg(384)->Arg(1024);
BENCHMARK(BM_PixelMoments<kernels::omp::pixel_moments>)->Name("pixel_moments/omp")->Arg(384)->Arg(1024);
BENCHMARK(BM_DiffMoments<kernels::serial::diff_moments>)->Name("diff_moments/serial")->Arg(224)->Arg(1024);
BENCHMARK(BM_DiffMoments<kernels::omp::diff_moments>)->Name("diff_moments/omp")->Arg(224)->Arg(1024);
BENCHMARK(BM_Assemble<kernels::serial::assemble_patches>)->Name("assemble/serial")->Arg(448)->Arg(1080);
BENCHMARK(BM_Assemble<kernels::omp::assemble_patches>)->Name("assemble/omp")->Arg(448)->Arg(1080);

BENCHMARK_MAIN();
