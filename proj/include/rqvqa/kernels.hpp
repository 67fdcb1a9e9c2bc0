#pragma once

// Data-parallel pixel kernels. Each kernel has a serial reference and an
// OpenMP variant; both accumulate per image row and reduce rows in index
// order, so the two produce bit-identical results.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rqvqa/preproc.hpp"

namespace rqvqa {

enum class Exec { Serial, Parallel };

struct PixelMoments {
  std::array<double, 3> channel_sum{};
  std::array<double, 3> channel_sumsq{};
  double laplacian_sum = 0.0;    // sum of |4c - l - r - u - d| over luma
  double laplacian_sumsq = 0.0;
  std::array<double, 8> luma_histogram{};  // counts, bin = floor(Y / 32)
  double pixel_count = 0.0;
};

struct DiffMoments {
  double abs_sum = 0.0;  // sum over pixels and channels of |a - b|
  std::array<double, 5> histogram{};  // per-sample |a - b| in 5 equal bins over [0, 255]
  double sample_count = 0.0;
};

// A patch copy: source rectangle (src_x, src_y, size) to destination (dst_x, dst_y).
struct PatchCopy {
  int src_x = 0;
  int src_y = 0;
  int dst_x = 0;
  int dst_y = 0;
  int size = 0;
};

namespace kernels {

double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

namespace serial {
Frame resize_bilinear(const Frame& src, int width, int height);
PixelMoments pixel_moments(const Frame& frame);
DiffMoments diff_moments(const Frame& a, const Frame& b);
Frame assemble_patches(const Frame& src, std::span<const PatchCopy> patches, int out_size);
}  // namespace serial

namespace omp {
Frame resize_bilinear(const Frame& src, int width, int height);
PixelMoments pixel_moments(const Frame& frame);
DiffMoments diff_moments(const Frame& a, const Frame& b);
Frame assemble_patches(const Frame& src, std::span<const PatchCopy> patches, int out_size);
}  // namespace omp

inline Frame resize_bilinear(const Frame& src, int w, int h, Exec exec = Exec::Parallel) {
  return exec == Exec::Serial ? serial::resize_bilinear(src, w, h) : omp::resize_bilinear(src, w, h);
}
inline PixelMoments pixel_moments(const Frame& f, Exec exec = Exec::Parallel) {
  return exec == Exec::Serial ? serial::pixel_moments(f) : omp::pixel_moments(f);
}
inline DiffMoments diff_moments(const Frame& a, const Frame& b, Exec exec = Exec::Parallel) {
  return exec == Exec::Serial ? serial::diff_moments(a, b) : omp::diff_moments(a, b);
}

}  // namespace kernels
}  // namespace rqvqa
