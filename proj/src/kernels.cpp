#include "rqvqa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace rqvqa::kernels {

double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

namespace {

struct Tap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

// Half-pixel aligned source coordinate for each destination index.
std::vector<Tap> bilinear_taps(int src_len, int dst_len) {
  std::vector<Tap> taps(dst_len);
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int i = 0; i < dst_len; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int lo = static_cast<int>(std::floor(s));
    taps[i] = {lo, std::min(lo + 1, src_len - 1), s - lo};
  }
  return taps;
}

void resize_row(const Frame& src, Frame& dst, int y, const std::vector<Tap>& xt, const Tap& ty) {
  for (int x = 0; x < dst.width; ++x) {
    const Tap& tx = xt[x];
    for (int c = 0; c < 3; ++c) {
      const double top = (1.0 - tx.frac) * src.at(tx.lo, ty.lo, c) + tx.frac * src.at(tx.hi, ty.lo, c);
      const double bot = (1.0 - tx.frac) * src.at(tx.lo, ty.hi, c) + tx.frac * src.at(tx.hi, ty.hi, c);
      const double v = (1.0 - ty.frac) * top + ty.frac * bot;
      dst.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
}

double luma_at(const Frame& f, int x, int y) {
  x = std::clamp(x, 0, f.width - 1);
  y = std::clamp(y, 0, f.height - 1);
  return luma(f.at(x, y, 0), f.at(x, y, 1), f.at(x, y, 2));
}

PixelMoments row_moments(const Frame& f, int y) {
  PixelMoments m;
  for (int x = 0; x < f.width; ++x) {
    for (int c = 0; c < 3; ++c) {
      const double v = f.at(x, y, c);
      m.channel_sum[c] += v;
      m.channel_sumsq[c] += v * v;
    }
    const double center = luma_at(f, x, y);
    const double lap = std::abs(4.0 * center - luma_at(f, x - 1, y) - luma_at(f, x + 1, y) -
                                luma_at(f, x, y - 1) - luma_at(f, x, y + 1));
    m.laplacian_sum += lap;
    m.laplacian_sumsq += lap * lap;
    const int bin = std::min(7, static_cast<int>(center / 32.0));
    m.luma_histogram[bin] += 1.0;
  }
  m.pixel_count = f.width;
  return m;
}

void accumulate(PixelMoments& into, const PixelMoments& m) {
  for (int c = 0; c < 3; ++c) {
    into.channel_sum[c] += m.channel_sum[c];
    into.channel_sumsq[c] += m.channel_sumsq[c];
  }
  into.laplacian_sum += m.laplacian_sum;
  into.laplacian_sumsq += m.laplacian_sumsq;
  for (int b = 0; b < 8; ++b) into.luma_histogram[b] += m.luma_histogram[b];
  into.pixel_count += m.pixel_count;
}

DiffMoments row_diff(const Frame& a, const Frame& b, int y) {
  DiffMoments m;
  const std::size_t begin = static_cast<std::size_t>(y) * a.width * 3;
  const std::size_t end = begin + static_cast<std::size_t>(a.width) * 3;
  for (std::size_t i = begin; i < end; ++i) {
    const int d = std::abs(static_cast<int>(a.pixels[i]) - static_cast<int>(b.pixels[i]));
    m.abs_sum += d;
    m.histogram[std::min(4, d * 5 / 256)] += 1.0;
  }
  m.sample_count = static_cast<double>(end - begin);
  return m;
}

void accumulate(DiffMoments& into, const DiffMoments& m) {
  into.abs_sum += m.abs_sum;
  for (int b = 0; b < 5; ++b) into.histogram[b] += m.histogram[b];
  into.sample_count += m.sample_count;
}

void copy_patch(const Frame& src, Frame& dst, const PatchCopy& p) {
  for (int row = 0; row < p.size; ++row) {
    const std::uint8_t* from = &src.pixels[(static_cast<std::size_t>(p.src_y + row) * src.width + p.src_x) * 3];
    std::uint8_t* to = &dst.pixels[(static_cast<std::size_t>(p.dst_y + row) * dst.width + p.dst_x) * 3];
    std::memcpy(to, from, static_cast<std::size_t>(p.size) * 3);
  }
}

}  // namespace

namespace serial {

Frame resize_bilinear(const Frame& src, int width, int height) {
  Frame dst(width, height);
  const auto xt = bilinear_taps(src.width, width);
  const auto yt = bilinear_taps(src.height, height);
  for (int y = 0; y < height; ++y) resize_row(src, dst, y, xt, yt[y]);
  return dst;
}

PixelMoments pixel_moments(const Frame& frame) {
  PixelMoments total;
  for (int y = 0; y < frame.height; ++y) accumulate(total, row_moments(frame, y));
  return total;
}

DiffMoments diff_moments(const Frame& a, const Frame& b) {
  DiffMoments total;
  for (int y = 0; y < a.height; ++y) accumulate(total, row_diff(a, b, y));
  return total;
}

Frame assemble_patches(const Frame& src, std::span<const PatchCopy> patches, int out_size) {
  Frame dst(out_size, out_size);
  for (const auto& p : patches) copy_patch(src, dst, p);
  return dst;
}

}  // namespace serial

namespace omp {

Frame resize_bilinear(const Frame& src, int width, int height) {
  Frame dst(width, height);
  const auto xt = bilinear_taps(src.width, width);
  const auto yt = bilinear_taps(src.height, height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) resize_row(src, dst, y, xt, yt[y]);
  return dst;
}

PixelMoments pixel_moments(const Frame& frame) {
  std::vector<PixelMoments> rows(frame.height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < frame.height; ++y) rows[y] = row_moments(frame, y);
  PixelMoments total;
  for (const auto& r : rows) accumulate(total, r);
  return total;
}

DiffMoments diff_moments(const Frame& a, const Frame& b) {
  std::vector<DiffMoments> rows(a.height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < a.height; ++y) rows[y] = row_diff(a, b, y);
  DiffMoments total;
  for (const auto& r : rows) accumulate(total, r);
  return total;
}

Frame assemble_patches(const Frame& src, std::span<const PatchCopy> patches, int out_size) {
  Frame dst(out_size, out_size);
  const auto n = static_cast<long>(patches.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) copy_patch(src, dst, patches[i]);
  return dst;
}

}  // namespace omp
}  // namespace rqvqa::kernels
