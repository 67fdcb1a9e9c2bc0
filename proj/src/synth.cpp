#include "rqvqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "rqvqa/error.hpp"
#include "rqvqa/harness.hpp"
#include "rqvqa/random.hpp"

namespace rqvqa {

double synthetic_mos(const Degradation& d) {
  return 5.0 - 4.0 * (0.5 * d.blur + 0.3 * d.noise + 0.2 * d.block);
}

namespace {

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

using Plane = std::vector<double>;  // one channel, row-major

std::vector<Plane> to_planes(const Frame& f) {
  std::vector<Plane> p(3, Plane(static_cast<std::size_t>(f.width) * f.height));
  for (std::size_t i = 0; i < p[0].size(); ++i) {
    for (int c = 0; c < 3; ++c) p[c][i] = f.pixels[i * 3 + c];
  }
  return p;
}

Frame from_planes(const std::vector<Plane>& p, int w, int h) {
  Frame f(w, h);
  for (std::size_t i = 0; i < p[0].size(); ++i) {
    for (int c = 0; c < 3; ++c) f.pixels[i * 3 + c] = to_u8(p[c][i]);
  }
  return f;
}

void gaussian_blur(Plane& plane, int w, int h, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double ks = 0.0;
  for (int i = -radius; i <= radius; ++i) ks += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= ks;
  Plane tmp(plane.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * plane[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      plane[y * w + x] = s;
    }
  }
}

// Compression-style blocking: each block's DC drifts toward its own mean
// and picks up a per-block offset, leaving step edges at block borders.
void blockify(Plane& plane, int w, int h, int block, double strength, std::span<const double> offsets) {
  if (strength <= 0.0) return;
  const int blocks_x = (w + block - 1) / block;
  for (int by = 0; by < h; by += block) {
    for (int bx = 0; bx < w; bx += block) {
      const int ye = std::min(h, by + block);
      const int xe = std::min(w, bx + block);
      double mean = 0.0;
      for (int y = by; y < ye; ++y) {
        for (int x = bx; x < xe; ++x) mean += plane[y * w + x];
      }
      mean /= static_cast<double>((ye - by) * (xe - bx));
      const double offset = offsets[(by / block) * blocks_x + bx / block];
      for (int y = by; y < ye; ++y) {
        for (int x = bx; x < xe; ++x) {
          double& v = plane[y * w + x];
          v = (1.0 - 0.5 * strength) * v + 0.5 * strength * mean + strength * offset;
        }
      }
    }
  }
}

}  // namespace

VideoFrames render_pristine(std::uint64_t scene_seed, const SynthOptions& opts) {
  Rng rng(scene_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int w = opts.width;
  const int h = opts.height;

  // Texture: white noise smoothed at three scales, each normalised to unit
  // variance, so any blur strength removes a measurable share of its energy.
  std::vector<Plane> texture(3, Plane(static_cast<std::size_t>(w) * h, 0.0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& plane : texture) {
    for (double scale : {0.6, 1.4, 3.0}) {
      Plane layer(plane.size());
      for (double& v : layer) v = gauss(rng);
      gaussian_blur(layer, w, h, scale);
      double ss = 0.0;
      for (double v : layer) ss += v * v;
      const double norm = std::sqrt(ss / static_cast<double>(layer.size()));
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] += layer[i] / norm / std::sqrt(3.0);
    }
  }
  struct Wave { double fx, fy, phase, amp; };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i) {
    waves.push_back({0.03 + 0.09 * unit(rng), 0.03 + 0.09 * unit(rng), 2 * std::numbers::pi * unit(rng), 1.0});
  }
  const double contrast = 34.0;
  const std::array<double, 3> base{100.0 + 20.0 * unit(rng), 100.0 + 20.0 * unit(rng), 100.0 + 20.0 * unit(rng)};
  const double drift = 2.0;  // gradient shift, pixels per frame

  VideoFrames video;
  video.width = w;
  video.height = h;
  video.frame_rate = opts.fps;
  const int n = opts.fps * opts.seconds;
  for (int t = 0; t < n; ++t) {
    std::vector<Plane> p(3, Plane(texture[0].size()));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double pattern = 0.0;
        for (const Wave& wv : waves) pattern += wv.amp * std::sin(wv.fx * (x + drift * t) + wv.fy * y + wv.phase);
        const double gradient = 40.0 * (std::fmod(x + drift * t, static_cast<double>(w)) / w - 0.5);
        for (int c = 0; c < 3; ++c) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          p[c][i] = base[c] + gradient + contrast * (0.5 * pattern + texture[c][i]);
        }
      }
    }
    video.frames.push_back(from_planes(p, w, h));
  }
  return video;
}

VideoFrames degrade(const VideoFrames& pristine, const Degradation& d, std::uint64_t noise_seed,
                    const SynthOptions& opts) {
  VideoFrames out = pristine;
  Rng rng(noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int bx = (pristine.width + opts.block_size - 1) / opts.block_size;
  const int by = (pristine.height + opts.block_size - 1) / opts.block_size;
  // Block offsets are fixed for the clip, like a DC quantisation error.
  std::vector<double> offsets(static_cast<std::size_t>(bx) * by);
  for (double& o : offsets) o = opts.max_block_offset * unit(rng);
  const double sigma_noise = opts.max_noise_sigma * d.noise;
  for (Frame& f : out.frames) {
    auto planes = to_planes(f);
    for (auto& plane : planes) {
      gaussian_blur(plane, f.width, f.height, opts.max_blur_sigma * d.blur);
      blockify(plane, f.width, f.height, opts.block_size, d.block, offsets);
      if (sigma_noise > 0.0) {
        for (double& v : plane) v += sigma_noise * gauss(rng);
      }
    }
    f = from_planes(planes, f.width, f.height);
  }
  return out;
}

DatasetManifest make_synthetic_corpus(const std::filesystem::path& out_dir, int n_videos, std::uint64_t seed,
                                      const SynthOptions& opts) {
  if (n_videos < 20) fail(ErrorCode::InvalidArgument, "synthetic corpus needs at least 20 videos");
  if (opts.videos_per_scene < 2) fail(ErrorCode::InvalidArgument, "videos_per_scene must be >= 2");
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int scenes = (n_videos + opts.videos_per_scene - 1) / opts.videos_per_scene;
  int made = 0;
  for (int s = 0; s < scenes && made < n_videos; ++s) {
    const VideoFrames pristine = render_pristine(derive_seed(seed, static_cast<std::uint64_t>(s)), opts);
    char scene_id[32];
    std::snprintf(scene_id, sizeof scene_id, "scene%04d", s);
    for (int v = 0; v < opts.videos_per_scene && made < n_videos; ++v, ++made) {
      Degradation d;
      if (v > 0) d = {unit(rng), unit(rng), unit(rng)};
      char vid[32];
      std::snprintf(vid, sizeof vid, "video%05d", made);
      const VideoFrames clip = degrade(pristine, d, derive_seed(seed, 1'000'000 + static_cast<std::uint64_t>(made)), opts);
      save_raw_video(clip, out_dir / vid);
      manifest.records.push_back({vid, out_dir / vid, synthetic_mos(d), scene_id});
    }
  }
  save_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace rqvqa
