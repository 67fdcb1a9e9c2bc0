#pragma once

#include <cstdint>
#include <filesystem>

#include "rqvqa/preproc.hpp"

namespace rqvqa {

struct DatasetManifest;

/// Degradation strengths, each in [0, 1].
struct Degradation {
  double blur = 0.0;
  double noise = 0.0;
  double block = 0.0;
};

struct SynthOptions {
  int width = 64;
  int height = 64;
  int fps = 4;
  int seconds = 3;
  int videos_per_scene = 5;
  double max_blur_sigma = 2.0;    // Gaussian sigma at blur = 1
  double max_noise_sigma = 12.0;  // additive Gaussian sigma at noise = 1
  int block_size = 8;
  double max_block_offset = 20.0;  // per-block DC offset bound at block = 1
};

/// mos = 5 - 4 * (0.5 blur + 0.3 noise + 0.2 block), in [1, 5].
double synthetic_mos(const Degradation& d);

/// Pristine clip of a scene: textured noise plus a moving gradient.
VideoFrames render_pristine(std::uint64_t scene_seed, const SynthOptions& opts = {});

/// Blur, then blockiness, then noise; deterministic in (noise_seed, d).
VideoFrames degrade(const VideoFrames& pristine, const Degradation& d, std::uint64_t noise_seed,
                    const SynthOptions& opts = {});

/// Writes `n_videos` raw video directories plus manifest.csv under out_dir.
/// The first video of every scene is pristine, so it holds the scene's top MOS.
DatasetManifest make_synthetic_corpus(const std::filesystem::path& out_dir, int n_videos, std::uint64_t seed,
                                      const SynthOptions& opts = {});

}  // namespace rqvqa
