#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rqvqa/gms.hpp"
#include "rqvqa/matrix.hpp"
#include "rqvqa/preproc.hpp"
#include "rqvqa/sidecar.hpp"

namespace rqvqa {

struct FeatureSource {
  std::string name;
  Granularity granularity = Granularity::KeyFrame;
  std::uint32_t dim = 0;
  std::uint32_t token_count = 0;  // Tokens granularity only
  bool probability = false;       // rows must be a distribution (LIQE-style)
  std::string prompt_template;    // metadata only, never interpreted

  friend bool operator==(const FeatureSource&, const FeatureSource&) = default;
};

// Built-in deterministic extractors, usable wherever no sidecar is supplied.
inline constexpr const char* kPixelStats = "pixelstats";
inline constexpr const char* kMotionStats = "motionstats";
inline constexpr const char* kFragmentStats = "fragmentstats";
inline constexpr std::uint32_t kPixelStatsDim = 16;
inline constexpr std::uint32_t kMotionStatsDim = 8;

FeatureSource toy_source(const std::string& name);
bool is_toy_source(const std::string& name);

// Widths of the real backbones, used when a config names them without a dim.
inline constexpr std::uint32_t kLiqeDim = 495;
inline constexpr std::uint32_t kQAlignDim = 4096;
inline constexpr std::uint32_t kSwinPooledDim = 1024;
inline constexpr std::uint32_t kSwinTokens = 144;
inline constexpr std::uint32_t kSlowFastDim = 256;
inline constexpr std::uint32_t kFastVqaDim = 768;

/// Immutable set of sources keyed by name.
class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<FeatureSource> sources);

  const FeatureSource& at(const std::string& name) const;
  bool contains(const std::string& name) const { return sources_.count(name) > 0; }
  std::size_t size() const noexcept { return sources_.size(); }
  const std::map<std::string, FeatureSource>& sources() const noexcept { return sources_; }

 private:
  std::map<std::string, FeatureSource> sources_;
};

/// Branch geometry applied before the toy extractors. A zero size skips that
/// step (useful for small synthetic clips).
struct ExtractionConfig {
  int keyframe_min_side = 384;
  int crop_size = 384;
  int chunk_size = 224;
  int gms_grid = gms::kDefaultGridCount;
  int gms_patch = gms::kDefaultPatchSize;
  std::uint64_t gms_seed = 0;
  bool gms_all_frames = false;
  bool validate_probabilities = true;
};

struct FeatureBundle {
  std::string video_id;
  std::size_t segment_count = 0;  // N_z
  std::map<std::string, Matrix> features;

  const Matrix& at(const std::string& name) const;
};

std::vector<double> toy_pixelstats(const Frame& frame);
std::vector<double> toy_motionstats(std::span<const Frame> chunk);
std::vector<double> toy_fragmentstats(const gms::FragmentVolume& fragments);

/// Key-frame branch geometry (min-side resize, then centre crop).
Frame prepare_key_frame(const Frame& frame, const ExtractionConfig& cfg);

/// Builds a validated bundle. Sidecars named `<source>.rqvf` in `sidecar_dir`
/// take precedence over toy extractors; `video` may be null when every
/// source comes from a sidecar.
FeatureBundle assemble_bundle(const std::string& video_id, const VideoFrames* video, const Registry& registry,
                              const std::optional<std::filesystem::path>& sidecar_dir,
                              const ExtractionConfig& cfg = {});

/// Throws unless counts, finiteness and probability rows are consistent.
void validate_bundle(const FeatureBundle& bundle, const Registry& registry, bool validate_probabilities = true);

SidecarSlice to_sidecar(const FeatureBundle& bundle, const FeatureSource& source);

}  // namespace rqvqa
