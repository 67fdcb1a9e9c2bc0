#include "rqvqa/features.hpp"

#include <algorithm>
#include <cmath>

#include "rqvqa/error.hpp"
#include "rqvqa/kernels.hpp"

namespace rqvqa {

namespace fs = std::filesystem;

FeatureSource toy_source(const std::string& name) {
  if (name == kPixelStats) return {name, Granularity::KeyFrame, kPixelStatsDim, 0, false, {}};
  if (name == kMotionStats) return {name, Granularity::Chunk, kMotionStatsDim, 0, false, {}};
  if (name == kFragmentStats) return {name, Granularity::Video, kPixelStatsDim, 0, false, {}};
  fail(ErrorCode::MissingSource, "no built-in extractor named '" + name + "'");
}

bool is_toy_source(const std::string& name) {
  return name == kPixelStats || name == kMotionStats || name == kFragmentStats;
}

Registry::Registry(std::vector<FeatureSource> sources) {
  for (auto& s : sources) {
    if (s.name.empty()) fail(ErrorCode::Config, "feature source needs a name");
    if (s.dim < 1) fail(ErrorCode::Config, "source '" + s.name + "' needs dim >= 1");
    if (s.granularity == Granularity::Tokens && s.token_count < 1) {
      fail(ErrorCode::Config, "token source '" + s.name + "' needs token_count >= 1");
    }
    if (s.granularity != Granularity::Tokens) s.token_count = 0;
    if (!sources_.emplace(s.name, s).second) fail(ErrorCode::Config, "duplicate source name '" + s.name + "'");
  }
}

const FeatureSource& Registry::at(const std::string& name) const {
  const auto it = sources_.find(name);
  if (it == sources_.end()) fail(ErrorCode::MissingSource, "source '" + name + "' not registered");
  return it->second;
}

const Matrix& FeatureBundle::at(const std::string& name) const {
  const auto it = features.find(name);
  if (it == features.end()) fail(ErrorCode::MissingSource, "bundle '" + video_id + "' has no source '" + name + "'");
  return it->second;
}

std::vector<double> toy_pixelstats(const Frame& frame) {
  if (frame.empty()) fail(ErrorCode::Geometry, "pixelstats on an empty frame");
  const PixelMoments m = kernels::pixel_moments(frame);
  const double n = m.pixel_count;
  std::vector<double> out;
  out.reserve(kPixelStatsDim);
  for (int c = 0; c < 3; ++c) out.push_back(m.channel_sum[c] / n / 255.0);
  for (int c = 0; c < 3; ++c) {
    const double mean = m.channel_sum[c] / n;
    out.push_back(std::sqrt(std::max(0.0, m.channel_sumsq[c] / n - mean * mean)) / 127.5);
  }
  // |Laplacian| of luma is bounded by 4 * 255.
  const double lap_mean = m.laplacian_sum / n;
  out.push_back(lap_mean / 1020.0);
  out.push_back(std::sqrt(std::max(0.0, m.laplacian_sumsq / n - lap_mean * lap_mean)) / 510.0);
  for (double count : m.luma_histogram) out.push_back(count / n);
  return out;
}

std::vector<double> toy_motionstats(std::span<const Frame> chunk) {
  if (chunk.size() < 2) fail(ErrorCode::InvalidArgument, "motionstats needs a chunk of at least 2 frames");
  std::vector<double> per_pair;
  std::array<double, 5> hist{};
  double samples = 0.0;
  for (std::size_t k = 1; k < chunk.size(); ++k) {
    if (chunk[k].width != chunk[0].width || chunk[k].height != chunk[0].height) {
      fail(ErrorCode::Geometry, "chunk frames differ in size");
    }
    const DiffMoments d = kernels::diff_moments(chunk[k - 1], chunk[k]);
    per_pair.push_back(d.abs_sum / d.sample_count);
    for (int b = 0; b < 5; ++b) hist[b] += d.histogram[b];
    samples += d.sample_count;
  }
  double mean = 0.0;
  for (double d : per_pair) mean += d;
  mean /= static_cast<double>(per_pair.size());
  double var = 0.0;
  for (double d : per_pair) var += (d - mean) * (d - mean);
  var /= static_cast<double>(per_pair.size());
  const double peak = *std::max_element(per_pair.begin(), per_pair.end());

  std::vector<double> out{mean / 255.0, std::sqrt(var) / 127.5, peak / 255.0};
  for (double h : hist) out.push_back(h / samples);
  return out;
}

std::vector<double> toy_fragmentstats(const gms::FragmentVolume& fragments) {
  if (fragments.frames.empty()) fail(ErrorCode::InvalidArgument, "fragment volume has no frames");
  const Frame& first = fragments.frames.front();
  std::vector<double> acc(first.pixels.size(), 0.0);
  for (const Frame& f : fragments.frames) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f.pixels[i];
  }
  Frame mean(first.width, first.height);
  const double t = static_cast<double>(fragments.frames.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    mean.pixels[i] = static_cast<std::uint8_t>(std::lround(acc[i] / t));
  }
  return toy_pixelstats(mean);
}

Frame prepare_key_frame(const Frame& frame, const ExtractionConfig& cfg) {
  Frame out = cfg.keyframe_min_side > 0 ? resize_min_side(frame, cfg.keyframe_min_side) : frame;
  if (cfg.crop_size > 0) out = crop(out, cfg.crop_size, CropMode::Center);
  return out;
}

namespace {

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t dim) {
  Matrix m(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return m;
}

Matrix extract_toy(const std::string& name, const VideoFrames& video, const ExtractionConfig& cfg) {
  if (name == kPixelStats) {
    const KeyFrameSet keys = extract_key_frames(video);
    std::vector<std::vector<double>> rows;
    for (const Frame& f : keys.frames) rows.push_back(toy_pixelstats(prepare_key_frame(f, cfg)));
    return rows_to_matrix(rows, kPixelStatsDim);
  }
  if (name == kMotionStats) {
    const ChunkSet chunks = extract_chunks(video);
    std::vector<std::vector<double>> rows;
    for (const Chunk& c : chunks.chunks) {
      if (cfg.chunk_size > 0) {
        std::vector<Frame> resized;
        resized.reserve(c.frames.size());
        for (const Frame& f : c.frames) resized.push_back(resize_exact(f, cfg.chunk_size, cfg.chunk_size));
        rows.push_back(toy_motionstats(resized));
      } else {
        rows.push_back(toy_motionstats(c.frames));
      }
    }
    return rows_to_matrix(rows, kMotionStatsDim);
  }
  // fragmentstats
  const gms::Plan plan = gms::make_plan(video.width, video.height, cfg.gms_grid, cfg.gms_patch, cfg.gms_seed);
  gms::FragmentVolume volume;
  if (cfg.gms_all_frames) {
    volume = gms::sample_fragments(video.frames, plan);
  } else {
    const KeyFrameSet keys = extract_key_frames(video);
    volume = gms::sample_fragments(keys.frames, plan);
  }
  return rows_to_matrix({toy_fragmentstats(volume)}, kPixelStatsDim);
}

std::size_t expected_rows(const FeatureSource& s, std::size_t segments) {
  switch (s.granularity) {
    case Granularity::KeyFrame:
    case Granularity::Chunk: return segments;
    case Granularity::Tokens: return segments * s.token_count;
    case Granularity::Video: return 1;
  }
  return 0;
}

Matrix from_sidecar(const SidecarSlice& slice, const FeatureSource& source, const std::string& video_id) {
  const std::string where = "source '" + source.name + "' of '" + video_id + "': ";
  if (slice.dim != source.dim) {
    fail(ErrorCode::DimMismatch, where + "dim mismatch (file " + std::to_string(slice.dim) + ", registry " +
                                     std::to_string(source.dim) + ")");
  }
  if (slice.granularity != source.granularity) {
    fail(ErrorCode::GranularityMismatch, where + "granularity mismatch (file " +
                                             std::string(to_string(slice.granularity)) + ", registry " +
                                             std::string(to_string(source.granularity)) + ")");
  }
  if (slice.token_count != source.token_count) {
    fail(ErrorCode::CountMismatch, where + "token_count mismatch");
  }
  Matrix m(slice.rows(), slice.dim);
  std::copy(slice.values.begin(), slice.values.end(), m.data().begin());
  return m;
}

}  // namespace

void validate_bundle(const FeatureBundle& bundle, const Registry& registry, bool validate_probabilities) {
  for (const auto& [name, source] : registry.sources()) {
    const Matrix& m = bundle.at(name);
    const std::size_t rows = expected_rows(source, bundle.segment_count);
    if (m.rows() != rows) {
      fail(ErrorCode::CountMismatch, "source '" + name + "' of '" + bundle.video_id + "' has " +
                                         std::to_string(m.rows()) + " rows, expected " + std::to_string(rows) +
                                         " for " + std::to_string(bundle.segment_count) + " key frames");
    }
    if (m.cols() != source.dim) fail(ErrorCode::DimMismatch, "source '" + name + "' dim mismatch");
    for (double v : m.data()) {
      if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "source '" + name + "' of '" + bundle.video_id + "' has non-finite values");
    }
    if (source.probability && validate_probabilities) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        double sum = 0.0;
        for (double v : m.row(r)) {
          if (v < 0.0) fail(ErrorCode::Probability, "probability rows must be nonnegative ('" + name + "')");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-4) {
          fail(ErrorCode::Probability, "probability rows must sum to 1 ('" + name + "' row " + std::to_string(r) +
                                           " sums to " + std::to_string(sum) + ")");
        }
      }
    }
  }
}

FeatureBundle assemble_bundle(const std::string& video_id, const VideoFrames* video, const Registry& registry,
                              const std::optional<fs::path>& sidecar_dir, const ExtractionConfig& cfg) {
  FeatureBundle bundle;
  bundle.video_id = video_id;
  if (video != nullptr) {
    validate(*video);
    bundle.segment_count = whole_seconds(*video);
  }

  std::vector<std::string> missing;
  for (const auto& [name, source] : registry.sources()) {
    std::optional<fs::path> file;
    if (sidecar_dir) {
      const fs::path p = *sidecar_dir / (name + ".rqvf");
      if (fs::exists(p)) file = p;
    }
    if (file) {
      const SidecarSlice slice = load_sidecar(*file);
      bundle.features.emplace(name, from_sidecar(slice, source, video_id));
      if (bundle.segment_count == 0 && source.granularity != Granularity::Video) {
        bundle.segment_count = slice.count;
      }
    } else if (video != nullptr && is_toy_source(name)) {
      const FeatureSource toy = toy_source(name);
      if (toy.dim != source.dim || toy.granularity != source.granularity) {
        fail(ErrorCode::DimMismatch, "built-in '" + name + "' is " + std::string(to_string(toy.granularity)) +
                                         "/" + std::to_string(toy.dim) + ", registry declares " +
                                         std::string(to_string(source.granularity)) + "/" +
                                         std::to_string(source.dim));
      }
      bundle.features.emplace(name, extract_toy(name, *video, cfg));
    } else {
      missing.push_back(name);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail(ErrorCode::MissingSource, "missing feature sources for '" + video_id + "': " + list);
  }
  if (bundle.segment_count == 0) {
    fail(ErrorCode::CountMismatch, "cannot infer key-frame count for '" + video_id + "'");
  }
  validate_bundle(bundle, registry, cfg.validate_probabilities);
  return bundle;
}

SidecarSlice to_sidecar(const FeatureBundle& bundle, const FeatureSource& source) {
  const Matrix& m = bundle.at(source.name);
  SidecarSlice s;
  s.name = source.name;
  s.granularity = source.granularity;
  s.token_count = source.token_count;
  s.dim = source.dim;
  s.count = source.granularity == Granularity::Video ? 1 : static_cast<std::uint32_t>(bundle.segment_count);
  s.values.assign(m.data().begin(), m.data().end());
  return s;
}

}  // namespace rqvqa
