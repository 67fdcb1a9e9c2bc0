#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rqvqa/features.hpp"
#include "rqvqa/fusion.hpp"
#include "rqvqa/train.hpp"

namespace rqvqa {

enum class Grouping { ByScene, ByVideo };
enum class Combiner { Mean, Median };

struct SourceSpec {
  fusion::Role role = fusion::Role::Spatial;
  FeatureSource source;
};

/// Everything a run needs, read from a key=value text file.
///
///   # comment
///   learning_rate = 1e-4
///   source = spatial:pixelstats          (built-ins need no dim)
///   source = liqe:liqe:keyframe:495:prob
///   source = spatial:swin:tokens:1024:tokens=144
struct PipelineConfig {
  TrainConfig train;
  ExtractionConfig extraction;
  std::vector<SourceSpec> sources;  // empty -> the three built-in extractors
  double split_ratio = 0.8;
  Grouping grouping = Grouping::ByScene;
  int repeats = 1;
  int k_splits = 10;
  Combiner combiner = Combiner::Mean;
  std::uint64_t master_seed = 0;

  std::vector<SourceSpec> effective_sources() const;
  Registry registry() const;
  fusion::ConcatLayout layout() const;
};

SourceSpec parse_source_spec(std::string_view text);
std::string format_source_spec(const SourceSpec& spec);

/// Applies one key=value setting; throws Config on unknown keys or bad values.
void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value);

PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace rqvqa
