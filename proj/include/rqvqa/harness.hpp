#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rqvqa/checkpoint.hpp"
#include "rqvqa/config.hpp"
#include "rqvqa/eval.hpp"
#include "rqvqa/features.hpp"

namespace rqvqa {

struct ManifestRecord {
  std::string video_id;
  std::filesystem::path path;  // raw video directory and/or sidecar directory
  double mos = 0.0;
  std::string scene_id;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  const ManifestRecord& at(const std::string& video_id) const;
  DatasetManifest subset(const std::vector<std::string>& ids) const;
};

/// CSV with header `video_id,path,mos,scene_id`; relative paths resolve
/// against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& csv);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& csv);
void validate(const DatasetManifest& manifest);

struct SplitPlan {
  std::uint64_t seed = 0;
  double ratio = 0.8;
  Grouping grouping = Grouping::ByScene;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Groups are sorted, shuffled by `seed`, and the first ceil(ratio * G) go to
/// training (at most G - 1, so the test side is never empty).
SplitPlan split(const DatasetManifest& manifest, double ratio, Grouping grouping, std::uint64_t seed);

/// Seeds for split k of a run with master seed m:
///   split shuffle   derive_seed(m, 2k)
///   model training  derive_seed(m, 2k + 1)
std::uint64_t split_seed(std::uint64_t master, int k);
std::uint64_t split_train_seed(std::uint64_t master, int k);

/// Features for every record, in manifest order; extraction runs in parallel
/// across videos.
std::vector<FeatureBundle> extract_features(const DatasetManifest& manifest, const PipelineConfig& cfg,
                                            Exec exec = Exec::Parallel);

struct FeatureSet {
  DatasetManifest manifest;
  std::vector<FeatureBundle> bundles;

  const FeatureBundle& at(const std::string& video_id) const;
};

FeatureSet build_feature_set(const DatasetManifest& manifest, const PipelineConfig& cfg);

/// Train one head on the given ids.
TrainResult train_on(const FeatureSet& data, const std::vector<std::string>& ids, const PipelineConfig& cfg,
                     std::uint64_t train_seed);

struct Prediction {
  std::string video_id;
  double score = 0.0;
};

std::vector<Prediction> predict(const fusion::Model& model, const FeatureSet& data);
std::vector<Prediction> predict(const Checkpoint& ckpt, const DatasetManifest& manifest, const PipelineConfig& cfg);

/// CSV `video_id,score`, six decimals.
std::string format_predictions(const std::vector<Prediction>& preds);
void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& csv);
std::vector<Prediction> load_predictions(const std::filesystem::path& csv);

struct SplitRow {
  int index = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double srcc = 0.0;
  double plcc_raw = 0.0;
  double plcc_4pl = 0.0;
};

struct ExperimentReport {
  std::vector<SplitRow> rows;
  SplitRow mean;  // index = -1
};

ExperimentReport run_experiment(const FeatureSet& data, const PipelineConfig& cfg, int repeats);
ExperimentReport run_experiment(const DatasetManifest& manifest, const PipelineConfig& cfg, int repeats);
std::string format_report(const ExperimentReport& report);

struct EnsembleResult {
  std::vector<std::string> video_ids;               // target order
  std::vector<std::vector<double>> model_scores;    // [model][video]
  std::vector<double> scores;                       // combined
  std::vector<Prediction> predictions() const;
};

double combine(std::span<const double> values, Combiner combiner);

/// Trains k heads on k seeded splits of `train` and averages (or takes the
/// median of) their predictions on `target`.
EnsembleResult ensemble_predict(const FeatureSet& train, const FeatureSet& target, const PipelineConfig& cfg, int k);

}  // namespace rqvqa
