#include "rqvqa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rqvqa/error.hpp"
#include "rqvqa/random.hpp"

namespace rqvqa {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) fail(ErrorCode::InvalidArgument, "bad number for " + what + ": '" + s + "'");
  return v;
}

}  // namespace

const ManifestRecord& DatasetManifest::at(const std::string& video_id) const {
  for (const auto& r : records) {
    if (r.video_id == video_id) return r;
  }
  fail(ErrorCode::InvalidArgument, "video '" + video_id + "' not in manifest");
}

DatasetManifest DatasetManifest::subset(const std::vector<std::string>& ids) const {
  DatasetManifest out;
  for (const auto& id : ids) out.records.push_back(at(id));
  return out;
}

void validate(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& r : manifest.records) {
    if (r.video_id.empty()) fail(ErrorCode::InvalidArgument, "manifest record with empty video_id");
    if (!seen.insert(r.video_id).second) fail(ErrorCode::InvalidArgument, "duplicate video_id '" + r.video_id + "'");
    if (!std::isfinite(r.mos)) fail(ErrorCode::NonFinite, "non-finite MOS for '" + r.video_id + "'");
  }
}

DatasetManifest load_manifest(const fs::path& csv) {
  const auto lines = read_lines(csv);
  if (lines.empty() || lines.front() != "video_id,path,mos,scene_id") {
    fail(ErrorCode::InvalidArgument, csv.string() + ": expected header video_id,path,mos,scene_id");
  }
  DatasetManifest m;
  const fs::path base = csv.parent_path();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != 4) fail(ErrorCode::InvalidArgument, csv.string() + " line " + std::to_string(i + 1) + ": expected 4 fields");
    fs::path p(cells[1]);
    if (p.is_relative()) p = base / p;
    m.records.push_back({cells[0], p, parse_double(cells[2], "mos of '" + cells[0] + "'"), cells[3]});
  }
  validate(m);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& csv) {
  validate(manifest);
  std::ofstream out(csv);
  if (!out) fail(ErrorCode::Io, "cannot write " + csv.string());
  out << "video_id,path,mos,scene_id\n";
  const fs::path base = csv.parent_path();
  for (const auto& r : manifest.records) {
    fs::path p = r.path;
    if (p.is_absolute() || !base.empty()) {
      const fs::path rel = fs::proximate(p, base.empty() ? fs::current_path() : base);
      if (!rel.empty()) p = rel;
    }
    char mos[64];
    std::snprintf(mos, sizeof mos, "%.17g", r.mos);
    out << r.video_id << ',' << p.generic_string() << ',' << mos << ',' << r.scene_id << '\n';
  }
}

SplitPlan split(const DatasetManifest& manifest, double ratio, Grouping grouping, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& r : manifest.records) {
    groups[grouping == Grouping::ByScene ? r.scene_id : r.video_id].push_back(r.video_id);
  }
  if (groups.size() < 2) fail(ErrorCode::InvalidArgument, "split needs at least 2 groups");

  std::vector<std::string> keys;
  for (const auto& [k, _] : groups) keys.push_back(k);
  Rng rng(seed);
  std::shuffle(keys.begin(), keys.end(), rng);
  const auto g = keys.size();
  auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(g) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, g - 1);

  SplitPlan plan{seed, ratio, grouping, {}, {}};
  for (std::size_t i = 0; i < g; ++i) {
    auto& side = i < n_train ? plan.train_ids : plan.test_ids;
    const auto& members = groups[keys[i]];
    side.insert(side.end(), members.begin(), members.end());
  }
  return plan;
}

std::uint64_t split_seed(std::uint64_t master, int k) { return derive_seed(master, 2 * static_cast<std::uint64_t>(k)); }
std::uint64_t split_train_seed(std::uint64_t master, int k) {
  return derive_seed(master, 2 * static_cast<std::uint64_t>(k) + 1);
}

std::vector<FeatureBundle> extract_features(const DatasetManifest& manifest, const PipelineConfig& cfg, Exec exec) {
  const Registry registry = cfg.registry();
  std::vector<FeatureBundle> bundles(manifest.records.size());
  const auto n = static_cast<long>(bundles.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (long i = 0; i < n; ++i) {
    try {
      const auto& rec = manifest.records[i];
      std::optional<VideoFrames> video;
      if (fs::exists(rec.path / "meta.txt")) video = load_raw_video(rec.path);
      bundles[i] = assemble_bundle(rec.video_id, video ? &*video : nullptr, registry, rec.path, cfg.extraction);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return bundles;
}

const FeatureBundle& FeatureSet::at(const std::string& video_id) const {
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.records[i].video_id == video_id) return bundles[i];
  }
  fail(ErrorCode::InvalidArgument, "video '" + video_id + "' not in feature set");
}

FeatureSet build_feature_set(const DatasetManifest& manifest, const PipelineConfig& cfg) {
  validate(manifest);
  return {manifest, extract_features(manifest, cfg)};
}

TrainResult train_on(const FeatureSet& data, const std::vector<std::string>& ids, const PipelineConfig& cfg,
                     std::uint64_t train_seed) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.manifest.records.size(); ++i) index[data.manifest.records[i].video_id] = i;
  std::vector<LabeledVideo> set;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) fail(ErrorCode::InvalidArgument, "video '" + id + "' not in feature set");
    set.push_back({&data.bundles[it->second], data.manifest.records[it->second].mos});
  }
  TrainConfig tc = cfg.train;
  tc.seed = train_seed;
  return train(set, cfg.layout(), tc);
}

std::vector<Prediction> predict(const fusion::Model& model, const FeatureSet& data) {
  std::vector<const FeatureBundle*> ptrs;
  for (const auto& b : data.bundles) ptrs.push_back(&b);
  const auto scores = fusion::predict(model, ptrs);
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({data.manifest.records[i].video_id, scores[i]});
  return out;
}

std::vector<Prediction> predict(const Checkpoint& ckpt, const DatasetManifest& manifest, const PipelineConfig& cfg) {
  const fusion::ConcatLayout expected = cfg.layout();
  if (!(expected == ckpt.model.layout)) {
    std::string want, got;
    for (const auto& e : ckpt.model.layout.entries()) want += " " + e.source + "/" + std::to_string(e.dim);
    for (const auto& e : expected.entries()) got += " " + e.source + "/" + std::to_string(e.dim);
    fail(ErrorCode::LayoutMismatch, "checkpoint expects sources [" + want + " ] but config provides [" + got + " ]");
  }
  return predict(ckpt.model, build_feature_set(manifest, cfg));
}

std::string format_predictions(const std::vector<Prediction>& preds) {
  std::string out = "video_id,score\n";
  char buf[64];
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof buf, "%.6f", p.score);
    out += p.video_id + "," + buf + "\n";
  }
  return out;
}

void save_predictions(const std::vector<Prediction>& preds, const fs::path& csv) {
  std::ofstream out(csv, std::ios::binary);
  out << format_predictions(preds);
  if (!out) fail(ErrorCode::Io, "cannot write " + csv.string());
}

std::vector<Prediction> load_predictions(const fs::path& csv) {
  const auto lines = read_lines(csv);
  if (lines.empty() || lines.front() != "video_id,score") fail(ErrorCode::InvalidArgument, "expected header video_id,score");
  std::vector<Prediction> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != 2) fail(ErrorCode::InvalidArgument, "line " + std::to_string(i + 1) + ": expected 2 fields");
    out.push_back({cells[0], parse_double(cells[1], "score")});
  }
  return out;
}

ExperimentReport run_experiment(const FeatureSet& data, const PipelineConfig& cfg, int repeats) {
  if (repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be >= 1");
  ExperimentReport report;
  for (int k = 0; k < repeats; ++k) {
    const SplitPlan plan = split(data.manifest, cfg.split_ratio, cfg.grouping, split_seed(cfg.master_seed, k));
    const TrainResult trained = train_on(data, plan.train_ids, cfg, split_train_seed(cfg.master_seed, k));
    std::vector<double> pred, mos;
    for (const auto& id : plan.test_ids) {
      pred.push_back(fusion::predict(trained.model, data.at(id)));
      mos.push_back(data.manifest.at(id).mos);
    }
    const eval::Report r = eval::evaluate(pred, mos);
    report.rows.push_back({k, plan.seed, plan.train_ids.size(), plan.test_ids.size(), r.srcc, r.plcc_raw, r.plcc_4pl});
  }
  SplitRow& m = report.mean;
  m.index = -1;
  for (const auto& row : report.rows) {
    m.srcc += row.srcc;
    m.plcc_raw += row.plcc_raw;
    m.plcc_4pl += row.plcc_4pl;
    m.n_train += row.n_train;
    m.n_test += row.n_test;
  }
  const double n = static_cast<double>(report.rows.size());
  m.srcc /= n;
  m.plcc_raw /= n;
  m.plcc_4pl /= n;
  m.n_train = static_cast<std::size_t>(std::lround(static_cast<double>(m.n_train) / n));
  m.n_test = static_cast<std::size_t>(std::lround(static_cast<double>(m.n_test) / n));
  return report;
}

ExperimentReport run_experiment(const DatasetManifest& manifest, const PipelineConfig& cfg, int repeats) {
  return run_experiment(build_feature_set(manifest, cfg), cfg, repeats);
}

std::string format_report(const ExperimentReport& report) {
  std::string out = "split,seed,n_train,n_test,srcc,plcc_raw,plcc_4pl\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%d,%llu,%zu,%zu,%.6f,%.6f,%.6f\n", r.index, static_cast<unsigned long long>(r.seed),
                  r.n_train, r.n_test, r.srcc, r.plcc_raw, r.plcc_4pl);
    out += buf;
  }
  const auto& m = report.mean;
  std::snprintf(buf, sizeof buf, "mean,,%zu,%zu,%.6f,%.6f,%.6f\n", m.n_train, m.n_test, m.srcc, m.plcc_raw, m.plcc_4pl);
  out += buf;
  return out;
}

double combine(std::span<const double> values, Combiner combiner) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "nothing to combine");
  if (combiner == Combiner::Mean) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  return sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

std::vector<Prediction> EnsembleResult::predictions() const {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < video_ids.size(); ++i) out.push_back({video_ids[i], scores[i]});
  return out;
}

EnsembleResult ensemble_predict(const FeatureSet& train, const FeatureSet& target, const PipelineConfig& cfg, int k) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "ensemble needs k >= 2");
  EnsembleResult result;
  for (const auto& r : target.manifest.records) result.video_ids.push_back(r.video_id);
  for (int s = 0; s < k; ++s) {
    const SplitPlan plan = split(train.manifest, cfg.split_ratio, cfg.grouping, split_seed(cfg.master_seed, s));
    const TrainResult trained = train_on(train, plan.train_ids, cfg, split_train_seed(cfg.master_seed, s));
    std::vector<double> scores;
    for (const auto& p : predict(trained.model, target)) scores.push_back(p.score);
    result.model_scores.push_back(std::move(scores));
  }
  result.scores.resize(result.video_ids.size());
  std::vector<double> column(static_cast<std::size_t>(k));
  for (std::size_t v = 0; v < result.video_ids.size(); ++v) {
    for (int s = 0; s < k; ++s) column[s] = result.model_scores[s][v];
    result.scores[v] = combine(column, cfg.combiner);
  }
  return result;
}

}  // namespace rqvqa
