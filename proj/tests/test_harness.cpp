#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rqvqa/config.hpp"
#include "rqvqa/error.hpp"
#include "rqvqa/harness.hpp"
#include "rqvqa/sidecar.hpp"

using namespace rqvqa;
namespace fs = std::filesystem;

namespace {

DatasetManifest scene_manifest(int scenes, int per_scene) {
  DatasetManifest m;
  for (int s = 0; s < scenes; ++s)
    for (int v = 0; v < per_scene; ++v) {
      const std::string id = "s" + std::to_string(s) + "_v" + std::to_string(v);
      m.records.push_back({id, fs::path("videos") / id, 1.0 + 0.37 * ((s * per_scene + v) % 11), "scene" + std::to_string(s)});
    }
  return m;
}

// Feature column 0 tracks MOS; columns 1..3 are noise.
FeatureSet synthetic_set(int scenes, int per_scene, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  FeatureSet set;
  set.manifest = scene_manifest(scenes, per_scene);
  for (const auto& r : set.manifest.records) {
    FeatureBundle b;
    b.video_id = r.video_id;
    b.segment_count = 2;
    b.features["f"] = Matrix(2, 4);
    for (std::size_t row = 0; row < 2; ++row) {
      b.features["f"](row, 0) = (r.mos - 3.0) / 2.0 + 0.05 * nd(rng);
      for (std::size_t c = 1; c < 4; ++c) b.features["f"](row, c) = nd(rng);
    }
    set.bundles.push_back(std::move(b));
  }
  return set;
}

PipelineConfig small_config() {
  PipelineConfig cfg = parse_config(
      "source = spatial:f:keyframe:4\n"
      "learning_rate = 1e-2\n"
      "epochs = 4\n"
      "lr_decay_epoch = 3\n"
      "hidden = 8\n"
      "seed = 5\n");
  return cfg;
}

std::set<std::string> scenes_of(const DatasetManifest& m, const std::vector<std::string>& ids) {
  std::set<std::string> out;
  for (const auto& id : ids) out.insert(m.at(id).scene_id);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Manifest, RoundTrip) {
  const auto dir = oracle::temp_dir("manifest");
  DatasetManifest m = scene_manifest(3, 2);
  m.records[1].mos = 3.14159265358979;
  for (auto& r : m.records) r.path = dir / r.path;
  save_manifest(m, dir / "m.csv");
  const auto back = load_manifest(dir / "m.csv");
  ASSERT_EQ(back.records.size(), m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(back.records[i].video_id, m.records[i].video_id);
    EXPECT_EQ(back.records[i].mos, m.records[i].mos);
    EXPECT_EQ(back.records[i].scene_id, m.records[i].scene_id);
    EXPECT_EQ(fs::weakly_canonical(back.records[i].path), fs::weakly_canonical(m.records[i].path));
  }
  EXPECT_EQ(slurp(dir / "m.csv").substr(0, 27), "video_id,path,mos,scene_id\n");
}

TEST(Manifest, RelativePathsResolveAgainstManifestDir) {
  const auto dir = oracle::temp_dir("manifest_rel");
  {
    std::ofstream out(dir / "m.csv");
    out << "video_id,path,mos,scene_id\na,clips/a,4.5,s1\nb,/abs/b,2,s2\n";
  }
  const auto m = load_manifest(dir / "m.csv");
  EXPECT_EQ(m.records[0].path, dir / "clips/a");
  EXPECT_EQ(m.records[1].path, fs::path("/abs/b"));
  EXPECT_EQ(m.at("b").mos, 2.0);
  EXPECT_THROW(m.at("c"), Error);
}

TEST(Manifest, Errors) {
  const auto dir = oracle::temp_dir("manifest_err");
  auto write = [&](const std::string& body) {
    std::ofstream out(dir / "m.csv");
    out << body;
  };
  write("id,path,mos,scene\na,a,1,s\n");
  EXPECT_THROW(load_manifest(dir / "m.csv"), Error);
  write("video_id,path,mos,scene_id\na,a,1\n");
  EXPECT_THROW(load_manifest(dir / "m.csv"), Error);
  write("video_id,path,mos,scene_id\na,a,high,s\n");
  EXPECT_THROW(load_manifest(dir / "m.csv"), Error);
  write("video_id,path,mos,scene_id\na,a,1,s\na,b,2,s\n");
  EXPECT_THROW(load_manifest(dir / "m.csv"), Error);
  EXPECT_THROW(load_manifest(dir / "none.csv"), Error);
}

TEST(Split, SceneGroupedProportions) {
  const auto m = scene_manifest(10, 3);
  const auto plan = split(m, 0.8, Grouping::ByScene, 1);
  EXPECT_EQ(scenes_of(m, plan.train_ids).size(), 8u);
  EXPECT_EQ(scenes_of(m, plan.test_ids).size(), 2u);
  EXPECT_EQ(plan.train_ids.size(), 24u);
  EXPECT_EQ(plan.test_ids.size(), 6u);

  const auto by_video = split(m, 0.8, Grouping::ByVideo, 1);
  EXPECT_EQ(by_video.train_ids.size(), 24u);
  EXPECT_EQ(by_video.test_ids.size(), 6u);
}

TEST(Split, NoSceneLeaksAcrossSeeds) {
  const auto m = scene_manifest(10, 3);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto plan = split(m, 0.8, Grouping::ByScene, seed);
    const auto a = scenes_of(m, plan.train_ids), b = scenes_of(m, plan.test_ids);
    for (const auto& s : b) ASSERT_EQ(a.count(s), 0u) << seed;
    ASSERT_EQ(plan.train_ids.size() + plan.test_ids.size(), m.records.size());
    std::set<std::string> all(plan.train_ids.begin(), plan.train_ids.end());
    all.insert(plan.test_ids.begin(), plan.test_ids.end());
    ASSERT_EQ(all.size(), m.records.size());
  }
}

TEST(Split, DeterministicAndSeedSensitive) {
  const auto m = scene_manifest(10, 3);
  const auto a = split(m, 0.8, Grouping::ByScene, 42), b = split(m, 0.8, Grouping::ByScene, 42);
  EXPECT_EQ(a.train_ids, b.train_ids);
  EXPECT_EQ(a.test_ids, b.test_ids);
  std::set<std::vector<std::string>> distinct;
  for (std::uint64_t s = 0; s < 20; ++s) distinct.insert(split(m, 0.8, Grouping::ByScene, s).test_ids);
  EXPECT_GT(distinct.size(), 5u);

  auto reversed = m;
  std::reverse(reversed.records.begin(), reversed.records.end());
  EXPECT_EQ(scenes_of(m, split(reversed, 0.8, Grouping::ByScene, 42).test_ids), scenes_of(m, a.test_ids));
}

TEST(Split, Errors) {
  const auto one = scene_manifest(1, 4);
  EXPECT_THROW(split(one, 0.8, Grouping::ByScene, 0), Error);
  const auto m = scene_manifest(3, 2);
  EXPECT_THROW(split(m, 0.0, Grouping::ByScene, 0), Error);
  EXPECT_THROW(split(m, 1.0, Grouping::ByScene, 0), Error);
  const auto two = scene_manifest(2, 2);
  const auto plan = split(two, 0.99, Grouping::ByScene, 0);
  EXPECT_EQ(plan.test_ids.size(), 2u);
}

TEST(Seeds, SplitAndTrainSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (int k = 0; k < 50; ++k) {
    EXPECT_EQ(split_seed(7, k), derive_seed(7, 2 * k));
    EXPECT_EQ(split_train_seed(7, k), derive_seed(7, 2 * k + 1));
    seen.insert(split_seed(7, k));
    seen.insert(split_train_seed(7, k));
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Experiment, RowsAndMean) {
  const auto data = synthetic_set(10, 4, 3);
  const auto cfg = small_config();
  const auto report = run_experiment(data, cfg, 5);
  ASSERT_EQ(report.rows.size(), 5u);
  double srcc = 0, raw = 0, fit = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& r = report.rows[k];
    EXPECT_EQ(r.index, static_cast<int>(k));
    EXPECT_EQ(r.seed, split_seed(cfg.master_seed, static_cast<int>(k)));
    EXPECT_EQ(r.n_train, 32u);
    EXPECT_EQ(r.n_test, 8u);
    srcc += r.srcc;
    raw += r.plcc_raw;
    fit += r.plcc_4pl;
  }
  EXPECT_EQ(report.mean.index, -1);
  EXPECT_NEAR(report.mean.srcc, srcc / 5, 1e-12);
  EXPECT_NEAR(report.mean.plcc_raw, raw / 5, 1e-12);
  EXPECT_NEAR(report.mean.plcc_4pl, fit / 5, 1e-12);

  const auto text = format_report(report);
  EXPECT_EQ(text.substr(0, text.find('\n')), "split,seed,n_train,n_test,srcc,plcc_raw,plcc_4pl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_NE(text.find("\nmean,,32,8,"), std::string::npos);

  EXPECT_EQ(format_report(run_experiment(data, cfg, 5)), text);
  EXPECT_THROW(run_experiment(data, cfg, 0), Error);
}

TEST(Predictions, FormatAndRoundTrip) {
  const std::vector<Prediction> preds{{"a", 3.1234565}, {"b", -0.5}, {"c", 4.0}};
  EXPECT_EQ(format_predictions(preds), "video_id,score\na,3.123457\nb,-0.500000\nc,4.000000\n");
  const auto dir = oracle::temp_dir("preds");
  save_predictions(preds, dir / "p.csv");
  const auto back = load_predictions(dir / "p.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].video_id, "a");
  EXPECT_EQ(back[0].score, 3.123457);
  std::ofstream(dir / "bad.csv") << "id,score\n";
  EXPECT_THROW(load_predictions(dir / "bad.csv"), Error);
}

TEST(Predictions, ByteIdenticalAcrossRuns) {
  const auto data = synthetic_set(6, 4, 4);
  const auto cfg = small_config();
  const auto plan = split(data.manifest, 0.8, Grouping::ByScene, 1);
  const auto a = train_on(data, plan.train_ids, cfg, 11);
  const auto b = train_on(data, plan.train_ids, cfg, 11);
  EXPECT_EQ(format_predictions(predict(a.model, data)), format_predictions(predict(b.model, data)));
  EXPECT_THROW(train_on(data, {"nope", "s0_v0"}, cfg, 1), Error);
}

TEST(Ensemble, CombinesPerModelScores) {
  const auto train = synthetic_set(8, 3, 5);
  const auto target = synthetic_set(2, 3, 6);
  auto cfg = small_config();
  const auto r = ensemble_predict(train, target, cfg, 3);
  ASSERT_EQ(r.model_scores.size(), 3u);
  ASSERT_EQ(r.video_ids.size(), 6u);
  for (std::size_t v = 0; v < 6; ++v) {
    const double mean = (r.model_scores[0][v] + r.model_scores[1][v] + r.model_scores[2][v]) / 3.0;
    EXPECT_EQ(r.scores[v], mean);
    EXPECT_EQ(r.video_ids[v], target.manifest.records[v].video_id);
  }
  cfg.combiner = Combiner::Median;
  const auto med = ensemble_predict(train, target, cfg, 3);
  for (std::size_t v = 0; v < 6; ++v) {
    std::vector<double> col{med.model_scores[0][v], med.model_scores[1][v], med.model_scores[2][v]};
    std::sort(col.begin(), col.end());
    EXPECT_EQ(med.scores[v], col[1]);
  }
  EXPECT_EQ(med.predictions().size(), 6u);
  EXPECT_THROW(ensemble_predict(train, target, cfg, 1), Error);
}

TEST(Combine, MeanAndMedian) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(combine(v, Combiner::Mean), 2.5);
  EXPECT_EQ(combine(v, Combiner::Median), 2.5);
  EXPECT_EQ(combine(std::vector<double>{5, 1, 3}, Combiner::Median), 3.0);
  EXPECT_THROW(combine(std::vector<double>{}, Combiner::Mean), Error);
}

TEST(FeatureSet, SidecarSourcesAndMissingSource) {
  const auto dir = oracle::temp_dir("featureset");
  auto data = synthetic_set(3, 2, 7);
  const auto cfg = small_config();
  const FeatureSource f = cfg.sources[0].source;
  for (std::size_t i = 0; i < data.bundles.size(); ++i) {
    auto& rec = data.manifest.records[i];
    rec.path = dir / rec.video_id;
    fs::create_directories(rec.path);
    save_sidecar(to_sidecar(data.bundles[i], f), rec.path / "f.rqvf");
  }
  const auto built = build_feature_set(data.manifest, cfg);
  for (std::size_t i = 0; i < data.bundles.size(); ++i) {
    const auto got = built.bundles[i].at("f").data(), want = data.bundles[i].at("f").data();
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k], static_cast<double>(static_cast<float>(want[k])));
  }
  fs::remove(data.manifest.records[2].path / "f.rqvf");
  try {
    build_feature_set(data.manifest, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingSource);
  }
}

TEST(Checkpoint, LayoutMismatchOnPredict) {
  const auto data = synthetic_set(4, 2, 8);
  const auto cfg = small_config();
  const auto trained = train_on(data, {"s0_v0", "s0_v1", "s1_v0", "s1_v1"}, cfg, 1);
  auto other = cfg;
  other.sources = {parse_source_spec("spatial:f:keyframe:5")};
  try {
    predict(Checkpoint{trained.model, cfg.train}, data.manifest, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LayoutMismatch);
  }
}
