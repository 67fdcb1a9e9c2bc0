#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "oracles.hpp"
#include "rqvqa/error.hpp"
#include "rqvqa/features.hpp"
#include "rqvqa/harness.hpp"
#include "rqvqa/synth.hpp"

using namespace rqvqa;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kLaplacianMean = 6;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(SynthMos, Formula) {
  EXPECT_EQ(synthetic_mos({}), 5.0);
  EXPECT_EQ(synthetic_mos({1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(synthetic_mos({0.5, 0, 0}), 4.0);
  EXPECT_DOUBLE_EQ(synthetic_mos({0, 1, 0}), 3.8);
  EXPECT_DOUBLE_EQ(synthetic_mos({0, 0, 1}), 4.2);
}

TEST(Synth, PristineShapeAndDeterminism) {
  SynthOptions o;
  const auto a = render_pristine(3, o), b = render_pristine(3, o);
  validate(a);
  EXPECT_EQ(a.width, 64);
  EXPECT_EQ(a.height, 64);
  EXPECT_EQ(a.frame_rate, 4);
  EXPECT_EQ(a.frame_count(), 12u);
  for (std::size_t i = 0; i < a.frame_count(); ++i) EXPECT_EQ(a.frames[i].pixels, b.frames[i].pixels);
  EXPECT_NE(render_pristine(4, o).frames[0].pixels, a.frames[0].pixels);
  EXPECT_NE(a.frames[0].pixels, a.frames[1].pixels);
}

TEST(Synth, ZeroDegradationIsIdentity) {
  const auto p = render_pristine(5);
  const auto d = degrade(p, {}, 1);
  for (std::size_t i = 0; i < p.frame_count(); ++i) EXPECT_EQ(d.frames[i].pixels, p.frames[i].pixels);
}

TEST(Synth, LaplacianFallsWithBlur) {
  for (std::uint64_t scene = 0; scene < 5; ++scene) {
    const auto p = render_pristine(scene);
    double last = toy_pixelstats(p.frames[0])[kLaplacianMean];
    for (double blur : {0.25, 0.5, 0.75, 1.0}) {
      const auto d = degrade(p, {blur, 0, 0}, 9);
      const double lap = toy_pixelstats(d.frames[0])[kLaplacianMean];
      EXPECT_LT(lap, last) << "scene " << scene << " blur " << blur;
      last = lap;
    }
  }
}

TEST(Synth, NoiseAndBlockingRaiseLaplacian) {
  const auto p = render_pristine(6);
  const auto blurred = degrade(p, {1, 0, 0}, 2);
  const double base = toy_pixelstats(blurred.frames[0])[kLaplacianMean];
  EXPECT_GT(toy_pixelstats(degrade(p, {1, 1, 0}, 2).frames[0])[kLaplacianMean], base);
  EXPECT_GT(toy_pixelstats(degrade(p, {1, 0, 1}, 2).frames[0])[kLaplacianMean], base);
}

TEST(SynthCorpus, PristineTopsEachScene) {
  const auto dir = oracle::temp_dir("synth_a");
  const auto m = make_synthetic_corpus(dir, 23, 7);
  ASSERT_EQ(m.records.size(), 23u);
  std::map<std::string, std::vector<double>> by_scene;
  for (const auto& r : m.records) by_scene[r.scene_id].push_back(r.mos);
  EXPECT_EQ(by_scene.size(), 5u);
  for (const auto& [scene, mos] : by_scene) {
    EXPECT_EQ(mos.front(), 5.0) << scene;
    for (double v : mos) {
      EXPECT_LE(v, mos.front());
      EXPECT_GE(v, 1.0);
    }
  }
  const auto back = load_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.records.size(), 23u);
  for (std::size_t i = 0; i < 23; ++i) {
    EXPECT_EQ(back.records[i].mos, m.records[i].mos);
    EXPECT_EQ(load_raw_video(back.records[i].path).frame_count(), 12u);
  }
}

TEST(SynthCorpus, SameSeedSameBytes) {
  const auto a = oracle::temp_dir("synth_b1"), b = oracle::temp_dir("synth_b2");
  const auto ma = make_synthetic_corpus(a, 20, 11);
  const auto mb = make_synthetic_corpus(b, 20, 11);
  for (std::size_t i = 0; i < ma.records.size(); ++i) {
    EXPECT_EQ(ma.records[i].mos, mb.records[i].mos);
    for (const char* f : {"meta.txt", "frame_000000.rgb", "frame_000011.rgb"}) {
      EXPECT_EQ(slurp(ma.records[i].path / f), slurp(mb.records[i].path / f));
    }
  }
  const auto c = oracle::temp_dir("synth_b3");
  const auto mc = make_synthetic_corpus(c, 20, 12);
  EXPECT_NE(slurp(ma.records[1].path / "frame_000000.rgb"), slurp(mc.records[1].path / "frame_000000.rgb"));
}

TEST(SynthCorpus, Errors) {
  const auto dir = oracle::temp_dir("synth_c");
  EXPECT_THROW(make_synthetic_corpus(dir, 19, 1), Error);
  SynthOptions o;
  o.videos_per_scene = 1;
  EXPECT_THROW(make_synthetic_corpus(dir, 20, 1, o), Error);
}
