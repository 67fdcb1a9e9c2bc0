#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <regex>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run run(const std::string& args) {
  static const fs::path dir = oracle::temp_dir("cli_io");
  const std::string cmd =
      std::string(RQVQA_CLI) + " " + args + " >" + (dir / "out").string() + " 2>" + (dir / "err").string();
  Run r;
  const int raw = std::system(cmd.c_str());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

const std::regex kErrorLine(R"(error code=[a-z_]+ message="[^\n]*"\n)");

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = oracle::temp_dir("cli");
    std::ofstream(dir_ / "fast.cfg") << "keyframe_min_side = 0\ncrop_size = 0\nchunk_size = 0\n"
                                        "gms_grid = 4\ngms_patch = 8\nlearning_rate = 1e-3\n"
                                        "epochs = 3\nlr_decay_epoch = 2\nrepeats = 2\nk_splits = 2\n";
    ASSERT_EQ(run("synth --out " + (dir_ / "corpus").string() + " --count 20 --seed 3").status, 0);
  }
  static std::string cfg() { return " --config " + (dir_ / "fast.cfg").string(); }
  static std::string manifest() { return (dir_ / "corpus" / "manifest.csv").string(); }
  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  const auto r = run("");
  EXPECT_EQ(r.status, 2);
  EXPECT_TRUE(std::regex_match(r.err, kErrorLine)) << r.err;
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("train --manifest x").status, 2);
}

TEST_F(Cli, LibraryErrorsAreOneLine) {
  auto r = run("train --manifest " + manifest() + " --out /tmp/x.ckpt --set nope=1");
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(std::regex_match(r.err, kErrorLine)) << r.err;
  EXPECT_EQ(r.err.rfind("error code=config ", 0), 0u) << r.err;

  r = run("eval --predictions /nonexistent.csv --manifest " + manifest());
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(std::regex_match(r.err, kErrorLine)) << r.err;

  r = run("synth --out " + (dir_ / "tiny").string() + " --count 5");
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.err.rfind("error code=invalid_argument ", 0), 0u) << r.err;
}

TEST_F(Cli, TrainPredictEval) {
  const auto ckpt = (dir_ / "m.ckpt").string(), preds = (dir_ / "p.csv").string();
  ASSERT_EQ(run("train --manifest " + manifest() + " --out " + ckpt + cfg()).status, 0);
  auto r = run("predict --checkpoint " + ckpt + " --manifest " + manifest() + " --out " + preds + cfg());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = slurp(preds);
  EXPECT_EQ(csv.rfind("video_id,score\n", 0), 0u);
  EXPECT_TRUE(std::regex_search(csv, std::regex(R"(\nvideo00019,-?[0-9]+\.[0-9]{6}\n$)"))) << csv;

  r = run("predict --checkpoint " + ckpt + " --manifest " + manifest() + cfg());
  EXPECT_EQ(r.out, csv);

  r = run("eval --predictions " + preds + " --manifest " + manifest());
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* key : {"srcc=", "plcc_raw=", "plcc_4pl=", "beta1=", "beta2=", "beta3=", "beta4=", "n=20"}) {
    EXPECT_NE(r.out.find(key), std::string::npos) << key << "\n" << r.out;
  }

  r = run("predict --checkpoint " + ckpt + " --manifest " + manifest() + cfg() + " --set source=spatial:pixelstats");
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.err.rfind("error code=layout_mismatch ", 0), 0u) << r.err;
}

TEST_F(Cli, EvalFromColumns) {
  const auto path = dir_ / "cols.csv";
  std::ofstream(path) << "pred,mos\n1,1\n2,2.5\n3,2\n4,4\n5,5\n6,5.5\n";
  const auto r = run("eval --input " + path.string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("srcc=0.942857"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n=6"), std::string::npos);
}

TEST_F(Cli, GmsDumpWritesRawVideo) {
  const auto video = dir_ / "corpus" / "video00001";
  const auto out = dir_ / "frag";
  const auto r = run("gms-dump --video " + video.string() + " --out " + out.string() + " --seed 4" + cfg());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto meta = slurp(out / "meta.txt");
  EXPECT_NE(meta.find("32"), std::string::npos) << meta;
  EXPECT_TRUE(fs::exists(out / "frame_000000.rgb"));
  EXPECT_EQ(fs::file_size(out / "frame_000000.rgb"), 32u * 32u * 3u);
}

TEST_F(Cli, FeaturesThenPredictFromSidecars) {
  const auto ckpt = (dir_ / "s.ckpt").string();
  ASSERT_EQ(run("train --manifest " + manifest() + " --out " + ckpt + cfg()).status, 0);
  ASSERT_EQ(run("features --manifest " + manifest() + " --out " + (dir_ / "feat").string() + cfg()).status, 0);
  const auto a = run("predict --checkpoint " + ckpt + " --manifest " + manifest() + cfg());
  const auto b = run("predict --checkpoint " + ckpt + " --manifest " + (dir_ / "feat" / "manifest.csv").string() + cfg());
  ASSERT_EQ(a.status, 0);
  ASSERT_EQ(b.status, 0) << b.err;
  const std::regex line(R"(video[0-9]+,(-?[0-9.]+)\n)");
  auto ia = std::sregex_iterator(a.out.begin(), a.out.end(), line);
  auto ib = std::sregex_iterator(b.out.begin(), b.out.end(), line);
  int n = 0;
  for (; ia != std::sregex_iterator() && ib != std::sregex_iterator(); ++ia, ++ib, ++n) {
    EXPECT_NEAR(std::stod((*ia)[1]), std::stod((*ib)[1]), 1e-4);
  }
  EXPECT_EQ(n, 20);
}

TEST_F(Cli, ReportAndEnsemble) {
  const auto report = dir_ / "report.csv";
  auto r = run("train --manifest " + manifest() + " --out " + (dir_ / "r.ckpt").string() + " --report " +
               report.string() + cfg());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto text = slurp(report);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4) << text;
  r = run("ensemble --train " + manifest() + " --target " + manifest() + cfg());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 21);
}
