#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rqvqa/checkpoint.hpp"
#include "rqvqa/config.hpp"
#include "rqvqa/error.hpp"
#include "rqvqa/eval.hpp"
#include "rqvqa/features.hpp"
#include "rqvqa/gms.hpp"
#include "rqvqa/harness.hpp"
#include "rqvqa/preproc.hpp"
#include "rqvqa/synth.hpp"

namespace fs = std::filesystem;
using namespace rqvqa;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file");
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, "override '" + kv + "' is not key=value");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.train.validate();
  return cfg;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  return out;
}

int report_error(std::string_view code, const std::string& message, int status) {
  std::fprintf(stderr, "error code=%.*s message=\"%s\"\n", static_cast<int>(code.size()), code.data(),
               escape(message).c_str());
  return status;
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

bool parse_number(const std::string& s, double& v) {
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

// Two numeric columns from a CSV; a non-numeric first line is a header.
void read_columns(const std::string& path, int pred_col, int mos_col, std::vector<double>& pred,
                  std::vector<double>& mos) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_fields(line);
    const auto need = static_cast<std::size_t>(std::max(pred_col, mos_col));
    if (cells.size() <= need) fail(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": too few columns");
    double p = 0.0, m = 0.0;
    const bool ok = parse_number(cells[pred_col], p) && parse_number(cells[mos_col], m);
    if (!ok) {
      if (lineno == 1) continue;
      fail(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    pred.push_back(p);
    mos.push_back(m);
  }
}

std::string format_eval(const eval::Report& r) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "srcc=%.6f\nplcc_raw=%.6f\nplcc_4pl=%.6f\n", r.srcc, r.plcc_raw, r.plcc_4pl);
  out += buf;
  if (r.fit) {
    std::snprintf(buf, sizeof buf, "beta1=%.6f\nbeta2=%.6f\nbeta3=%.6f\nbeta4=%.6f\n", r.fit->beta1, r.fit->beta2,
                  r.fit->beta3, r.fit->beta4);
  } else {
    std::snprintf(buf, sizeof buf, "beta1=nan\nbeta2=nan\nbeta3=nan\nbeta4=nan\n");
  }
  out += buf;
  out += "n=" + std::to_string(r.n) + "\n";
  if (r.fit_failed) out += "fit_error=\"" + escape(r.fit_error) + "\"\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RQ-VQA blind video quality assessment"};
  app.require_subcommand(1);

  Common pre_c;
  std::string pre_video, pre_out, pre_branch = "keyframes";
  auto* pre = app.add_subcommand("preprocess", "write the prepared key frames of a raw video");
  add_common(pre, pre_c);
  pre->add_option("--video", pre_video, "raw video directory")->required();
  pre->add_option("--out", pre_out, "output raw video directory")->required();
  pre->add_option("--branch", pre_branch, "keyframes | chunks")->check(CLI::IsMember({"keyframes", "chunks"}));

  Common gms_c;
  std::string gms_video, gms_out;
  std::optional<std::uint64_t> gms_seed;
  auto* gmsc = app.add_subcommand("gms", "sample grid mini-cube fragments and dump them as a raw video");
  gmsc->alias("gms-dump");
  add_common(gmsc, gms_c);
  gmsc->add_option("--video", gms_video, "raw video directory")->required();
  gmsc->add_option("--out", gms_out, "output raw video directory")->required();
  gmsc->add_option("--seed", gms_seed, "offset seed (default: gms_seed from config)");

  Common feat_c;
  std::string feat_manifest, feat_out;
  auto* feat = app.add_subcommand("features", "extract every configured source to RQVF sidecars");
  add_common(feat, feat_c);
  feat->add_option("--manifest", feat_manifest, "dataset manifest")->required();
  feat->add_option("--out", feat_out, "output directory; gets one sidecar dir per video and manifest.csv")->required();

  Common tr_c;
  std::string tr_manifest, tr_out, tr_report;
  auto* tr = app.add_subcommand("train", "train a head on every video of a manifest");
  add_common(tr, tr_c);
  tr->add_option("--manifest", tr_manifest, "training manifest")->required();
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--report", tr_report, "also run split experiments (repeats from config) and write the report");

  Common pr_c;
  std::string pr_ckpt, pr_manifest, pr_out;
  auto* pr = app.add_subcommand("predict", "score a manifest with a checkpoint");
  add_common(pr, pr_c);
  pr->add_option("--checkpoint", pr_ckpt, "checkpoint path")->required();
  pr->add_option("--manifest", pr_manifest, "manifest to score")->required();
  pr->add_option("--out", pr_out, "predictions CSV (default stdout)");

  std::string ev_input, ev_predictions, ev_manifest, ev_out;
  int ev_pred_col = 0, ev_mos_col = 1;
  auto* ev = app.add_subcommand("eval", "SRCC, PLCC and 4PL-mapped PLCC of predictions against MOS");
  ev->add_option("--input", ev_input, "CSV with prediction and MOS columns");
  ev->add_option("--pred-col", ev_pred_col, "0-based prediction column of --input")->check(CLI::NonNegativeNumber);
  ev->add_option("--mos-col", ev_mos_col, "0-based MOS column of --input")->check(CLI::NonNegativeNumber);
  ev->add_option("--predictions", ev_predictions, "predictions CSV, joined with --manifest by video_id");
  ev->add_option("--manifest", ev_manifest, "manifest holding the MOS");
  ev->add_option("--out", ev_out, "report path (default stdout)");

  Common en_c;
  std::string en_train, en_target, en_out;
  std::optional<int> en_k;
  auto* en = app.add_subcommand("ensemble", "train k heads on seeded splits and combine their predictions");
  add_common(en, en_c);
  en->add_option("--train", en_train, "training manifest")->required();
  en->add_option("--target", en_target, "manifest to score")->required();
  en->add_option("--k", en_k, "number of splits (default: k_splits from config)");
  en->add_option("--out", en_out, "predictions CSV (default stdout)");

  std::string sy_out;
  int sy_count = 200;
  std::uint64_t sy_seed = 0;
  SynthOptions sy_opts;
  auto* sy = app.add_subcommand("synth", "generate the synthetic corpus");
  sy->add_option("--out", sy_out, "output directory")->required();
  sy->add_option("--count", sy_count, "number of videos (>= 20)");
  sy->add_option("--seed", sy_seed, "corpus seed");
  sy->add_option("--width", sy_opts.width);
  sy->add_option("--height", sy_opts.height);
  sy->add_option("--fps", sy_opts.fps);
  sy->add_option("--seconds", sy_opts.seconds);
  sy->add_option("--per-scene", sy_opts.videos_per_scene);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (*pre) {
      const PipelineConfig cfg = resolve(pre_c);
      const VideoFrames video = load_raw_video(pre_video);
      VideoFrames out;
      if (pre_branch == "keyframes") {
        for (const auto& f : extract_key_frames(video).frames) out.frames.push_back(prepare_key_frame(f, cfg.extraction));
        out.frame_rate = 1;
      } else {
        for (const auto& chunk : extract_chunks(video).chunks) {
          for (const auto& f : chunk.frames) {
            const int s = cfg.extraction.chunk_size;
            out.frames.push_back(s > 0 ? resize_exact(f, s, s) : f);
          }
        }
        out.frame_rate = video.frame_rate;
      }
      if (out.frames.empty()) fail(ErrorCode::ShortVideo, "video shorter than one second");
      out.width = out.frames.front().width;
      out.height = out.frames.front().height;
      save_raw_video(out, pre_out);
      std::printf("frames=%zu width=%d height=%d\n", out.frames.size(), out.width, out.height);
    } else if (*gmsc) {
      const PipelineConfig cfg = resolve(gms_c);
      const VideoFrames video = load_raw_video(gms_video);
      std::vector<Frame> source;
      if (cfg.extraction.gms_all_frames) {
        source = video.frames;
      } else {
        source = extract_key_frames(video).frames;
      }
      const auto plan = gms::make_plan(video.width, video.height, cfg.extraction.gms_grid, cfg.extraction.gms_patch,
                                       gms_seed.value_or(cfg.extraction.gms_seed));
      const auto volume = gms::sample_fragments(source, plan);
      VideoFrames out;
      out.frames = volume.frames;
      out.width = out.height = plan.fragment_size();
      out.frame_rate = cfg.extraction.gms_all_frames ? video.frame_rate : 1;
      save_raw_video(out, gms_out);
      std::printf("frames=%zu size=%d seed=%llu\n", out.frames.size(), plan.fragment_size(),
                  static_cast<unsigned long long>(plan.seed));
    } else if (*feat) {
      const PipelineConfig cfg = resolve(feat_c);
      const DatasetManifest manifest = load_manifest(feat_manifest);
      const FeatureSet set = build_feature_set(manifest, cfg);
      const Registry registry = cfg.registry();
      DatasetManifest out_manifest;
      for (std::size_t i = 0; i < set.bundles.size(); ++i) {
        ManifestRecord rec = manifest.records[i];
        rec.path = fs::path(feat_out) / rec.video_id;
        fs::create_directories(rec.path);
        for (const auto& [name, source] : registry.sources()) {
          save_sidecar(to_sidecar(set.bundles[i], source), rec.path / (name + ".rqvf"));
        }
        out_manifest.records.push_back(rec);
      }
      save_manifest(out_manifest, fs::path(feat_out) / "manifest.csv");
      std::printf("videos=%zu sources=%zu\n", set.bundles.size(), registry.size());
    } else if (*tr) {
      const PipelineConfig cfg = resolve(tr_c);
      const DatasetManifest manifest = load_manifest(tr_manifest);
      const FeatureSet set = build_feature_set(manifest, cfg);
      std::vector<std::string> ids;
      for (const auto& r : manifest.records) ids.push_back(r.video_id);
      const TrainResult result = train_on(set, ids, cfg, cfg.train.seed);
      save_checkpoint({result.model, cfg.train}, tr_out);
      const auto& last = result.trace.back();
      std::printf("epochs=%zu final_loss=%.6f\n", result.trace.size(), last.mean_loss);
      if (!tr_report.empty()) write_text(format_report(run_experiment(set, cfg, cfg.repeats)), tr_report);
    } else if (*pr) {
      const PipelineConfig cfg = resolve(pr_c);
      const Checkpoint ckpt = load_checkpoint(pr_ckpt);
      write_text(format_predictions(predict(ckpt, load_manifest(pr_manifest), cfg)), pr_out);
    } else if (*ev) {
      std::vector<double> pred, mos;
      if (!ev_input.empty()) {
        read_columns(ev_input, ev_pred_col, ev_mos_col, pred, mos);
      } else if (!ev_predictions.empty() && !ev_manifest.empty()) {
        const DatasetManifest manifest = load_manifest(ev_manifest);
        for (const auto& p : load_predictions(ev_predictions)) {
          pred.push_back(p.score);
          mos.push_back(manifest.at(p.video_id).mos);
        }
      } else {
        fail(ErrorCode::InvalidArgument, "eval needs --input, or --predictions with --manifest");
      }
      write_text(format_eval(eval::evaluate(pred, mos)), ev_out);
    } else if (*en) {
      const PipelineConfig cfg = resolve(en_c);
      const FeatureSet train_set = build_feature_set(load_manifest(en_train), cfg);
      const FeatureSet target_set = build_feature_set(load_manifest(en_target), cfg);
      const auto result = ensemble_predict(train_set, target_set, cfg, en_k.value_or(cfg.k_splits));
      write_text(format_predictions(result.predictions()), en_out);
    } else if (*sy) {
      const DatasetManifest m = make_synthetic_corpus(sy_out, sy_count, sy_seed, sy_opts);
      std::printf("videos=%zu manifest=%s\n", m.records.size(), (fs::path(sy_out) / "manifest.csv").string().c_str());
    }
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what(), 1);
  } catch (const fs::filesystem_error& e) {
    return report_error("io", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
