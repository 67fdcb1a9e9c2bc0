#include "rqvqa/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    fail(ErrorCode::Config, "bad value for '" + std::string(key) + "': '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(ErrorCode::Config, "bad boolean for '" + std::string(key) + "': '" + std::string(value) + "'");
}

}  // namespace

SourceSpec parse_source_spec(std::string_view text) {
  const auto parts = split(trim(text), ':');
  if (parts.size() < 2) fail(ErrorCode::Config, "source spec needs role:name, got '" + std::string(text) + "'");
  SourceSpec spec;
  spec.role = fusion::parse_role(trim(parts[0]));
  const std::string name(trim(parts[1]));
  if (parts.size() == 2) {
    spec.source = toy_source(name);
    return spec;
  }
  if (parts.size() < 4) fail(ErrorCode::Config, "source spec needs role:name:granularity:dim, got '" + std::string(text) + "'");
  spec.source.name = name;
  spec.source.granularity = parse_granularity(trim(parts[2]));
  spec.source.dim = parse_number<std::uint32_t>("source dim", trim(parts[3]));
  for (std::size_t k = 4; k < parts.size(); ++k) {
    const auto opt = trim(parts[k]);
    if (opt == "prob") {
      spec.source.probability = true;
    } else if (opt.substr(0, 7) == "tokens=") {
      spec.source.token_count = parse_number<std::uint32_t>("tokens", opt.substr(7));
    } else {
      fail(ErrorCode::Config, "unknown source option '" + std::string(opt) + "'");
    }
  }
  return spec;
}

std::string format_source_spec(const SourceSpec& spec) {
  std::string s = std::string(fusion::to_string(spec.role)) + ":" + spec.source.name + ":" +
                  std::string(to_string(spec.source.granularity)) + ":" + std::to_string(spec.source.dim);
  if (spec.source.token_count > 0) s += ":tokens=" + std::to_string(spec.source.token_count);
  if (spec.source.probability) s += ":prob";
  return s;
}

std::vector<SourceSpec> PipelineConfig::effective_sources() const {
  if (!sources.empty()) return sources;
  return {{fusion::Role::Spatial, toy_source(kPixelStats)},
          {fusion::Role::Temporal, toy_source(kMotionStats)},
          {fusion::Role::FastVqa, toy_source(kFragmentStats)}};
}

Registry PipelineConfig::registry() const {
  std::vector<FeatureSource> list;
  for (const auto& s : effective_sources()) list.push_back(s.source);
  return Registry(std::move(list));
}

fusion::ConcatLayout PipelineConfig::layout() const {
  std::vector<std::pair<fusion::Role, FeatureSource>> slots;
  for (const auto& s : effective_sources()) slots.emplace_back(s.role, s.source);
  return fusion::ConcatLayout::build(std::move(slots));
}

void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  TrainConfig& t = cfg.train;
  ExtractionConfig& x = cfg.extraction;
  if (key == "learning_rate") t.learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "epochs") t.epochs = parse_number<int>(key, value);
  else if (key == "lr_decay_factor") t.lr_decay_factor = parse_number<double>(key, value);
  else if (key == "lr_decay_epoch") t.lr_decay_epoch = parse_number<int>(key, value);
  else if (key == "adam_beta1") t.adam_beta1 = parse_number<double>(key, value);
  else if (key == "adam_beta2") t.adam_beta2 = parse_number<double>(key, value);
  else if (key == "adam_epsilon") t.adam_epsilon = parse_number<double>(key, value);
  else if (key == "train_seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "hidden") t.hidden = parse_number<std::size_t>(key, value);
  else if (key == "use_mhsa") t.use_mhsa = parse_bool(key, value);
  else if (key == "mhsa_heads") t.mhsa_heads = parse_number<std::size_t>(key, value);
  else if (key == "loss") {
    if (value == "plcc") t.loss = fusion::LossKind::Plcc;
    else if (value == "mse") t.loss = fusion::LossKind::Mse;
    else fail(ErrorCode::Config, "loss must be plcc or mse");
  }
  else if (key == "keyframe_min_side") x.keyframe_min_side = parse_number<int>(key, value);
  else if (key == "crop_size") x.crop_size = parse_number<int>(key, value);
  else if (key == "chunk_size") x.chunk_size = parse_number<int>(key, value);
  else if (key == "gms_grid") x.gms_grid = parse_number<int>(key, value);
  else if (key == "gms_patch") x.gms_patch = parse_number<int>(key, value);
  else if (key == "gms_seed") x.gms_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "gms_all_frames") x.gms_all_frames = parse_bool(key, value);
  else if (key == "validate_probabilities") x.validate_probabilities = parse_bool(key, value);
  else if (key == "source") cfg.sources.push_back(parse_source_spec(value));
  else if (key == "split_ratio") cfg.split_ratio = parse_number<double>(key, value);
  else if (key == "grouping") {
    if (value == "scene") cfg.grouping = Grouping::ByScene;
    else if (value == "video") cfg.grouping = Grouping::ByVideo;
    else fail(ErrorCode::Config, "grouping must be scene or video");
  }
  else if (key == "repeats") cfg.repeats = parse_number<int>(key, value);
  else if (key == "k_splits") cfg.k_splits = parse_number<int>(key, value);
  else if (key == "combiner") {
    if (value == "mean") cfg.combiner = Combiner::Mean;
    else if (value == "median") cfg.combiner = Combiner::Median;
    else fail(ErrorCode::Config, "combiner must be mean or median");
  }
  else if (key == "seed") cfg.master_seed = parse_number<std::uint64_t>(key, value);
  else fail(ErrorCode::Config, "unknown config key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key=value");
    apply_setting(cfg, body.substr(0, eq), body.substr(eq + 1));
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace rqvqa
