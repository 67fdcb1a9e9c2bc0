#include "rqvqa/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rqvqa/error.hpp"

namespace rqvqa {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) fail(ErrorCode::Config, "learning_rate must be >= 0");
  if (batch_size < 2) fail(ErrorCode::Config, "batch_size must be >= 2");
  if (epochs < 1) fail(ErrorCode::Config, "epochs must be >= 1");
  if (!(lr_decay_factor > 0.0)) fail(ErrorCode::Config, "lr_decay_factor must be positive");
  if (lr_decay_epoch < 1 || lr_decay_epoch > epochs) fail(ErrorCode::Config, "lr_decay_epoch must lie in [1, epochs]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorCode::Config, "Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail(ErrorCode::Config, "adam_epsilon must be positive");
  if (hidden < 1) fail(ErrorCode::Config, "hidden must be >= 1");
  if (use_mhsa && mhsa_heads < 1) fail(ErrorCode::Config, "mhsa_heads must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return epoch >= cfg.lr_decay_epoch ? cfg.learning_rate / cfg.lr_decay_factor : cfg.learning_rate;
}

AdamState AdamState::for_model(const fusion::Model& model) {
  AdamState s;
  for (const auto t : fusion::parameters(model)) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(fusion::Model& params, const fusion::Model& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
  auto p = fusion::parameters(params);
  const auto g = fusion::parameters(grads);
  if (p.size() != g.size() || p.size() != state.m.size()) fail(ErrorCode::DimMismatch, "Adam tensor count mismatch");
  for (std::size_t t = 0; t < g.size(); ++t) {
    if (p[t].size() != g[t].size() || p[t].size() != state.m[t].size()) {
      fail(ErrorCode::DimMismatch, "Adam tensor shape mismatch");
    }
    for (double x : g[t]) {
      if (!std::isfinite(x)) fail(ErrorCode::NonFinite, "non-finite gradient");
    }
  }

  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[t][i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[t][i] * g[t][i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[t][i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
    }
  }
}

TrainResult train(std::span<const LabeledVideo> dataset, const fusion::ConcatLayout& layout, const TrainConfig& cfg,
                  Exec exec) {
  cfg.validate();
  if (dataset.size() < 2) fail(ErrorCode::InvalidArgument, "training needs at least 2 labelled videos");
  for (const auto& item : dataset) {
    if (item.bundle == nullptr) fail(ErrorCode::InvalidArgument, "null bundle in training set");
    if (!std::isfinite(item.mos)) fail(ErrorCode::NonFinite, "non-finite MOS for '" + item.bundle->video_id + "'");
    fusion::check_layout(*item.bundle, layout);
  }

  TrainResult result;
  result.model = fusion::init_model(layout, cfg.hidden, cfg.mhsa_heads, cfg.use_mhsa, derive_seed(cfg.seed, 0));
  AdamState adam = AdamState::for_model(result.model);
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochTrace trace{epoch, learning_rate_at(cfg, epoch), 0.0, 0, 0};
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      // A trailing single video has no defined correlation; it waits for the next epoch.
      if (end - start < 2) continue;
      std::vector<const FeatureBundle*> bundles;
      std::vector<double> mos;
      for (std::size_t k = start; k < end; ++k) {
        bundles.push_back(dataset[order[k]].bundle);
        mos.push_back(dataset[order[k]].mos);
      }
      if (std::all_of(mos.begin(), mos.end(), [&](double m) { return m == mos.front(); })) {
        ++trace.skipped_batches;
        continue;
      }
      fusion::Model grads = fusion::zeros_like(result.model);
      const auto batch = fusion::backprop(result.model, bundles, mos, cfg.loss, grads, exec);
      adam_step(result.model, grads, adam, trace.learning_rate, cfg);
      loss_sum += batch.loss;
      ++trace.batches;
    }
    trace.mean_loss = trace.batches > 0 ? loss_sum / static_cast<double>(trace.batches) : 0.0;
    result.trace.push_back(trace);
  }
  return result;
}

}  // namespace rqvqa
