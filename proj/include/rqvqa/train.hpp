#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rqvqa/fusion.hpp"

namespace rqvqa {

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t batch_size = 6;
  int epochs = 30;
  double lr_decay_factor = 10.0;
  int lr_decay_epoch = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t hidden = 128;
  bool use_mhsa = false;
  std::size_t mhsa_heads = 8;
  fusion::LossKind loss = fusion::LossKind::Plcc;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Learning rate for a 0-based epoch: divided once by the decay factor from
/// `lr_decay_epoch` on.
double learning_rate_at(const TrainConfig& cfg, int epoch);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;

  static AdamState for_model(const fusion::Model& model);
};

/// One bias-corrected Adam update at learning rate `lr`; advances state.step.
void adam_step(fusion::Model& params, const fusion::Model& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

struct LabeledVideo {
  const FeatureBundle* bundle = nullptr;
  double mos = 0.0;
};

struct EpochTrace {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  std::size_t batches = 0;
  std::size_t skipped_batches = 0;  // constant-label batches
};

struct TrainResult {
  fusion::Model model;
  std::vector<EpochTrace> trace;
};

TrainResult train(std::span<const LabeledVideo> dataset, const fusion::ConcatLayout& layout, const TrainConfig& cfg,
                  Exec exec = Exec::Parallel);

}  // namespace rqvqa
