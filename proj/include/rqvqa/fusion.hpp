#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rqvqa/features.hpp"
#include "rqvqa/kernels.hpp"
#include "rqvqa/matrix.hpp"
#include "rqvqa/random.hpp"

namespace rqvqa::fusion {

/// Concatenation slots, in concatenation order.
enum class Role { Spatial = 0, Temporal = 1, Liqe = 2, QAlign = 3, FastVqa = 4 };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct LayoutEntry {
  Role role = Role::Spatial;
  std::string source;
  Granularity granularity = Granularity::KeyFrame;
  std::size_t dim = 0;
  std::size_t token_count = 0;
  std::size_t offset = 0;  // first column in the concatenated vector

  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

class ConcatLayout {
 public:
  ConcatLayout() = default;

  /// Sorts by role; each role at most once. Token grids are only accepted in
  /// the spatial slot.
  static ConcatLayout build(std::vector<std::pair<Role, FeatureSource>> slots);

  const std::vector<LayoutEntry>& entries() const noexcept { return entries_; }
  std::size_t total_dim() const noexcept { return total_dim_; }
  const LayoutEntry* token_entry() const;

  friend bool operator==(const ConcatLayout&, const ConcatLayout&) = default;

 private:
  std::vector<LayoutEntry> entries_;
  std::size_t total_dim_ = 0;
};

/// Multi-head self-attention followed by mean over tokens. No biases.
struct MhsaPool {
  std::size_t dim = 0;
  std::size_t heads = 0;
  Matrix wq, wk, wv, wo;  // dim x dim; head h owns columns [h*dh, (h+1)*dh) of wq/wk/wv

  std::size_t head_dim() const noexcept { return dim / heads; }
  static MhsaPool init(std::size_t dim, std::size_t heads, Rng& rng);
};

enum class Activation { Relu, Identity };

struct MlpHead {
  Matrix w1;               // input_dim x hidden
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
  Activation activation = Activation::Relu;

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden() const noexcept { return w1.cols(); }
  static MlpHead init(std::size_t input_dim, std::size_t hidden, Rng& rng);
};

struct Model {
  ConcatLayout layout;
  MlpHead mlp;
  std::optional<MhsaPool> mhsa;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for every tensor.
Model init_model(const ConcatLayout& layout, std::size_t hidden, std::size_t mhsa_heads, bool use_mhsa,
                 std::uint64_t seed);

/// Same shapes, all parameters zero.
Model zeros_like(const Model& model);

/// Every trainable tensor, in a fixed order.
std::vector<std::span<double>> parameters(Model& model);
std::vector<std::span<const double>> parameters(const Model& model);

std::vector<double> mhsa_pool(const Matrix& tokens, const MhsaPool& pool);

/// Role-ordered concatenation for segment i. Token grids are pooled with
/// `mhsa` when given, otherwise averaged.
std::vector<double> concat_features(const FeatureBundle& bundle, const ConcatLayout& layout, std::size_t index,
                                    const MhsaPool* mhsa = nullptr);

double mlp_forward(std::span<const double> input, const MlpHead& head);
double pool_scores(std::span<const double> scores);

/// Pooled score of one video.
double predict(const Model& model, const FeatureBundle& bundle);
std::vector<double> predict(const Model& model, std::span<const FeatureBundle* const> bundles,
                            Exec exec = Exec::Parallel);

/// Throws LayoutMismatch unless every layout source is present in the bundle
/// with the expected shape.
void check_layout(const FeatureBundle& bundle, const ConcatLayout& layout);

enum class LossKind { Plcc, Mse };

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> predictions;
};

/// Forward the batch, evaluate the loss against `mos`, and add exact
/// gradients for every parameter into `grads` (same shapes as `model`).
BatchGradient backprop(const Model& model, std::span<const FeatureBundle* const> batch, std::span<const double> mos,
                       LossKind loss, Model& grads, Exec exec = Exec::Parallel);

}  // namespace rqvqa::fusion
