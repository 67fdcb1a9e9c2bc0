#include "rqvqa/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "rqvqa/error.hpp"
#include "rqvqa/loss.hpp"

namespace rqvqa::fusion {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Spatial: return "spatial";
    case Role::Temporal: return "temporal";
    case Role::Liqe: return "liqe";
    case Role::QAlign: return "qalign";
    case Role::FastVqa: return "fastvqa";
  }
  return "unknown";
}

Role parse_role(std::string_view text) {
  for (Role r : {Role::Spatial, Role::Temporal, Role::Liqe, Role::QAlign, Role::FastVqa}) {
    if (text == to_string(r)) return r;
  }
  fail(ErrorCode::Config, "unknown role '" + std::string(text) + "'");
}

ConcatLayout ConcatLayout::build(std::vector<std::pair<Role, FeatureSource>> slots) {
  if (slots.empty()) fail(ErrorCode::Config, "layout needs at least one source");
  std::stable_sort(slots.begin(), slots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ConcatLayout layout;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& [role, src] = slots[k];
    if (k > 0 && slots[k - 1].first == role) {
      fail(ErrorCode::Config, "role '" + std::string(to_string(role)) + "' assigned twice");
    }
    if (src.granularity == Granularity::Tokens && role != Role::Spatial) {
      fail(ErrorCode::Config, "token grid '" + src.name + "' is only supported in the spatial slot");
    }
    layout.entries_.push_back({role, src.name, src.granularity, src.dim, src.token_count, layout.total_dim_});
    layout.total_dim_ += src.dim;
  }
  return layout;
}

const LayoutEntry* ConcatLayout::token_entry() const {
  for (const auto& e : entries_) {
    if (e.granularity == Granularity::Tokens) return &e;
  }
  return nullptr;
}

namespace {

void fill_uniform(std::span<double> values, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : values) v = dist(rng);
}

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

// C += A^T * B
void add_matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  }
}

struct MhsaCache {
  Matrix x, q, k, v, o;
  std::vector<Matrix> attn;  // per head, T x T
};

std::vector<double> mhsa_forward(const Matrix& tokens, const MhsaPool& p, MhsaCache* cache) {
  if (tokens.cols() != p.dim || tokens.rows() == 0) {
    fail(ErrorCode::DimMismatch, "token grid is " + std::to_string(tokens.rows()) + "x" +
                                     std::to_string(tokens.cols()) + ", attention expects width " +
                                     std::to_string(p.dim));
  }
  for (double v : tokens.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite token value");
  }
  const std::size_t t = tokens.rows();
  const std::size_t dh = p.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix q = matmul(tokens, p.wq);
  Matrix k = matmul(tokens, p.wk);
  Matrix v = matmul(tokens, p.wv);
  Matrix o(t, p.dim);
  std::vector<Matrix> attn;
  attn.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t c0 = h * dh;
    Matrix a(t, t);
    for (std::size_t i = 0; i < t; ++i) {
      double peak = -INFINITY;
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q(i, c0 + c) * k(j, c0 + c);
        a(i, j) = s * scale;
        peak = std::max(peak, a(i, j));
      }
      double z = 0.0;
      for (std::size_t j = 0; j < t; ++j) {
        a(i, j) = std::exp(a(i, j) - peak);
        z += a(i, j);
      }
      for (std::size_t j = 0; j < t; ++j) a(i, j) /= z;
      for (std::size_t j = 0; j < t; ++j) {
        const double w = a(i, j);
        for (std::size_t c = 0; c < dh; ++c) o(i, c0 + c) += w * v(j, c0 + c);
      }
    }
    attn.push_back(std::move(a));
  }
  const Matrix y = matmul(o, p.wo);
  std::vector<double> out(p.dim, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t c = 0; c < p.dim; ++c) out[c] += y(i, c);
  }
  for (double& x : out) x /= static_cast<double>(t);
  if (cache != nullptr) *cache = {tokens, std::move(q), std::move(k), std::move(v), std::move(o), std::move(attn)};
  return out;
}

void mhsa_backward(const MhsaCache& cache, const MhsaPool& p, std::span<const double> grad_out, MhsaPool& grads) {
  const std::size_t t = cache.x.rows();
  const std::size_t dh = p.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // out = mean_t (O Wo)[t]  =>  dY[t] = g / T for every row.
  Matrix dy(t, p.dim);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t c = 0; c < p.dim; ++c) dy(i, c) = grad_out[c] / static_cast<double>(t);
  }
  add_matmul_tn(cache.o, dy, grads.wo);
  Matrix d_o(t, p.dim);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t a = 0; a < p.dim; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < p.dim; ++b) s += dy(i, b) * p.wo(a, b);
      d_o(i, a) = s;
    }
  }

  Matrix dq(t, p.dim), dk(t, p.dim), dv(t, p.dim);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t c0 = h * dh;
    const Matrix& a = cache.attn[h];
    Matrix da(t, t);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += d_o(i, c0 + c) * cache.v(j, c0 + c);
        da(i, j) = s;
        for (std::size_t c = 0; c < dh; ++c) dv(j, c0 + c) += a(i, j) * d_o(i, c0 + c);
      }
    }
    for (std::size_t i = 0; i < t; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < t; ++j) dot += a(i, j) * da(i, j);
      for (std::size_t j = 0; j < t; ++j) {
        const double ds = a(i, j) * (da(i, j) - dot) * scale;
        for (std::size_t c = 0; c < dh; ++c) {
          dq(i, c0 + c) += ds * cache.k(j, c0 + c);
          dk(j, c0 + c) += ds * cache.q(i, c0 + c);
        }
      }
    }
  }
  add_matmul_tn(cache.x, dq, grads.wq);
  add_matmul_tn(cache.x, dk, grads.wk);
  add_matmul_tn(cache.x, dv, grads.wv);
}

Matrix token_block(const Matrix& tokens, std::size_t index, std::size_t token_count) {
  Matrix block(token_count, tokens.cols());
  for (std::size_t r = 0; r < token_count; ++r) {
    const auto src = tokens.row(index * token_count + r);
    std::copy(src.begin(), src.end(), block.row(r).begin());
  }
  return block;
}

double activate(double z, Activation act) { return act == Activation::Relu ? std::max(z, 0.0) : z; }
double activate_grad(double z, Activation act) { return act == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0; }

struct SegmentCache {
  std::vector<double> input;
  std::vector<double> pre;  // W1^T F + b1
  std::optional<MhsaCache> mhsa;
};

struct VideoCache {
  std::vector<SegmentCache> segments;
  double score = 0.0;
};

VideoCache forward_video(const Model& m, const FeatureBundle& bundle) {
  check_layout(bundle, m.layout);
  const LayoutEntry* tokens = m.layout.token_entry();
  VideoCache vc;
  vc.segments.resize(bundle.segment_count);
  double total = 0.0;
  for (std::size_t i = 0; i < bundle.segment_count; ++i) {
    SegmentCache& sc = vc.segments[i];
    if (tokens != nullptr && m.mhsa) {
      // Pool the token grid with a cache, then splice into the plain concatenation.
      sc.input = concat_features(bundle, m.layout, i, nullptr);
      MhsaCache cache;
      const auto pooled = mhsa_forward(token_block(bundle.at(tokens->source), i, tokens->token_count), *m.mhsa, &cache);
      std::copy(pooled.begin(), pooled.end(), sc.input.begin() + static_cast<std::ptrdiff_t>(tokens->offset));
      sc.mhsa = std::move(cache);
    } else {
      sc.input = concat_features(bundle, m.layout, i, nullptr);
    }
    const MlpHead& head = m.mlp;
    sc.pre.assign(head.b1.begin(), head.b1.end());
    for (std::size_t d = 0; d < head.input_dim(); ++d) {
      const double f = sc.input[d];
      if (f == 0.0) continue;
      const auto w = head.w1.row(d);
      for (std::size_t j = 0; j < head.hidden(); ++j) sc.pre[j] += f * w[j];
    }
    double q = head.b2;
    for (std::size_t j = 0; j < head.hidden(); ++j) q += head.w2[j] * activate(sc.pre[j], head.activation);
    total += q;
  }
  vc.score = total / static_cast<double>(bundle.segment_count);
  return vc;
}

void backward_video(const Model& m, const VideoCache& vc, double grad_score, Model& g) {
  const MlpHead& head = m.mlp;
  const LayoutEntry* tokens = m.layout.token_entry();
  const double dq = grad_score / static_cast<double>(vc.segments.size());
  std::vector<double> dz(head.hidden());
  for (const SegmentCache& sc : vc.segments) {
    g.mlp.b2 += dq;
    for (std::size_t j = 0; j < head.hidden(); ++j) {
      const double a = activate(sc.pre[j], head.activation);
      g.mlp.w2[j] += dq * a;
      dz[j] = dq * head.w2[j] * activate_grad(sc.pre[j], head.activation);
      g.mlp.b1[j] += dz[j];
    }
    for (std::size_t d = 0; d < head.input_dim(); ++d) {
      const double f = sc.input[d];
      if (f == 0.0) continue;
      auto gw = g.mlp.w1.row(d);
      for (std::size_t j = 0; j < head.hidden(); ++j) gw[j] += f * dz[j];
    }
    if (sc.mhsa) {
      std::vector<double> d_pooled(tokens->dim, 0.0);
      for (std::size_t c = 0; c < tokens->dim; ++c) {
        const auto w = head.w1.row(tokens->offset + c);
        double s = 0.0;
        for (std::size_t j = 0; j < head.hidden(); ++j) s += w[j] * dz[j];
        d_pooled[c] = s;
      }
      mhsa_backward(*sc.mhsa, *m.mhsa, d_pooled, *g.mhsa);
    }
  }
}

void add_into(Model& into, const Model& from) {
  auto dst = parameters(into);
  const auto src = parameters(from);
  for (std::size_t t = 0; t < dst.size(); ++t) {
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
  }
}

}  // namespace

MhsaPool MhsaPool::init(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim == 0 || dim % heads != 0) {
    fail(ErrorCode::Config, "attention heads (" + std::to_string(heads) + ") must divide width " + std::to_string(dim));
  }
  MhsaPool p{dim, heads, Matrix(dim, dim), Matrix(dim, dim), Matrix(dim, dim), Matrix(dim, dim)};
  for (Matrix* w : {&p.wq, &p.wk, &p.wv, &p.wo}) fill_uniform(w->data(), dim, rng);
  return p;
}

MlpHead MlpHead::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  if (input_dim == 0 || hidden == 0) fail(ErrorCode::Config, "MLP dimensions must be positive");
  MlpHead h;
  h.w1 = Matrix(input_dim, hidden);
  h.b1.assign(hidden, 0.0);
  h.w2.assign(hidden, 0.0);
  fill_uniform(h.w1.data(), input_dim, rng);
  fill_uniform(h.b1, input_dim, rng);
  fill_uniform(h.w2, hidden, rng);
  fill_uniform(std::span(&h.b2, 1), hidden, rng);
  return h;
}

Model init_model(const ConcatLayout& layout, std::size_t hidden, std::size_t mhsa_heads, bool use_mhsa,
                 std::uint64_t seed) {
  Rng rng(seed);
  Model m;
  m.layout = layout;
  m.mlp = MlpHead::init(layout.total_dim(), hidden, rng);
  if (use_mhsa) {
    const LayoutEntry* tokens = layout.token_entry();
    if (tokens == nullptr) fail(ErrorCode::Config, "attention pooling needs a token-grid source in the spatial slot");
    m.mhsa = MhsaPool::init(tokens->dim, mhsa_heads, rng);
  }
  return m;
}

Model zeros_like(const Model& model) {
  Model z = model;
  for (auto t : parameters(z)) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

std::vector<std::span<double>> parameters(Model& m) {
  std::vector<std::span<double>> out{m.mlp.w1.data(), m.mlp.b1, m.mlp.w2, std::span(&m.mlp.b2, 1)};
  if (m.mhsa) {
    for (Matrix* w : {&m.mhsa->wq, &m.mhsa->wk, &m.mhsa->wv, &m.mhsa->wo}) out.push_back(w->data());
  }
  return out;
}

std::vector<std::span<const double>> parameters(const Model& m) {
  auto mut = parameters(const_cast<Model&>(m));
  return {mut.begin(), mut.end()};
}

std::vector<double> mhsa_pool(const Matrix& tokens, const MhsaPool& pool) {
  return mhsa_forward(tokens, pool, nullptr);
}

void check_layout(const FeatureBundle& bundle, const ConcatLayout& layout) {
  for (const auto& e : layout.entries()) {
    const auto it = bundle.features.find(e.source);
    if (it == bundle.features.end()) {
      fail(ErrorCode::LayoutMismatch, "video '" + bundle.video_id + "' lacks source '" + e.source +
                                          "' (expected dim " + std::to_string(e.dim) + ")");
    }
    std::size_t rows = bundle.segment_count;
    if (e.granularity == Granularity::Video) rows = 1;
    if (e.granularity == Granularity::Tokens) rows = bundle.segment_count * e.token_count;
    if (it->second.cols() != e.dim || it->second.rows() != rows) {
      fail(ErrorCode::LayoutMismatch, "source '" + e.source + "' of '" + bundle.video_id + "': expected " +
                                          std::to_string(rows) + "x" + std::to_string(e.dim) + ", found " +
                                          std::to_string(it->second.rows()) + "x" +
                                          std::to_string(it->second.cols()));
    }
  }
}

std::vector<double> concat_features(const FeatureBundle& bundle, const ConcatLayout& layout, std::size_t index,
                                    const MhsaPool* mhsa) {
  if (index >= bundle.segment_count) {
    fail(ErrorCode::InvalidArgument, "segment " + std::to_string(index) + " out of range (N_z = " +
                                         std::to_string(bundle.segment_count) + ")");
  }
  std::vector<double> out(layout.total_dim());
  for (const auto& e : layout.entries()) {
    const Matrix& m = bundle.at(e.source);
    const auto dst = out.begin() + static_cast<std::ptrdiff_t>(e.offset);
    switch (e.granularity) {
      case Granularity::KeyFrame:
      case Granularity::Chunk: {
        const auto row = m.row(index);
        std::copy(row.begin(), row.end(), dst);
        break;
      }
      case Granularity::Video: {
        const auto row = m.row(0);
        std::copy(row.begin(), row.end(), dst);
        break;
      }
      case Granularity::Tokens: {
        const Matrix block = token_block(m, index, e.token_count);
        std::vector<double> pooled;
        if (mhsa != nullptr) {
          pooled = mhsa_pool(block, *mhsa);
        } else {
          pooled.assign(e.dim, 0.0);
          for (std::size_t r = 0; r < block.rows(); ++r) {
            for (std::size_t c = 0; c < e.dim; ++c) pooled[c] += block(r, c);
          }
          for (double& v : pooled) v /= static_cast<double>(block.rows());
        }
        std::copy(pooled.begin(), pooled.end(), dst);
        break;
      }
    }
  }
  return out;
}

double mlp_forward(std::span<const double> input, const MlpHead& head) {
  if (input.size() != head.input_dim()) {
    fail(ErrorCode::DimMismatch, "MLP input has " + std::to_string(input.size()) + " values, head expects " +
                                     std::to_string(head.input_dim()));
  }
  for (double v : input) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite MLP input");
  }
  std::vector<double> z(head.b1);
  for (std::size_t d = 0; d < head.input_dim(); ++d) {
    const auto w = head.w1.row(d);
    for (std::size_t j = 0; j < head.hidden(); ++j) z[j] += input[d] * w[j];
  }
  double q = head.b2;
  for (std::size_t j = 0; j < head.hidden(); ++j) q += head.w2[j] * activate(z[j], head.activation);
  return q;
}

double pool_scores(std::span<const double> scores) {
  if (scores.empty()) fail(ErrorCode::InvalidArgument, "cannot pool an empty score list");
  double s = 0.0;
  for (double v : scores) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite segment score");
    s += v;
  }
  return s / static_cast<double>(scores.size());
}

double predict(const Model& model, const FeatureBundle& bundle) {
  check_layout(bundle, model.layout);
  std::vector<double> scores(bundle.segment_count);
  for (std::size_t i = 0; i < bundle.segment_count; ++i) {
    const MhsaPool* pool = model.mhsa ? &*model.mhsa : nullptr;
    scores[i] = mlp_forward(concat_features(bundle, model.layout, i, pool), model.mlp);
  }
  return pool_scores(scores);
}

std::vector<double> predict(const Model& model, std::span<const FeatureBundle* const> bundles, Exec exec) {
  std::vector<double> out(bundles.size());
  const auto n = static_cast<long>(bundles.size());
  if (exec == Exec::Serial) {
    for (long v = 0; v < n; ++v) out[v] = predict(model, *bundles[v]);
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long v = 0; v < n; ++v) {
    try {
      out[v] = predict(model, *bundles[v]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

BatchGradient backprop(const Model& model, std::span<const FeatureBundle* const> batch, std::span<const double> mos,
                       LossKind loss, Model& grads, Exec exec) {
  if (batch.size() != mos.size()) fail(ErrorCode::InvalidArgument, "batch and label counts differ");
  const auto n = static_cast<long>(batch.size());
  std::vector<VideoCache> caches(batch.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (long v = 0; v < n; ++v) {
    try {
      caches[v] = forward_video(model, *batch[v]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  BatchGradient result;
  result.predictions.resize(batch.size());
  for (std::size_t v = 0; v < batch.size(); ++v) result.predictions[v] = caches[v].score;
  std::vector<double> dl;
  if (loss == LossKind::Plcc) {
    result.loss = plcc_loss(result.predictions, mos);
    dl = plcc_loss_grad(result.predictions, mos);
  } else {
    result.loss = mse_loss(result.predictions, mos);
    dl = mse_loss_grad(result.predictions, mos);
  }

  // Per-video gradients are summed in batch order so both execution modes agree bit for bit.
  std::vector<Model> per_video(batch.size(), zeros_like(model));
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (long v = 0; v < n; ++v) backward_video(model, caches[v], dl[v], per_video[v]);
  for (const Model& g : per_video) add_into(grads, g);
  return result;
}

}  // namespace rqvqa::fusion
