#pragma once

#include <algorithm>
#include <cstdint>
#include <type_traits>
#include <ostream>
#include <string>
#include <vector>

#include "gatnet/graph.hpp"
#include "gatnet/matrix.hpp"
#include "gatnet/rng.hpp"

namespace gatnet {

enum class Merge : uint8_t { concat = 0, average = 1 };
enum class AttentionKind : uint8_t { learned = 0, constant = 1 };
enum class Activation : uint8_t { elu = 0, none = 1, softmax_deferred = 2, sigmoid_deferred = 3 };
enum class SkipKind : uint8_t { none = 0, identity = 1, projected = 2 };
enum class Mode : uint8_t { train = 0, eval = 1 };

struct GatLayerConfig {
  uint32_t in_features = 0;
  uint32_t head_features = 0;  // F' per head
  uint32_t num_heads = 1;
  Merge merge = Merge::concat;
  AttentionKind attention = AttentionKind::learned;
  Activation activation = Activation::none;
  float leaky_slope = 0.2f;
  float input_dropout = 0.0f;
  float attn_dropout = 0.0f;
  bool use_bias = true;
  SkipKind skip = SkipKind::none;
  bool output_layer = false;  // averaging is only allowed on the output layer

  uint32_t output_width() const {
    return merge == Merge::concat ? num_heads * head_features : head_features;
  }

  void validate() const {
    if (in_features == 0 || head_features == 0 || num_heads == 0)
      throw ConfigError("layer dims must be >= 1");
    if (!(leaky_slope > 0.0f && leaky_slope < 1.0f))
      throw ConfigError("leaky_slope must lie in (0,1)");
    if (input_dropout < 0.0f || input_dropout >= 1.0f || attn_dropout < 0.0f || attn_dropout >= 1.0f)
      throw ConfigError("dropout probabilities must lie in [0,1)");
    if (merge == Merge::average && !output_layer)
      throw ConfigError("average merge is only permitted on the output layer");
    if (merge == Merge::average && activation == Activation::elu)
      throw ConfigError("average merge requires a deferred or absent activation");
    if (skip == SkipKind::identity && in_features != output_width())
      throw ConfigError("identity skip requires in width == out width (" +
                        std::to_string(in_features) + " vs " + std::to_string(output_width()) + ")");
  }
};

// Per-head weights W^k (F' x F) and the split halves of the attention vector
// a^k in R^{2F'}: scoring uses a_src . Wh_i + a_dst . Wh_j, which equals the
// single-vector form a^T [Wh_i || Wh_j] while letting the per-node terms be
// computed once and combined per edge.
template <class T>
struct GatLayerParams {
  std::vector<Matrix<T>> W;      // K x (F' x F)
  std::vector<Matrix<T>> a_src;  // K x (F' x 1)
  std::vector<Matrix<T>> a_dst;  // K x (F' x 1)
  std::vector<Matrix<T>> bias;   // K x (1 x F'), present iff use_bias
  Matrix<T> skip_proj;           // out x in, present iff skip == projected

  static GatLayerParams glorot(const GatLayerConfig& cfg, RngState& rng) {
    cfg.validate();
    GatLayerParams p;
    const uint32_t Fp = cfg.head_features;
    for (uint32_t k = 0; k < cfg.num_heads; ++k) {
      p.W.push_back(glorot_init<T>(Fp, cfg.in_features, rng));
      // a^k is drawn as one 2F' x 1 vector, then split into halves
      Matrix<T> a = glorot_init<T>(2 * Fp, 1, rng);
      Matrix<T> src(Fp, 1), dst(Fp, 1);
      for (uint32_t o = 0; o < Fp; ++o) {
        src.data[o] = a.data[o];
        dst.data[o] = a.data[Fp + o];
      }
      p.a_src.push_back(std::move(src));
      p.a_dst.push_back(std::move(dst));
      if (cfg.use_bias) p.bias.emplace_back(1, Fp);  // zero-initialized
    }
    if (cfg.skip == SkipKind::projected)
      p.skip_proj = glorot_init<T>(cfg.output_width(), cfg.in_features, rng);
    return p;
  }

  static GatLayerParams zeros_like(const GatLayerConfig& cfg) {
    GatLayerParams p;
    const uint32_t Fp = cfg.head_features;
    for (uint32_t k = 0; k < cfg.num_heads; ++k) {
      p.W.emplace_back(Fp, cfg.in_features);
      p.a_src.emplace_back(Fp, 1);
      p.a_dst.emplace_back(Fp, 1);
      if (cfg.use_bias) p.bias.emplace_back(1, Fp);
    }
    if (cfg.skip == SkipKind::projected)
      p.skip_proj = Matrix<T>(cfg.output_width(), cfg.in_features);
    return p;
  }

  // Visits tensors in declaration order: per head W, a_src, a_dst, bias;
  // then the skip projection. Serialization and the optimizer rely on it.
  template <class F>
  void for_each(F&& fn) {
    for (size_t k = 0; k < W.size(); ++k) {
      std::string i = std::to_string(k);
      fn("W" + i, W[k]);
      fn("a_src" + i, a_src[k]);
      fn("a_dst" + i, a_dst[k]);
      if (k < bias.size()) fn("bias" + i, bias[k]);
    }
    if (skip_proj.size() > 0) fn("skip_proj", skip_proj);
  }
  template <class F>
  void for_each(F&& fn) const {
    const_cast<GatLayerParams*>(this)->for_each(
        [&](const std::string& n, Matrix<T>& m) { fn(n, const_cast<const Matrix<T>&>(m)); });
  }
};

// Bias tensors are excluded from weight decay.
inline bool l2_penalized(const std::string& tensor_name) {
  return tensor_name.rfind("bias", 0) != 0;
}

// CSR of the nonzero entries of a matrix's rows; built when the layer input
// is sparse enough (bag-of-words features, dropped activations) to make the
// linear transform cheaper than the dense path.
template <class T>
struct SparseRows {
  std::vector<uint32_t> offsets;  // rows+1
  std::vector<uint32_t> index;
  std::vector<T> value;
};

template <class T>
struct LayerCache {
  Mode mode = Mode::eval;
  uint32_t num_nodes = 0;
  Matrix<T> input_dropped;             // N x F (equals the input when no dropout)
  std::vector<T> input_mask;           // N*F, empty when input dropout inactive
  bool sparse_input = false;
  SparseRows<T> nz;                    // rows of input_dropped when sparse_input
  std::vector<Matrix<T>> Wh;           // K x (N x F')
  std::vector<std::vector<T>> logits;  // K x E, raw pre-LeakyReLU scores (empty for constant)
  std::vector<std::vector<T>> alpha;   // K x E, normalized coefficients pre-dropout
  std::vector<std::vector<T>> attn_mask;  // K x E, empty when attention dropout inactive
  Matrix<T> pre_activation;            // N x out, stored when activation == elu
};

// Frozen dropout draws, used by the gradient checker to make a train-mode
// forward deterministic across repeated evaluations.
template <class T>
struct LayerDraws {
  std::vector<T> input_mask;               // N*F or empty
  std::vector<std::vector<T>> attn_mask;   // K x E or empty
};

namespace detail {

template <class T>
SparseRows<T> build_sparse_rows(const Matrix<T>& m) {
  SparseRows<T> sp;
  sp.offsets.assign(m.rows + 1, 0);
  size_t nnz = 0;
  for (size_t i = 0; i < m.size(); ++i)
    if (m.data[i] != T(0)) ++nnz;
  sp.index.reserve(nnz);
  sp.value.reserve(nnz);
  for (uint32_t i = 0; i < m.rows; ++i) {
    const T* row = m.row(i);
    for (uint32_t j = 0; j < m.cols; ++j)
      if (row[j] != T(0)) {
        sp.index.push_back(j);
        sp.value.push_back(row[j]);
      }
    sp.offsets[i + 1] = uint32_t(sp.index.size());
  }
  return sp;
}

// out += X * W^T, where W is (out_dim x in_dim). When sp is non-null it holds
// the nonzero entries of X's rows and the product is formed from them.
template <class T>
void linear_nt_accum(const Matrix<T>& X, const SparseRows<T>* sp, const Matrix<T>& W,
                     Matrix<T>& out) {
  if (X.cols != W.cols) throw ShapeError("linear_nt_accum: width mismatch");
  if (out.rows != X.rows || out.cols != W.rows)
    throw ShapeError("linear_nt_accum: bad output shape");
  const uint32_t out_dim = W.rows;
  if (sp) {
    // W^T scratch so the inner loop runs over contiguous rows
    Matrix<T> Wt(W.cols, W.rows);
    for (uint32_t o = 0; o < W.rows; ++o)
      for (uint32_t f = 0; f < W.cols; ++f) Wt(f, o) = W(o, f);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(X.rows); ++i) {
      T* orow = out.row(uint32_t(i));
      for (uint32_t t = sp->offsets[i]; t < sp->offsets[i + 1]; ++t) {
        const T v = sp->value[t];
        const T* wrow = Wt.row(sp->index[t]);
        for (uint32_t o = 0; o < out_dim; ++o) orow[o] += v * wrow[o];
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(X.rows); ++i) {
      const T* xrow = X.row(uint32_t(i));
      T* orow = out.row(uint32_t(i));
      for (uint32_t o = 0; o < out_dim; ++o) {
        T acc = T(0);
        for (uint32_t f = 0; f < X.cols; ++f) acc += xrow[f] * W.row(o)[f];
        orow[o] += acc;
      }
    }
  }
}

// gradW(o,f) += sum_i G(i,o) * X(i,f); inner sum runs over nodes in fixed
// order per output row, so the reduction is deterministic under threading.
template <class T>
void outer_accum_tn(const Matrix<T>& G, const Matrix<T>& X, const SparseRows<T>* sp,
                    Matrix<T>& gradW) {
  if (gradW.rows != G.cols || gradW.cols != X.cols)
    throw ShapeError("outer_accum_tn: bad gradW shape");
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < int64_t(G.cols); ++o) {
    T* grow = gradW.row(uint32_t(o));
    for (uint32_t i = 0; i < G.rows; ++i) {
      const T c = G(i, uint32_t(o));
      if (c == T(0)) continue;
      if (sp) {
        for (uint32_t t = sp->offsets[i]; t < sp->offsets[i + 1]; ++t)
          grow[sp->index[t]] += c * sp->value[t];
      } else {
        const T* xrow = X.row(i);
        for (uint32_t f = 0; f < X.cols; ++f) grow[f] += c * xrow[f];
      }
    }
  }
}

}  // namespace detail

// Softmax over each CSR row of per-edge scores, stabilized by subtracting the
// per-neighborhood maximum (exact, by shift invariance).
template <class T>
std::vector<T> masked_softmax(const std::vector<T>& scores, const CsrGraph& g) {
  if (scores.size() != g.num_edges())
    throw ShapeError("masked_softmax: score count != edge count");
  for (uint32_t i = 0; i < g.num_nodes; ++i)
    if (g.row_offsets[i] == g.row_offsets[i + 1])
      throw ContractError("masked_softmax: empty neighborhood at node " + std::to_string(i));
  std::vector<T> alpha(scores.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < int64_t(g.num_nodes); ++i) {
    const uint32_t lo = g.row_offsets[i], hi = g.row_offsets[i + 1];
    T mx = scores[lo];
    for (uint32_t e = lo + 1; e < hi; ++e) mx = std::max(mx, scores[e]);
    T sum = T(0);
    for (uint32_t e = lo; e < hi; ++e) {
      alpha[e] = std::exp(scores[e] - mx);
      sum += alpha[e];
    }
    for (uint32_t e = lo; e < hi; ++e) alpha[e] /= sum;
  }
  return alpha;
}

// Normalized attention coefficients of one head:
// alpha_ij = softmax_{j in N_i}( LeakyReLU( a_src.Wh_i + a_dst.Wh_j ) ).
// When raw_logits is non-null the pre-LeakyReLU scores are stored there.
template <class T>
std::vector<T> attention_coefficients(const Matrix<T>& Wh, const Matrix<T>& a_src,
                                      const Matrix<T>& a_dst, const CsrGraph& g, T leaky_slope,
                                      std::vector<T>* raw_logits = nullptr) {
  if (Wh.rows != g.num_nodes)
    throw ShapeError("attention_coefficients: Wh rows != num_nodes");
  if (a_src.size() != Wh.cols || a_dst.size() != Wh.cols)
    throw ShapeError("attention_coefficients: attention vector width != F'");
  const uint32_t N = g.num_nodes;
  std::vector<T> src_term(N), dst_term(N);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < int64_t(N); ++i) {
    const T* row = Wh.row(uint32_t(i));
    T s = T(0), d = T(0);
    for (uint32_t o = 0; o < Wh.cols; ++o) {
      s += a_src.data[o] * row[o];
      d += a_dst.data[o] * row[o];
    }
    src_term[i] = s;
    dst_term[i] = d;
  }
  std::vector<T> raw(g.num_edges());
  std::vector<T> scored(g.num_edges());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < int64_t(N); ++i) {
    for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
      const T r = src_term[i] + dst_term[g.col_indices[e]];
      raw[e] = r;
      scored[e] = r >= T(0) ? r : leaky_slope * r;
    }
  }
  if (raw_logits) *raw_logits = std::move(raw);
  return masked_softmax(scored, g);
}

// Uniform coefficients 1/|N_i|: the constant attention mechanism, identical
// to the softmax of all-equal scores.
template <class T>
std::vector<T> uniform_attention(const CsrGraph& g) {
  for (uint32_t i = 0; i < g.num_nodes; ++i)
    if (g.row_offsets[i] == g.row_offsets[i + 1])
      throw ContractError("uniform_attention: empty neighborhood at node " + std::to_string(i));
  std::vector<T> alpha(g.num_edges());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < int64_t(g.num_nodes); ++i) {
    const uint32_t lo = g.row_offsets[i], hi = g.row_offsets[i + 1];
    const T inv = T(1) / T(hi - lo);
    for (uint32_t e = lo; e < hi; ++e) alpha[e] = inv;
  }
  return alpha;
}

// One graph attentional layer. Train mode applies inverted dropout to the
// input features and to the normalized coefficients (no renormalization);
// eval mode is deterministic. The cache, when requested, holds everything
// backward needs. frozen, when given, supplies the dropout draws.
template <class T>
Matrix<T> gat_forward(const Matrix<T>& h, const GatLayerParams<T>& params,
                      const GatLayerConfig& cfg, const CsrGraph& g, RngState& rng, Mode mode,
                      std::type_identity_t<LayerCache<T>>* cache_out,
                      const std::type_identity_t<LayerDraws<T>>* frozen = nullptr) {
  cfg.validate();
  if (h.cols != cfg.in_features)
    throw ShapeError("gat_forward: input width " + std::to_string(h.cols) + " != configured " +
                     std::to_string(cfg.in_features));
  if (h.rows != g.num_nodes) throw ShapeError("gat_forward: input rows != num_nodes");
  if (params.W.size() != cfg.num_heads) throw ShapeError("gat_forward: params/config head mismatch");
#ifndef NDEBUG
  if (!g.has_self_loops()) throw ValidationError("gat_forward: graph lacks self-loops");
#endif

  const uint32_t N = g.num_nodes;
  const uint32_t Fp = cfg.head_features;
  const uint32_t K = cfg.num_heads;
  const uint32_t out_width = cfg.output_width();
  const bool training = mode == Mode::train;

  LayerCache<T> local;
  LayerCache<T>& cache = cache_out ? *cache_out : local;
  cache = LayerCache<T>{};
  cache.mode = mode;
  cache.num_nodes = N;

  // input dropout
  cache.input_dropped = h;
  if (training && cfg.input_dropout > 0.0f) {
    if (frozen) {
      if (frozen->input_mask.size() != h.size())
        throw ContractError("gat_forward: frozen input mask size mismatch");
      cache.input_mask = frozen->input_mask;
    } else {
      Matrix<T> m = dropout_mask<T>(h.rows, h.cols, cfg.input_dropout, rng);
      cache.input_mask = std::move(m.data);
    }
    for (size_t i = 0; i < cache.input_dropped.size(); ++i)
      cache.input_dropped.data[i] *= cache.input_mask[i];
  }
  const Matrix<T>& hd = cache.input_dropped;

  // sparse row lists pay off below ~50% density
  size_t nnz = 0;
  for (const T v : hd.data)
    if (v != T(0)) ++nnz;
  cache.sparse_input = nnz * 2 < hd.size();
  if (cache.sparse_input) cache.nz = detail::build_sparse_rows(hd);
  const SparseRows<T>* sp = cache.sparse_input ? &cache.nz : nullptr;

  Matrix<T> merged(N, out_width);
  cache.Wh.resize(K);
  cache.logits.resize(K);
  cache.alpha.resize(K);
  cache.attn_mask.resize(K);

  for (uint32_t k = 0; k < K; ++k) {
    Matrix<T>& Wh = cache.Wh[k];
    Wh = Matrix<T>(N, Fp);
    detail::linear_nt_accum(hd, sp, params.W[k], Wh);

    if (cfg.attention == AttentionKind::learned)
      cache.alpha[k] = attention_coefficients(Wh, params.a_src[k], params.a_dst[k], g,
                                              T(cfg.leaky_slope), &cache.logits[k]);
    else
      cache.alpha[k] = uniform_attention<T>(g);

    const std::vector<T>& alpha = cache.alpha[k];
    std::vector<T>& amask = cache.attn_mask[k];
    if (training && cfg.attn_dropout > 0.0f) {
      if (frozen) {
        if (frozen->attn_mask.size() != K || frozen->attn_mask[k].size() != alpha.size())
          throw ContractError("gat_forward: frozen attention mask mismatch");
        amask = frozen->attn_mask[k];
      } else {
        Matrix<T> m = dropout_mask<T>(uint32_t(alpha.size()), 1, cfg.attn_dropout, rng);
        amask = std::move(m.data);
      }
    }

    // aggregate neighbors, then bias, then merge
    const T* brow = cfg.use_bias ? params.bias[k].row(0) : nullptr;
    const uint32_t col0 = cfg.merge == Merge::concat ? k * Fp : 0;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(N); ++i) {
      T acc_stack[64];
      std::vector<T> acc_heap;
      T* acc = Fp <= 64 ? acc_stack : (acc_heap.resize(Fp), acc_heap.data());
      for (uint32_t o = 0; o < Fp; ++o) acc[o] = T(0);
      for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
        T a = alpha[e];
        if (!amask.empty()) a *= amask[e];
        if (a == T(0)) continue;
        const T* src = Wh.row(g.col_indices[e]);
        for (uint32_t o = 0; o < Fp; ++o) acc[o] += a * src[o];
      }
      T* orow = merged.row(uint32_t(i)) + col0;
      if (cfg.merge == Merge::concat) {
        for (uint32_t o = 0; o < Fp; ++o) orow[o] = acc[o] + (brow ? brow[o] : T(0));
      } else {
        for (uint32_t o = 0; o < Fp; ++o) orow[o] += acc[o] + (brow ? brow[o] : T(0));
      }
    }
  }

  if (cfg.merge == Merge::average && K > 1) {
    const T inv = T(1) / T(K);
    for (T& v : merged.data) v *= inv;
  }

  // skip connection reads the same (dropped) input the transform saw
  if (cfg.skip == SkipKind::identity) {
    for (size_t i = 0; i < merged.size(); ++i) merged.data[i] += hd.data[i];
  } else if (cfg.skip == SkipKind::projected) {
    detail::linear_nt_accum(hd, sp, params.skip_proj, merged);
  }

  Matrix<T> out;
  if (cfg.activation == Activation::elu) {
    cache.pre_activation = merged;
    out = elu(merged);
  } else {
    out = std::move(merged);
  }
  GATNET_DEBUG_FINITE(out, "gat_forward output");
  return out;
}

// Reverse-mode gradients of one layer. grad_input_out may be null when the
// caller does not need d(loss)/d(input), e.g. for the first layer.
template <class T>
void gat_backward(const Matrix<T>& grad_out, const LayerCache<T>& cache,
                  const GatLayerParams<T>& params, const GatLayerConfig& cfg, const CsrGraph& g,
                  GatLayerParams<T>& grads, std::type_identity_t<Matrix<T>>* grad_input_out) {
  const uint32_t N = cache.num_nodes;
  const uint32_t Fp = cfg.head_features;
  const uint32_t K = cfg.num_heads;
  const uint32_t out_width = cfg.output_width();
  if (N != g.num_nodes || cache.Wh.size() != K)
    throw ContractError("gat_backward: cache does not match graph/config");
  if (grad_out.rows != N || grad_out.cols != out_width)
    throw ContractError("gat_backward: grad_out shape mismatch");
  if (cfg.activation == Activation::elu && cache.pre_activation.size() != grad_out.size())
    throw ContractError("gat_backward: stale cache (missing pre-activation)");

  const Matrix<T>& hd = cache.input_dropped;
  const SparseRows<T>* sp = cache.sparse_input ? &cache.nz : nullptr;

  // through the nonlinearity
  Matrix<T> gact(N, out_width);
  if (cfg.activation == Activation::elu) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(gact.size()); ++i) {
      const T z = cache.pre_activation.data[i];
      gact.data[i] = grad_out.data[i] * (z >= T(0) ? T(1) : std::exp(z));
    }
  } else {
    gact.data = grad_out.data;
  }

  // gradient w.r.t. the (dropped) input, accumulated across heads and skip
  Matrix<T> ghd;
  const bool need_input = grad_input_out != nullptr;
  if (need_input) ghd = Matrix<T>(N, cfg.in_features);

  if (cfg.skip == SkipKind::identity) {
    if (need_input)
      for (size_t i = 0; i < ghd.size(); ++i) ghd.data[i] += gact.data[i];
  } else if (cfg.skip == SkipKind::projected) {
    detail::outer_accum_tn(gact, hd, sp, grads.skip_proj);
    if (need_input) {
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < int64_t(N); ++i) {
        T* grow = ghd.row(uint32_t(i));
        const T* arow = gact.row(uint32_t(i));
        for (uint32_t o = 0; o < out_width; ++o) {
          const T c = arow[o];
          if (c == T(0)) continue;
          const T* wrow = params.skip_proj.row(o);
          for (uint32_t f = 0; f < cfg.in_features; ++f) grow[f] += c * wrow[f];
        }
      }
    }
  }

  const T head_scale = cfg.merge == Merge::average ? T(1) / T(K) : T(1);

  for (uint32_t k = 0; k < K; ++k) {
    const Matrix<T>& Wh = cache.Wh[k];
    const std::vector<T>& alpha = cache.alpha[k];
    const std::vector<T>& amask = cache.attn_mask[k];

    // per-head slice of the merged gradient
    Matrix<T> gk(N, Fp);
    const uint32_t col0 = cfg.merge == Merge::concat ? k * Fp : 0;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(N); ++i) {
      const T* srow = gact.row(uint32_t(i)) + col0;
      T* drow = gk.row(uint32_t(i));
      for (uint32_t o = 0; o < Fp; ++o) drow[o] = srow[o] * head_scale;
    }

    if (cfg.use_bias) {
      T* brow = grads.bias[k].row(0);
#pragma omp parallel for schedule(static)
      for (int64_t o = 0; o < int64_t(Fp); ++o) {
        T acc = T(0);
        for (uint32_t i = 0; i < N; ++i) acc += gk(i, uint32_t(o));
        brow[o] += acc;
      }
    }

    // aggregation: out_i = sum_j alpha~_ij Wh_j
    const uint32_t E = g.num_edges();
    std::vector<T> galpha_eff(E);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(N); ++i) {
      const T* grow = gk.row(uint32_t(i));
      for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
        const T* whj = Wh.row(g.col_indices[e]);
        T acc = T(0);
        for (uint32_t o = 0; o < Fp; ++o) acc += grow[o] * whj[o];
        galpha_eff[e] = acc;
      }
    }

    Matrix<T> gWh(N, Fp);
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < int64_t(N); ++j) {
      T* grow = gWh.row(uint32_t(j));
      for (uint32_t t = g.in_offsets[j]; t < g.in_offsets[j + 1]; ++t) {
        const uint32_t i = g.in_dst[t];
        const uint32_t e = g.in_edge[t];
        T a = alpha[e];
        if (!amask.empty()) a *= amask[e];
        if (a == T(0)) continue;
        const T* gi = gk.row(i);
        for (uint32_t o = 0; o < Fp; ++o) grow[o] += a * gi[o];
      }
    }

    if (cfg.attention == AttentionKind::learned) {
      const std::vector<T>& raw = cache.logits[k];
      // through attention dropout, the softmax Jacobian, and the LeakyReLU
      std::vector<T> graw(E);
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < int64_t(N); ++i) {
        const uint32_t lo = g.row_offsets[i], hi = g.row_offsets[i + 1];
        T dot = T(0);
        for (uint32_t e = lo; e < hi; ++e) {
          T ga = galpha_eff[e];
          if (!amask.empty()) ga *= amask[e];
          graw[e] = ga;  // reuse as d(loss)/d(alpha) scratch
          dot += alpha[e] * ga;
        }
        for (uint32_t e = lo; e < hi; ++e) {
          const T ge = alpha[e] * (graw[e] - dot);
          graw[e] = ge * (raw[e] >= T(0) ? T(1) : T(cfg.leaky_slope));
        }
      }

      // raw_ij = a_src.Wh_i + a_dst.Wh_j
      std::vector<T> gsrc(N), gdst(N);
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < int64_t(N); ++i) {
        T acc = T(0);
        for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) acc += graw[e];
        gsrc[i] = acc;
      }
#pragma omp parallel for schedule(static)
      for (int64_t j = 0; j < int64_t(N); ++j) {
        T acc = T(0);
        for (uint32_t t = g.in_offsets[j]; t < g.in_offsets[j + 1]; ++t) acc += graw[g.in_edge[t]];
        gdst[j] = acc;
      }

      T* gas = grads.a_src[k].data.data();
      T* gad = grads.a_dst[k].data.data();
#pragma omp parallel for schedule(static)
      for (int64_t o = 0; o < int64_t(Fp); ++o) {
        T acc_s = T(0), acc_d = T(0);
        for (uint32_t i = 0; i < N; ++i) {
          acc_s += gsrc[i] * Wh(i, uint32_t(o));
          acc_d += gdst[i] * Wh(i, uint32_t(o));
        }
        gas[o] += acc_s;
        gad[o] += acc_d;
      }

      const T* asrc = params.a_src[k].data.data();
      const T* adst = params.a_dst[k].data.data();
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < int64_t(N); ++i) {
        T* grow = gWh.row(uint32_t(i));
        const T gs = gsrc[i], gd = gdst[i];
        for (uint32_t o = 0; o < Fp; ++o) grow[o] += gs * asrc[o] + gd * adst[o];
      }
    }

    detail::outer_accum_tn(gWh, hd, sp, grads.W[k]);

    if (need_input) {
      const Matrix<T>& W = params.W[k];
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < int64_t(N); ++i) {
        T* grow = ghd.row(uint32_t(i));
        const T* gwh = gWh.row(uint32_t(i));
        for (uint32_t o = 0; o < Fp; ++o) {
          const T c = gwh[o];
          if (c == T(0)) continue;
          const T* wrow = W.row(o);
          for (uint32_t f = 0; f < cfg.in_features; ++f) grow[f] += c * wrow[f];
        }
      }
    }
  }

  if (need_input) {
    if (!cache.input_mask.empty())
      for (size_t i = 0; i < ghd.size(); ++i) ghd.data[i] *= cache.input_mask[i];
    *grad_input_out = std::move(ghd);
  }
}

// Per-edge records `i<TAB>j<TAB>head<TAB>alpha` from a forward cache.
template <class T>
void export_attention(std::ostream& out, const CsrGraph& g, const LayerCache<T>& cache) {
  const uint32_t K = uint32_t(cache.alpha.size());
  const auto old_precision = out.precision(10);
  for (uint32_t i = 0; i < g.num_nodes; ++i)
    for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
      for (uint32_t k = 0; k < K; ++k)
        out << i << '\t' << g.col_indices[e] << '\t' << k << '\t' << double(cache.alpha[k][e])
            << '\n';
  out.precision(old_precision);
}

}  // namespace gatnet
