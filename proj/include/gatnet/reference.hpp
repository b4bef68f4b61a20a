#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "gatnet/layer.hpp"

// Serial reference implementations, kept for testing and benchmarking.
// They materialize the full N x N masked attention matrix and run plain
// triple loops; the production kernels must match them numerically while
// never allocating anything quadratic in N.
namespace gatnet::ref {

// Plain triple-loop product, no parallelism, no zero-skipping.
template <class T>
Matrix<T> naive_matmul(const Matrix<T>& A, const Matrix<T>& B) {
  if (A.cols != B.rows) throw ShapeError("naive_matmul: dimension mismatch");
  Matrix<T> C(A.rows, B.cols);
  for (uint32_t i = 0; i < A.rows; ++i)
    for (uint32_t j = 0; j < B.cols; ++j) {
      T acc = T(0);
      for (uint32_t k = 0; k < A.cols; ++k) acc += A(i, k) * B(k, j);
      C(i, j) = acc;
    }
  return C;
}

// Eval-mode forward of one layer via a dense N x N attention matrix per head.
template <class T>
Matrix<T> dense_gat_forward(const Matrix<T>& h, const GatLayerParams<T>& params,
                            const GatLayerConfig& cfg, const CsrGraph& g) {
  cfg.validate();
  const uint32_t N = g.num_nodes;
  const uint32_t Fp = cfg.head_features;
  const uint32_t K = cfg.num_heads;
  const T neg_inf = -std::numeric_limits<T>::infinity();

  // adjacency mask
  std::vector<uint8_t> mask(size_t(N) * N, 0);
  for (uint32_t i = 0; i < N; ++i)
    for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
      mask[size_t(i) * N + g.col_indices[e]] = 1;

  Matrix<T> merged(N, cfg.output_width());
  for (uint32_t k = 0; k < K; ++k) {
    // Wh = h W^T
    Matrix<T> Wh(N, Fp);
    for (uint32_t i = 0; i < N; ++i)
      for (uint32_t o = 0; o < Fp; ++o) {
        T acc = T(0);
        for (uint32_t f = 0; f < cfg.in_features; ++f) acc += h(i, f) * params.W[k](o, f);
        Wh(i, o) = acc;
      }

    Matrix<T> A(N, N);
    if (cfg.attention == AttentionKind::learned) {
      for (uint32_t i = 0; i < N; ++i)
        for (uint32_t j = 0; j < N; ++j) {
          if (!mask[size_t(i) * N + j]) {
            A(i, j) = neg_inf;
            continue;
          }
          T e = T(0);
          for (uint32_t o = 0; o < Fp; ++o)
            e += params.a_src[k].data[o] * Wh(i, o) + params.a_dst[k].data[o] * Wh(j, o);
          A(i, j) = e >= T(0) ? e : T(cfg.leaky_slope) * e;
        }
    } else {
      for (uint32_t i = 0; i < N; ++i)
        for (uint32_t j = 0; j < N; ++j)
          A(i, j) = mask[size_t(i) * N + j] ? T(0) : neg_inf;
    }

    // row softmax over the masked entries
    for (uint32_t i = 0; i < N; ++i) {
      T mx = neg_inf;
      for (uint32_t j = 0; j < N; ++j) mx = std::max(mx, A(i, j));
      T sum = T(0);
      for (uint32_t j = 0; j < N; ++j) {
        if (A(i, j) == neg_inf) {
          A(i, j) = T(0);
          continue;
        }
        A(i, j) = std::exp(A(i, j) - mx);
        sum += A(i, j);
      }
      for (uint32_t j = 0; j < N; ++j) A(i, j) /= sum;
    }

    // aggregate, bias, merge
    for (uint32_t i = 0; i < N; ++i)
      for (uint32_t o = 0; o < Fp; ++o) {
        T acc = T(0);
        for (uint32_t j = 0; j < N; ++j) acc += A(i, j) * Wh(j, o);
        if (cfg.use_bias) acc += params.bias[k](0, o);
        if (cfg.merge == Merge::concat)
          merged(i, k * Fp + o) = acc;
        else
          merged(i, o) += acc;
      }
  }
  if (cfg.merge == Merge::average && K > 1)
    for (T& v : merged.data) v /= T(K);

  if (cfg.skip == SkipKind::identity) {
    for (uint32_t i = 0; i < N; ++i)
      for (uint32_t c = 0; c < merged.cols; ++c) merged(i, c) += h(i, c);
  } else if (cfg.skip == SkipKind::projected) {
    for (uint32_t i = 0; i < N; ++i)
      for (uint32_t o = 0; o < merged.cols; ++o) {
        T acc = T(0);
        for (uint32_t f = 0; f < cfg.in_features; ++f) acc += h(i, f) * params.skip_proj(o, f);
        merged(i, o) += acc;
      }
  }

  if (cfg.activation == Activation::elu) return elu(merged);
  return merged;
}

}  // namespace gatnet::ref
