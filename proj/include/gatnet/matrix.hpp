#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gatnet/errors.hpp"
#include "gatnet/rng.hpp"

namespace gatnet {

// Dense row-major matrix. Training runs the float instantiation; the double
// instantiation mirrors every op for gradient checking.
template <class T>
struct Matrix {
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(uint32_t r, uint32_t c) : rows(r), cols(c), data(size_t(r) * c, T(0)) {}

  static Matrix identity(uint32_t n) {
    Matrix m(n, n);
    for (uint32_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  T* row(uint32_t i) { return data.data() + size_t(i) * cols; }
  const T* row(uint32_t i) const { return data.data() + size_t(i) * cols; }

  T& operator()(uint32_t i, uint32_t j) { return data[size_t(i) * cols + j]; }
  const T& operator()(uint32_t i, uint32_t j) const { return data[size_t(i) * cols + j]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

using MatF = Matrix<float>;
using MatD = Matrix<double>;

template <class T>
bool all_finite(const Matrix<T>& m) {
  for (T v : m.data)
    if (!std::isfinite(double(v))) return false;
  return true;
}

template <class T>
void check_finite(const Matrix<T>& m, const char* what) {
  if (!all_finite(m))
    throw ValidationError(std::string("non-finite value in ") + what);
}

// Finiteness scan on public outputs, active in debug builds only.
#ifndef NDEBUG
#define GATNET_DEBUG_FINITE(m, what) ::gatnet::check_finite((m), (what))
#else
#define GATNET_DEBUG_FINITE(m, what) ((void)0)
#endif

// C = A * B
template <class T>
Matrix<T> matmul(const Matrix<T>& A, const Matrix<T>& B) {
  if (A.cols != B.rows)
    throw ShapeError("matmul: " + std::to_string(A.rows) + "x" + std::to_string(A.cols) +
                     " * " + std::to_string(B.rows) + "x" + std::to_string(B.cols));
  Matrix<T> C(A.rows, B.cols);
#pragma omp parallel for schedule(static) if (A.rows >= 32)
  for (int64_t i = 0; i < int64_t(A.rows); ++i) {
    const T* arow = A.row(uint32_t(i));
    T* crow = C.row(uint32_t(i));
    for (uint32_t k = 0; k < A.cols; ++k) {
      T aik = arow[k];
      if (aik == T(0)) continue;
      const T* brow = B.row(k);
      for (uint32_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  GATNET_DEBUG_FINITE(C, "matmul output");
  return C;
}

// C = A * B^T  (rows of both operands are contiguous dot operands)
template <class T>
Matrix<T> matmul_nt(const Matrix<T>& A, const Matrix<T>& B) {
  if (A.cols != B.cols)
    throw ShapeError("matmul_nt: inner dims " + std::to_string(A.cols) + " vs " +
                     std::to_string(B.cols));
  Matrix<T> C(A.rows, B.rows);
#pragma omp parallel for schedule(static) if (A.rows >= 32)
  for (int64_t i = 0; i < int64_t(A.rows); ++i) {
    const T* arow = A.row(uint32_t(i));
    T* crow = C.row(uint32_t(i));
    for (uint32_t j = 0; j < B.rows; ++j) {
      const T* brow = B.row(j);
      T acc = T(0);
      for (uint32_t k = 0; k < A.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return C;
}

template <class T>
Matrix<T> leaky_relu(const Matrix<T>& x, T slope) {
  Matrix<T> out(x.rows, x.cols);
  for (size_t i = 0; i < x.size(); ++i)
    out.data[i] = x.data[i] >= T(0) ? x.data[i] : slope * x.data[i];
  return out;
}

template <class T>
Matrix<T> elu(const Matrix<T>& x) {
  Matrix<T> out(x.rows, x.cols);
  for (size_t i = 0; i < x.size(); ++i)
    out.data[i] = x.data[i] >= T(0) ? x.data[i] : T(std::expm1(double(x.data[i])));
  return out;
}

// Entries i.i.d. uniform on [-s, s], s = sqrt(6 / (rows + cols)).
template <class T>
Matrix<T> glorot_init(uint32_t rows, uint32_t cols, RngState& rng) {
  Matrix<T> m(rows, cols);
  double s = std::sqrt(6.0 / (double(rows) + double(cols)));
  for (size_t i = 0; i < m.size(); ++i)
    m.data[i] = T(s * (2.0 * rng.next_double() - 1.0));
  return m;
}

// Inverted dropout mask: 0 with probability p, else 1/(1-p).
template <class T>
Matrix<T> dropout_mask(uint32_t rows, uint32_t cols, double p, RngState& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  Matrix<T> m(rows, cols);
  T keep = T(1.0 / (1.0 - p));
  for (size_t i = 0; i < m.size(); ++i)
    m.data[i] = rng.next_double() < p ? T(0) : keep;
  return m;
}

}  // namespace gatnet
