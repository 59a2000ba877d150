#pragma once

// Minimal dense row-major matrix and the handful of kernels the encoder
// needs. Templated on the scalar so the same code runs on double and Dual.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spe/core.hpp"
#include "spe/dual.hpp"

namespace spe {

template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) detail::fail<DomainError>("Matrix", "data size does not match shape");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) detail::fail<DomainError>("matmul", "inner dimensions differ");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      auto br = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

// a * b^T
template <class T>
Matrix<T> matmul_bt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) detail::fail<DomainError>("matmul_bt", "inner dimensions differ");
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      T acc{};
      for (std::size_t k = 0; k < a.cols(); ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <class T>
Matrix<T> columns(const Matrix<T>& m, std::size_t begin, std::size_t count) {
  Matrix<T> out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
  }
  return out;
}

template <class T>
void set_columns(Matrix<T>& dst, std::size_t begin, const Matrix<T>& src) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) = src(r, c);
  }
}

template <class T>
Matrix<T>& operator+=(Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) detail::fail<DomainError>("matrix add", "shape mismatch");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

// x W + b with W stored in x out.
template <class T>
struct Linear {
  Matrix<T> weight;
  std::vector<T> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight(in, out), bias(out) {}

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }

  Matrix<T> operator()(const Matrix<T>& x) const {
    Matrix<T> y = matmul(x, weight);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto row = y.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    }
    return y;
  }
};

template <class T>
struct LayerNormParams {
  std::vector<T> gamma;
  std::vector<T> beta;

  LayerNormParams() = default;
  explicit LayerNormParams(std::size_t dim) : gamma(dim, T(1.0)), beta(dim) {}
};

inline constexpr double kLayerNormEps = 1e-6;

template <class T>
Matrix<T> layer_norm(const Matrix<T>& x, const LayerNormParams<T>& p) {
  using std::sqrt;
  if (p.gamma.size() != x.cols()) detail::fail<DomainError>("layer_norm", "parameter width mismatch");
  Matrix<T> out(x.rows(), x.cols());
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    T mean{};
    for (const T& v : in) mean += v;
    mean *= T(inv_n);
    T var{};
    for (const T& v : in) var += (v - mean) * (v - mean);
    var *= T(inv_n);
    const T inv_std = T(1.0) / sqrt(var + T(kLayerNormEps));
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = (in[c] - mean) * inv_std * p.gamma[c] + p.beta[c];
  }
  return out;
}

// Exact (erf) GELU.
template <class T>
T gelu(const T& x) {
  using std::erf;
  return T(0.5) * x * (T(1.0) + erf(x * T(std::numbers::sqrt2 / 2.0)));
}

template <class T>
Matrix<T> gelu(Matrix<T> x) {
  for (T& v : x.data()) v = gelu(v);
  return x;
}

}  // namespace spe
