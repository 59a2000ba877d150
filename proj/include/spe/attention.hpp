#pragma once

// Scaled dot-product attention, multi-head attention and spatial-reduction
// attention over token matrices (tokens x channels).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spe/tensor.hpp"

namespace spe {

inline constexpr double kSoftmaxRowTolerance = 1e-6;

// Collects softmax weight matrices as they are computed. The caller sets
// stage/layer before each layer runs; heads are filled in by mha/sra.
struct AttentionRecorder {
  struct Map {
    int stage = 0;
    int layer = 0;
    int head = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;
  };

  int stage = 0;
  int layer = 0;
  std::vector<Map> maps;

  template <class T>
  void record(int head, const Matrix<T>& probs) {
    Map m{stage, layer, head, probs.rows(), probs.cols(), {}};
    m.weights.reserve(probs.data().size());
    for (const T& v : probs.data()) m.weights.push_back(value_of(v));
    maps.push_back(std::move(m));
  }

  // One CSV per map, each row holding one query's weights over the keys.
  std::vector<std::string> write_csv(const std::string& dir) const {
    std::vector<std::string> paths;
    for (const auto& m : maps) {
      const std::string path = dir + "/attn_s" + std::to_string(m.stage) + "_l" + std::to_string(m.layer) + "_h" +
                               std::to_string(m.head) + ".csv";
      std::ofstream os(path);
      if (!os) throw std::runtime_error("cannot write " + path);
      os.precision(9);
      for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) os << (c ? "," : "") << m.weights[r * m.cols + c];
        os << '\n';
      }
      paths.push_back(path);
    }
    return paths;
  }
};

// Softmax(q k^T / sqrt(d_head)) v with d_head = q.cols(). When probs is
// non-null it receives the row-stochastic weight matrix.
template <class T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, Matrix<T>* probs = nullptr) {
  using std::exp;
  const std::size_t d_head = q.cols();
  if (d_head == 0) detail::fail<ConfigError>("attention", "d_head must be positive");
  if (k.cols() != d_head || k.rows() != v.rows() || k.rows() == 0) {
    detail::fail<DomainError>("attention", "incompatible q/k/v shapes");
  }
  Matrix<T> w = matmul_bt(q, k);
  const T scale = T(1.0 / std::sqrt(static_cast<double>(d_head)));
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    double max_logit = -INFINITY;
    for (T& x : row) {
      x *= scale;
      max_logit = std::max(max_logit, value_of(x));
    }
    T sum{};
    for (T& x : row) {
      x = exp(x - T(max_logit));
      sum += x;
    }
    double total = 0.0;
    for (T& x : row) {
      x /= sum;
      total += value_of(x);
    }
    if (!(std::abs(total - 1.0) <= kSoftmaxRowTolerance)) {
      throw std::logic_error("attention: softmax row does not sum to 1");
    }
  }
  Matrix<T> out = matmul(w, v);
  if (probs) *probs = std::move(w);
  return out;
}

template <class T>
struct AttentionParams {
  Linear<T> q, k, v, o;

  AttentionParams() = default;
  explicit AttentionParams(std::size_t dim) : q(dim, dim), k(dim, dim), v(dim, dim), o(dim, dim) {}
};

// SR(x) = Norm(Reshape(x, r) W_R): r^2 consecutive tokens are concatenated
// along channels (r^2 C) and projected back to C.
template <class T>
struct SpatialReduction {
  Linear<T> reduce;
  LayerNormParams<T> norm;
  bool normalize = true;

  SpatialReduction() = default;
  SpatialReduction(std::size_t dim, int ratio)
      : reduce(static_cast<std::size_t>(ratio) * ratio * dim, dim), norm(dim) {}
};

template <class T>
Matrix<T> spatial_reduce(const Matrix<T>& x, const SpatialReduction<T>& sr, int ratio) {
  const std::size_t group = static_cast<std::size_t>(ratio) * ratio;
  if (ratio < 1 || x.rows() % group != 0) {
    detail::fail<ConfigError>("spatial_reduce", "sequence length must be divisible by ratio^2");
  }
  if (sr.reduce.in() != group * x.cols() || sr.reduce.out() != x.cols()) {
    detail::fail<DomainError>("spatial_reduce", "W_R shape does not match ratio and width");
  }
  // Row-major storage makes the grouping reshape a reinterpretation.
  Matrix<T> grouped(x.rows() / group, group * x.cols(), x.data());
  Matrix<T> reduced = sr.reduce(grouped);
  return sr.normalize ? layer_norm(reduced, sr.norm) : reduced;
}

namespace detail {

template <class T>
Matrix<T> multi_head(const Matrix<T>& queries, const Matrix<T>& keys, const Matrix<T>& values,
                     const AttentionParams<T>& p, int heads, AttentionRecorder* recorder) {
  const std::size_t dim = queries.cols();
  if (heads < 1 || dim % static_cast<std::size_t>(heads) != 0) {
    fail<ConfigError>("multi-head attention", "heads must divide d_model");
  }
  if (p.q.in() != dim || p.k.in() != keys.cols() || p.o.out() != dim) {
    fail<DomainError>("multi-head attention", "projection shapes do not match token width");
  }
  const Matrix<T> q = p.q(queries);
  const Matrix<T> k = p.k(keys);
  const Matrix<T> v = p.v(values);
  const std::size_t d_head = dim / static_cast<std::size_t>(heads);
  Matrix<T> concat(queries.rows(), dim);
  Matrix<T> probs;
  for (int h = 0; h < heads; ++h) {
    const std::size_t begin = static_cast<std::size_t>(h) * d_head;
    Matrix<T> out = attention(columns(q, begin, d_head), columns(k, begin, d_head), columns(v, begin, d_head),
                              recorder ? &probs : nullptr);
    if (recorder) recorder->record(h, probs);
    set_columns(concat, begin, out);
  }
  return p.o(concat);
}

}  // namespace detail

template <class T>
Matrix<T> mha(const Matrix<T>& x, const AttentionParams<T>& p, int heads, AttentionRecorder* recorder = nullptr) {
  return detail::multi_head(x, x, x, p, heads, recorder);
}

// Queries keep full length; keys and values come from SR(x), which holds
// len / ratio^2 tokens.
template <class T>
Matrix<T> sra(const Matrix<T>& x, const AttentionParams<T>& p, const SpatialReduction<T>& sr, int heads, int ratio,
              AttentionRecorder* recorder = nullptr) {
  const Matrix<T> kv = spatial_reduce(x, sr, ratio);
  return detail::multi_head(x, kv, kv, p, heads, recorder);
}

// Pre-norm transformer block. reduction_ratio 1 uses plain MHA (no SR
// weights), larger ratios use SRA.
template <class T>
struct EncoderLayerParams {
  int heads = 1;
  int reduction_ratio = 1;
  LayerNormParams<T> norm1;
  AttentionParams<T> attn;
  SpatialReduction<T> sr;  // unused when reduction_ratio == 1
  LayerNormParams<T> norm2;
  Linear<T> fc1;
  Linear<T> fc2;

  EncoderLayerParams() = default;
  EncoderLayerParams(std::size_t dim, std::size_t mlp_dim, int heads_, int ratio)
      : heads(heads_), reduction_ratio(ratio), norm1(dim), attn(dim),
        sr(ratio > 1 ? SpatialReduction<T>(dim, ratio) : SpatialReduction<T>()), norm2(dim), fc1(dim, mlp_dim),
        fc2(mlp_dim, dim) {}
};

template <class T>
Matrix<T> encoder_layer(const Matrix<T>& x, const EncoderLayerParams<T>& p, AttentionRecorder* recorder = nullptr) {
  const Matrix<T> normed = layer_norm(x, p.norm1);
  Matrix<T> h = x;
  h += p.reduction_ratio > 1 ? sra(normed, p.attn, p.sr, p.heads, p.reduction_ratio, recorder)
                             : mha(normed, p.attn, p.heads, recorder);
  Matrix<T> out = h;
  out += p.fc2(gelu(p.fc1(layer_norm(h, p.norm2))));
  return out;
}

}  // namespace spe
