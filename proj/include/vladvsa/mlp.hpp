#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vladvsa/matrix.hpp"
#include "vladvsa/rng.hpp"

namespace vladvsa {

/// y = W x + b applied to each row of the input.
struct Linear {
  Matrix w;               // out x in
  std::vector<double> b;  // out

  std::size_t in_dim() const { return w.cols(); }
  std::size_t out_dim() const { return w.rows(); }
};

inline Linear make_linear(std::size_t out, std::size_t in, Rng& rng) {
  Linear l;
  l.w = Matrix(out, in);
  l.b.assign(out, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::size_t i = 0; i < out; ++i)
    for (std::size_t j = 0; j < in; ++j) l.w(i, j) = scale * rng.next_gaussian();
  return l;
}

inline Matrix linear_forward(const Matrix& x, const Linear& l) {
  if (x.cols() != l.in_dim()) {
    throw std::invalid_argument("linear_forward: input width " + x.shape_str() +
                                " vs weights " + l.w.shape_str());
  }
  Matrix y = matmul(x, transpose(l.w));
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += l.b[j];
  return y;
}

struct LinearGrads {
  Matrix w;
  std::vector<double> b;
};

/// Given dL/dy, accumulates weight gradients and returns dL/dx.
inline Matrix linear_backward(const Matrix& x, const Linear& l,
                              const Matrix& d_out, LinearGrads& grads) {
  if (grads.w.empty()) {
    grads.w = Matrix(l.out_dim(), l.in_dim());
    grads.b.assign(l.out_dim(), 0.0);
  }
  add_scaled(grads.w, 1.0, matmul(transpose(d_out), x));
  for (std::size_t i = 0; i < d_out.rows(); ++i)
    for (std::size_t j = 0; j < d_out.cols(); ++j) grads.b[j] += d_out(i, j);
  return matmul(d_out, l.w);
}

/// Two-layer perceptron with a rectifier between the layers. The rectifier
/// subgradient at exactly zero is taken as 0.
struct Mlp {
  Linear l1;
  Linear l2;
};

inline Mlp make_mlp(std::size_t out, std::size_t hidden, std::size_t in,
                    Rng& rng) {
  return Mlp{make_linear(hidden, in, rng), make_linear(out, hidden, rng)};
}

struct MlpCache {
  Matrix input;
  Matrix pre_act;  // rows x hidden, before the rectifier
  Matrix hidden;   // rows x hidden, after
};

inline std::pair<Matrix, MlpCache> mlp_forward(const Matrix& x, const Mlp& m) {
  MlpCache cache;
  cache.input = x;
  cache.pre_act = linear_forward(x, m.l1);
  cache.hidden = cache.pre_act;
  for (double& v : cache.hidden.data()) v = v > 0.0 ? v : 0.0;
  return {linear_forward(cache.hidden, m.l2), std::move(cache)};
}

struct MlpGrads {
  LinearGrads l1;
  LinearGrads l2;
};

inline Matrix mlp_backward(const MlpCache& cache, const Mlp& m,
                           const Matrix& d_out, MlpGrads& grads) {
  Matrix d_hidden = linear_backward(cache.hidden, m.l2, d_out, grads.l2);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) {
    if (cache.pre_act.data()[i] <= 0.0) d_hidden.data()[i] = 0.0;
  }
  return linear_backward(cache.input, m.l1, d_hidden, grads.l1);
}

}  // namespace vladvsa
