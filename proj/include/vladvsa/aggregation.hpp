#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vladvsa/matrix.hpp"
#include "vladvsa/vocabulary.hpp"

namespace vladvsa {

enum class AssignMode { kSoft, kHard };

struct AssignmentMatrix {
  Matrix scores;  // N x K; soft rows sum to 1, hard rows are one-hot
  AssignMode mode = AssignMode::kSoft;
};

/// Column mean of the feature rows.
inline std::vector<double> gap_pool(const LocalFeatureSet& features) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw std::invalid_argument("gap_pool: empty feature set");
  }
  std::vector<double> out(features.cols(), 0.0);
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < features.cols(); ++j)
      out[j] += features(i, j);
  for (double& x : out) x /= static_cast<double>(features.rows());
  return out;
}

/// Descriptor-to-word scores f_i . c_k, soft-maxed per row at temperature t
/// (with max subtraction; t*dot can overflow the naive form), or one-hot at
/// the argmax in hard mode. Ties in hard mode go to the lowest word index.
inline AssignmentMatrix compute_assignment(const LocalFeatureSet& features,
                                           const Vocabulary& vocab, double t,
                                           AssignMode mode) {
  if (features.cols() != vocab.words.cols()) {
    throw std::invalid_argument("compute_assignment: feature width " +
                                features.shape_str() + " vs vocabulary " +
                                vocab.words.shape_str());
  }
  if (mode == AssignMode::kSoft && !(t > 0.0)) {
    throw std::invalid_argument("compute_assignment: temperature must be > 0");
  }
  const std::size_t n = features.rows();
  const std::size_t k = vocab.size();
  Matrix scores = matmul(features, transpose(vocab.words));  // N x K dots
  AssignmentMatrix out{Matrix(n, k), mode};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_score = scores(i, 0);
    for (std::size_t j = 1; j < k; ++j) {
      if (scores(i, j) > best_score) {
        best_score = scores(i, j);
        best = j;
      }
    }
    if (mode == AssignMode::kHard) {
      out.scores(i, best) = 1.0;
      continue;
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = std::exp(t * (scores(i, j) - best_score));
      out.scores(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < k; ++j) out.scores(i, j) /= denom;
  }
  return out;
}

struct VladDescriptor {
  Matrix per_cluster;        // K x d raw residual sums, no normalization
  std::vector<double> flat;  // length K*d: intra-norm, flatten, l2-norm
  std::size_t k_shared = 0;
  std::size_t dim = 0;

  std::span<const double> shared_slice() const {
    return {flat.data(), k_shared * dim};
  }
  std::span<const double> specific_slice() const {
    return {flat.data() + k_shared * dim, flat.size() - k_shared * dim};
  }
};

/// Everything the backward pass needs, tied to one forward call.
struct VladCache {
  LocalFeatureSet features;
  Matrix words;
  double t = 0.0;
  AssignMode mode = AssignMode::kSoft;
  Matrix assign;                   // N x K
  Matrix raw_sums;                 // K x d   (U_k)
  std::vector<double> block_norm;  // ||U_k||, K entries
  std::vector<double> pre_global;  // intra-normalized flattened, length K*d
  double global_norm = 0.0;        // norm of pre_global
  std::vector<double> flat;        // final output
};

/// Soft- or hard-assigned VLAD: per-cluster residual sums, then each d-block
/// intra-normalized, flattened, and globally l2-normalized. Blocks with norm
/// <= eps pass through unscaled (clusters may receive zero mass).
inline std::pair<VladDescriptor, VladCache> vlad_forward(
    const LocalFeatureSet& features, const Vocabulary& vocab, double t,
    AssignMode mode = AssignMode::kSoft) {
  const AssignmentMatrix assign = compute_assignment(features, vocab, t, mode);
  const std::size_t n = features.rows();
  const std::size_t k = vocab.size();
  const std::size_t d = features.cols();

  // U = A^T L - diag(colsum A) V
  Matrix raw(k, d);
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double a = assign.scores(i, c);
      if (a == 0.0) continue;
      mass[c] += a;
      for (std::size_t j = 0; j < d; ++j) raw(c, j) += a * features(i, j);
    }
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) raw(c, j) -= mass[c] * vocab.words(c, j);

  VladCache cache;
  cache.features = features;
  cache.words = vocab.words;
  cache.t = t;
  cache.mode = mode;
  cache.assign = assign.scores;
  cache.raw_sums = raw;
  cache.block_norm.resize(k);
  cache.pre_global.resize(k * d);
  for (std::size_t c = 0; c < k; ++c) {
    const double bn = norm2(raw.row(c));
    cache.block_norm[c] = bn;
    for (std::size_t j = 0; j < d; ++j) {
      cache.pre_global[c * d + j] = bn > kNormEps ? raw(c, j) / bn : raw(c, j);
    }
  }
  cache.global_norm = norm2(cache.pre_global);
  cache.flat = cache.pre_global;
  if (cache.global_norm > kNormEps) {
    for (double& x : cache.flat) x /= cache.global_norm;
  }

  VladDescriptor desc;
  desc.per_cluster = raw;
  desc.flat = cache.flat;
  desc.k_shared = vocab.k_shared;
  desc.dim = d;
  return {std::move(desc), std::move(cache)};
}

struct VladGrads {
  Matrix features;  // N x d
  Matrix words;     // K x d
};

/// Exact gradients of the flat descriptor against features and words, given
/// the upstream gradient on flat. Chain: global l2-norm -> per-block
/// intra-norm -> residual sums -> soft assignment -> dot-product scores.
/// Hard-mode caches are rejected; the argmax has no usable derivative.
inline VladGrads vlad_backward(const VladCache& cache,
                               std::span<const double> upstream) {
  if (cache.mode == AssignMode::kHard) {
    throw std::invalid_argument(
        "vlad_backward: hard-assignment cache is not differentiable");
  }
  const std::size_t n = cache.features.rows();
  const std::size_t k = cache.words.rows();
  const std::size_t d = cache.words.cols();
  if (upstream.size() != k * d) {
    throw std::invalid_argument("vlad_backward: upstream length " +
                                std::to_string(upstream.size()) +
                                ", expected " + std::to_string(k * d));
  }

  // z = y / ||y||  =>  dy = (g - z (z.g)) / ||y||
  std::vector<double> d_pre(k * d);
  if (cache.global_norm > kNormEps) {
    const double zg = dot({cache.flat.data(), k * d}, upstream);
    for (std::size_t i = 0; i < k * d; ++i) {
      d_pre[i] = (upstream[i] - cache.flat[i] * zg) / cache.global_norm;
    }
  } else {
    for (std::size_t i = 0; i < k * d; ++i) d_pre[i] = upstream[i];
  }

  // Per block: Y_k = U_k / ||U_k||, same projection; eps-guarded blocks pass
  // the gradient through unchanged.
  Matrix d_raw(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    const double bn = cache.block_norm[c];
    std::span<const double> gb{d_pre.data() + c * d, d};
    std::span<const double> yb{cache.pre_global.data() + c * d, d};
    if (bn > kNormEps) {
      const double yg = dot(yb, gb);
      for (std::size_t j = 0; j < d; ++j)
        d_raw(c, j) = (gb[j] - yb[j] * yg) / bn;
    } else {
      for (std::size_t j = 0; j < d; ++j) d_raw(c, j) = gb[j];
    }
  }

  // U = A^T L - diag(m) V with m = colsum(A).
  VladGrads grads{Matrix(n, d), Matrix(k, d)};
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) mass[c] += cache.assign(i, c);

  // Direct paths: dL += A dU, dV -= diag(m) dU.
  grads.features = matmul(cache.assign, d_raw);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j)
      grads.words(c, j) -= mass[c] * d_raw(c, j);

  // Assignment path: dA_{ik} = dU_k . (f_i - c_k).
  Matrix d_assign = matmul(cache.features, transpose(d_raw));  // f_i . dU_k
  std::vector<double> wq(k);                                   // c_k . dU_k
  for (std::size_t c = 0; c < k; ++c)
    wq[c] = dot(cache.words.row(c), d_raw.row(c));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) d_assign(i, c) -= wq[c];

  // Softmax over t * scores: dS_{ik} = t a_{ik} (dA_{ik} - sum_k' a dA).
  Matrix d_scores(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      inner += cache.assign(i, c) * d_assign(i, c);
    for (std::size_t c = 0; c < k; ++c) {
      d_scores(i, c) = cache.t * cache.assign(i, c) * (d_assign(i, c) - inner);
    }
  }

  // S = L V^T.
  add_scaled(grads.features, 1.0, matmul(d_scores, cache.words));
  add_scaled(grads.words, 1.0, matmul(transpose(d_scores), cache.features));
  return grads;
}

/// Brute-force matching kernels: all-to-all descriptor similarity for GAP
/// (averaging omitted) and the per-cluster residual-pair sum for VLAD, both
/// on raw hard-assigned aggregates with no normalization. These are derived
/// independently of vlad_forward so the aggregate identities can be tested
/// against them.
inline std::pair<double, double> matching_kernel_oracle(
    const LocalFeatureSet& x1, const LocalFeatureSet& x2,
    const Vocabulary& vocab) {
  if (x1.cols() != x2.cols() || x1.cols() != vocab.words.cols()) {
    throw std::invalid_argument("matching_kernel_oracle: width mismatch");
  }
  double gap_sim = 0.0;
  for (std::size_t i = 0; i < x1.rows(); ++i)
    for (std::size_t j = 0; j < x2.rows(); ++j)
      gap_sim += dot(x1.row(i), x2.row(j));

  const Matrix a1 =
      compute_assignment(x1, vocab, 1.0, AssignMode::kHard).scores;
  const Matrix a2 =
      compute_assignment(x2, vocab, 1.0, AssignMode::kHard).scores;
  const std::size_t d = x1.cols();
  double vlad_sim = 0.0;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    for (std::size_t i = 0; i < x1.rows(); ++i) {
      if (a1(i, c) == 0.0) continue;
      for (std::size_t j = 0; j < x2.rows(); ++j) {
        if (a2(j, c) == 0.0) continue;
        for (std::size_t m = 0; m < d; ++m) {
          vlad_sim += (x1(i, m) - vocab.words(c, m)) *
                      (x2(j, m) - vocab.words(c, m));
        }
      }
    }
  }
  return {gap_sim, vlad_sim};
}

}  // namespace vladvsa
