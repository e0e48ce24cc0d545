#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vladvsa/matrix.hpp"
#include "vladvsa/rng.hpp"

namespace vladvsa {

/// K visual words of width d, the first k_shared rows shared across domains
/// and the last k_specific rows domain-specific.
struct Vocabulary {
  Matrix words;  // K x d
  std::size_t k_shared = 0;
  std::size_t k_specific = 0;

  std::size_t size() const { return words.rows(); }
  std::size_t dim() const { return words.cols(); }

  Matrix shared_words() const {
    Matrix m(k_shared, dim());
    for (std::size_t i = 0; i < k_shared; ++i)
      for (std::size_t j = 0; j < dim(); ++j) m(i, j) = words(i, j);
    return m;
  }
  Matrix specific_words() const {
    Matrix m(k_specific, dim());
    for (std::size_t i = 0; i < k_specific; ++i)
      for (std::size_t j = 0; j < dim(); ++j) m(i, j) = words(k_shared + i, j);
    return m;
  }

  void validate() const {
    if (k_shared + k_specific != size()) {
      throw std::invalid_argument("Vocabulary: K1 + K2 != K");
    }
    if (k_shared < 1) {
      throw std::invalid_argument("Vocabulary: needs at least one shared word");
    }
    if (!words.all_finite()) {
      throw NumericError("Vocabulary: non-finite word entry");
    }
  }
};

/// Index of the word with the highest dot-product score; lowest index wins
/// ties, matching hard assignment in the aggregation path.
inline std::size_t nearest_word(std::span<const double> feature,
                                const Matrix& words) {
  std::size_t best = 0;
  double best_score = dot(feature, words.row(0));
  for (std::size_t c = 1; c < words.rows(); ++c) {
    const double s = dot(feature, words.row(c));
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

struct KmeansResult {
  Matrix centroids;
  std::vector<double> inertia;  // after each assignment step
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Stops after max_iters or when
/// no centroid moves more than 1e-9. Clusters that lose all points keep
/// their previous centroid.
inline KmeansResult kmeans(const Matrix& pool, std::size_t k,
                           std::uint64_t seed, std::size_t max_iters = 50) {
  const std::size_t n = pool.rows();
  const std::size_t d = pool.cols();
  if (n < k) {
    throw std::invalid_argument("kmeans: pool of " + std::to_string(n) +
                                " rows is smaller than K=" + std::to_string(k));
  }
  {
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < n && distinct.size() < k; ++i) {
      distinct.insert(
          std::vector<double>(pool.row(i).begin(), pool.row(i).end()));
    }
    if (distinct.size() < k) {
      throw std::invalid_argument("kmeans: pool has fewer than K distinct rows");
    }
  }

  auto sqdist = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double diff = a[j] - b[j];
      s += diff * diff;
    }
    return s;
  };

  // k-means++ seeding.
  Rng rng(seed);
  Matrix centroids(k, d);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.next_below(n);
  for (std::size_t j = 0; j < d; ++j) centroids(0, j) = pool(first, j);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], sqdist(pool.row(i), centroids.row(c - 1)));
      total += min_d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.next_double() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_below(n);  // all points already covered
    }
    for (std::size_t j = 0; j < d; ++j) centroids(c, j) = pool(pick, j);
  }

  KmeansResult result;
  std::vector<std::size_t> owner(n, 0);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // Assignment step (squared euclidean) and inertia.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d2 = sqdist(pool.row(i), centroids.row(c));
        if (d2 < best) {
          best = d2;
          owner[i] = c;
        }
      }
      inertia += best;
    }
    result.inertia.push_back(inertia);
    result.iterations = iter + 1;

    // Update step.
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[owner[i]]++;
      for (std::size_t j = 0; j < d; ++j) sums(owner[i], j) += pool(i, j);
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double updated = sums(c, j) / static_cast<double>(counts[c]);
        max_shift = std::max(max_shift, std::abs(updated - centroids(c, j)));
        centroids(c, j) = updated;
      }
    }
    if (max_shift < 1e-9) break;
  }
  result.centroids = std::move(centroids);
  return result;
}

enum class VocabInit { kRandom, kKmeans };

/// Random mode draws rows i.i.d. N(0, 1/d); kmeans mode clusters the given
/// feature pool. The last k2 words form the domain-specific partition.
inline Vocabulary init_vocabulary(VocabInit mode, std::size_t k, std::size_t k2,
                                  std::size_t d, std::uint64_t seed,
                                  const Matrix* pool = nullptr,
                                  std::size_t iters = 50) {
  if (k2 >= k) {
    throw std::invalid_argument("init_vocabulary: K2=" + std::to_string(k2) +
                                " must be smaller than K=" + std::to_string(k));
  }
  Vocabulary vocab;
  vocab.k_shared = k - k2;
  vocab.k_specific = k2;
  if (mode == VocabInit::kRandom) {
    Rng rng(seed);
    vocab.words = Matrix(k, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < d; ++j)
        vocab.words(i, j) = scale * rng.next_gaussian();
  } else {
    if (pool == nullptr) {
      throw std::invalid_argument("init_vocabulary: kmeans mode needs a pool");
    }
    vocab.words = kmeans(*pool, k, seed, iters).centroids;
  }
  vocab.validate();
  return vocab;
}

struct OrthoResult {
  double loss = 0.0;
  Matrix grad;  // K x d, zero rows for the untouched case
};

/// Squared Frobenius norm of the shared-by-specific Gram block:
/// sum over (shared i, specific j) of (c_i . c_j)^2. Zero when either
/// partition is empty.
inline OrthoResult ortho_loss_and_grad(const Vocabulary& vocab) {
  OrthoResult out;
  out.grad = Matrix(vocab.size(), vocab.dim());
  if (vocab.k_specific == 0) return out;
  for (std::size_t i = 0; i < vocab.k_shared; ++i) {
    for (std::size_t j = vocab.k_shared; j < vocab.size(); ++j) {
      const double g = dot(vocab.words.row(i), vocab.words.row(j));
      out.loss += g * g;
      for (std::size_t m = 0; m < vocab.dim(); ++m) {
        out.grad(i, m) += 2.0 * g * vocab.words(j, m);
        out.grad(j, m) += 2.0 * g * vocab.words(i, m);
      }
    }
  }
  return out;
}

struct ClusterStats {
  std::vector<std::size_t> assigned_count;  // N_k
  std::vector<std::size_t> real_count;
  std::vector<std::size_t> fake_count;
  Matrix feature_center;        // K x d, mean of assigned features
  Matrix real_residual_center;  // K x d, mean residual of real members
  Matrix fake_residual_center;  // K x d, mean residual of fake members
};

struct CentroidAdaptResult {
  double loss = 0.0;
  Matrix grad;  // K x d
  ClusterStats stats;
};

/// Pulls each word toward the center of its hard-assigned features:
/// sum over non-empty clusters of ||L_k^c - c_k||^2. The assignment and the
/// centers are held fixed, so the only gradient is -2 (L_k^c - c_k) on the
/// words; empty clusters contribute nothing.
inline CentroidAdaptResult centroid_adapt_loss_and_grad(
    const LocalFeatureSet& features, std::span<const int> class_labels,
    const Vocabulary& vocab) {
  const std::size_t n = features.rows();
  const std::size_t k = vocab.size();
  const std::size_t d = vocab.dim();
  if (n == 0) {
    throw std::invalid_argument("centroid_adapt: empty feature batch");
  }
  if (!class_labels.empty() && class_labels.size() != n) {
    throw std::invalid_argument("centroid_adapt: label count mismatch");
  }

  CentroidAdaptResult out;
  out.grad = Matrix(k, d);
  auto& st = out.stats;
  st.assigned_count.assign(k, 0);
  st.real_count.assign(k, 0);
  st.fake_count.assign(k, 0);
  st.feature_center = Matrix(k, d);
  st.real_residual_center = Matrix(k, d);
  st.fake_residual_center = Matrix(k, d);

  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = nearest_word(features.row(i), vocab.words);
    owner[i] = c;
    st.assigned_count[c]++;
    for (std::size_t j = 0; j < d; ++j) st.feature_center(c, j) += features(i, j);
    if (!class_labels.empty()) {
      const bool fake = class_labels[i] != 0;
      Matrix& center = fake ? st.fake_residual_center : st.real_residual_center;
      (fake ? st.fake_count[c] : st.real_count[c])++;
      for (std::size_t j = 0; j < d; ++j)
        center(c, j) += features(i, j) - vocab.words(c, j);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (st.assigned_count[c] == 0) continue;
    const double inv = 1.0 / static_cast<double>(st.assigned_count[c]);
    for (std::size_t j = 0; j < d; ++j) st.feature_center(c, j) *= inv;
    if (st.real_count[c] > 0) {
      const double ir = 1.0 / static_cast<double>(st.real_count[c]);
      for (std::size_t j = 0; j < d; ++j) st.real_residual_center(c, j) *= ir;
    }
    if (st.fake_count[c] > 0) {
      const double jf = 1.0 / static_cast<double>(st.fake_count[c]);
      for (std::size_t j = 0; j < d; ++j) st.fake_residual_center(c, j) *= jf;
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = st.feature_center(c, j) - vocab.words(c, j);
      out.loss += diff * diff;
      out.grad(c, j) = -2.0 * diff;
    }
  }
  return out;
}

/// Hard-assignment residuals of a labeled batch, the unit the intra-cluster
/// loss operates on.
struct LabeledResiduals {
  Matrix residuals;                     // M x d
  std::vector<std::size_t> cluster;     // word index per row
  std::vector<int> class_label;         // 0 real / 1 fake per row
  std::size_t num_clusters = 0;
};

inline LabeledResiduals hard_residuals(const LocalFeatureSet& features,
                                       std::span<const int> class_labels,
                                       const Vocabulary& vocab) {
  if (class_labels.size() != features.rows()) {
    throw std::invalid_argument("hard_residuals: label count mismatch");
  }
  LabeledResiduals out;
  out.residuals = Matrix(features.rows(), features.cols());
  out.cluster.resize(features.rows());
  out.class_label.assign(class_labels.begin(), class_labels.end());
  out.num_clusters = vocab.size();
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const std::size_t c = nearest_word(features.row(i), vocab.words);
    out.cluster[i] = c;
    for (std::size_t j = 0; j < features.cols(); ++j)
      out.residuals(i, j) = features(i, j) - vocab.words(c, j);
  }
  return out;
}

struct IntraClusterResult {
  double loss = 0.0;
  Matrix grad_residuals;  // M x d, exact through centers and normalization
  std::size_t contributing_clusters = 0;
};

/// Per cluster holding both classes: 1 - ||r_real - r_fake||^2 over the
/// (optionally l2-normalized) class residual centers. Pushing the term down
/// forces the angle between the centers open. Clusters missing a class are
/// skipped. Gradients flow through the center means and the normalization
/// back to every residual.
inline IntraClusterResult intra_cluster_loss_and_grad(
    const LabeledResiduals& batch, bool normalize_centers = true) {
  const std::size_t d = batch.residuals.cols();
  const std::size_t m = batch.residuals.rows();
  IntraClusterResult out;
  out.grad_residuals = Matrix(m, d);

  for (std::size_t c = 0; c < batch.num_clusters; ++c) {
    std::vector<std::size_t> real_rows;
    std::vector<std::size_t> fake_rows;
    for (std::size_t i = 0; i < m; ++i) {
      if (batch.cluster[i] != c) continue;
      (batch.class_label[i] != 0 ? fake_rows : real_rows).push_back(i);
    }
    if (real_rows.empty() || fake_rows.empty()) continue;
    out.contributing_clusters++;

    auto center = [&](const std::vector<std::size_t>& rows) {
      std::vector<double> v(d, 0.0);
      for (std::size_t i : rows)
        for (std::size_t j = 0; j < d; ++j) v[j] += batch.residuals(i, j);
      for (double& x : v) x /= static_cast<double>(rows.size());
      return v;
    };
    const std::vector<double> cr = center(real_rows);
    const std::vector<double> cf = center(fake_rows);
    const double nr = norm2(cr);
    const double nf = norm2(cf);
    const bool scale_r = normalize_centers && nr > kNormEps;
    const bool scale_f = normalize_centers && nf > kNormEps;

    std::vector<double> ur(d), uf(d), diff(d);
    for (std::size_t j = 0; j < d; ++j) {
      ur[j] = scale_r ? cr[j] / nr : cr[j];
      uf[j] = scale_f ? cf[j] / nf : cf[j];
      diff[j] = ur[j] - uf[j];
    }
    out.loss += 1.0 - dot(diff, diff);

    // d(1 - ||u_r - u_f||^2): -2 diff into u_r, +2 diff into u_f, then back
    // through the normalization projections and the center means.
    std::vector<double> d_ur(d), d_uf(d);
    for (std::size_t j = 0; j < d; ++j) {
      d_ur[j] = -2.0 * diff[j];
      d_uf[j] = 2.0 * diff[j];
    }
    std::vector<double> d_cr(d), d_cf(d);
    if (scale_r) {
      const double ug = dot({ur.data(), d}, {d_ur.data(), d});
      for (std::size_t j = 0; j < d; ++j) d_cr[j] = (d_ur[j] - ur[j] * ug) / nr;
    } else {
      d_cr = d_ur;
    }
    if (scale_f) {
      const double ug = dot({uf.data(), d}, {d_uf.data(), d});
      for (std::size_t j = 0; j < d; ++j) d_cf[j] = (d_uf[j] - uf[j] * ug) / nf;
    } else {
      d_cf = d_uf;
    }
    for (std::size_t i : real_rows)
      for (std::size_t j = 0; j < d; ++j)
        out.grad_residuals(i, j) +=
            d_cr[j] / static_cast<double>(real_rows.size());
    for (std::size_t i : fake_rows)
      for (std::size_t j = 0; j < d; ++j)
        out.grad_residuals(i, j) +=
            d_cf[j] / static_cast<double>(fake_rows.size());
  }
  return out;
}

}  // namespace vladvsa
