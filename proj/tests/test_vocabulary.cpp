#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "vladvsa/gradcheck.hpp"
#include "vladvsa/gradsuite.hpp"
#include "vladvsa/rng.hpp"
#include "vladvsa/vocabulary.hpp"

using namespace vladvsa;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                     double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.next_gaussian();
  return m;
}

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < m.rows(); ++i)
    rows.emplace_back(m.row(i).begin(), m.row(i).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST_CASE("kmeans with K equal to the number of distinct points", "[vocabulary]") {
  const Matrix pool(4, 2, {0, 0, 1, 5, -3, 2, 7, 7});
  const KmeansResult r = kmeans(pool, 4, 123);
  CHECK(sorted_rows(r.centroids) == sorted_rows(pool));
  CHECK(r.inertia.back() == 0.0);
}

TEST_CASE("kmeans with a single cluster returns the pool mean", "[vocabulary]") {
  Rng rng(7);
  const Matrix pool = random_matrix(9, 3, rng);
  const KmeansResult r = kmeans(pool, 1, 5);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 9; ++i) mean += pool(i, j);
    mean /= 9.0;
    CHECK(r.centroids(0, j) == Catch::Approx(mean).margin(1e-12));
  }
}

TEST_CASE("kmeans on two well-separated pairs finds the optimal partition",
          "[vocabulary]") {
  const Matrix pool(4, 2, {0, 0, 0, 1, 10, 0, 10, 1});

  // brute-force oracle: try every assignment of 4 points to 2 groups
  double best_sse = 1e300;
  std::vector<std::vector<double>> best_centroids;
  for (int mask = 1; mask < 15; ++mask) {  // skip the two empty-group cases
    std::vector<std::vector<double>> centers(2, std::vector<double>(2, 0.0));
    std::vector<int> count(2, 0);
    for (int i = 0; i < 4; ++i) {
      const int g = (mask >> i) & 1;
      count[g]++;
      for (int j = 0; j < 2; ++j) centers[g][j] += pool(i, j);
    }
    if (count[0] == 0 || count[1] == 0) continue;
    for (int g = 0; g < 2; ++g)
      for (int j = 0; j < 2; ++j) centers[g][j] /= count[g];
    double sse = 0.0;
    for (int i = 0; i < 4; ++i) {
      const int g = (mask >> i) & 1;
      for (int j = 0; j < 2; ++j) {
        const double diff = pool(i, j) - centers[g][j];
        sse += diff * diff;
      }
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_centroids = centers;
      std::sort(best_centroids.begin(), best_centroids.end());
    }
  }

  const KmeansResult r = kmeans(pool, 2, 11);
  const auto got = sorted_rows(r.centroids);
  for (int g = 0; g < 2; ++g)
    for (int j = 0; j < 2; ++j)
      CHECK(got[g][j] == Catch::Approx(best_centroids[g][j]).margin(1e-12));
  CHECK(r.inertia.back() == Catch::Approx(best_sse).margin(1e-12));
}

TEST_CASE("kmeans inertia never increases across iterations", "[vocabulary]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(100, seed));
    const Matrix pool = random_matrix(40, 3, rng);
    const KmeansResult r = kmeans(pool, 5, seed);
    for (std::size_t i = 1; i < r.inertia.size(); ++i) {
      CHECK(r.inertia[i] <= r.inertia[i - 1]);
    }
  }
}

TEST_CASE("kmeans rejects undersized or degenerate pools", "[vocabulary]") {
  Rng rng(8);
  const Matrix small = random_matrix(3, 2, rng);
  CHECK_THROWS_AS(kmeans(small, 4, 1), std::invalid_argument);

  Matrix dup(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    dup(i, 0) = 1.0;
    dup(i, 1) = 2.0;
  }
  CHECK_THROWS_WITH(kmeans(dup, 2, 1),
                    Catch::Matchers::ContainsSubstring("distinct"));
}

TEST_CASE("vocabulary initialization modes and validation", "[vocabulary]") {
  const Vocabulary v = init_vocabulary(VocabInit::kRandom, 8, 1, 4, 42);
  CHECK(v.size() == 8);
  CHECK(v.k_shared == 7);
  CHECK(v.k_specific == 1);
  CHECK(v.words.all_finite());

  const Vocabulary v2 = init_vocabulary(VocabInit::kRandom, 8, 1, 4, 42);
  CHECK(v.words == v2.words);

  CHECK_THROWS_AS(init_vocabulary(VocabInit::kRandom, 4, 4, 4, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_vocabulary(VocabInit::kKmeans, 4, 1, 4, 1, nullptr),
                  std::invalid_argument);

  Rng rng(9);
  const Matrix pool = random_matrix(20, 4, rng);
  const Vocabulary vk = init_vocabulary(VocabInit::kKmeans, 3, 1, 4, 1, &pool);
  CHECK(vk.size() == 3);
  CHECK(vk.words.all_finite());
}

TEST_CASE("orthogonal loss on orthogonal partitions is zero", "[vocabulary]") {
  Vocabulary v;
  v.words = Matrix(3, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0});
  v.k_shared = 2;
  v.k_specific = 1;
  const OrthoResult r = ortho_loss_and_grad(v);
  CHECK(r.loss == 0.0);
  for (double g : r.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("orthogonal loss of a unit self-overlap is one", "[vocabulary]") {
  Vocabulary v;
  v.words = Matrix(2, 3, {1, 0, 0, 1, 0, 0});
  v.k_shared = 1;
  v.k_specific = 1;
  CHECK(ortho_loss_and_grad(v).loss == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("orthogonal loss with no specific words is silent", "[vocabulary]") {
  Rng rng(10);
  Vocabulary v;
  v.words = random_matrix(4, 3, rng);
  v.k_shared = 4;
  v.k_specific = 0;
  const OrthoResult r = ortho_loss_and_grad(v);
  CHECK(r.loss == 0.0);
  for (double g : r.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("orthogonal loss matches the double-loop oracle and finite differences",
          "[vocabulary]") {
  Rng rng(11);
  Vocabulary v;
  v.words = random_matrix(5, 2, rng);
  v.k_shared = 3;
  v.k_specific = 2;
  const OrthoResult r = ortho_loss_and_grad(v);

  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 3; j < 5; ++j) {
      double g = 0.0;
      for (std::size_t m = 0; m < 2; ++m) g += v.words(i, m) * v.words(j, m);
      oracle += g * g;
    }
  }
  CHECK(r.loss == Catch::Approx(oracle).epsilon(1e-14));

  auto f = [&](const std::vector<double>& params) {
    Vocabulary vv = v;
    vv.words = Matrix(5, 2, params);
    return ortho_loss_and_grad(vv).loss;
  };
  const GradCheckReport report =
      compare_gradients(r.grad.data(), finite_diff_grad(f, v.words.data()));
  CHECK(report.max_rel_err < 1e-6);

  const SuiteCheck suite = check_ortho(7);
  CHECK(suite.report.max_rel_err < 1e-4);
}

TEST_CASE("orthogonal loss vanishes only when every cross pair is orthogonal",
          "[vocabulary]") {
  Rng rng(12);
  Vocabulary v;
  v.words = random_matrix(4, 3, rng);
  v.k_shared = 2;
  v.k_specific = 2;
  const double loss = ortho_loss_and_grad(v).loss;
  double max_dot = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 2; j < 4; ++j)
      max_dot = std::max(max_dot, std::abs(dot(v.words.row(i), v.words.row(j))));
  if (loss < 1e-12) {
    CHECK(max_dot < 1e-6);
  } else {
    CHECK(max_dot > 0.0);
  }
}

TEST_CASE("centroid adaptation is zero at the assignment fixed point",
          "[vocabulary]") {
  // features exactly on their nearest words
  Vocabulary v;
  v.words = Matrix(2, 2, {2, 0, 0, 2});
  v.k_shared = 2;
  v.k_specific = 0;
  const Matrix features(4, 2, {2, 0, 2, 0, 0, 2, 0, 2});
  const std::vector<int> labels = {0, 1, 0, 1};
  const CentroidAdaptResult r = centroid_adapt_loss_and_grad(features, labels, v);
  CHECK(r.loss == 0.0);
  for (double g : r.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("empty clusters contribute nothing to centroid adaptation",
          "[vocabulary]") {
  Vocabulary v;
  v.words = Matrix(2, 2, {1, 0, -100, -100});  // second word never wins
  v.k_shared = 2;
  v.k_specific = 0;
  const Matrix features(3, 2, {1, 0.2, 0.8, -0.1, 1.2, 0.0});
  const std::vector<int> labels = {0, 0, 1};
  const CentroidAdaptResult r = centroid_adapt_loss_and_grad(features, labels, v);
  CHECK(r.stats.assigned_count[1] == 0);
  CHECK(r.grad(1, 0) == 0.0);
  CHECK(r.grad(1, 1) == 0.0);
}

TEST_CASE("centroid adaptation matches the assign-then-average oracle",
          "[vocabulary]") {
  Rng rng(13);
  const std::size_t n = 12, d = 3, k = 4;
  const Matrix features = random_matrix(n, d, rng);
  Vocabulary v;
  v.words = random_matrix(k, d, rng, 0.7);
  v.k_shared = 3;
  v.k_specific = 1;
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.next_below(2));

  const CentroidAdaptResult r = centroid_adapt_loss_and_grad(features, labels, v);

  // independent assign (argmax dot), average, and sum of squared distances
  std::vector<std::vector<double>> centers(k, std::vector<double>(d, 0.0));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += features(i, j) * v.words(c, j);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    counts[best]++;
    for (std::size_t j = 0; j < d; ++j) centers[best][j] += features(i, j);
  }
  double oracle = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = centers[c][j] / counts[c] - v.words(c, j);
      oracle += diff * diff;
    }
  }
  CHECK(std::abs(r.loss - oracle) < 1e-12);

  // finite differences on the frozen-assignment distance term
  auto f = [&](const std::vector<double>& params) {
    double loss = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = centers[c][j] / counts[c] - params[c * d + j];
        loss += diff * diff;
      }
    }
    return loss;
  };
  const GradCheckReport report =
      compare_gradients(r.grad.data(), finite_diff_grad(f, v.words.data()));
  CHECK(report.max_rel_err < 1e-6);

  const SuiteCheck suite = check_c_adapt(7);
  CHECK(suite.report.max_rel_err < 1e-4);
}

TEST_CASE("cluster statistics counts are conserved", "[vocabulary]") {
  Rng rng(14);
  const std::size_t n = 30;
  const Matrix features = random_matrix(n, 3, rng);
  Vocabulary v;
  v.words = random_matrix(5, 3, rng, 0.7);
  v.k_shared = 4;
  v.k_specific = 1;
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.next_below(2));
  const ClusterStats st =
      centroid_adapt_loss_and_grad(features, labels, v).stats;
  std::size_t total = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(st.assigned_count[c] == st.real_count[c] + st.fake_count[c]);
    total += st.assigned_count[c];
  }
  CHECK(total == n);
}

namespace {

LabeledResiduals residuals_fixture(std::size_t m, std::size_t d, std::size_t k,
                                   Rng& rng) {
  LabeledResiduals batch;
  batch.residuals = random_matrix(m, d, rng);
  batch.num_clusters = k;
  batch.cluster.resize(m);
  batch.class_label.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    batch.cluster[i] = rng.next_below(k);
    batch.class_label[i] = static_cast<int>(rng.next_below(2));
  }
  return batch;
}

}  // namespace

TEST_CASE("intra loss of coincident class centers is one per cluster",
          "[vocabulary]") {
  LabeledResiduals batch;
  batch.residuals = Matrix(2, 2, {0.6, 0.8, 0.6, 0.8});
  batch.cluster = {0, 0};
  batch.class_label = {0, 1};
  batch.num_clusters = 1;
  const IntraClusterResult r = intra_cluster_loss_and_grad(batch);
  CHECK(r.loss == Catch::Approx(1.0).margin(1e-12));
  CHECK(r.contributing_clusters == 1);
}

TEST_CASE("intra loss of antipodal unit centers is minus three", "[vocabulary]") {
  LabeledResiduals batch;
  batch.residuals = Matrix(2, 2, {0.0, 2.5, 0.0, -0.4});
  batch.cluster = {0, 0};
  batch.class_label = {0, 1};
  batch.num_clusters = 1;
  const IntraClusterResult r = intra_cluster_loss_and_grad(batch);
  CHECK(r.loss == Catch::Approx(-3.0).margin(1e-12));
}

TEST_CASE("clusters missing a class are skipped by the intra loss",
          "[vocabulary]") {
  Rng rng(15);
  LabeledResiduals batch;
  batch.residuals = random_matrix(4, 2, rng);
  batch.cluster = {0, 0, 1, 1};
  batch.class_label = {0, 0, 0, 1};  // cluster 0 all-real
  batch.num_clusters = 2;
  const IntraClusterResult r = intra_cluster_loss_and_grad(batch);
  CHECK(r.contributing_clusters == 1);
  CHECK(r.grad_residuals(0, 0) == 0.0);
  CHECK(r.grad_residuals(0, 1) == 0.0);
  CHECK(r.grad_residuals(1, 0) == 0.0);
  CHECK(r.grad_residuals(1, 1) == 0.0);
}

TEST_CASE("intra loss matches the direct oracle and finite differences",
          "[vocabulary]") {
  Rng rng(16);
  const std::size_t m = 14, d = 3, k = 3;
  LabeledResiduals batch = residuals_fixture(m, d, k, rng);
  const IntraClusterResult r = intra_cluster_loss_and_grad(batch);

  // mean residual per (cluster, class), normalize, subtract
  double oracle = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> real(d, 0.0), fake(d, 0.0);
    int nr = 0, nf = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (batch.cluster[i] != c) continue;
      if (batch.class_label[i] == 0) {
        nr++;
        for (std::size_t j = 0; j < d; ++j) real[j] += batch.residuals(i, j);
      } else {
        nf++;
        for (std::size_t j = 0; j < d; ++j) fake[j] += batch.residuals(i, j);
      }
    }
    if (nr == 0 || nf == 0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      real[j] /= nr;
      fake[j] /= nf;
    }
    const std::vector<double> ur = l2_normalize(real);
    const std::vector<double> uf = l2_normalize(fake);
    double dist2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = ur[j] - uf[j];
      dist2 += diff * diff;
    }
    oracle += 1.0 - dist2;
  }
  CHECK(std::abs(r.loss - oracle) < 1e-12);

  auto f = [&](const std::vector<double>& params) {
    LabeledResiduals bb = batch;
    bb.residuals = Matrix(m, d, params);
    return intra_cluster_loss_and_grad(bb).loss;
  };
  const GradCheckReport report = compare_gradients(
      r.grad_residuals.data(), finite_diff_grad(f, batch.residuals.data()));
  CHECK(report.max_rel_err < 1e-5);

  const SuiteCheck suite = check_intra(7);
  CHECK(suite.report.max_rel_err < 1e-4);
}

TEST_CASE("intra terms stay inside [-3, 1] with normalized centers",
          "[vocabulary]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(200, seed));
    LabeledResiduals batch = residuals_fixture(10, 3, 1, rng);
    const IntraClusterResult r = intra_cluster_loss_and_grad(batch);
    if (r.contributing_clusters == 1) {
      CHECK(r.loss >= -3.0 - 1e-12);
      CHECK(r.loss <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("intra center normalization can be switched off", "[vocabulary]") {
  LabeledResiduals batch;
  batch.residuals = Matrix(2, 2, {0.0, 3.0, 0.0, -1.0});
  batch.cluster = {0, 0};
  batch.class_label = {0, 1};
  batch.num_clusters = 1;
  const IntraClusterResult r = intra_cluster_loss_and_grad(batch, false);
  CHECK(r.loss == Catch::Approx(1.0 - 16.0).margin(1e-12));
}
