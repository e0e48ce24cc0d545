#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vladvsa/aggregation.hpp"
#include "vladvsa/gradcheck.hpp"
#include "vladvsa/gradsuite.hpp"
#include "vladvsa/rng.hpp"

using namespace vladvsa;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                     double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.next_gaussian();
  return m;
}

Vocabulary make_vocab(Matrix words, std::size_t k2 = 0) {
  Vocabulary v;
  v.k_shared = words.rows() - k2;
  v.k_specific = k2;
  v.words = std::move(words);
  return v;
}

/// Independent re-derivation of the whole soft-VLAD pipeline: per-row
/// softmax scores, residual weighting, per-block normalize, flatten,
/// global normalize. Plain loops only.
std::vector<double> vlad_oracle(const Matrix& features, const Matrix& words,
                                double t) {
  const std::size_t n = features.rows();
  const std::size_t k = words.rows();
  const std::size_t d = words.cols();
  std::vector<std::vector<double>> blocks(k, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> weights(k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double score = 0.0;
      for (std::size_t j = 0; j < d; ++j) score += features(i, j) * words(c, j);
      weights[c] = std::exp(t * score);
      denom += weights[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        blocks[c][j] += weights[c] / denom * (features(i, j) - words(c, j));
      }
    }
  }
  std::vector<double> flat;
  for (std::size_t c = 0; c < k; ++c) {
    double bn = 0.0;
    for (double v : blocks[c]) bn += v * v;
    bn = std::sqrt(bn);
    for (double v : blocks[c]) flat.push_back(bn > 1e-12 ? v / bn : v);
  }
  double gn = 0.0;
  for (double v : flat) gn += v * v;
  gn = std::sqrt(gn);
  if (gn > 1e-12) {
    for (double& v : flat) v /= gn;
  }
  return flat;
}

}  // namespace

TEST_CASE("gap pooling hand cases", "[aggregation]") {
  Matrix constant(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    constant(i, 0) = 1.5;
    constant(i, 1) = -0.5;
  }
  const std::vector<double> pooled = gap_pool(constant);
  CHECK(pooled[0] == Catch::Approx(1.5).margin(1e-15));
  CHECK(pooled[1] == Catch::Approx(-0.5).margin(1e-15));

  const std::vector<double> two = gap_pool(Matrix(2, 2, {1, 2, 3, 4}));
  CHECK(two[0] == 2.0);
  CHECK(two[1] == 3.0);
}

TEST_CASE("gap pooling is permutation invariant", "[aggregation]") {
  Rng rng(3);
  const Matrix m = random_matrix(2, 4, rng);
  const Matrix swapped(2, 4, [&] {
    std::vector<double> d(m.row(1).begin(), m.row(1).end());
    d.insert(d.end(), m.row(0).begin(), m.row(0).end());
    return d;
  }());
  CHECK(gap_pool(m) == gap_pool(swapped));  // two-row swap is bit-exact
}

TEST_CASE("soft assignment hand cases", "[aggregation]") {
  SECTION("single word always wins") {
    Rng rng(4);
    const Matrix features = random_matrix(5, 3, rng);
    const Vocabulary vocab = make_vocab(random_matrix(1, 3, rng));
    const AssignmentMatrix a =
        compute_assignment(features, vocab, 3.0, AssignMode::kSoft);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a.scores(i, 0) == 1.0);
  }
  SECTION("equidistant feature splits evenly") {
    const Matrix features(1, 2, {1.0, 1.0});
    const Vocabulary vocab = make_vocab(Matrix(2, 2, {1, 0, 0, 1}));
    const AssignmentMatrix a =
        compute_assignment(features, vocab, 3.0, AssignMode::kSoft);
    CHECK(a.scores(0, 0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(a.scores(0, 1) == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("temperature-3 softmax against the closed form") {
    const Matrix features(1, 2, {1.0, 0.0});
    const Vocabulary vocab = make_vocab(Matrix(2, 2, {1, 0, 0, 1}));
    const AssignmentMatrix a =
        compute_assignment(features, vocab, 3.0, AssignMode::kSoft);
    const double e3 = std::exp(3.0);
    CHECK(a.scores(0, 0) == Catch::Approx(e3 / (e3 + 1.0)).epsilon(1e-14));
    CHECK(a.scores(0, 1) == Catch::Approx(1.0 / (e3 + 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("soft assignment rows sum to one for any temperature",
          "[aggregation]") {
  for (double t : {0.1, 1.0, 3.0, 50.0, 5000.0}) {
    Rng rng(static_cast<std::uint64_t>(t * 10));
    const Matrix features = random_matrix(6, 4, rng);
    const Vocabulary vocab = make_vocab(random_matrix(5, 4, rng));
    const AssignmentMatrix a =
        compute_assignment(features, vocab, t, AssignMode::kSoft);
    for (std::size_t i = 0; i < a.scores.rows(); ++i) {
      double row = 0.0;
      for (std::size_t c = 0; c < a.scores.cols(); ++c) {
        row += a.scores(i, c);
        CHECK(a.scores(i, c) >= 0.0);
        CHECK(a.scores(i, c) <= 1.0);
      }
      CHECK(std::abs(row - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("hard assignment of a feature equal to its word gives zero residual",
          "[aggregation]") {
  const Matrix features(1, 3, {0.2, -0.4, 0.9});
  Matrix words(2, 3, {0.2, -0.4, 0.9, -1.0, 0.0, 0.0});
  auto [desc, cache] =
      vlad_forward(features, make_vocab(std::move(words)), 3.0, AssignMode::kHard);
  for (std::size_t j = 0; j < 3; ++j) CHECK(desc.per_cluster(0, j) == 0.0);
}

TEST_CASE("soft VLAD matches the direct-loop oracle", "[aggregation]") {
  SECTION("hand-sized instance") {
    const Matrix features(2, 2, {0.5, -0.3, 1.2, 0.8});
    const Vocabulary vocab = make_vocab(Matrix(2, 2, {0.4, 0.1, -0.2, 0.9}));
    auto [desc, cache] = vlad_forward(features, vocab, 3.0);
    const std::vector<double> expected = vlad_oracle(features, vocab.words, 3.0);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(std::abs(desc.flat[i] - expected[i]) < 1e-12);
    }
  }
  SECTION("random instances") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(40, seed));
      const Matrix features = random_matrix(4, 3, rng);
      const Vocabulary vocab = make_vocab(random_matrix(3, 3, rng));
      auto [desc, cache] = vlad_forward(features, vocab, 3.0);
      const std::vector<double> expected = vlad_oracle(features, vocab.words, 3.0);
      for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(std::abs(desc.flat[i] - expected[i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("soft VLAD at extreme temperature approaches hard VLAD",
          "[aggregation]") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(50, seed));
    const Matrix features = random_matrix(5, 3, rng);
    const Vocabulary vocab = make_vocab(random_matrix(4, 3, rng));
    // require comfortably unique argmax per row
    const Matrix scores = matmul(features, transpose(vocab.words));
    bool unique = true;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      double best = -1e300, second = -1e300;
      for (std::size_t c = 0; c < scores.cols(); ++c) {
        if (scores(i, c) > best) {
          second = best;
          best = scores(i, c);
        } else if (scores(i, c) > second) {
          second = scores(i, c);
        }
      }
      if (best - second < 2e-3) unique = false;
    }
    if (!unique) continue;
    auto [soft, c1] = vlad_forward(features, vocab, 1e4, AssignMode::kSoft);
    auto [hard, c2] = vlad_forward(features, vocab, 1e4, AssignMode::kHard);
    for (std::size_t i = 0; i < soft.flat.size(); ++i) {
      CHECK(std::abs(soft.flat[i] - hard.flat[i]) < 1e-6);
    }
    checked++;
  }
  CHECK(checked >= 15);
}

TEST_CASE("VLAD output is invariant to permuting the feature rows",
          "[aggregation]") {
  Rng rng(60);
  const Matrix features = random_matrix(6, 3, rng);
  const Vocabulary vocab = make_vocab(random_matrix(3, 3, rng));
  Matrix reversed(6, 3);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) reversed(i, j) = features(5 - i, j);
  auto [a, c1] = vlad_forward(features, vocab, 3.0);
  auto [b, c2] = vlad_forward(reversed, vocab, 3.0);
  for (std::size_t i = 0; i < a.flat.size(); ++i) {
    CHECK(std::abs(a.flat[i] - b.flat[i]) < 1e-12);
  }
}

TEST_CASE("zero features and words stay finite through the eps guards",
          "[aggregation]") {
  const Matrix features(3, 2);
  const Vocabulary vocab = make_vocab(Matrix(2, 2));
  auto [desc, cache] = vlad_forward(features, vocab, 3.0);
  for (double v : desc.flat) CHECK(v == 0.0);
  std::vector<double> upstream(4, 1.0);
  const VladGrads grads = vlad_backward(cache, upstream);
  CHECK(grads.features.all_finite());
  CHECK(grads.words.all_finite());
}

TEST_CASE("vlad_backward on zero upstream returns zero gradients",
          "[aggregation]") {
  Rng rng(70);
  const Matrix features = random_matrix(4, 3, rng);
  const Vocabulary vocab = make_vocab(random_matrix(3, 3, rng));
  auto [desc, cache] = vlad_forward(features, vocab, 3.0);
  const VladGrads grads = vlad_backward(cache, std::vector<double>(9, 0.0));
  for (double v : grads.features.data()) CHECK(v == 0.0);
  for (double v : grads.words.data()) CHECK(v == 0.0);
}

TEST_CASE("vlad_backward is exactly linear in the upstream gradient",
          "[aggregation]") {
  Rng rng(71);
  const Matrix features = random_matrix(4, 3, rng);
  const Vocabulary vocab = make_vocab(random_matrix(3, 3, rng));
  auto [desc, cache] = vlad_forward(features, vocab, 3.0);
  std::vector<double> g(9);
  for (double& v : g) v = rng.next_gaussian();
  std::vector<double> g2 = g;
  for (double& v : g2) v *= 2.0;
  const VladGrads once = vlad_backward(cache, g);
  const VladGrads twice = vlad_backward(cache, g2);
  for (std::size_t i = 0; i < once.features.size(); ++i) {
    CHECK(twice.features.data()[i] == 2.0 * once.features.data()[i]);
  }
  for (std::size_t i = 0; i < once.words.size(); ++i) {
    CHECK(twice.words.data()[i] == 2.0 * once.words.data()[i]);
  }
}

TEST_CASE("vlad_backward rejects hard-assignment caches", "[aggregation]") {
  Rng rng(72);
  const Matrix features = random_matrix(3, 2, rng);
  const Vocabulary vocab = make_vocab(random_matrix(2, 2, rng));
  auto [desc, cache] = vlad_forward(features, vocab, 3.0, AssignMode::kHard);
  CHECK_THROWS_AS(vlad_backward(cache, std::vector<double>(4, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("vlad_backward matches finite differences on a probe",
          "[aggregation]") {
  // single explicit instance at the tighter tolerance
  Rng rng(73);
  const std::size_t n = 4, d = 3, k = 3;
  const Matrix features = random_matrix(n, d, rng);
  const Vocabulary vocab = make_vocab(random_matrix(k, d, rng));
  std::vector<double> probe(k * d);
  for (double& v : probe) v = rng.next_gaussian();
  auto [desc, cache] = vlad_forward(features, vocab, 3.0);
  const VladGrads analytic = vlad_backward(cache, probe);

  std::vector<double> x = features.data();
  x.insert(x.end(), vocab.words.data().begin(), vocab.words.data().end());
  auto f = [&](const std::vector<double>& params) {
    const Matrix lf(n, d,
                    std::vector<double>(params.begin(), params.begin() + n * d));
    Vocabulary vv = vocab;
    vv.words =
        Matrix(k, d, std::vector<double>(params.begin() + n * d, params.end()));
    auto [dd, cc] = vlad_forward(lf, vv, 3.0);
    return dot({dd.flat.data(), dd.flat.size()}, {probe.data(), probe.size()});
  };
  std::vector<double> analytic_flat = analytic.features.data();
  analytic_flat.insert(analytic_flat.end(), analytic.words.data().begin(),
                       analytic.words.data().end());
  const GradCheckReport report =
      compare_gradients(analytic_flat, finite_diff_grad(f, x));
  CHECK(report.max_rel_err < 1e-5);

  // and the 20-instance suite at the acceptance tolerance
  const SuiteCheck suite = check_vlad_backward(7);
  CHECK(suite.instances >= 20);
  CHECK(suite.report.max_rel_err < 1e-4);
}

TEST_CASE("matching kernel self-similarity of a single feature",
          "[aggregation]") {
  const Matrix f(1, 3, {1.0, 2.0, -2.0});
  Rng rng(80);
  const Vocabulary vocab = make_vocab(random_matrix(2, 3, rng));
  auto [gap_sim, vlad_sim] = matching_kernel_oracle(f, f, vocab);
  CHECK(gap_sim == Catch::Approx(9.0).margin(1e-12));  // ||f||^2 = 1+4+4
}

TEST_CASE("disjoint cluster assignments give zero VLAD similarity",
          "[aggregation]") {
  // two well-separated words; x1 near word 0, x2 near word 1
  const Vocabulary vocab = make_vocab(Matrix(2, 2, {10, 0, 0, 10}));
  const Matrix x1(2, 2, {9.0, 0.1, 11.0, -0.2});
  const Matrix x2(2, 2, {0.3, 10.5, -0.1, 9.5});
  auto [gap_sim, vlad_sim] = matching_kernel_oracle(x1, x2, vocab);
  CHECK(vlad_sim == 0.0);
}

TEST_CASE("selective-kernel identities against raw aggregates",
          "[aggregation]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(90, seed));
    const std::size_t d = 3;
    const Matrix x1 = random_matrix(4, d, rng);
    const Matrix x2 = random_matrix(5, d, rng);
    const Vocabulary vocab = make_vocab(random_matrix(3, d, rng));
    auto [gap_sim, vlad_sim] = matching_kernel_oracle(x1, x2, vocab);

    // all-to-all identity: <N1 gap(x1), N2 gap(x2)> = sum of local dots
    const std::vector<double> g1 = gap_pool(x1);
    const std::vector<double> g2 = gap_pool(x2);
    double lhs = 0.0;
    for (std::size_t j = 0; j < d; ++j) lhs += 4.0 * g1[j] * 5.0 * g2[j];
    CHECK(std::abs(lhs - gap_sim) < 1e-10);

    // intra-cluster identity: raw hard VLAD dot = residual-pair sum
    auto [d1, c1] = vlad_forward(x1, vocab, 1.0, AssignMode::kHard);
    auto [d2, c2] = vlad_forward(x2, vocab, 1.0, AssignMode::kHard);
    double vdot = 0.0;
    for (std::size_t i = 0; i < d1.per_cluster.size(); ++i) {
      vdot += d1.per_cluster.data()[i] * d2.per_cluster.data()[i];
    }
    CHECK(std::abs(vdot - vlad_sim) < 1e-12);
  }
}

TEST_CASE("descriptor slices split at the shared boundary", "[aggregation]") {
  Rng rng(95);
  const Matrix features = random_matrix(4, 3, rng);
  const Vocabulary vocab = make_vocab(random_matrix(4, 3, rng), 1);
  auto [desc, cache] = vlad_forward(features, vocab, 3.0);
  CHECK(desc.shared_slice().size() == 9);
  CHECK(desc.specific_slice().size() == 3);
  CHECK(desc.shared_slice().data() + 9 == desc.specific_slice().data());
  CHECK(std::abs(norm2({desc.flat.data(), desc.flat.size()}) - 1.0) < 1e-9);
}
