#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vladvsa/gradcheck.hpp"
#include "vladvsa/matrix.hpp"
#include "vladvsa/rng.hpp"

using namespace vladvsa;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.next_gaussian();
  return m;
}

// Independent reference: plain triple loop, no blocking or skipping.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("matmul identity and hand cases", "[numkernel]") {
  Rng rng(11);
  const Matrix m = random_matrix(2, 3, rng);
  CHECK(max_abs_diff(matmul(Matrix::identity(2), m), m) == 0.0);

  const Matrix a(2, 2, {1, 2, 3, 4});
  const Matrix v(2, 1, {1, 1});
  const Matrix prod = matmul(a, v);
  CHECK(prod(0, 0) == 3.0);
  CHECK(prod(1, 0) == 7.0);
}

TEST_CASE("matmul matches the triple-loop oracle", "[numkernel]") {
  Rng rng(12);
  const Matrix a = random_matrix(5, 4, rng);
  const Matrix b = random_matrix(4, 3, rng);
  CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) < 1e-12);
}

TEST_CASE("matmul associativity on random conforming triples", "[numkernel]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Matrix a = random_matrix(3, 5, rng);
    const Matrix b = random_matrix(5, 4, rng);
    const Matrix c = random_matrix(4, 2, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double denom = std::max(1.0, std::abs(left.data()[i]));
      CHECK(std::abs(left.data()[i] - right.data()[i]) / denom < 1e-9);
    }
  }
}

TEST_CASE("matmul rejects mismatched shapes naming both", "[numkernel]") {
  const Matrix a(2, 3);
  const Matrix b(4, 2);
  CHECK_THROWS_WITH(matmul(a, b),
                    Catch::Matchers::ContainsSubstring("2x3") &&
                        Catch::Matchers::ContainsSubstring("4x2"));
}

TEST_CASE("matmul rejects overflow to non-finite", "[numkernel]") {
  Matrix a(1, 1, {1e308});
  Matrix b(1, 1, {1e308});
  CHECK_THROWS_AS(matmul(a, b), NumericError);
}

TEST_CASE("l2_normalize hand cases and zero safety", "[numkernel]") {
  const std::vector<double> v = l2_normalize({3.0, 4.0});
  CHECK(v[0] == Catch::Approx(0.6).margin(1e-15));
  CHECK(v[1] == Catch::Approx(0.8).margin(1e-15));

  const std::vector<double> z = l2_normalize({0.0, 0.0});
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("l2_normalize yields unit norm and is idempotent", "[numkernel]") {
  Rng rng(21);
  std::vector<double> v(16);
  for (double& x : v) x = rng.next_gaussian();
  const std::vector<double> n = l2_normalize(v);
  CHECK(std::abs(norm2(n) - 1.0) < 1e-12);
  const std::vector<double> nn = l2_normalize(n);
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(std::abs(nn[i] - n[i]) < 1e-12);
}

TEST_CASE("finite differences of a quadratic are exact", "[numkernel]") {
  auto f = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> g = finite_diff_grad(f, {1.0, 2.0});
  CHECK(g[0] == Catch::Approx(2.0).margin(1e-6));
  CHECK(g[1] == Catch::Approx(4.0).margin(1e-6));
}

TEST_CASE("finite differences of a constant vanish", "[numkernel]") {
  auto f = [](const std::vector<double>&) { return 42.0; };
  for (double g : finite_diff_grad(f, {0.3, -1.2, 5.0})) CHECK(g == 0.0);
}

TEST_CASE("finite differences match the analytic softmax-CE gradient",
          "[numkernel]") {
  Rng rng(31);
  std::vector<double> logits(5);
  for (double& v : logits) v = rng.next_gaussian();
  const int label = 2;

  auto f = [&](const std::vector<double>& x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : x) denom += std::exp(v - mx);
    return mx + std::log(denom) - x[label];
  };
  // analytic: softmax - onehot
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - mx);
  std::vector<double> analytic(5);
  for (std::size_t i = 0; i < 5; ++i) {
    analytic[i] = std::exp(logits[i] - mx) / denom -
                  (static_cast<int>(i) == label ? 1.0 : 0.0);
  }
  const GradCheckReport report =
      compare_gradients(analytic, finite_diff_grad(f, logits));
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("finite-difference error of a cubic shrinks as h^2", "[numkernel]") {
  auto f = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v * v;
    return s;
  };
  const std::vector<double> x = {0.7, -1.3, 2.1};
  auto worst = [&](double h) {
    const std::vector<double> g = finite_diff_grad(f, x, h);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      m = std::max(m, std::abs(g[i] - 3.0 * x[i] * x[i]));
    return m;
  };
  // central difference error for x^3 is exactly h^2 per coordinate
  CHECK(worst(1e-3) < 1.1e-6);
  CHECK(worst(5e-4) < 2.8e-7);
}

TEST_CASE("finite differences reject non-finite evaluations", "[numkernel]") {
  auto f = [](const std::vector<double>& x) { return std::log(x[0]); };
  CHECK_THROWS_WITH(finite_diff_grad(f, {1e-7}, 1e-5),
                    Catch::Matchers::ContainsSubstring("coordinate 0"));
}

TEST_CASE("seeded generator reproduces its stream exactly", "[numkernel]") {
  Rng a(12345);
  Rng b(12345);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng g1(7);
  Rng g2(7);
  for (int i = 0; i < 50; ++i) {
    CHECK(g1.next_gaussian() == g2.next_gaussian());
  }
}

TEST_CASE("split streams are independent of the parent draw order",
          "[numkernel]") {
  Rng parent(9);
  const Rng child = parent.split(3);
  Rng child_copy = parent.split(3);
  Rng c = child;
  CHECK(c.next_u64() == child_copy.next_u64());
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("sample_without_replacement draws distinct indices", "[numkernel]") {
  Rng rng(5);
  const std::vector<std::size_t> picks = rng.sample_without_replacement(20, 20);
  std::vector<bool> seen(20, false);
  for (std::size_t i : picks) {
    CHECK(!seen[i]);
    seen[i] = true;
  }
}
