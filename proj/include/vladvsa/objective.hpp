#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vladvsa/matrix.hpp"
#include "vladvsa/mlp.hpp"

namespace vladvsa {

/// Scalar hyperparameters of the weighted training objective.
struct LossWeights {
  double lambda1 = 0.1;  // triplet
  double lambda2 = 0.1;  // adversarial
  double lambda3 = 0.1;  // orthogonal
  double lambda4 = 0.1;  // centroid adaptation
  double lambda5 = 0.1;  // intra-cluster
  double temperature = 3.0;
  double margin = 0.1;
  double grl_coeff = 1.0;
};

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad_logits;  // (softmax - onehot) / B
};

/// Mean negative log softmax probability of the labelled class.
inline CrossEntropyResult cross_entropy_and_grad(const Matrix& logits,
                                                 std::span<const int> labels) {
  const std::size_t b = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != b) {
    throw std::invalid_argument("cross_entropy: label count mismatch");
  }
  CrossEntropyResult out;
  out.grad_logits = Matrix(b, c);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw std::invalid_argument("cross_entropy: label " +
                                  std::to_string(labels[i]) +
                                  " out of range [0, " + std::to_string(c) + ")");
    }
    double max_logit = logits(i, 0);
    for (std::size_t j = 1; j < c; ++j) max_logit = std::max(max_logit, logits(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(logits(i, j) - max_logit);
    const double lse = max_logit + std::log(denom);
    out.loss += (lse - logits(i, static_cast<std::size_t>(labels[i]))) /
                static_cast<double>(b);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(logits(i, j) - max_logit) / denom;
      out.grad_logits(i, j) =
          (p - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0)) /
          static_cast<double>(b);
    }
  }
  return out;
}

struct TripletResult {
  double loss = 0.0;
  Matrix grad_embeddings;
  std::size_t num_valid = 0;
  std::size_t num_active = 0;
  bool no_valid_triplet = false;
};

/// Batch-all triplet loss over squared euclidean distances: every ordered
/// (anchor, positive, negative) with y_a = y_p, a != p, y_a != y_n
/// contributes max(0, d_ap - d_an + m), averaged over the valid count.
/// Triplets exactly at zero are inactive (subgradient 0).
inline TripletResult triplet_loss_and_grad(const Matrix& embeddings,
                                           std::span<const int> labels,
                                           double margin) {
  const std::size_t b = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (labels.size() != b) {
    throw std::invalid_argument("triplet_loss: label count mismatch");
  }
  TripletResult out;
  out.grad_embeddings = Matrix(b, d);

  Matrix dist2(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < d; ++m) {
        const double diff = embeddings(i, m) - embeddings(j, m);
        s += diff * diff;
      }
      dist2(i, j) = s;
      dist2(j, i) = s;
    }
  }

  // coeff(i, j) accumulates the weight on d2(i, j); the gradient of d2(i, j)
  // is 2 (e_i - e_j) into i and the negation into j.
  Matrix coeff(b, b);
  double total = 0.0;
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t p = 0; p < b; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t n = 0; n < b; ++n) {
        if (labels[n] == labels[a]) continue;
        out.num_valid++;
        const double v = dist2(a, p) - dist2(a, n) + margin;
        if (v > 0.0) {
          out.num_active++;
          total += v;
          coeff(a, p) += 1.0;
          coeff(a, n) -= 1.0;
        }
      }
    }
  }
  if (out.num_valid == 0) {
    out.no_valid_triplet = true;
    return out;
  }
  const double inv = 1.0 / static_cast<double>(out.num_valid);
  out.loss = total * inv;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double w = coeff(i, j);
      if (w == 0.0) continue;
      for (std::size_t m = 0; m < d; ++m) {
        const double g = 2.0 * w * (embeddings(i, m) - embeddings(j, m)) * inv;
        out.grad_embeddings(i, m) += g;
        out.grad_embeddings(j, m) -= g;
      }
    }
  }
  return out;
}

struct AdversarialResult {
  double domain_loss = 0.0;
  Matrix grad_into_generator;  // -grl_coeff times the discriminator input grad
  MlpGrads discriminator_grads;  // un-reversed, for the discriminator's descent
};

/// Domain cross-entropy through a gradient-reversal layer. Forward is the
/// identity on the shared embeddings; the generator-side gradient comes back
/// sign-flipped and scaled by grl_coeff, while the discriminator parameters
/// receive the plain gradient. Domain labels are 0-based here.
inline AdversarialResult adversarial_grl(const Matrix& shared_embeddings,
                                         std::span<const int> domain_labels,
                                         double grl_coeff,
                                         const Mlp& discriminator) {
  std::set<int> present(domain_labels.begin(), domain_labels.end());
  if (present.size() < 2) {
    throw std::invalid_argument(
        "adversarial_grl: batch must contain at least two domains");
  }
  auto [logits, cache] = mlp_forward(shared_embeddings, discriminator);
  const CrossEntropyResult ce = cross_entropy_and_grad(logits, domain_labels);

  AdversarialResult out;
  out.domain_loss = ce.loss;
  Matrix d_input =
      mlp_backward(cache, discriminator, ce.grad_logits, out.discriminator_grads);
  out.grad_into_generator = Matrix(d_input.rows(), d_input.cols());
  add_scaled(out.grad_into_generator, -grl_coeff, d_input);
  return out;
}

struct LossValues {
  double cls = 0.0;
  double triplet = 0.0;
  double adv = 0.0;
  double ortho = 0.0;
  double c_adapt = 0.0;
  double intra = 0.0;
};

/// cls + l1 triplet + l2 adv + l3 ortho + l4 c_adapt + l5 intra.
/// A non-finite part is rejected with the term named.
inline double total_objective_value(const LossValues& v, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"cls", v.cls},         {"triplet", v.triplet}, {"adv", v.adv},
      {"ortho", v.ortho},     {"c_adapt", v.c_adapt}, {"intra", v.intra}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      throw NumericError(std::string("total_objective: non-finite ") + name +
                         " loss");
    }
  }
  return v.cls + w.lambda1 * v.triplet + w.lambda2 * v.adv +
         w.lambda3 * v.ortho + w.lambda4 * v.c_adapt + w.lambda5 * v.intra;
}

/// Weighted total plus the matching combination of per-part gradients. The
/// gradient container only needs add_scaled(part, weight); the adversarial
/// part must arrive already sign-reversed on its generator-side entries.
template <typename Grads>
std::pair<double, Grads> total_objective(
    const LossValues& v, const LossWeights& w, Grads zero, const Grads& cls,
    const Grads& triplet, const Grads& adv, const Grads& ortho,
    const Grads& c_adapt, const Grads& intra) {
  const double total = total_objective_value(v, w);
  zero.add_scaled(cls, 1.0);
  zero.add_scaled(triplet, w.lambda1);
  zero.add_scaled(adv, w.lambda2);
  zero.add_scaled(ortho, w.lambda3);
  zero.add_scaled(c_adapt, w.lambda4);
  zero.add_scaled(intra, w.lambda5);
  return {total, std::move(zero)};
}

}  // namespace vladvsa
