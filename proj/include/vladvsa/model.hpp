#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vladvsa/aggregation.hpp"
#include "vladvsa/matrix.hpp"
#include "vladvsa/mlp.hpp"
#include "vladvsa/objective.hpp"
#include "vladvsa/vocabulary.hpp"

namespace vladvsa {

enum class Aggregator { kVlad, kGap };

/// Full trainable state: per-descriptor encoder, vocabulary, classifier
/// head on the whole descriptor, domain discriminator on the shared slice.
/// In GAP mode the vocabulary is empty and both heads read the pooled
/// d-vector.
struct ModelParams {
  Mlp encoder;         // d_raw -> h -> d, applied row-wise
  Vocabulary vocab;    // K x d (0 x d in GAP mode)
  Linear classifier;   // K*d -> 2 (d -> 2 in GAP mode)
  Mlp discriminator;   // K1*d -> h_D -> S (d -> h_D -> S in GAP mode)
  Aggregator aggregator = Aggregator::kVlad;
  double temperature = 3.0;

  std::size_t descriptor_dim() const {
    return aggregator == Aggregator::kVlad
               ? vocab.size() * vocab.dim()
               : encoder.l2.out_dim();
  }
  std::size_t shared_dim() const {
    return aggregator == Aggregator::kVlad
               ? vocab.k_shared * vocab.dim()
               : encoder.l2.out_dim();
  }
  std::size_t num_domains() const { return discriminator.l2.out_dim(); }
};

struct ModelDims {
  std::size_t d_raw = 8;
  std::size_t hidden = 16;
  std::size_t d = 8;
  std::size_t k = 8;
  std::size_t k2 = 1;
  std::size_t disc_hidden = 16;
  std::size_t num_domains = 3;
};

inline ModelParams init_model(const ModelDims& dims, Aggregator agg, double t,
                              std::uint64_t seed) {
  Rng enc_rng = Rng(seed).split(1);
  Rng cls_rng = Rng(seed).split(2);
  Rng dsc_rng = Rng(seed).split(3);
  ModelParams p;
  p.aggregator = agg;
  p.temperature = t;
  p.encoder = make_mlp(dims.d, dims.hidden, dims.d_raw, enc_rng);
  if (agg == Aggregator::kVlad) {
    p.vocab = init_vocabulary(VocabInit::kRandom, dims.k, dims.k2, dims.d,
                              derive_seed(seed, 4));
  } else {
    p.vocab.words = Matrix(0, dims.d);
    p.vocab.k_shared = 0;
    p.vocab.k_specific = 0;
  }
  p.classifier = make_linear(2, p.descriptor_dim(), cls_rng);
  p.discriminator = make_mlp(dims.num_domains, dims.disc_hidden, p.shared_dim(),
                             dsc_rng);
  return p;
}

/// Gradient holder shaped like ModelParams.
struct ModelGrads {
  MlpGrads encoder;
  Matrix vocab;  // K x d
  LinearGrads classifier;
  MlpGrads discriminator;

  static ModelGrads zeros_like(const ModelParams& p) {
    ModelGrads g;
    g.encoder.l1.w = Matrix(p.encoder.l1.out_dim(), p.encoder.l1.in_dim());
    g.encoder.l1.b.assign(p.encoder.l1.out_dim(), 0.0);
    g.encoder.l2.w = Matrix(p.encoder.l2.out_dim(), p.encoder.l2.in_dim());
    g.encoder.l2.b.assign(p.encoder.l2.out_dim(), 0.0);
    g.vocab = Matrix(p.vocab.size(), p.vocab.dim());
    g.classifier.w = Matrix(p.classifier.out_dim(), p.classifier.in_dim());
    g.classifier.b.assign(p.classifier.out_dim(), 0.0);
    g.discriminator.l1.w =
        Matrix(p.discriminator.l1.out_dim(), p.discriminator.l1.in_dim());
    g.discriminator.l1.b.assign(p.discriminator.l1.out_dim(), 0.0);
    g.discriminator.l2.w =
        Matrix(p.discriminator.l2.out_dim(), p.discriminator.l2.in_dim());
    g.discriminator.l2.b.assign(p.discriminator.l2.out_dim(), 0.0);
    return g;
  }

  void add_scaled(const ModelGrads& o, double alpha);
};

/// Flat view over every tensor in a parameter or gradient pack; the
/// traversal order is fixed and shared by the optimizer, the checkpoint
/// writer and the flatten/unflatten helpers.
struct TensorRef {
  std::string name;
  double* data;
  std::size_t len;
  std::vector<std::size_t> dims;
};

template <typename Pack>
inline std::vector<TensorRef> tensor_refs(Pack& pack);

namespace detail {
inline TensorRef ref_mat(const std::string& name, Matrix& m) {
  return {name, m.data().data(), m.size(), {m.rows(), m.cols()}};
}
inline TensorRef ref_vec(const std::string& name, std::vector<double>& v) {
  return {name, v.data(), v.size(), {v.size()}};
}
}  // namespace detail

template <>
inline std::vector<TensorRef> tensor_refs(ModelParams& p) {
  using detail::ref_mat;
  using detail::ref_vec;
  return {ref_mat("encoder.l1.w", p.encoder.l1.w),
          ref_vec("encoder.l1.b", p.encoder.l1.b),
          ref_mat("encoder.l2.w", p.encoder.l2.w),
          ref_vec("encoder.l2.b", p.encoder.l2.b),
          ref_mat("vocab.words", p.vocab.words),
          ref_mat("classifier.w", p.classifier.w),
          ref_vec("classifier.b", p.classifier.b),
          ref_mat("discriminator.l1.w", p.discriminator.l1.w),
          ref_vec("discriminator.l1.b", p.discriminator.l1.b),
          ref_mat("discriminator.l2.w", p.discriminator.l2.w),
          ref_vec("discriminator.l2.b", p.discriminator.l2.b)};
}

template <>
inline std::vector<TensorRef> tensor_refs(ModelGrads& g) {
  using detail::ref_mat;
  using detail::ref_vec;
  return {ref_mat("encoder.l1.w", g.encoder.l1.w),
          ref_vec("encoder.l1.b", g.encoder.l1.b),
          ref_mat("encoder.l2.w", g.encoder.l2.w),
          ref_vec("encoder.l2.b", g.encoder.l2.b),
          ref_mat("vocab.words", g.vocab),
          ref_mat("classifier.w", g.classifier.w),
          ref_vec("classifier.b", g.classifier.b),
          ref_mat("discriminator.l1.w", g.discriminator.l1.w),
          ref_vec("discriminator.l1.b", g.discriminator.l1.b),
          ref_mat("discriminator.l2.w", g.discriminator.l2.w),
          ref_vec("discriminator.l2.b", g.discriminator.l2.b)};
}

inline void ModelGrads::add_scaled(const ModelGrads& o, double alpha) {
  auto mine = tensor_refs(*this);
  auto theirs = tensor_refs(const_cast<ModelGrads&>(o));
  for (std::size_t t = 0; t < mine.size(); ++t) {
    if (mine[t].len != theirs[t].len) {
      throw std::invalid_argument("ModelGrads::add_scaled: shape mismatch on " +
                                  mine[t].name);
    }
    for (std::size_t i = 0; i < mine[t].len; ++i)
      mine[t].data[i] += alpha * theirs[t].data[i];
  }
}

inline std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> out;
  for (const auto& ref : tensor_refs(const_cast<ModelParams&>(p)))
    out.insert(out.end(), ref.data, ref.data + ref.len);
  return out;
}

inline void unflatten_params(std::span<const double> flat, ModelParams& p) {
  std::size_t pos = 0;
  for (auto& ref : tensor_refs(p)) {
    if (pos + ref.len > flat.size()) {
      throw std::invalid_argument("unflatten_params: flat vector too short");
    }
    for (std::size_t i = 0; i < ref.len; ++i) ref.data[i] = flat[pos + i];
    pos += ref.len;
  }
  if (pos != flat.size()) {
    throw std::invalid_argument("unflatten_params: flat vector too long");
  }
}

/// Row-wise application of the encoder; each local descriptor is mapped
/// independently.
inline std::pair<LocalFeatureSet, MlpCache> encoder_apply(
    const LocalFeatureSet& raw, const ModelParams& params) {
  if (raw.cols() != params.encoder.l1.in_dim()) {
    throw std::invalid_argument("encoder_apply: raw width " + raw.shape_str() +
                                " vs encoder input " +
                                std::to_string(params.encoder.l1.in_dim()));
  }
  return mlp_forward(raw, params.encoder);
}

struct HeadsOutput {
  std::vector<double> class_logits;   // 2
  std::vector<double> domain_logits;  // S
};

struct HeadsCache {
  Matrix descriptor;  // 1 x W full flat
  Matrix shared;      // 1 x W_sh slice the discriminator saw
  MlpCache disc;
};

/// Classifier reads the full flat descriptor; the discriminator reads only
/// the shared slice (identity forward through the reversal layer).
inline std::pair<HeadsOutput, HeadsCache> heads_apply(
    std::span<const double> flat, std::size_t shared_len,
    const ModelParams& params) {
  if (flat.size() != params.classifier.in_dim()) {
    throw std::invalid_argument(
        "heads_apply: descriptor length " + std::to_string(flat.size()) +
        " vs classifier input " + std::to_string(params.classifier.in_dim()));
  }
  if (shared_len > flat.size() ||
      shared_len != params.discriminator.l1.in_dim()) {
    throw std::invalid_argument(
        "heads_apply: shared slice length " + std::to_string(shared_len) +
        " vs discriminator input " +
        std::to_string(params.discriminator.l1.in_dim()));
  }
  HeadsCache cache;
  cache.descriptor =
      Matrix(1, flat.size(), std::vector<double>(flat.begin(), flat.end()));
  cache.shared = Matrix(
      1, shared_len, std::vector<double>(flat.begin(), flat.begin() + shared_len));
  const Matrix cls = linear_forward(cache.descriptor, params.classifier);
  auto [dom, disc_cache] = mlp_forward(cache.shared, params.discriminator);
  cache.disc = std::move(disc_cache);
  HeadsOutput out;
  out.class_logits.assign(cls.data().begin(), cls.data().end());
  out.domain_logits.assign(dom.data().begin(), dom.data().end());
  return {std::move(out), std::move(cache)};
}

/// Learning-rate schedule and momentum state. The iteration counter only
/// advances on accepted steps.
struct OptimState {
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::size_t iteration = 0;
  std::size_t drop_iteration = 300;
  double dropped_lr = 0.0001;

  double current_lr() const {
    return iteration >= drop_iteration ? dropped_lr : learning_rate;
  }
};

class SgdOptimizer {
 public:
  SgdOptimizer(OptimState state, const ModelParams& params)
      : state_(state), velocity_(ModelGrads::zeros_like(params)) {}

  const OptimState& state() const { return state_; }

  /// p <- p - lr * v with v <- momentum * v + g. A non-finite gradient
  /// rejects the whole step and leaves the iteration counter alone.
  void step(ModelParams& params, const ModelGrads& grads) {
    auto grad_refs = tensor_refs(const_cast<ModelGrads&>(grads));
    for (const auto& ref : grad_refs) {
      for (std::size_t i = 0; i < ref.len; ++i) {
        if (!std::isfinite(ref.data[i])) {
          throw NumericError("sgd_step: non-finite gradient in " + ref.name +
                             " at iteration " + std::to_string(state_.iteration));
        }
      }
    }
    const double lr = state_.current_lr();
    auto vel_refs = tensor_refs(velocity_);
    auto par_refs = tensor_refs(params);
    for (std::size_t t = 0; t < par_refs.size(); ++t) {
      for (std::size_t i = 0; i < par_refs[t].len; ++i) {
        vel_refs[t].data[i] =
            state_.momentum * vel_refs[t].data[i] + grad_refs[t].data[i];
        par_refs[t].data[i] -= lr * vel_refs[t].data[i];
      }
    }
    state_.iteration++;
  }

 private:
  OptimState state_;
  ModelGrads velocity_;
};

}  // namespace vladvsa
