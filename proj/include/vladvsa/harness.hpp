#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "vladvsa/checkpoint.hpp"
#include "vladvsa/data.hpp"
#include "vladvsa/metrics.hpp"
#include "vladvsa/model.hpp"
#include "vladvsa/text.hpp"

namespace vladvsa {

struct TrainConfig {
  ModelDims dims;
  Aggregator aggregator = Aggregator::kVlad;
  VocabInit vocab_init = VocabInit::kRandom;
  std::size_t kmeans_iters = 25;
  bool intra_normalize_centers = true;
  LossWeights weights;
  std::size_t per_domain_real = 10;
  std::size_t per_domain_fake = 10;
  std::size_t iterations = 500;
  OptimState optim;
  std::uint64_t seed = 7;
  std::size_t eval_every = 0;
};

/// Draws exactly per_domain_real reals and per_domain_fake fakes from every
/// source domain, without replacement inside the batch. Order is fixed:
/// domain-major, reals first.
inline std::vector<const Sample*> sample_batch(
    const std::vector<DomainDataset>& sources, std::size_t per_domain_real,
    std::size_t per_domain_fake, Rng& rng) {
  std::vector<const Sample*> batch;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    std::vector<const Sample*> reals;
    std::vector<const Sample*> fakes;
    for (const Sample& sample : sources[s]) {
      (sample.class_label == 0 ? reals : fakes).push_back(&sample);
    }
    if (reals.size() < per_domain_real || fakes.size() < per_domain_fake) {
      throw std::invalid_argument(
          "sample_batch: domain " + std::to_string(s + 1) + " has " +
          std::to_string(reals.size()) + " real / " +
          std::to_string(fakes.size()) + " fake samples, need " +
          std::to_string(per_domain_real) + "/" +
          std::to_string(per_domain_fake));
    }
    for (std::size_t i : rng.sample_without_replacement(reals.size(), per_domain_real))
      batch.push_back(reals[i]);
    for (std::size_t i : rng.sample_without_replacement(fakes.size(), per_domain_fake))
      batch.push_back(fakes[i]);
  }
  return batch;
}

struct BatchForward {
  Matrix raw;                    // (B*N) x d_raw pooled locals
  Matrix encoded;                // (B*N) x d
  MlpCache encoder_cache;
  Matrix descriptors;            // B x W
  std::vector<VladCache> caches; // per sample, VLAD mode only
  std::vector<int> class_labels;
  std::vector<int> domain_labels0;  // 0-based for the domain head
  std::vector<int> local_labels;    // class label per pooled local row
  std::size_t locals_per_sample = 0;
};

inline BatchForward forward_batch(const ModelParams& params,
                                  const std::vector<const Sample*>& batch) {
  const std::size_t b = batch.size();
  const std::size_t n = batch[0]->raw_features.rows();
  const std::size_t d_raw = batch[0]->raw_features.cols();
  BatchForward fwd;
  fwd.locals_per_sample = n;
  fwd.raw = Matrix(b * n, d_raw);
  for (std::size_t i = 0; i < b; ++i) {
    if (batch[i]->raw_features.rows() != n ||
        batch[i]->raw_features.cols() != d_raw) {
      throw std::invalid_argument("forward_batch: inconsistent sample shapes");
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d_raw; ++c)
        fwd.raw(i * n + r, c) = batch[i]->raw_features(r, c);
    fwd.class_labels.push_back(batch[i]->class_label);
    fwd.domain_labels0.push_back(batch[i]->domain_label - 1);
    for (std::size_t r = 0; r < n; ++r)
      fwd.local_labels.push_back(batch[i]->class_label);
  }
  auto [encoded, cache] = encoder_apply(fwd.raw, params);
  fwd.encoded = std::move(encoded);
  fwd.encoder_cache = std::move(cache);

  const std::size_t d = params.encoder.l2.out_dim();
  const std::size_t w = params.descriptor_dim();
  fwd.descriptors = Matrix(b, w);
  for (std::size_t i = 0; i < b; ++i) {
    LocalFeatureSet locals(n, d);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) locals(r, c) = fwd.encoded(i * n + r, c);
    if (params.aggregator == Aggregator::kVlad) {
      auto [desc, vcache] =
          vlad_forward(locals, params.vocab, params.temperature);
      for (std::size_t c = 0; c < w; ++c) fwd.descriptors(i, c) = desc.flat[c];
      fwd.caches.push_back(std::move(vcache));
    } else {
      const std::vector<double> pooled = gap_pool(locals);
      for (std::size_t c = 0; c < w; ++c) fwd.descriptors(i, c) = pooled[c];
    }
  }
  return fwd;
}

struct StepOutcome {
  LossValues values;
  double total = 0.0;
  bool triplet_warning = false;
};

/// Forward through encoder, aggregation and both heads, all six loss terms,
/// then the merged backward pass: descriptor-level gradients carry their
/// objective weights, so one aggregation backward covers the classification,
/// triplet and reversed adversarial paths together.
inline std::pair<StepOutcome, ModelGrads> compute_gradients(
    const ModelParams& params, const std::vector<const Sample*>& batch,
    const TrainConfig& cfg) {
  const LossWeights& w = cfg.weights;
  BatchForward fwd = forward_batch(params, batch);
  const std::size_t b = batch.size();
  const std::size_t n = fwd.locals_per_sample;
  const std::size_t wsh = params.shared_dim();
  const bool vlad = params.aggregator == Aggregator::kVlad;

  const Matrix cls_logits = linear_forward(fwd.descriptors, params.classifier);
  const CrossEntropyResult ce = cross_entropy_and_grad(cls_logits, fwd.class_labels);
  const TripletResult trip =
      triplet_loss_and_grad(fwd.descriptors, fwd.class_labels, w.margin);

  Matrix shared(b, wsh);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t c = 0; c < wsh; ++c) shared(i, c) = fwd.descriptors(i, c);
  const AdversarialResult adv =
      adversarial_grl(shared, fwd.domain_labels0, w.grl_coeff, params.discriminator);

  OrthoResult ortho;
  CentroidAdaptResult c_adapt;
  IntraClusterResult intra;
  LabeledResiduals residuals;
  if (vlad) {
    ortho = ortho_loss_and_grad(params.vocab);
    c_adapt =
        centroid_adapt_loss_and_grad(fwd.encoded, fwd.local_labels, params.vocab);
    residuals = hard_residuals(fwd.encoded, fwd.local_labels, params.vocab);
    intra = intra_cluster_loss_and_grad(residuals, cfg.intra_normalize_centers);
  }

  StepOutcome out;
  out.values = {ce.loss,    trip.loss,    adv.domain_loss,
                ortho.loss, c_adapt.loss, intra.loss};
  out.total = total_objective_value(out.values, w);
  out.triplet_warning = trip.no_valid_triplet;

  ModelGrads grads = ModelGrads::zeros_like(params);

  // Descriptor-level gradient, weighted per term.
  Matrix d_desc =
      linear_backward(fwd.descriptors, params.classifier, ce.grad_logits,
                      grads.classifier);
  add_scaled(d_desc, w.lambda1, trip.grad_embeddings);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t c = 0; c < wsh; ++c)
      d_desc(i, c) += w.lambda2 * adv.grad_into_generator(i, c);
  add_scaled(grads.discriminator.l1.w, w.lambda2, adv.discriminator_grads.l1.w);
  for (std::size_t i = 0; i < grads.discriminator.l1.b.size(); ++i)
    grads.discriminator.l1.b[i] += w.lambda2 * adv.discriminator_grads.l1.b[i];
  add_scaled(grads.discriminator.l2.w, w.lambda2, adv.discriminator_grads.l2.w);
  for (std::size_t i = 0; i < grads.discriminator.l2.b.size(); ++i)
    grads.discriminator.l2.b[i] += w.lambda2 * adv.discriminator_grads.l2.b[i];

  // Through the aggregation into the encoded locals and the vocabulary.
  Matrix d_encoded(fwd.encoded.rows(), fwd.encoded.cols());
  const std::size_t d = fwd.encoded.cols();
  if (vlad) {
    for (std::size_t i = 0; i < b; ++i) {
      const VladGrads vg = vlad_backward(fwd.caches[i], d_desc.row(i));
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c)
          d_encoded(i * n + r, c) += vg.features(r, c);
      add_scaled(grads.vocab, 1.0, vg.words);
    }
    // Vocabulary losses: ortho and centroid adaptation touch only the
    // words; the intra-cluster term reaches features (+) and words (-)
    // through the hard residuals.
    add_scaled(grads.vocab, w.lambda3, ortho.grad);
    add_scaled(grads.vocab, w.lambda4, c_adapt.grad);
    for (std::size_t i = 0; i < fwd.encoded.rows(); ++i) {
      const std::size_t k = residuals.cluster[i];
      for (std::size_t c = 0; c < d; ++c) {
        const double g = w.lambda5 * intra.grad_residuals(i, c);
        d_encoded(i, c) += g;
        grads.vocab(k, c) -= g;
      }
    }
  } else {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c)
          d_encoded(i * n + r, c) = d_desc(i, c) * inv_n;
  }

  mlp_backward(fwd.encoder_cache, params.encoder, d_encoded, grads.encoder);
  return {std::move(out), std::move(grads)};
}

inline StepOutcome train_step(ModelParams& params, SgdOptimizer& opt,
                              const std::vector<const Sample*>& batch,
                              const TrainConfig& cfg) {
  auto [out, grads] = compute_gradients(params, batch, cfg);
  opt.step(params, grads);
  return out;
}

struct TraceRow {
  std::size_t iteration = 0;
  LossValues values;
  double total = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<TraceRow> trace;
};

inline ModelParams init_for_training(const std::vector<DomainDataset>& sources,
                                     const TrainConfig& cfg) {
  if (sources.size() < 2) {
    throw std::invalid_argument(
        "run_training: adversarial alignment needs at least two source domains");
  }
  ModelDims dims = cfg.dims;
  dims.num_domains = 0;
  for (const DomainDataset& ds : sources) {
    if (ds.empty()) throw std::invalid_argument("run_training: empty source domain");
    dims.d_raw = ds[0].raw_features.cols();
    for (const Sample& s : ds)
      dims.num_domains =
          std::max(dims.num_domains, static_cast<std::size_t>(s.domain_label));
  }
  if (cfg.aggregator == Aggregator::kGap) {
    ModelParams p = init_model(dims, Aggregator::kGap, cfg.weights.temperature,
                               cfg.seed);
    return p;
  }
  ModelParams p = init_model(dims, Aggregator::kVlad, cfg.weights.temperature,
                             cfg.seed);
  if (cfg.vocab_init == VocabInit::kKmeans) {
    // Cluster encoder outputs over a pool of training locals.
    std::vector<double> pool_rows;
    std::size_t count = 0;
    for (const DomainDataset& ds : sources) {
      for (const Sample& s : ds) {
        if (count >= 64) break;
        auto [enc, cache] = encoder_apply(s.raw_features, p);
        pool_rows.insert(pool_rows.end(), enc.data().begin(), enc.data().end());
        count++;
      }
    }
    const std::size_t d = p.encoder.l2.out_dim();
    Matrix pool(pool_rows.size() / d, d, std::move(pool_rows));
    p.vocab.words =
        kmeans(pool, dims.k, derive_seed(cfg.seed, 5), cfg.kmeans_iters).centroids;
  }
  return p;
}

/// The full optimization loop: balanced batch, step, trace. Aborts with the
/// iteration index and the offending term if any loss goes non-finite.
inline TrainResult run_training(const std::vector<DomainDataset>& sources,
                                const TrainConfig& cfg) {
  TrainResult result;
  result.params = init_for_training(sources, cfg);
  SgdOptimizer opt(cfg.optim, result.params);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    Rng batch_rng(derive_seed(cfg.seed, 0x1000 + iter));
    const std::vector<const Sample*> batch = sample_batch(
        sources, cfg.per_domain_real, cfg.per_domain_fake, batch_rng);
    try {
      const StepOutcome out = train_step(result.params, opt, batch, cfg);
      result.trace.push_back({iter, out.values, out.total});
    } catch (const NumericError& e) {
      throw NumericError("training aborted at iteration " +
                         std::to_string(iter) + ": " + e.what());
    }
  }
  return result;
}

/// Classifier softmax probability of the real class.
inline double real_score(const ModelParams& params, const Sample& sample) {
  std::vector<const Sample*> one{&sample};
  const BatchForward fwd = forward_batch(params, one);
  auto [heads, cache] = heads_apply(fwd.descriptors.row(0), params.shared_dim(),
                                    params);
  const double a = heads.class_logits[0];
  const double b = heads.class_logits[1];
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  return ea / (ea + std::exp(b - m));
}

inline Metrics evaluate_metrics(const ModelParams& params,
                                const DomainDataset& target) {
  std::vector<double> real_scores;
  std::vector<double> fake_scores;
  for (const Sample& s : target) {
    (s.class_label == 0 ? real_scores : fake_scores)
        .push_back(real_score(params, s));
  }
  if (real_scores.empty() || fake_scores.empty()) {
    throw std::invalid_argument("evaluate_metrics: target needs both classes");
  }
  return compute_metrics(real_scores, fake_scores);
}

enum class Variant { kGapBaseline, kVlad, kVladVs, kVladVa, kVladVsa };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kGapBaseline: return "gap";
    case Variant::kVlad: return "vlad";
    case Variant::kVladVs: return "vlad_vs";
    case Variant::kVladVa: return "vlad_va";
    case Variant::kVladVsa: return "vlad_vsa";
  }
  return "?";
}

/// Ablation wiring: each variant is the base config with the relevant
/// pieces switched off. Plain VLAD keeps the whole vocabulary shared
/// (K2 = 0) and silences the separation/adaptation losses.
inline TrainConfig variant_config(const TrainConfig& base, Variant v) {
  TrainConfig cfg = base;
  switch (v) {
    case Variant::kGapBaseline:
      cfg.aggregator = Aggregator::kGap;
      cfg.dims.k2 = 0;
      cfg.weights.lambda3 = cfg.weights.lambda4 = cfg.weights.lambda5 = 0.0;
      break;
    case Variant::kVlad:
      cfg.dims.k2 = 0;
      cfg.weights.lambda3 = cfg.weights.lambda4 = cfg.weights.lambda5 = 0.0;
      break;
    case Variant::kVladVs:
      cfg.weights.lambda4 = cfg.weights.lambda5 = 0.0;
      break;
    case Variant::kVladVa:
      cfg.dims.k2 = 0;
      cfg.weights.lambda3 = 0.0;
      break;
    case Variant::kVladVsa:
      break;
  }
  return cfg;
}

struct AblationRow {
  Variant variant;
  std::size_t holdout = 0;  // 1..S
  std::uint64_t seed = 0;
  Metrics metrics;
};

constexpr Variant kAllVariants[] = {Variant::kGapBaseline, Variant::kVlad,
                                    Variant::kVladVs, Variant::kVladVa,
                                    Variant::kVladVsa};

/// Leave-one-domain-out over every variant and seed. Data is regenerated
/// per seed (derived from the spec seed) so the comparison is paired across
/// variants but averages over sampling noise.
inline std::vector<AblationRow> run_ablation(const SyntheticSpec& spec,
                                             const TrainConfig& base,
                                             const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) {
    throw std::invalid_argument("run_ablation: need at least one seed");
  }
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    SyntheticSpec per_seed = spec;
    per_seed.seed = derive_seed(spec.seed, seed);
    const std::vector<DomainDataset> domains = generate_synthetic(per_seed);
    for (std::size_t holdout = 1; holdout <= domains.size(); ++holdout) {
      std::vector<DomainDataset> sources;
      for (std::size_t s = 0; s < domains.size(); ++s) {
        if (s + 1 != holdout) sources.push_back(domains[s]);
      }
      for (Variant v : kAllVariants) {
        TrainConfig cfg = variant_config(base, v);
        cfg.seed = seed;
        const TrainResult trained = run_training(sources, cfg);
        AblationRow row;
        row.variant = v;
        row.holdout = holdout;
        row.seed = seed;
        row.metrics = evaluate_metrics(trained.params, domains[holdout - 1]);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

struct AblationSummary {
  Variant variant;
  std::size_t holdout = 0;
  double hter_mean = 0.0, hter_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
  std::size_t runs = 0;
};

inline std::vector<AblationSummary> summarize_ablation(
    const std::vector<AblationRow>& rows) {
  std::vector<AblationSummary> out;
  for (Variant v : kAllVariants) {
    std::size_t max_holdout = 0;
    for (const AblationRow& r : rows)
      if (r.variant == v) max_holdout = std::max(max_holdout, r.holdout);
    for (std::size_t h = 1; h <= max_holdout; ++h) {
      std::vector<double> hters, aucs;
      for (const AblationRow& r : rows) {
        if (r.variant == v && r.holdout == h) {
          hters.push_back(r.metrics.hter);
          aucs.push_back(r.metrics.auc);
        }
      }
      if (hters.empty()) continue;
      auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
        return std::pair<double, double>{mean, std::sqrt(var)};
      };
      AblationSummary s;
      s.variant = v;
      s.holdout = h;
      std::tie(s.hter_mean, s.hter_std) = mean_std(hters);
      std::tie(s.auc_mean, s.auc_std) = mean_std(aucs);
      s.runs = hters.size();
      out.push_back(s);
    }
  }
  return out;
}

struct AssignmentStatsRow {
  std::size_t cluster = 0;
  bool is_specific = false;
  std::size_t total = 0;
  std::size_t real = 0;
  std::size_t fake = 0;
  std::vector<std::size_t> per_domain;  // index 0 -> domain 1
};

struct ResidualRow {
  std::size_t cluster = 0;
  int class_label = 0;
  std::vector<double> residual;
};

struct AssignmentReport {
  std::vector<AssignmentStatsRow> rows;
  std::vector<ResidualRow> residuals;
  std::size_t samples_used = 0;
};

/// Hard-assignment census over a seeded subset of samples: per-cluster
/// totals, class split, domain split, and the raw residuals for external
/// embedding plots.
inline AssignmentReport assignment_stats(const ModelParams& params,
                                         const std::vector<DomainDataset>& domains,
                                         std::size_t sample_count,
                                         std::uint64_t seed) {
  if (params.aggregator != Aggregator::kVlad) {
    throw std::invalid_argument("assignment_stats: model has no vocabulary");
  }
  std::vector<const Sample*> all;
  std::size_t num_domains = 0;
  for (const DomainDataset& ds : domains) {
    for (const Sample& s : ds) {
      all.push_back(&s);
      num_domains =
          std::max(num_domains, static_cast<std::size_t>(s.domain_label));
    }
  }
  if (sample_count > all.size()) {
    throw std::invalid_argument("assignment_stats: sample_count exceeds dataset");
  }
  Rng rng(derive_seed(seed, 0x57a7));
  std::vector<const Sample*> picked;
  for (std::size_t i : rng.sample_without_replacement(all.size(), sample_count))
    picked.push_back(all[i]);

  AssignmentReport report;
  report.samples_used = picked.size();
  report.rows.resize(params.vocab.size());
  for (std::size_t k = 0; k < params.vocab.size(); ++k) {
    report.rows[k].cluster = k;
    report.rows[k].is_specific = k >= params.vocab.k_shared;
    report.rows[k].per_domain.assign(num_domains, 0);
  }
  for (const Sample* s : picked) {
    auto [encoded, cache] = encoder_apply(s->raw_features, params);
    for (std::size_t r = 0; r < encoded.rows(); ++r) {
      const std::size_t k = nearest_word(encoded.row(r), params.vocab.words);
      AssignmentStatsRow& row = report.rows[k];
      row.total++;
      (s->class_label == 0 ? row.real : row.fake)++;
      row.per_domain[static_cast<std::size_t>(s->domain_label) - 1]++;
      ResidualRow res;
      res.cluster = k;
      res.class_label = s->class_label;
      res.residual.resize(encoded.cols());
      for (std::size_t c = 0; c < encoded.cols(); ++c)
        res.residual[c] = encoded(r, c) - params.vocab.words(k, c);
      report.residuals.push_back(std::move(res));
    }
  }
  return report;
}

// ---- CSV emission ----------------------------------------------------
// Every text artifact starts with a '#' line echoing the resolved config.

inline void write_loss_trace_csv(const std::string& path,
                                 const std::string& config_line,
                                 const std::vector<TraceRow>& trace) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  os << "iteration,cls,triplet,adv,ortho,c_adapt,intra,total\n";
  for (const TraceRow& r : trace) {
    os << r.iteration << ',' << format_double(r.values.cls) << ','
       << format_double(r.values.triplet) << ',' << format_double(r.values.adv)
       << ',' << format_double(r.values.ortho) << ','
       << format_double(r.values.c_adapt) << ','
       << format_double(r.values.intra) << ',' << format_double(r.total)
       << "\n";
  }
  if (!os) throw IoError("write failure on " + path);
}

inline void write_ablation_csv(const std::string& path,
                               const std::string& config_line,
                               const std::vector<AblationRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  os << "variant,holdout,seed,hter,auc\n";
  for (const AblationRow& r : rows) {
    os << variant_name(r.variant) << ',' << r.holdout << ',' << r.seed << ','
       << format_double(r.metrics.hter) << ',' << format_double(r.metrics.auc)
       << "\n";
  }
  if (!os) throw IoError("write failure on " + path);
}

inline void write_ablation_summary_csv(const std::string& path,
                                       const std::string& config_line,
                                       const std::vector<AblationSummary>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  os << "variant,holdout,runs,hter_mean,hter_std,auc_mean,auc_std\n";
  for (const AblationSummary& r : rows) {
    os << variant_name(r.variant) << ',' << r.holdout << ',' << r.runs << ','
       << format_double(r.hter_mean) << ',' << format_double(r.hter_std) << ','
       << format_double(r.auc_mean) << ',' << format_double(r.auc_std) << "\n";
  }
  if (!os) throw IoError("write failure on " + path);
}

inline void write_assignment_csv(const std::string& path,
                                 const std::string& config_line,
                                 const AssignmentReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  os << "cluster,is_specific,total,real,fake";
  const std::size_t s =
      report.rows.empty() ? 0 : report.rows[0].per_domain.size();
  for (std::size_t i = 1; i <= s; ++i) os << ",domain_" << i;
  os << "\n";
  for (const AssignmentStatsRow& r : report.rows) {
    os << r.cluster << ',' << (r.is_specific ? 1 : 0) << ',' << r.total << ','
       << r.real << ',' << r.fake;
    for (std::size_t c : r.per_domain) os << ',' << c;
    os << "\n";
  }
  if (!os) throw IoError("write failure on " + path);
}

inline void write_residuals_csv(const std::string& path,
                                const std::string& config_line,
                                const AssignmentReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  os << "cluster,class";
  const std::size_t d =
      report.residuals.empty() ? 0 : report.residuals[0].residual.size();
  for (std::size_t i = 0; i < d; ++i) os << ",r_" << i;
  os << "\n";
  for (const ResidualRow& r : report.residuals) {
    os << r.cluster << ',' << r.class_label;
    for (double v : r.residual) os << ',' << format_double(v);
    os << "\n";
  }
  if (!os) throw IoError("write failure on " + path);
}

inline void write_metrics_csv(const std::string& path,
                              const std::string& config_line, const Metrics& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  os << "auc,hter,eer_threshold,far,frr\n";
  os << format_double(m.auc) << ',' << format_double(m.hter) << ','
     << format_double(m.eer_threshold) << ',' << format_double(m.far) << ','
     << format_double(m.frr) << "\n";
  if (!os) throw IoError("write failure on " + path);
}

inline void write_dataset_csv(const std::string& path,
                              const std::string& config_line,
                              const std::vector<Sample>& samples) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# " << config_line << "\n";
  const std::size_t d = samples.empty() ? 0 : samples[0].raw_features.cols();
  os << "sample_id,domain,class,local_index";
  for (std::size_t j = 0; j < d; ++j) os << ",f" << j;
  os << "\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (std::size_t i = 0; i < samples[s].raw_features.rows(); ++i) {
      os << s << ',' << samples[s].domain_label << ','
         << samples[s].class_label << ',' << i;
      for (std::size_t j = 0; j < d; ++j)
        os << ',' << format_double(samples[s].raw_features(i, j));
      os << "\n";
    }
  }
  if (!os) throw IoError("write failure on " + path);
}

}  // namespace vladvsa
