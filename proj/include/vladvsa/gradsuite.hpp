#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vladvsa/gradcheck.hpp"
#include "vladvsa/harness.hpp"

namespace vladvsa {

struct SuiteCheck {
  std::string name;
  GradCheckReport report;  // worst case over all checked instances
  std::size_t instances = 0;

  bool passes(double rel_tol = 1e-4) const { return report.passes(rel_tol); }
};

namespace gradsuite_detail {

inline void merge(GradCheckReport& acc, const GradCheckReport& r) {
  acc.num_params_checked += r.num_params_checked;
  acc.max_abs_err = std::max(acc.max_abs_err, r.max_abs_err);
  if (r.max_rel_err > acc.max_rel_err) {
    acc.max_rel_err = r.max_rel_err;
    acc.worst_index = r.worst_index;
  }
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.next_gaussian();
  return m;
}

inline Vocabulary random_vocab(std::size_t k, std::size_t k2, std::size_t d,
                               Rng& rng) {
  Vocabulary v;
  v.words = random_matrix(k, d, rng, 0.7);
  v.k_shared = k - k2;
  v.k_specific = k2;
  return v;
}

}  // namespace gradsuite_detail

/// Probe g . flat(L, V) against central differences over every entry of L
/// and V, through soft assignment and both normalizations.
inline SuiteCheck check_vlad_backward(std::uint64_t seed, double h = 1e-5,
                                      std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"vlad", {}, 0};
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 100 + inst));
    const std::size_t n = 3 + inst % 4;
    const std::size_t d = 3;
    const std::size_t k = 2 + inst % 3;
    const Matrix features = random_matrix(n, d, rng);
    const Vocabulary vocab = random_vocab(k, k > 2 ? 1 : 0, d, rng);
    std::vector<double> probe(k * d);
    for (double& v : probe) v = rng.next_gaussian();
    const double t = 2.0;

    auto [desc, cache] = vlad_forward(features, vocab, t);
    const VladGrads analytic = vlad_backward(cache, probe);
    std::vector<double> flat_analytic = analytic.features.data();
    flat_analytic.insert(flat_analytic.end(), analytic.words.data().begin(),
                         analytic.words.data().end());

    std::vector<double> x = features.data();
    x.insert(x.end(), vocab.words.data().begin(), vocab.words.data().end());
    auto f = [&](const std::vector<double>& params) {
      Matrix lf(n, d, std::vector<double>(params.begin(), params.begin() + n * d));
      Vocabulary vv = vocab;
      vv.words = Matrix(k, d, std::vector<double>(params.begin() + n * d, params.end()));
      auto [dd, cc] = vlad_forward(lf, vv, t);
      return dot({dd.flat.data(), dd.flat.size()}, {probe.data(), probe.size()});
    };
    merge(check.report, compare_gradients(flat_analytic, finite_diff_grad(f, x, h)));
    check.instances++;
  }
  return check;
}

inline SuiteCheck check_ortho(std::uint64_t seed, double h = 1e-5,
                              std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"ortho", {}, 0};
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 200 + inst));
    const std::size_t k = 4 + inst % 3;
    const std::size_t k2 = 1 + inst % 2;
    const std::size_t d = 3;
    const Vocabulary vocab = random_vocab(k, k2, d, rng);
    const OrthoResult analytic = ortho_loss_and_grad(vocab);
    auto f = [&](const std::vector<double>& params) {
      Vocabulary vv = vocab;
      vv.words = Matrix(k, d, params);
      return ortho_loss_and_grad(vv).loss;
    };
    merge(check.report,
          compare_gradients(analytic.grad.data(),
                            finite_diff_grad(f, vocab.words.data(), h)));
    check.instances++;
  }
  return check;
}

/// The centroid-adaptation loss holds the assignment and the feature centers
/// fixed, so the reference function freezes both at their base values and
/// differentiates only the explicit word term.
inline SuiteCheck check_c_adapt(std::uint64_t seed, double h = 1e-5,
                                std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"c_adapt", {}, 0};
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 300 + inst));
    const std::size_t n = 10 + inst % 5;
    const std::size_t d = 3;
    const std::size_t k = 3 + inst % 2;
    const Matrix features = random_matrix(n, d, rng);
    const Vocabulary vocab = random_vocab(k, 1, d, rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = rng.next_below(2) ? 1 : 0;

    const CentroidAdaptResult analytic =
        centroid_adapt_loss_and_grad(features, labels, vocab);
    const ClusterStats frozen = analytic.stats;
    auto f = [&](const std::vector<double>& params) {
      double loss = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (frozen.assigned_count[c] == 0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = frozen.feature_center(c, j) - params[c * d + j];
          loss += diff * diff;
        }
      }
      return loss;
    };
    merge(check.report,
          compare_gradients(analytic.grad.data(),
                            finite_diff_grad(f, vocab.words.data(), h)));
    check.instances++;
  }
  return check;
}

/// Differentiates the intra-cluster loss against its residual inputs; the
/// assignment happened upstream so no freezing is involved.
inline SuiteCheck check_intra(std::uint64_t seed, double h = 1e-5,
                              std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"intra", {}, 0};
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 400 + inst));
    const std::size_t m = 12 + inst % 5;
    const std::size_t d = 3;
    const std::size_t k = 3;
    LabeledResiduals batch;
    batch.residuals = random_matrix(m, d, rng);
    batch.num_clusters = k;
    batch.cluster.resize(m);
    batch.class_label.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      batch.cluster[i] = rng.next_below(k);
      batch.class_label[i] = rng.next_below(2) ? 1 : 0;
    }
    const IntraClusterResult analytic = intra_cluster_loss_and_grad(batch);
    auto f = [&](const std::vector<double>& params) {
      LabeledResiduals bb = batch;
      bb.residuals = Matrix(m, d, params);
      return intra_cluster_loss_and_grad(bb).loss;
    };
    merge(check.report,
          compare_gradients(analytic.grad_residuals.data(),
                            finite_diff_grad(f, batch.residuals.data(), h)));
    check.instances++;
  }
  return check;
}

/// Instances whose smallest hinge activation sits within margin_guard of the
/// kink are skipped (central differences straddle the kink there); seeds are
/// consumed until the requested count of smooth instances has been checked.
inline SuiteCheck check_triplet(std::uint64_t seed, double h = 1e-5,
                                std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"triplet", {}, 0};
  const double margin = 0.25;
  const double margin_guard = 1e-3;
  for (std::uint64_t inst = 0; check.instances < instances; ++inst) {
    Rng rng(derive_seed(seed, 500 + inst));
    const std::size_t b = 5 + inst % 3;
    const std::size_t d = 4;
    const Matrix emb = random_matrix(b, d, rng, 0.5);
    std::vector<int> labels(b);
    labels[0] = 0;
    labels[1] = 1;  // both classes guaranteed
    for (std::size_t i = 2; i < b; ++i) labels[i] = rng.next_below(2) ? 1 : 0;

    // Kink guard over every valid triplet.
    bool near_kink = false;
    auto d2 = [&](std::size_t i, std::size_t j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = emb(i, c) - emb(j, c);
        s += diff * diff;
      }
      return s;
    };
    for (std::size_t a = 0; a < b && !near_kink; ++a)
      for (std::size_t p = 0; p < b && !near_kink; ++p) {
        if (p == a || labels[p] != labels[a]) continue;
        for (std::size_t nn = 0; nn < b; ++nn) {
          if (labels[nn] == labels[a]) continue;
          if (std::abs(d2(a, p) - d2(a, nn) + margin) < margin_guard) {
            near_kink = true;
            break;
          }
        }
      }
    if (near_kink) continue;

    const TripletResult analytic = triplet_loss_and_grad(emb, labels, margin);
    auto f = [&](const std::vector<double>& params) {
      return triplet_loss_and_grad(Matrix(b, d, params), labels, margin).loss;
    };
    merge(check.report,
          compare_gradients(analytic.grad_embeddings.data(),
                            finite_diff_grad(f, emb.data(), h)));
    check.instances++;
  }
  return check;
}

/// Discriminator parameter gradients and the reversed generator-side input
/// gradient of the adversarial loss, each against central differences.
inline SuiteCheck check_adversarial(std::uint64_t seed, double h = 1e-5,
                                    std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"adversarial", {}, 0};
  const double coeff = 0.8;
  for (std::uint64_t inst = 0; check.instances < instances; ++inst) {
    Rng rng(derive_seed(seed, 600 + inst));
    const std::size_t b = 6;
    const std::size_t w = 5;
    const std::size_t s = 3;
    Rng mlp_rng = rng.split(1);
    const Mlp disc = make_mlp(s, 4, w, mlp_rng);
    const Matrix shared = random_matrix(b, w, rng);
    std::vector<int> domains(b);
    for (std::size_t i = 0; i < b; ++i) domains[i] = static_cast<int>(i % s);

    {  // rectifier kink guard
      auto [logits, cache] = mlp_forward(shared, disc);
      bool near = false;
      for (double v : cache.pre_act.data())
        if (std::abs(v) < 1e-4) near = true;
      if (near) continue;
    }

    const AdversarialResult analytic = adversarial_grl(shared, domains, coeff, disc);

    // Generator side: FD of the raw domain loss, times -coeff.
    auto f_input = [&](const std::vector<double>& params) {
      return adversarial_grl(Matrix(b, w, params), domains, coeff, disc)
          .domain_loss;
    };
    std::vector<double> fd_input = finite_diff_grad(f_input, shared.data(), h);
    for (double& v : fd_input) v *= -coeff;
    merge(check.report,
          compare_gradients(analytic.grad_into_generator.data(), fd_input));

    // Discriminator side: plain gradient on its own parameters.
    std::vector<double> disc_flat = disc.l1.w.data();
    disc_flat.insert(disc_flat.end(), disc.l1.b.begin(), disc.l1.b.end());
    disc_flat.insert(disc_flat.end(), disc.l2.w.data().begin(), disc.l2.w.data().end());
    disc_flat.insert(disc_flat.end(), disc.l2.b.begin(), disc.l2.b.end());
    auto rebuild = [&](const std::vector<double>& params) {
      Mlp m = disc;
      std::size_t pos = 0;
      auto take_mat = [&](Matrix& dst) {
        for (double& v : dst.data()) v = params[pos++];
      };
      auto take_vec = [&](std::vector<double>& dst) {
        for (double& v : dst) v = params[pos++];
      };
      take_mat(m.l1.w);
      take_vec(m.l1.b);
      take_mat(m.l2.w);
      take_vec(m.l2.b);
      return m;
    };
    auto f_disc = [&](const std::vector<double>& params) {
      return adversarial_grl(shared, domains, coeff, rebuild(params)).domain_loss;
    };
    std::vector<double> analytic_disc = analytic.discriminator_grads.l1.w.data();
    analytic_disc.insert(analytic_disc.end(), analytic.discriminator_grads.l1.b.begin(),
                         analytic.discriminator_grads.l1.b.end());
    analytic_disc.insert(analytic_disc.end(),
                         analytic.discriminator_grads.l2.w.data().begin(),
                         analytic.discriminator_grads.l2.w.data().end());
    analytic_disc.insert(analytic_disc.end(), analytic.discriminator_grads.l2.b.begin(),
                         analytic.discriminator_grads.l2.b.end());
    merge(check.report,
          compare_gradients(analytic_disc, finite_diff_grad(f_disc, disc_flat, h)));
    check.instances++;
  }
  return check;
}

/// Builds a small random training batch directly (no dataset machinery).
inline std::vector<Sample> random_batch_samples(std::size_t b, std::size_t n,
                                                std::size_t d_raw,
                                                std::size_t num_domains,
                                                Rng& rng) {
  std::vector<Sample> samples(b);
  for (std::size_t i = 0; i < b; ++i) {
    samples[i].raw_features = gradsuite_detail::random_matrix(n, d_raw, rng);
    samples[i].class_label = i % 2;
    samples[i].domain_label = static_cast<int>(i % num_domains) + 1;
  }
  return samples;
}

/// Whole-objective check on the tiny reference configuration. Analytic
/// gradients come from the training path; the reference value freezes the
/// hard assignment and the feature centers (the two stop-gradient points)
/// and applies the reversed adversarial sign for generator-side parameters.
inline SuiteCheck check_end_to_end(std::uint64_t seed, double h = 1e-5,
                                   std::size_t instances = 20) {
  using namespace gradsuite_detail;
  SuiteCheck check{"end_to_end", {}, 0};
  for (std::uint64_t inst = 0; check.instances < instances; ++inst) {
    const std::uint64_t inst_seed = derive_seed(seed, 700 + inst);
    Rng rng(inst_seed);

    TrainConfig cfg;
    cfg.dims = ModelDims{5, 6, 4, 4, 1, 5, 3};  // d_raw h d k k2 h_D S
    cfg.weights.lambda1 = 0.2;
    cfg.weights.lambda2 = 0.15;
    cfg.weights.lambda3 = 0.1;
    cfg.weights.lambda4 = 0.25;
    cfg.weights.lambda5 = 0.3;
    cfg.weights.margin = 0.25;
    cfg.weights.grl_coeff = 0.7;
    cfg.weights.temperature = 2.0;
    cfg.seed = inst_seed;

    ModelParams params = init_model(cfg.dims, Aggregator::kVlad,
                                    cfg.weights.temperature, inst_seed);
    const std::vector<Sample> samples =
        random_batch_samples(8, 6, cfg.dims.d_raw, cfg.dims.num_domains, rng);
    std::vector<const Sample*> batch;
    for (const Sample& s : samples) batch.push_back(&s);

    // Freeze the stop-gradient context at the base point.
    const BatchForward base_fwd = forward_batch(params, batch);
    const CentroidAdaptResult base_ca = centroid_adapt_loss_and_grad(
        base_fwd.encoded, base_fwd.local_labels, params.vocab);
    std::vector<std::size_t> frozen_owner(base_fwd.encoded.rows());
    for (std::size_t i = 0; i < base_fwd.encoded.rows(); ++i)
      frozen_owner[i] = nearest_word(base_fwd.encoded.row(i), params.vocab.words);

    // Kink guards: rectifier pre-activations and hinge activations.
    {
      bool near = false;
      for (double v : base_fwd.encoder_cache.pre_act.data())
        if (std::abs(v) < 1e-4) near = true;
      const Matrix cls_logits = linear_forward(base_fwd.descriptors, params.classifier);
      Matrix shared(batch.size(), params.shared_dim());
      for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t c = 0; c < params.shared_dim(); ++c)
          shared(i, c) = base_fwd.descriptors(i, c);
      auto [dl, dc] = mlp_forward(shared, params.discriminator);
      for (double v : dc.pre_act.data())
        if (std::abs(v) < 1e-4) near = true;
      auto d2 = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < base_fwd.descriptors.cols(); ++c) {
          const double diff = base_fwd.descriptors(i, c) - base_fwd.descriptors(j, c);
          s += diff * diff;
        }
        return s;
      };
      for (std::size_t a = 0; a < batch.size() && !near; ++a)
        for (std::size_t p = 0; p < batch.size() && !near; ++p) {
          if (p == a || samples[p].class_label != samples[a].class_label) continue;
          for (std::size_t nn = 0; nn < batch.size(); ++nn) {
            if (samples[nn].class_label == samples[a].class_label) continue;
            if (std::abs(d2(a, p) - d2(a, nn) + cfg.weights.margin) < 1e-3) {
              near = true;
              break;
            }
          }
        }
      if (near) continue;
    }

    auto [outcome, analytic] = compute_gradients(params, batch, cfg);

    // Reference objective with the frozen stop-gradient context.
    auto objective = [&](ModelParams& p, double adv_sign) {
      const BatchForward fwd = forward_batch(p, batch);
      const Matrix cls_logits = linear_forward(fwd.descriptors, p.classifier);
      const double cls =
          cross_entropy_and_grad(cls_logits, fwd.class_labels).loss;
      const double trip =
          triplet_loss_and_grad(fwd.descriptors, fwd.class_labels, cfg.weights.margin)
              .loss;
      Matrix shared(batch.size(), p.shared_dim());
      for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t c = 0; c < p.shared_dim(); ++c)
          shared(i, c) = fwd.descriptors(i, c);
      const double adv =
          adversarial_grl(shared, fwd.domain_labels0, cfg.weights.grl_coeff,
                          p.discriminator)
              .domain_loss;
      const double ortho = ortho_loss_and_grad(p.vocab).loss;
      double c_adapt = 0.0;
      for (std::size_t c = 0; c < p.vocab.size(); ++c) {
        if (base_ca.stats.assigned_count[c] == 0) continue;
        for (std::size_t j = 0; j < p.vocab.dim(); ++j) {
          const double diff =
              base_ca.stats.feature_center(c, j) - p.vocab.words(c, j);
          c_adapt += diff * diff;
        }
      }
      LabeledResiduals res;
      res.residuals = Matrix(fwd.encoded.rows(), fwd.encoded.cols());
      res.cluster = frozen_owner;
      res.class_label = fwd.local_labels;
      res.num_clusters = p.vocab.size();
      for (std::size_t i = 0; i < fwd.encoded.rows(); ++i)
        for (std::size_t j = 0; j < fwd.encoded.cols(); ++j)
          res.residuals(i, j) = fwd.encoded(i, j) - p.vocab.words(frozen_owner[i], j);
      const double intra = intra_cluster_loss_and_grad(res).loss;
      return cls + cfg.weights.lambda1 * trip +
             adv_sign * cfg.weights.lambda2 * adv + cfg.weights.lambda3 * ortho +
             cfg.weights.lambda4 * c_adapt + cfg.weights.lambda5 * intra;
    };

    // Parameter groups share the flat layout of tensor_refs; the adversarial
    // sign flips between generator-side tensors and the discriminator.
    std::vector<double> analytic_flat;
    for (const auto& ref : tensor_refs(analytic))
      analytic_flat.insert(analytic_flat.end(), ref.data, ref.data + ref.len);

    const std::vector<double> base_flat = flatten_params(params);
    std::size_t offset = 0;
    GradCheckReport inst_report;
    for (const auto& ref : tensor_refs(params)) {
      const bool disc_group = ref.name.rfind("discriminator", 0) == 0;
      const double sign = disc_group ? 1.0 : -cfg.weights.grl_coeff;
      auto f = [&](const std::vector<double>& flat_group) {
        ModelParams p = params;
        std::vector<double> full = base_flat;
        for (std::size_t i = 0; i < flat_group.size(); ++i)
          full[offset + i] = flat_group[i];
        unflatten_params(full, p);
        return objective(p, sign);
      };
      std::vector<double> group(base_flat.begin() + offset,
                                base_flat.begin() + offset + ref.len);
      std::vector<double> analytic_group(analytic_flat.begin() + offset,
                                         analytic_flat.begin() + offset + ref.len);
      merge(inst_report,
            compare_gradients(analytic_group, finite_diff_grad(f, group, h)));
      offset += ref.len;
    }
    merge(check.report, inst_report);
    check.instances++;
  }
  return check;
}

/// The six suite reports printed by the gradcheck command. The end-to-end
/// entry covers the adversarial path for every parameter group; the
/// standalone adversarial check is available separately.
inline std::vector<SuiteCheck> run_gradient_suite(std::uint64_t seed,
                                                  double h = 1e-5,
                                                  std::size_t instances = 20) {
  return {check_vlad_backward(seed, h, instances),
          check_ortho(seed, h, instances),
          check_c_adapt(seed, h, instances),
          check_intra(seed, h, instances),
          check_triplet(seed, h, instances),
          check_end_to_end(seed, h, instances)};
}

}  // namespace vladvsa
