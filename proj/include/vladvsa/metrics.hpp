#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace vladvsa {

struct Metrics {
  double auc = 0.0;
  double hter = 0.0;
  double eer_threshold = 0.0;
  double far = 0.0;  // fakes accepted as real
  double frr = 0.0;  // reals rejected
};

/// Area under the ROC by the trapezoidal rule over the exact step curve.
/// Positives score high. Equals P(pos > neg) + P(pos = neg)/2.
inline double roc_auc(std::vector<double> pos, std::vector<double> neg) {
  if (pos.empty() || neg.empty()) {
    throw std::invalid_argument("roc_auc: both score sets must be non-empty");
  }
  std::vector<double> thresholds = pos;
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  double area = 0.0;
  double prev_fpr = 0.0;
  double prev_tpr = 0.0;
  for (double t : thresholds) {
    const double tp = static_cast<double>(
        std::count_if(pos.begin(), pos.end(), [&](double s) { return s >= t; }));
    const double fp = static_cast<double>(
        std::count_if(neg.begin(), neg.end(), [&](double s) { return s >= t; }));
    const double tpr = tp / static_cast<double>(pos.size());
    const double fpr = fp / static_cast<double>(neg.size());
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
  return area;
}

struct ErrorRates {
  double far = 0.0;
  double frr = 0.0;
  double threshold = 0.0;
};

/// FAR/FRR at the equal-error point: the candidate threshold minimizing
/// |FAR - FRR|, scanning midpoints between adjacent scores. A sample is
/// accepted as real when its real-score exceeds the threshold.
inline ErrorRates eer_point(const std::vector<double>& real_scores,
                            const std::vector<double>& fake_scores) {
  std::vector<double> all = real_scores;
  all.insert(all.end(), fake_scores.begin(), fake_scores.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> candidates;
  candidates.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    candidates.push_back((all[i] + all[i + 1]) / 2.0);
  }
  candidates.push_back(all.back() + 1.0);

  ErrorRates best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    const double frr = static_cast<double>(std::count_if(
                           real_scores.begin(), real_scores.end(),
                           [&](double s) { return !(s > t); })) /
                       static_cast<double>(real_scores.size());
    const double far = static_cast<double>(std::count_if(
                           fake_scores.begin(), fake_scores.end(),
                           [&](double s) { return s > t; })) /
                       static_cast<double>(fake_scores.size());
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best = {far, frr, t};
    }
  }
  return best;
}

/// AUC on realness scores plus HTER at the equal-error threshold computed
/// on the same evaluation set.
inline Metrics compute_metrics(const std::vector<double>& real_scores,
                               const std::vector<double>& fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) {
    throw std::invalid_argument("compute_metrics: needs both classes present");
  }
  Metrics m;
  m.auc = roc_auc(real_scores, fake_scores);
  const ErrorRates at_eer = eer_point(real_scores, fake_scores);
  m.far = at_eer.far;
  m.frr = at_eer.frr;
  m.eer_threshold = at_eer.threshold;
  m.hter = (m.far + m.frr) / 2.0;
  return m;
}

}  // namespace vladvsa
