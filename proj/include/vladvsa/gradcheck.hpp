#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vladvsa/error.hpp"

namespace vladvsa {

struct GradCheckReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t num_params_checked = 0;
  std::size_t worst_index = 0;

  bool passes(double rel_tol) const { return max_rel_err < rel_tol; }
};

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
/// Throws NumericError if f returns a non-finite value near x.
inline std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Per-coordinate relative error with a small denominator floor so that
/// near-zero coordinates are judged on absolute error.
inline GradCheckReport compare_gradients(const std::vector<double>& analytic,
                                         const std::vector<double>& numeric,
                                         double denom_floor = 1e-3) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("compare_gradients: length mismatch");
  }
  GradCheckReport r;
  r.num_params_checked = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double abs_err = std::abs(analytic[i] - numeric[i]);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), denom_floor});
    const double rel = abs_err / denom;
    r.max_abs_err = std::max(r.max_abs_err, abs_err);
    if (rel > r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace vladvsa
