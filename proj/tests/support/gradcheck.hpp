#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dta/seq2seq.hpp"

namespace dta::testing {

struct TensorCheck {
  std::string name;
  double max_rel = 0.0;   // max over entries of |a - n| / max(|a|, |n|, floor)
  double norm_rel = 0.0;  // ||a - n|| / max(||a||, ||n||)
  double max_abs = 0.0;
};

// Central finite differences of the summed batch loss against the analytic
// gradient, entry by entry. Dropout is off.
inline std::vector<TensorCheck> gradient_check(Seq2Seq<double>& model, const std::vector<const Example*>& batch,
                                               double eps = 1e-4, double floor = 1e-6) {
  Parameters<double> analytic;
  model.loss(batch, &analytic);
  std::vector<Eigen::MatrixXd*> grads;
  analytic.for_each([&](const char*, Eigen::MatrixXd& m) { grads.push_back(&m); });

  std::vector<TensorCheck> out;
  std::size_t k = 0;
  model.params().for_each([&](const char* name, Eigen::MatrixXd& w) {
    const Eigen::MatrixXd& a = *grads[k++];
    Eigen::MatrixXd numeric(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + eps;
      const double up = model.loss(batch).loss;
      w.data()[i] = saved - eps;
      const double down = model.loss(batch).loss;
      w.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2 * eps);
    }
    TensorCheck row{name};
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double x = a.data()[i], y = numeric.data()[i];
      const double diff = std::abs(x - y);
      row.max_abs = std::max(row.max_abs, diff);
      row.max_rel = std::max(row.max_rel, diff / std::max({std::abs(x), std::abs(y), floor}));
    }
    const double scale = std::max(a.norm(), numeric.norm());
    row.norm_rel = scale > 0 ? (a - numeric).norm() / scale : 0.0;
    out.push_back(row);
  });
  return out;
}

}  // namespace dta::testing
