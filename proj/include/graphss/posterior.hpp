#pragma once
// Exact enumeration of the joint label posterior for desk-sized instances,
// used as the correctness oracle for the Gibbs sampler.
//
// With confusion counts C(z) accumulated from an assignment z and noisy
// labels y, the unnormalized joint is
//
//   P(z) ∝ prod_n probs[n][z_n] *
//          prod_k [ prod_k' Gamma(alpha_k' + C_kk') / Gamma(sum_k'(alpha_k' + C_kk')) ]
//
// Enumerates all K^N assignments in log space and marginalizes per node.

#include <cmath>
#include <vector>

#include "graphss/inference.hpp"

namespace graphss {

inline Mat exact_posterior(const Mat& class_probs, const std::vector<int>& noisy_labels,
                           const Vec& alpha) {
  const int n = static_cast<int>(class_probs.rows());
  const int k = static_cast<int>(class_probs.cols());
  if (n > 8 || k > 4)
    throw ValidationError("exact_posterior: instance too large (N <= 8, K <= 4)");
  if (n == 0) throw ValidationError("exact_posterior: empty instance");
  if (static_cast<int>(noisy_labels.size()) != n)
    throw ValidationError("exact_posterior: label vector length mismatch");
  check_alpha(alpha);
  if (static_cast<int>(alpha.size()) != k)
    throw ValidationError("exact_posterior: alpha length mismatch");

  const double alpha_sum = alpha.sum();
  std::vector<int> z(static_cast<std::size_t>(n), 0);
  std::vector<long long> counts(static_cast<std::size_t>(k) * k, 0);

  Mat marg_exp = Mat::Zero(n, k);
  std::vector<double> log_joint;
  std::vector<std::vector<int>> assignments;
  log_joint.reserve(1);

  double max_log = -std::numeric_limits<double>::infinity();
  while (true) {
    std::fill(counts.begin(), counts.end(), 0);
    double lp = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = class_probs(i, z[static_cast<std::size_t>(i)]);
      lp += p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
      ++counts[static_cast<std::size_t>(z[static_cast<std::size_t>(i)]) * k +
               noisy_labels[static_cast<std::size_t>(i)]];
    }
    for (int row = 0; row < k; ++row) {
      long long row_total = 0;
      for (int col = 0; col < k; ++col) {
        const long long c = counts[static_cast<std::size_t>(row) * k + col];
        row_total += c;
        lp += std::lgamma(alpha(col) + static_cast<double>(c));
      }
      lp -= std::lgamma(alpha_sum + static_cast<double>(row_total));
    }
    log_joint.push_back(lp);
    assignments.push_back(z);
    if (lp > max_log) max_log = lp;

    int pos = n - 1;  // odometer over K^N assignments
    while (pos >= 0 && ++z[static_cast<std::size_t>(pos)] == k) {
      z[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }

  double total = 0.0;
  for (std::size_t a = 0; a < log_joint.size(); ++a) {
    const double w = std::exp(log_joint[a] - max_log);
    total += w;
    for (int i = 0; i < n; ++i)
      marg_exp(i, assignments[a][static_cast<std::size_t>(i)]) += w;
  }
  if (!(total > 0.0)) throw RuntimeFailure("exact_posterior: zero total probability");
  return marg_exp / total;
}

}  // namespace graphss
