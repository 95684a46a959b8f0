#pragma once
// Evaluation metrics: accuracy/confusion reports and ROC-AUC. The AUC is
// computed two ways on every call (trapezoid over the threshold sweep and the
// Mann-Whitney pair statistic with ties counting 0.5) and both must agree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "graphss/graph.hpp"

namespace graphss {

struct MetricsReport {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;     // rows = reference, cols = predicted
  Vec per_class_recall;
  double runtime_seconds = 0.0;  // filled by experiment drivers
  double unit_runtime = 0.0;     // seconds per 100 evaluation nodes
};

inline MetricsReport compute_metrics(const std::vector<int>& predicted,
                                     const std::vector<int>& reference, int num_classes) {
  if (predicted.size() != reference.size() || predicted.empty())
    throw ValidationError("compute_metrics: length mismatch or empty input");
  MetricsReport r;
  r.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= num_classes || reference[i] < 0 ||
        reference[i] >= num_classes)
      throw ValidationError("compute_metrics: label out of range");
    ++r.confusion(reference[i], predicted[i]);
  }
  r.accuracy = static_cast<double>(r.confusion.diagonal().sum()) /
               static_cast<double>(predicted.size());
  r.per_class_recall = Vec::Zero(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const int row_total = r.confusion.row(c).sum();
    if (row_total > 0)
      r.per_class_recall(c) = static_cast<double>(r.confusion(c, c)) / row_total;
  }
  return r;
}

// ln(1 + count), the log-scale form used for confusion heatmap export.
inline Mat log_scale_confusion(const Eigen::MatrixXi& confusion) {
  Mat out(confusion.rows(), confusion.cols());
  for (Eigen::Index i = 0; i < confusion.rows(); ++i)
    for (Eigen::Index j = 0; j < confusion.cols(); ++j)
      out(i, j) = std::log1p(static_cast<double>(confusion(i, j)));
  return out;
}

struct RocPoint {
  double threshold = 0.0;  // predict positive iff score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocReport {
  std::vector<RocPoint> points;  // descending threshold, (0,0) .. (1,1)
  double auc = 0.5;
  std::vector<std::pair<double, bool>> labels;  // inputs kept for cross-checks
};

inline RocReport roc_auc(std::vector<std::pair<double, bool>> scores_and_truth) {
  std::int64_t pos = 0, neg = 0;
  for (const auto& [score, truth] : scores_and_truth) {
    if (!std::isfinite(score)) throw ValidationError("roc_auc: non-finite score");
    (truth ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw ValidationError("roc_auc: need at least one positive and one negative");

  RocReport report;
  report.labels = scores_and_truth;
  std::sort(scores_and_truth.begin(), scores_and_truth.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  report.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  // Mann-Whitney numerator scaled by 2: correctly ordered pairs count 2, ties 1.
  std::int64_t mw_twice = 0;
  std::size_t i = 0;
  while (i < scores_and_truth.size()) {
    const double threshold = scores_and_truth[i].first;
    std::int64_t dtp = 0, dfp = 0;
    while (i < scores_and_truth.size() && scores_and_truth[i].first == threshold) {
      (scores_and_truth[i].second ? dtp : dfp) += 1;
      ++i;
    }
    mw_twice += dtp * 2 * (neg - fp - dfp) + dtp * dfp;
    tp += dtp;
    fp += dfp;
    report.points.push_back({threshold, static_cast<double>(fp) / neg,
                             static_cast<double>(tp) / pos});
  }

  double auc = 0.0;  // trapezoid over the sweep points
  for (std::size_t j = 1; j < report.points.size(); ++j)
    auc += (report.points[j].fpr - report.points[j - 1].fpr) *
           (report.points[j].tpr + report.points[j - 1].tpr) * 0.5;
  report.auc = auc;

  const double mw = static_cast<double>(mw_twice) /
                    (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  if (std::abs(mw - auc) > 1e-9)
    throw RuntimeFailure("roc_auc: trapezoid and pair statistic disagree");
  return report;
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Sample standard deviation (n-1 denominator), 0 for fewer than two values.
inline double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace graphss
