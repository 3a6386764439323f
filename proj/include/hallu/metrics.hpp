#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hallu {

/// Positive class is label 1 (hallucination).
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

double accuracy(std::span<const int> labels, std::span<const int> predictions);

/// F1 of class 1; 0 when there are no true positives.
double f1_score(std::span<const int> labels, std::span<const int> predictions);

/// Average precision: sum over ranks k holding a positive of
/// (R_k - R_{k-1}) * P_k, ranking by score descending. Equal scores keep
/// their input order. Throws NoPositives, LengthMismatch.
double pr_auc(std::span<const int> labels, std::span<const double> scores);

struct RunMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double pr_auc = 0.0;
  std::size_t n = 0;  // evaluated pairs
};

RunMetrics evaluate(std::span<const int> labels, std::span<const double> scores,
                    double threshold = 0.5);

/// Arithmetic means over runs; per-run values are kept.
struct EvalReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  double pr_auc = 0.0;
  std::size_t n = 0;  // evaluated pairs summed over runs
  std::size_t runs = 0;
  std::vector<RunMetrics> per_run;
};

EvalReport aggregate(std::vector<RunMetrics> runs);

}  // namespace hallu
