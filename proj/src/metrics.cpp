#include "hallu/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "hallu/error.hpp"

namespace hallu {
namespace {

template <typename T>
void check_pair(std::span<const int> labels, std::span<const T> other) {
  if (labels.size() != other.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels vs " +
                                               std::to_string(other.size()) + " values");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no labels");
}

}  // namespace

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions) {
  check_pair(labels, predictions);
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == 1;
    const bool pred = predictions[i] == 1;
    if (truth && pred) ++c.tp;
    else if (!truth && pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy(std::span<const int> labels, std::span<const int> predictions) {
  const auto c = confusion(labels, predictions);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double f1_score(std::span<const int> labels, std::span<const int> predictions) {
  const auto c = confusion(labels, predictions);
  if (c.tp == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2.0 * precision * recall / (precision + recall);
}

double pr_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels vs " +
                                               std::to_string(scores.size()) + " scores");
  }
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw Error(ErrorCode::NoPositives, "average precision needs a positive");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double p = static_cast<double>(positives);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 1) continue;
    ++tp;
    const double recall = static_cast<double>(tp) / p;
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

RunMetrics evaluate(std::span<const int> labels, std::span<const double> scores,
                    double threshold) {
  check_pair(labels, scores);
  std::vector<int> predictions(scores.size());
  std::transform(scores.begin(), scores.end(), predictions.begin(),
                 [&](double s) { return s >= threshold ? 1 : 0; });
  RunMetrics m;
  m.accuracy = accuracy(labels, predictions);
  m.f1 = f1_score(labels, predictions);
  m.pr_auc = pr_auc(labels, scores);
  m.n = labels.size();
  return m;
}

EvalReport aggregate(std::vector<RunMetrics> runs) {
  if (runs.empty()) throw Error(ErrorCode::EmptyInput, "no runs to aggregate");
  EvalReport r;
  for (const auto& m : runs) {
    r.accuracy += m.accuracy;
    r.f1 += m.f1;
    r.pr_auc += m.pr_auc;
    r.n += m.n;
  }
  const double k = static_cast<double>(runs.size());
  r.accuracy /= k;
  r.f1 /= k;
  r.pr_auc /= k;
  r.runs = runs.size();
  r.per_run = std::move(runs);
  return r;
}

}  // namespace hallu
