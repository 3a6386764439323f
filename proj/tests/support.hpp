#pragma once

// Test-only oracles and helpers. Nothing here calls the code paths it is
// used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "hallu/features.hpp"
#include "hallu/toy_lm.hpp"

namespace hallu::test {

inline std::filesystem::path data_dir() { return HALLU_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hallu-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct NaiveFeatures {
  double mtp, avgtp, mpd, mps;
};

/// Walks the bigram table entry by entry, materializing the full vocabulary
/// distribution at each position, and aggregates with plain loops.
inline NaiveFeatures brute_force_features(const ToyBigramLM& lm,
                                          const std::vector<std::string>& condition,
                                          const std::vector<std::string>& generation) {
  const auto& vocab = lm.vocab();
  auto lookup = [&](const std::string& t) {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (vocab[i] == t) return static_cast<Eigen::Index>(i);
    }
    return Eigen::Index{-1};
  };

  Eigen::Index prev = condition.empty() ? -1 : lookup(condition.back());
  std::vector<double> p_tok, dev, spread;
  for (const auto& tok : generation) {
    std::vector<double> dist(vocab.size());
    for (std::size_t v = 0; v < vocab.size(); ++v) {
      dist[v] = prev < 0 ? lm.start()[static_cast<Eigen::Index>(v)]
                         : lm.transition()(prev, static_cast<Eigen::Index>(v));
    }
    double hi = dist[0], lo = dist[0];
    for (double p : dist) {
      if (p > hi) hi = p;
      if (p < lo) lo = p;
    }
    const double p = dist[static_cast<std::size_t>(lookup(tok))];
    p_tok.push_back(p);
    dev.push_back(hi - p);
    spread.push_back(hi - lo);
    prev = lookup(tok);
  }

  NaiveFeatures f{p_tok[0], 0.0, dev[0], spread[0]};
  double sum = 0.0;
  for (std::size_t i = 0; i < p_tok.size(); ++i) {
    if (p_tok[i] < f.mtp) f.mtp = p_tok[i];
    if (dev[i] > f.mpd) f.mpd = dev[i];
    if (spread[i] < f.mps) f.mps = spread[i];
    sum += p_tok[i];
  }
  f.avgtp = sum / static_cast<double>(p_tok.size());
  return f;
}

/// Average precision by threshold enumeration. Item j as the cutoff selects
/// every item scored above it plus equal-scored items at or before it in
/// input order. For each cutoff size k, counts precision and recall directly
/// and sums (R_k - R_{k-1}) * P_k.
inline double brute_force_average_precision(const std::vector<int>& labels,
                                            const std::vector<double>& scores) {
  const std::size_t n = labels.size();
  std::size_t positives = 0;
  for (int l : labels) positives += l == 1 ? 1 : 0;
  std::vector<std::size_t> tp_at(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t size = 0, tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool selected = scores[i] > scores[j] || (scores[i] == scores[j] && i <= j);
      if (selected) {
        ++size;
        tp += labels[i] == 1 ? 1 : 0;
      }
    }
    tp_at[size] = tp;
  }
  const double p = static_cast<double>(positives);
  double ap = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (tp_at[k] == tp_at[k - 1]) continue;
    const double recall = static_cast<double>(tp_at[k]) / p;
    const double prev_recall = static_cast<double>(tp_at[k - 1]) / p;
    const double precision = static_cast<double>(tp_at[k]) / static_cast<double>(k);
    ap += (recall - prev_recall) * precision;
  }
  return ap;
}

/// Central differences of `f` at `x`.
template <typename F>
Eigen::VectorXd numeric_gradient(F&& f, Eigen::VectorXd x, double eps = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x);
    x[i] = orig - eps;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// Cache rows where only avgtp separates the classes: hallucinated rows
/// draw avgtp from U(0, 0.4), faithful rows from U(0.6, 1). mtp = u * avgtp
/// keeps mtp <= avgtp; mpd and mps are noise. With `shuffle_labels` the
/// labels are permuted afterwards, destroying the signal.
inline std::vector<FeatureRecord> planted_records(std::size_t n, std::uint64_t seed,
                                                  const std::string& evaluator,
                                                  bool shuffle_labels = false) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FeatureRecord> rows;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    r.sample_id = id;
    r.label = static_cast<int>(i % 2);
    r.features.avgtp = r.label == 1 ? 0.4 * u(gen) : 0.6 + 0.4 * u(gen);
    r.features.mtp = u(gen) * r.features.avgtp;
    r.features.mpd = u(gen);
    r.features.mps = u(gen);
    r.evaluator = evaluator;
    r.exact_min = true;
    rows.push_back(r);
  }
  if (shuffle_labels) {
    std::vector<int> labels;
    for (const auto& r : rows) labels.push_back(r.label);
    std::shuffle(labels.begin(), labels.end(), gen);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].label = labels[i];
  }
  return rows;
}

}  // namespace hallu::test
