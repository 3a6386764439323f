#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hallu/provider.hpp"

namespace hallu {

struct LabeledPair;

/// Fixed feature order used in files, model weights, and reports.
inline constexpr std::array<std::string_view, 4> kFeatureNames = {"mtp", "avgtp", "mpd", "mps"};

struct FeatureVector {
  double mtp = 0.0;    // min_i p(t_i)
  double avgtp = 0.0;  // mean_i p(t_i)
  double mpd = 0.0;    // max_i (p(v*) - p(t_i))
  double mps = 0.0;    // min_i (p(v*) - p(v-))

  std::array<double, 4> as_array() const { return {mtp, avgtp, mpd, mps}; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Which prompt segments the evaluator sees.
struct Variant {
  bool include_condition = true;
  bool include_knowledge = false;

  /// "with_condition+no_knowledge" and the like.
  std::string str() const;
  /// Accepts the canonical form, or a single condition part
  /// ("with_condition" / "no_condition") with knowledge off.
  static Variant parse(std::string_view text);

  friend bool operator==(const Variant&, const Variant&) = default;
};

struct FeatureRecord {
  std::string sample_id;
  FeatureVector features;
  int label = 0;
  std::string evaluator;
  Variant variant;
  bool exact_min = true;
};

/// Throws EmptySequence on empty input.
FeatureVector compute_features(std::span<const TokenRecord> records);

/// Scores one pair and aggregates. Provider errors are rethrown with the
/// sample id in the message.
FeatureRecord extract(const LabeledPair& sample, const ProbabilityProvider& provider,
                      const Variant& variant);

struct ExtractFailure {
  std::string sample_id;
  std::string message;
  int exit_code = 1;
};

struct BatchResult {
  std::size_t added = 0;
  std::size_t skipped = 0;  // already cached
  std::vector<ExtractFailure> failures;
  /// Fraction of rows for this (evaluator, variant) in the cache with exact p_min.
  double exact_min_fraction = 1.0;
};

/// Extracts every uncached sample and appends the new rows to the JSON-lines
/// cache at `cache_path`, sorted by sample id. Per-sample failures are
/// collected rather than aborting the batch.
BatchResult extract_batch(std::span<const LabeledPair> samples,
                          const ProbabilityProvider& provider, const Variant& variant,
                          const std::filesystem::path& cache_path, std::size_t threads = 1);

/// Line format: {"id","evaluator","variant","mtp","avgtp","mpd","mps","label","exact_min"}.
std::string to_cache_line(const FeatureRecord& record);
FeatureRecord from_cache_line(std::string_view line);

/// Reads all rows; a missing file is an empty cache. Throws MalformedRecord
/// on a bad line and on duplicate (id, evaluator, variant) keys.
std::vector<FeatureRecord> read_cache(const std::filesystem::path& path);

void append_cache(const std::filesystem::path& path, std::span<const FeatureRecord> records);

}  // namespace hallu
