#pragma once

#include <bitset>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hallu/classifiers.hpp"
#include "hallu/datasets.hpp"
#include "hallu/features.hpp"
#include "hallu/http_provider.hpp"
#include "hallu/metrics.hpp"
#include "hallu/toy_lm.hpp"

namespace hallu {

/// Bit i selects kFeatureNames[i]. Text form lists the bits in feature
/// order, so "0100" is avgtp alone.
class FeatureMask {
 public:
  FeatureMask() = default;
  static FeatureMask all() { return FeatureMask(); }
  static FeatureMask only(std::size_t feature);
  /// Throws ConfigError on malformed text or an empty mask.
  static FeatureMask parse(std::string_view text);

  bool test(std::size_t feature) const { return bits_.test(feature); }
  std::vector<std::size_t> columns() const;
  std::vector<std::string> names() const;
  std::string str() const;

 private:
  std::bitset<4> bits_{0xF};
};

inline bool operator==(const FeatureMask& a, const FeatureMask& b) { return a.str() == b.str(); }

/// Full set, then each feature alone.
std::vector<FeatureMask> default_ablation_masks();

enum class ClassifierKind { LogisticRegression, Mlp };

std::string_view to_string(ClassifierKind kind);

struct EvaluatorConfig {
  std::string kind = "toy";  // "toy" | "http"
  std::string name;          // cache key; defaults per kind
  std::size_t context_window = 1024;  // toy only
  std::optional<ToyBigramLM> lm;      // toy only; default is the reference table
  HttpProviderConfig http;

  std::string resolved_name() const;
};

struct SplitConfig {
  SplitProtocol protocol = SplitProtocol::StratifiedFraction;
  double fraction = 0.10;
  SplitKey key = SplitKey::Generator;
  std::string held_out;
  std::size_t n_pos = 500;
  std::size_t n_neg = 500;
};

/// `dataset.task == "cache"` takes the pool straight from the feature cache
/// rows of the configured (evaluator, variant) instead of a dataset file.
struct ExperimentConfig {
  std::string task = "qa";
  std::filesystem::path dataset_path;
  EvaluatorConfig evaluator;
  Variant variant;
  ClassifierKind classifier = ClassifierKind::LogisticRegression;
  TrainConfigLR lr;
  TrainConfigMlp mlp;
  SplitConfig split;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::filesystem::path feature_cache = "features.jsonl";
  std::filesystem::path output = "report.json";
  std::optional<std::filesystem::path> model_out;
  std::optional<std::filesystem::path> model;  // report-coefficients input
  std::vector<FeatureMask> ablation_masks = default_ablation_masks();
  double threshold = 0.5;
  std::size_t threads = 1;
  bool keep_going = false;
};

/// Parses a JSON config document. Relative paths resolve against `base_dir`.
/// Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides; each set field replaces the config value.
struct ConfigOverrides {
  std::optional<std::string> evaluator;
  std::optional<std::string> variant;
  std::optional<std::string> classifier;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::filesystem::path> cache;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> model;
  bool keep_going = false;
};

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

std::unique_ptr<ProbabilityProvider> make_provider(const EvaluatorConfig& config);

struct ExtractSummary {
  std::size_t samples = 0;
  BatchResult batch;
};

ExtractSummary run_extract(const ExperimentConfig& config);

struct SeedRun {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  RunMetrics metrics;
};

struct MaskResult {
  FeatureMask mask;
  std::vector<SeedRun> runs;
  EvalReport report;
};

struct TrainEvalResult {
  std::string evaluator;
  std::string variant;
  double exact_min_fraction = 1.0;
  std::vector<MaskResult> rows;  // one for train-eval, one per mask for ablate
};

/// Trains and evaluates once per seed on all four features. Writes the JSON
/// report to config.output and a text table next to it (".txt").
TrainEvalResult run_train_eval(const ExperimentConfig& config);

/// One row per configured mask; masked features are dropped from the input.
TrainEvalResult run_ablate(const ExperimentConfig& config);

std::string report_json(const ExperimentConfig& config, const TrainEvalResult& result,
                        std::string_view command);
std::string report_table(const ExperimentConfig& config, const TrainEvalResult& result,
                         std::string_view command);

struct CoefficientReport {
  std::vector<std::string> features;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd odds;
  std::optional<std::size_t> largest;  // unset when the maximum is tied
};

/// Throws WrongModelKind for an MLP file.
CoefficientReport report_coefficients(const std::filesystem::path& model_path);
std::string coefficient_table(const CoefficientReport& report);

}  // namespace hallu
