#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hallu/features.hpp"

namespace hallu {

/// Rows are samples, columns are features in `kFeatureNames` order (or a
/// subset of it when features are masked out).
using FeatureMatrix = Eigen::MatrixXd;
/// 0/1 targets stored as doubles.
using LabelVector = Eigen::VectorXd;

/// z-score parameters fitted on the training split.
struct FeatureScaling {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaling fit(const FeatureMatrix& X);
  FeatureMatrix apply(const FeatureMatrix& X) const;
};

struct TrainConfigLR {
  /// Penalty (l2_strength / 2n) * |w|^2 on the weights, bias excluded.
  /// 1.0 matches C = 1 in the usual liblinear/lbfgs convention.
  double l2_strength = 1.0;
  int max_iter = 100;
  double tol = 1e-4;
  bool standardize = false;
};

struct TrainConfigMlp {
  std::size_t hidden = 512;
  int epochs = 10000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool standardize = false;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::vector<std::string> features;
  TrainConfigLR config;
  std::uint64_t seed = 0;
  std::optional<FeatureScaling> scaling;
  int iterations = 0;
  bool converged = false;
};

/// inputs -> H -> H -> 1, ReLU hidden layers, sigmoid output.
struct MlpParams {
  Eigen::MatrixXd w1;     // H x inputs
  Eigen::VectorXd b1;     // H
  Eigen::MatrixXd w2;     // H x H
  Eigen::VectorXd b2;     // H
  Eigen::RowVectorXd w3;  // 1 x H
  double b3 = 0.0;

  static MlpParams zeros(Eigen::Index inputs, Eigen::Index hidden);
  Eigen::Index size() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  bool all_finite() const;
};

struct MlpModel {
  MlpParams params;
  std::vector<std::string> features;
  TrainConfigMlp config;
  std::uint64_t seed = 0;
  std::optional<FeatureScaling> scaling;
};

using Classifier = std::variant<LogisticModel, MlpModel>;

/// Mean BCE plus the L2 term for parameters theta = [w; b]. Writes the
/// gradient when `grad` is non-null.
double lr_objective(const Eigen::VectorXd& theta, const FeatureMatrix& X, const LabelVector& y,
                    double l2_strength, Eigen::VectorXd* grad = nullptr);

/// Mean BCE of the network; fills `grad` (same layout as params) if given.
double mlp_loss(const MlpParams& params, const FeatureMatrix& X, const LabelVector& y,
                MlpParams* grad = nullptr);

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)) from `seed`, zero biases.
MlpParams init_mlp(Eigen::Index inputs, Eigen::Index hidden, std::uint64_t seed);

/// Checks n >= 2, both classes present, finite features.
void check_training_data(const FeatureMatrix& X, const LabelVector& y);

LogisticModel train_lr(const FeatureMatrix& X, const LabelVector& y,
                       const TrainConfigLR& config = {},
                       std::vector<std::string> features = {});

MlpModel train_mlp(const FeatureMatrix& X, const LabelVector& y,
                   const TrainConfigMlp& config, std::uint64_t seed,
                   std::vector<std::string> features = {});

double predict_proba(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_proba(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_proba(const Classifier& model, const FeatureVector& x);

Eigen::VectorXd predict_proba_batch(const LogisticModel& model, const FeatureMatrix& X);
Eigen::VectorXd predict_proba_batch(const MlpModel& model, const FeatureMatrix& X);
Eigen::VectorXd predict_proba_batch(const Classifier& model, const FeatureMatrix& X);

/// 1 iff proba >= threshold; threshold must lie in (0, 1).
int classify(double proba, double threshold = 0.5);

template <typename Model>
int classify(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x,
             double threshold = 0.5) {
  return classify(predict_proba(model, x), threshold);
}

/// exp of each weight, in feature order.
Eigen::VectorXd odds_ratios(const LogisticModel& model);

/// JSON document: schema_version, kind, features, seed, train_config,
/// scaling, parameters (nested arrays).
std::string to_json(const Classifier& model);
Classifier classifier_from_json(std::string_view text);
void save_model(const Classifier& model, const std::filesystem::path& path);
Classifier load_model(const std::filesystem::path& path);

}  // namespace hallu
