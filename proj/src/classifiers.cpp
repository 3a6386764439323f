#include "hallu/classifiers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hallu/error.hpp"
#include "hallu/lbfgs.hpp"
#include "hallu/math.hpp"
#include "hallu/rng.hpp"

namespace hallu {
namespace {

using ordered_json = nlohmann::ordered_json;
constexpr int kSchemaVersion = 1;

std::vector<std::string> default_names(Eigen::Index cols, std::vector<std::string> names) {
  if (names.empty()) {
    if (cols == static_cast<Eigen::Index>(kFeatureNames.size())) {
      for (auto n : kFeatureNames) names.emplace_back(n);
    } else {
      for (Eigen::Index i = 0; i < cols; ++i) names.push_back("x" + std::to_string(i));
    }
  }
  if (static_cast<Eigen::Index>(names.size()) != cols) {
    throw Error(ErrorCode::InvalidArgument, "feature names do not match matrix width");
  }
  return names;
}

void check_finite_input(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index expected) {
  if (x.size() != expected) {
    throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(expected) +
                                                " features, got " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteFeature, "input has a non-finite feature");
}

void check_finite_batch(const FeatureMatrix& X, Eigen::Index expected) {
  if (X.cols() != expected) {
    throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(expected) +
                                                " feature columns, got " +
                                                std::to_string(X.cols()));
  }
  if (!X.allFinite()) throw Error(ErrorCode::NonFiniteFeature, "input has a non-finite feature");
}

FeatureMatrix scaled(const std::optional<FeatureScaling>& scaling, const FeatureMatrix& X) {
  return scaling ? scaling->apply(X) : X;
}

struct Forward {
  Eigen::MatrixXd pre1, act1, pre2, act2;  // n x H
  Eigen::VectorXd logits;                  // n
};

Forward forward(const MlpParams& p, const FeatureMatrix& X) {
  Forward f;
  f.pre1 = (X * p.w1.transpose()).rowwise() + p.b1.transpose();
  f.act1 = f.pre1.cwiseMax(0.0);
  f.pre2 = (f.act1 * p.w2.transpose()).rowwise() + p.b2.transpose();
  f.act2 = f.pre2.cwiseMax(0.0);
  f.logits = (f.act2 * p.w3.transpose()).array() + p.b3;
  return f;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::MatrixXd matrix_from(const ordered_json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::MalformedRecord, "ragged matrix in model file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const ordered_json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

ordered_json scaling_json(const std::optional<FeatureScaling>& s) {
  if (!s) return nullptr;
  return {{"mean", vector_json(s->mean)}, {"scale", vector_json(s->scale)}};
}

std::optional<FeatureScaling> scaling_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return FeatureScaling{vector_from(j.at("mean")), vector_from(j.at("scale"))};
}

}  // namespace

FeatureScaling FeatureScaling::fit(const FeatureMatrix& X) {
  FeatureScaling s;
  s.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(X.rows()))
                .sqrt()
                .transpose();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale[i] > 0.0)) s.scale[i] = 1.0;
  }
  return s;
}

FeatureMatrix FeatureScaling::apply(const FeatureMatrix& X) const {
  return ((X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

MlpParams MlpParams::zeros(Eigen::Index inputs, Eigen::Index hidden) {
  MlpParams p;
  p.w1 = Eigen::MatrixXd::Zero(hidden, inputs);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
  p.b2 = Eigen::VectorXd::Zero(hidden);
  p.w3 = Eigen::RowVectorXd::Zero(hidden);
  p.b3 = 0.0;
  return p;
}

Eigen::Index MlpParams::size() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1;
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index o = 0;
  auto put = [&](const auto& block) {
    flat.segment(o, block.size()) = Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
    o += block.size();
  };
  put(w1);
  put(b1);
  put(w2);
  put(b2);
  put(w3);
  flat[o] = b3;
  return flat;
}

void MlpParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != size()) throw Error(ErrorCode::InvalidArgument, "parameter size mismatch");
  Eigen::Index o = 0;
  auto take = [&](auto& block) {
    Eigen::Map<Eigen::VectorXd>(block.data(), block.size()) = flat.segment(o, block.size());
    o += block.size();
  };
  take(w1);
  take(b1);
  take(w2);
  take(b2);
  take(w3);
  b3 = flat[o];
}

bool MlpParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w3.allFinite() && std::isfinite(b3);
}

double lr_objective(const Eigen::VectorXd& theta, const FeatureMatrix& X, const LabelVector& y,
                    double l2_strength, Eigen::VectorXd* grad) {
  const Eigen::Index d = X.cols();
  const double n = static_cast<double>(X.rows());
  const auto w = theta.head(d);
  const double b = theta[d];
  const Eigen::ArrayXd z = (X * w).array() + b;
  const double value = mean_bce_with_logits(z, y.array()) + 0.5 * l2_strength / n * w.squaredNorm();
  if (grad) {
    const Eigen::VectorXd residual = (sigmoid(z) - y.array()).matrix();
    grad->resize(d + 1);
    grad->head(d) = X.transpose() * residual / n + (l2_strength / n) * w;
    (*grad)[d] = residual.mean();
  }
  return value;
}

double mlp_loss(const MlpParams& p, const FeatureMatrix& X, const LabelVector& y, MlpParams* grad) {
  const Forward f = forward(p, X);
  const double loss = mean_bce_with_logits(f.logits.array(), y.array());
  if (grad) {
    const double n = static_cast<double>(X.rows());
    const Eigen::VectorXd dz = ((sigmoid(f.logits.array()) - y.array()) / n).matrix();
    grad->w3 = dz.transpose() * f.act2;
    grad->b3 = dz.sum();
    const Eigen::MatrixXd d2 =
        ((dz * p.w3).array() * (f.pre2.array() > 0.0).cast<double>()).matrix();
    grad->w2 = d2.transpose() * f.act1;
    grad->b2 = d2.colwise().sum().transpose();
    const Eigen::MatrixXd d1 = ((d2 * p.w2).array() * (f.pre1.array() > 0.0).cast<double>()).matrix();
    grad->w1 = d1.transpose() * X;
    grad->b1 = d1.colwise().sum().transpose();
  }
  return loss;
}

MlpParams init_mlp(Eigen::Index inputs, Eigen::Index hidden, std::uint64_t seed) {
  if (inputs < 1 || hidden < 1) throw Error(ErrorCode::InvalidArgument, "MLP needs inputs >= 1 and H >= 1");
  Rng rng(seed);
  MlpParams p = MlpParams::zeros(inputs, hidden);
  auto fill = [&](auto& m, Eigen::Index fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  };
  fill(p.w1, inputs);
  fill(p.w2, hidden);
  fill(p.w3, hidden);
  return p;
}

void check_training_data(const FeatureMatrix& X, const LabelVector& y) {
  if (X.rows() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in count");
  }
  if (X.rows() < 2 || X.cols() < 1) {
    throw Error(ErrorCode::EmptyInput, "training needs at least 2 samples and 1 feature");
  }
  if (!X.allFinite()) throw Error(ErrorCode::NonFiniteFeature, "training data has a non-finite feature");
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0) has1 = true;
    else if (y[i] == 0.0) has0 = true;
    else throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
  }
  if (!has0 || !has1) throw Error(ErrorCode::SingleClassInput, "training labels contain one class");
}

LogisticModel train_lr(const FeatureMatrix& X, const LabelVector& y, const TrainConfigLR& config,
                       std::vector<std::string> features) {
  if (!(config.l2_strength >= 0.0) || config.max_iter < 1) {
    throw Error(ErrorCode::ConfigError, "need l2_strength >= 0 and max_iter >= 1");
  }
  check_training_data(X, y);

  LogisticModel model;
  model.features = default_names(X.cols(), std::move(features));
  model.config = config;
  if (config.standardize) model.scaling = FeatureScaling::fit(X);
  const FeatureMatrix Xs = scaled(model.scaling, X);

  LbfgsOptions options;
  options.max_iter = config.max_iter;
  options.tol = config.tol;
  auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return lr_objective(theta, Xs, y, config.l2_strength, &grad);
  };
  const auto fit = minimize_lbfgs<double>(objective, Eigen::VectorXd::Zero(X.cols() + 1), options);

  model.weights = fit.x.head(X.cols());
  model.bias = fit.x[X.cols()];
  model.iterations = fit.iterations;
  model.converged = fit.converged;
  if (!model.weights.allFinite() || !std::isfinite(model.bias)) {
    throw Error(ErrorCode::DivergedLoss, "logistic regression produced non-finite weights");
  }
  return model;
}

MlpModel train_mlp(const FeatureMatrix& X, const LabelVector& y, const TrainConfigMlp& config,
                   std::uint64_t seed, std::vector<std::string> features) {
  if (config.epochs < 1 || !(config.learning_rate > 0.0) || config.hidden < 1) {
    throw Error(ErrorCode::ConfigError, "need epochs >= 1, learning_rate > 0, hidden >= 1");
  }
  check_training_data(X, y);

  MlpModel model;
  model.features = default_names(X.cols(), std::move(features));
  model.config = config;
  model.seed = seed;
  if (config.standardize) model.scaling = FeatureScaling::fit(X);
  const FeatureMatrix Xs = scaled(model.scaling, X);

  model.params = init_mlp(X.cols(), static_cast<Eigen::Index>(config.hidden), seed);
  Eigen::VectorXd theta = model.params.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  MlpParams grad = MlpParams::zeros(X.cols(), static_cast<Eigen::Index>(config.hidden));
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    model.params.assign(theta);
    const double loss = mlp_loss(model.params, Xs, y, &grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::DivergedLoss, "loss became non-finite at epoch " + std::to_string(epoch));
    }
    const Eigen::VectorXd g = grad.flatten();
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
    beta1_t *= config.beta1;
    beta2_t *= config.beta2;
    const double step = config.learning_rate / (1.0 - beta1_t);
    const Eigen::ArrayXd denom = (v.array() / (1.0 - beta2_t)).sqrt() + config.epsilon;
    theta.array() -= step * m.array() / denom;
  }
  model.params.assign(theta);
  if (!model.params.all_finite()) throw Error(ErrorCode::DivergedLoss, "non-finite MLP parameters");
  return model;
}

double predict_proba(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_finite_input(x, model.weights.size());
  Eigen::VectorXd input = x;
  if (model.scaling) input = (x - model.scaling->mean).cwiseQuotient(model.scaling->scale);
  return sigmoid(model.weights.dot(input) + model.bias);
}

double predict_proba(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_finite_input(x, model.params.w1.cols());
  const FeatureMatrix row = x.transpose();
  return sigmoid(forward(model.params, scaled(model.scaling, row)).logits[0]);
}

double predict_proba(const Classifier& model, const FeatureVector& x) {
  const auto a = x.as_array();
  const Eigen::Map<const Eigen::VectorXd> v(a.data(), static_cast<Eigen::Index>(a.size()));
  return std::visit([&](const auto& m) { return predict_proba(m, v); }, model);
}

Eigen::VectorXd predict_proba_batch(const LogisticModel& model, const FeatureMatrix& X) {
  check_finite_batch(X, model.weights.size());
  const Eigen::ArrayXd z = (scaled(model.scaling, X) * model.weights).array() + model.bias;
  return sigmoid(z).matrix();
}

Eigen::VectorXd predict_proba_batch(const MlpModel& model, const FeatureMatrix& X) {
  check_finite_batch(X, model.params.w1.cols());
  return sigmoid(forward(model.params, scaled(model.scaling, X)).logits.array()).matrix();
}

Eigen::VectorXd predict_proba_batch(const Classifier& model, const FeatureMatrix& X) {
  return std::visit([&](const auto& m) { return predict_proba_batch(m, X); }, model);
}

int classify(double proba, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
  }
  if (!std::isfinite(proba)) throw Error(ErrorCode::NonFiniteFeature, "probability is not finite");
  return proba >= threshold ? 1 : 0;
}

Eigen::VectorXd odds_ratios(const LogisticModel& model) {
  return model.weights.array().exp().matrix();
}

std::string to_json(const Classifier& model) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  if (const auto* lr = std::get_if<LogisticModel>(&model)) {
    doc["kind"] = "logistic_regression";
    doc["features"] = lr->features;
    doc["seed"] = lr->seed;
    doc["train_config"] = {{"l2_strength", lr->config.l2_strength},
                           {"max_iter", lr->config.max_iter},
                           {"tol", lr->config.tol},
                           {"standardize", lr->config.standardize}};
    doc["scaling"] = scaling_json(lr->scaling);
    doc["parameters"] = {{"weights", vector_json(lr->weights)}, {"bias", lr->bias}};
    doc["fit"] = {{"iterations", lr->iterations}, {"converged", lr->converged}};
  } else {
    const auto& mlp = std::get<MlpModel>(model);
    doc["kind"] = "mlp";
    doc["features"] = mlp.features;
    doc["seed"] = mlp.seed;
    doc["train_config"] = {{"hidden", mlp.config.hidden},
                           {"epochs", mlp.config.epochs},
                           {"learning_rate", mlp.config.learning_rate},
                           {"beta1", mlp.config.beta1},
                           {"beta2", mlp.config.beta2},
                           {"epsilon", mlp.config.epsilon},
                           {"standardize", mlp.config.standardize}};
    doc["scaling"] = scaling_json(mlp.scaling);
    const auto& p = mlp.params;
    doc["parameters"] = {{"w1", matrix_json(p.w1)}, {"b1", vector_json(p.b1)},
                         {"w2", matrix_json(p.w2)}, {"b2", vector_json(p.b2)},
                         {"w3", vector_json(p.w3.transpose())}, {"b3", p.b3}};
  }
  return doc.dump(2) + "\n";
}

Classifier classifier_from_json(std::string_view text) {
  const auto doc = ordered_json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::MalformedRecord, "model file is not a JSON object");
  }
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorCode::MalformedRecord, "unsupported model schema version");
    }
    const std::string kind = doc.at("kind").get<std::string>();
    const auto& cfg = doc.at("train_config");
    const auto& params = doc.at("parameters");
    if (kind == "logistic_regression") {
      LogisticModel m;
      m.features = doc.at("features").get<std::vector<std::string>>();
      m.seed = doc.at("seed").get<std::uint64_t>();
      m.config.l2_strength = cfg.at("l2_strength").get<double>();
      m.config.max_iter = cfg.at("max_iter").get<int>();
      m.config.tol = cfg.at("tol").get<double>();
      m.config.standardize = cfg.at("standardize").get<bool>();
      m.scaling = scaling_from(doc.at("scaling"));
      m.weights = vector_from(params.at("weights"));
      m.bias = params.at("bias").get<double>();
      m.iterations = doc.at("fit").at("iterations").get<int>();
      m.converged = doc.at("fit").at("converged").get<bool>();
      if (static_cast<Eigen::Index>(m.features.size()) != m.weights.size()) {
        throw Error(ErrorCode::MalformedRecord, "weights do not match feature list");
      }
      return m;
    }
    if (kind == "mlp") {
      MlpModel m;
      m.features = doc.at("features").get<std::vector<std::string>>();
      m.seed = doc.at("seed").get<std::uint64_t>();
      m.config.hidden = cfg.at("hidden").get<std::size_t>();
      m.config.epochs = cfg.at("epochs").get<int>();
      m.config.learning_rate = cfg.at("learning_rate").get<double>();
      m.config.beta1 = cfg.at("beta1").get<double>();
      m.config.beta2 = cfg.at("beta2").get<double>();
      m.config.epsilon = cfg.at("epsilon").get<double>();
      m.config.standardize = cfg.at("standardize").get<bool>();
      m.scaling = scaling_from(doc.at("scaling"));
      m.params.w1 = matrix_from(params.at("w1"));
      m.params.b1 = vector_from(params.at("b1"));
      m.params.w2 = matrix_from(params.at("w2"));
      m.params.b2 = vector_from(params.at("b2"));
      m.params.w3 = vector_from(params.at("w3")).transpose();
      m.params.b3 = params.at("b3").get<double>();
      const auto h = m.params.w1.rows();
      if (m.params.w2.rows() != h || m.params.w2.cols() != h || m.params.w3.size() != h ||
          m.params.b1.size() != h || m.params.b2.size() != h ||
          static_cast<Eigen::Index>(m.features.size()) != m.params.w1.cols()) {
        throw Error(ErrorCode::MalformedRecord, "inconsistent MLP layer shapes");
      }
      return m;
    }
    throw Error(ErrorCode::MalformedRecord, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  }
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(model);
}

Classifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return classifier_from_json(buf.str());
}

}  // namespace hallu
