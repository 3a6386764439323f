#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hallu/classifiers.hpp"
#include "hallu/error.hpp"
#include "support.hpp"

using namespace hallu;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

/// 50 copies each of a hallucinated and a faithful prototype.
void two_clusters(FeatureMatrix& X, LabelVector& y) {
  X.resize(100, 4);
  y.resize(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    if (i % 2 == 0) {
      X.row(i) << 0.1, 0.1, 0.9, 0.9;
      y[i] = 1;
    } else {
      X.row(i) << 0.9, 0.9, 0.1, 0.1;
      y[i] = 0;
    }
  }
}

double train_accuracy(const Classifier& model, const FeatureMatrix& X, const LabelVector& y) {
  const Eigen::VectorXd p = predict_proba_batch(model, X);
  int hits = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) hits += classify(p[i]) == static_cast<int>(y[i]);
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

void planted(std::size_t n, std::uint64_t seed, FeatureMatrix& X, LabelVector& y) {
  const auto rows = test::planted_records(n, seed, "e");
  X.resize(static_cast<Eigen::Index>(n), 4);
  y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = rows[i].features.as_array();
    for (int c = 0; c < 4; ++c) X(static_cast<Eigen::Index>(i), c) = a[static_cast<std::size_t>(c)];
    y[static_cast<Eigen::Index>(i)] = rows[i].label;
  }
}

void random_instance(std::mt19937_64& gen, Eigen::Index n, Eigen::Index d, FeatureMatrix& X,
                     LabelVector& y) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  X.resize(n, d);
  y.resize(n);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(gen);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = static_cast<double>(gen() % 2);
}

}  // namespace

TEST_CASE("train_lr separates two clusters") {
  FeatureMatrix X;
  LabelVector y;
  two_clusters(X, y);
  const auto model = train_lr(X, y);
  CHECK(model.converged);
  CHECK(train_accuracy(model, X, y) == 1.0);
  CHECK(model.features == std::vector<std::string>{"mtp", "avgtp", "mpd", "mps"});
}

TEST_CASE("train_lr with no signal predicts the prior") {
  FeatureMatrix X = FeatureMatrix::Constant(10, 4, 0.5);
  LabelVector y(10);
  y << 1, 1, 1, 1, 1, 1, 0, 0, 0, 0;
  const auto model = train_lr(X, y);
  const Eigen::VectorXd p = predict_proba_batch(model, X);
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-3));
  CHECK(train_accuracy(model, X, y) == 0.6);
}

TEST_CASE("training input checks") {
  FeatureMatrix X = FeatureMatrix::Random(6, 4);
  LabelVector ones = LabelVector::Ones(6);
  CHECK(code_of([&] { train_lr(X, ones); }) == ErrorCode::SingleClassInput);
  CHECK(code_of([&] { train_mlp(X, ones, {}, 0); }) == ErrorCode::SingleClassInput);
  LabelVector y(6);
  y << 1, 0, 1, 0, 1, 0;
  FeatureMatrix bad = X;
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { train_lr(bad, y); }) == ErrorCode::NonFiniteFeature);
  CHECK(code_of([&] { train_mlp(bad, y, {}, 0); }) == ErrorCode::NonFiniteFeature);
  TrainConfigMlp huge;
  huge.hidden = 8;
  huge.epochs = 50;
  huge.learning_rate = 1e300;
  CHECK(code_of([&] { train_mlp(X * 1e300, y, huge, 0); }) == ErrorCode::DivergedLoss);
}

TEST_CASE("train_mlp separates two clusters") {
  FeatureMatrix X;
  LabelVector y;
  two_clusters(X, y);
  TrainConfigMlp cfg;
  cfg.hidden = 16;
  cfg.epochs = 500;
  const auto model = train_mlp(X, y, cfg, 42);
  CHECK(train_accuracy(model, X, y) == 1.0);
}

TEST_CASE("zero network outputs one half") {
  MlpModel model;
  model.params = MlpParams::zeros(4, 16);
  model.features = {"mtp", "avgtp", "mpd", "mps"};
  Eigen::VectorXd x(4);
  x << 0.3, 0.9, 0.2, 0.7;
  CHECK(predict_proba(model, x) == 0.5);
  model.params.b3 = 1.5;
  CHECK(predict_proba(model, x) == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))));
}

TEST_CASE("mlp generalizes on a planted avgtp signal") {
  FeatureMatrix X_train, X_test;
  LabelVector y_train, y_test;
  planted(200, 1, X_train, y_train);
  planted(1000, 2, X_test, y_test);
  TrainConfigMlp cfg;
  cfg.hidden = 16;
  cfg.epochs = 2000;
  const auto model = train_mlp(X_train, y_train, cfg, 7);
  CHECK(train_accuracy(model, X_test, y_test) >= 0.95);
}

TEST_CASE("predict_proba and classify examples") {
  LogisticModel zero;
  zero.weights = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd x(4);
  x << 0.2, 0.5, 0.4, 0.1;
  CHECK(predict_proba(zero, x) == 0.5);

  LogisticModel lr;
  lr.weights = Eigen::VectorXd::Zero(4);
  lr.weights[1] = 10.0;
  lr.bias = -5.0;
  CHECK(predict_proba(lr, x) == 0.5);
  CHECK(predict_proba(Classifier(lr), FeatureVector{0.2, 0.5, 0.4, 0.1}) == 0.5);
  Eigen::VectorXd nan = x;
  nan[0] = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { predict_proba(lr, nan); }) == ErrorCode::NonFiniteFeature);

  CHECK(classify(0.5) == 1);
  CHECK(classify(0.49) == 0);
  CHECK(classify(0.51) == 1);
  CHECK(classify(lr, x) == 1);
  CHECK(code_of([] { classify(0.4, 1.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { classify(0.4, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("classify is invariant under a shared increasing transform") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  auto transform = [](double p) { return std::pow(p, 3.0); };
  for (int i = 0; i < 1000; ++i) {
    const double p = u(gen), t = u(gen);
    CHECK(classify(p, t) == classify(transform(p), transform(t)));
  }
}

TEST_CASE("odds ratios") {
  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(4);
  CHECK(odds_ratios(m) == Eigen::VectorXd::Ones(4));
  m.weights[0] = std::log(2.0);
  const auto odds = odds_ratios(m);
  CHECK(odds[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(odds.tail(3) == Eigen::VectorXd::Ones(3));

  FeatureMatrix X;
  LabelVector y;
  two_clusters(X, y);
  CHECK((odds_ratios(train_lr(X, y)).array() > 0.0).all());
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureMatrix X;
    LabelVector y;
    random_instance(gen, 5 + static_cast<Eigen::Index>(gen() % 10), 4, X, y);

    Eigen::VectorXd theta = Eigen::VectorXd::Random(5);
    const double l2 = 0.5 * static_cast<double>(gen() % 4);
    Eigen::VectorXd analytic;
    lr_objective(theta, X, y, l2, &analytic);
    const auto numeric = test::numeric_gradient(
        [&](const Eigen::VectorXd& t) { return lr_objective(t, X, y, l2); }, theta);
    CHECK(test::relative_error(analytic, numeric) < 1e-4);

    // Random biases keep the point off the ReLU kink; zero biases can put a
    // dead first layer exactly at pre2 == 0 where the loss has no derivative.
    auto params = init_mlp(4, 6, gen());
    params.b1 = Eigen::VectorXd::Random(6) * 0.5;
    params.b2 = Eigen::VectorXd::Random(6) * 0.5;
    params.b3 = 0.1;
    MlpParams grad;
    mlp_loss(params, X, y, &grad);
    MlpParams probe = params;
    const auto numeric_mlp = test::numeric_gradient(
        [&](const Eigen::VectorXd& flat) {
          probe.assign(flat);
          return mlp_loss(probe, X, y);
        },
        params.flatten());
    CHECK(test::relative_error(grad.flatten(), numeric_mlp) < 1e-4);
  }
}

TEST_CASE("lr optimum is never worse than the zero start") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 30; ++trial) {
    FeatureMatrix X;
    LabelVector y;
    random_instance(gen, 20, 4, X, y);
    y[0] = 0;
    y[1] = 1;
    const auto model = train_lr(X, y);
    Eigen::VectorXd theta(5);
    theta << model.weights, model.bias;
    CHECK(lr_objective(theta, X, y, 1.0) <= lr_objective(Eigen::VectorXd::Zero(5), X, y, 1.0));
  }
}

TEST_CASE("lr with positive avgtp weight is increasing in avgtp") {
  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(4);
  m.weights[1] = 2.5;
  m.bias = -1.0;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.3);
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    x[1] = i / 100.0;
    const double p = predict_proba(m, x);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("mlp training is deterministic per seed") {
  FeatureMatrix X;
  LabelVector y;
  planted(60, 3, X, y);
  TrainConfigMlp cfg;
  cfg.hidden = 8;
  cfg.epochs = 200;
  const auto a = train_mlp(X, y, cfg, 99);
  const auto b = train_mlp(X, y, cfg, 99);
  const auto c = train_mlp(X, y, cfg, 100);
  CHECK(a.params.flatten() == b.params.flatten());
  CHECK(a.params.flatten() != c.params.flatten());
  CHECK(to_json(a) == to_json(b));
}

TEST_CASE("model json round-trips byte for byte") {
  FeatureMatrix X;
  LabelVector y;
  planted(60, 5, X, y);
  TrainConfigLR lr_cfg;
  lr_cfg.standardize = true;
  TrainConfigMlp mlp_cfg;
  mlp_cfg.hidden = 5;
  mlp_cfg.epochs = 20;
  for (const Classifier& model : {Classifier(train_lr(X, y, lr_cfg)), Classifier(train_mlp(X, y, mlp_cfg, 1))}) {
    const auto text = to_json(model);
    const auto back = classifier_from_json(text);
    CHECK(to_json(back) == text);
    CHECK((predict_proba_batch(back, X) - predict_proba_batch(model, X)).cwiseAbs().maxCoeff() == 0.0);
  }
  test::TempDir dir("model");
  const auto path = dir / "m.json";
  save_model(Classifier(train_lr(X, y)), path);
  CHECK(std::holds_alternative<LogisticModel>(load_model(path)));
  CHECK(code_of([] { classifier_from_json("{\"schema_version\": 1, \"kind\": \"tree\"}"); }) ==
        ErrorCode::MalformedRecord);
}

TEST_CASE("standardization is fitted on the training data only") {
  FeatureMatrix X(4, 2);
  X << 0, 10, 2, 10, 4, 10, 6, 10;
  const auto s = FeatureScaling::fit(X);
  CHECK(s.mean[0] == 3.0);
  CHECK(s.scale[1] == 1.0);  // constant column
  const auto Z = s.apply(X);
  CHECK(Z.col(0).mean() == doctest::Approx(0.0));
  CHECK(Z.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reduced input width for masked features") {
  FeatureMatrix X;
  LabelVector y;
  planted(100, 8, X, y);
  const FeatureMatrix one = X.col(1);
  const auto model = train_lr(one, y, {}, {"avgtp"});
  CHECK(model.weights.size() == 1);
  CHECK(model.weights[0] < 0.0);  // lower avgtp means hallucination
  CHECK(code_of([&] { predict_proba(model, Eigen::VectorXd::Zero(4)); }) == ErrorCode::InvalidArgument);
}
