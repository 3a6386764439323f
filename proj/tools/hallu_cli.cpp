// hallu: extract token-probability features, train and evaluate the
// hallucination classifiers, run feature ablations, and print odds ratios.
//
// Exit codes: 0 success, 1 data error, 2 backend error, 3 config error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hallu/error.hpp"
#include "hallu/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string evaluator;
  std::string variant;
  std::string classifier;
  std::vector<std::uint64_t> seeds;
  std::string cache;
  std::string out;
  std::string model;
  bool keep_going = false;
};

void add_common(CLI::App* cmd, Options& o, bool config_required) {
  auto* cfg = cmd->add_option("--config", o.config_path, "JSON experiment config");
  if (config_required) cfg->required();
  cmd->add_option("--evaluator", o.evaluator, "Evaluator name (feature cache key)");
  cmd->add_option("--variant", o.variant,
                  "with_condition|no_condition[+with_knowledge|+no_knowledge]");
  cmd->add_option("--classifier", o.classifier, "lr or mlp");
  cmd->add_option("--seed", o.seeds, "Seed(s); repeat or comma-separate")->delimiter(',');
  cmd->add_option("--cache", o.cache, "Feature cache (JSON lines)");
  cmd->add_option("--out", o.out, "Report output path (.json; table goes to .txt)");
  cmd->add_flag("--keep-going", o.keep_going, "Exit 0 even if some samples fail extraction");
}

hallu::ExperimentConfig build_config(const Options& o) {
  hallu::ExperimentConfig config =
      o.config_path.empty() ? hallu::ExperimentConfig{} : hallu::load_config(o.config_path);
  hallu::ConfigOverrides ov;
  if (!o.evaluator.empty()) ov.evaluator = o.evaluator;
  if (!o.variant.empty()) ov.variant = o.variant;
  if (!o.classifier.empty()) ov.classifier = o.classifier;
  if (!o.seeds.empty()) ov.seeds = o.seeds;
  if (!o.cache.empty()) ov.cache = o.cache;
  if (!o.out.empty()) ov.out = o.out;
  if (!o.model.empty()) ov.model = o.model;
  ov.keep_going = o.keep_going;
  hallu::apply_overrides(config, ov);
  return config;
}

int cmd_extract(const Options& o) {
  const auto config = build_config(o);
  const auto s = hallu::run_extract(config);
  std::cout << s.samples << " samples: " << s.batch.added << " new, " << s.batch.skipped
            << " cached, " << s.batch.failures.size() << " failed\n"
            << "exact_min fraction: " << s.batch.exact_min_fraction << "\n";
  // Backend failures win over data failures.
  int code = 0;
  for (const auto& f : s.batch.failures) {
    std::cerr << "error: " << f.message << "\n";
    code = std::max(code, f.exit_code == 2 ? 2 : 1);
  }
  return config.keep_going ? 0 : code;
}

int cmd_train_eval(const Options& o) {
  const auto config = build_config(o);
  const auto result = hallu::run_train_eval(config);
  std::cout << hallu::report_table(config, result, "train-eval");
  return 0;
}

int cmd_ablate(const Options& o) {
  const auto config = build_config(o);
  const auto result = hallu::run_ablate(config);
  std::cout << hallu::report_table(config, result, "ablate");
  return 0;
}

int cmd_report_coefficients(const Options& o) {
  const auto config = build_config(o);
  if (!config.model) {
    throw hallu::Error(hallu::ErrorCode::ConfigError, "report-coefficients needs --model or config 'model'");
  }
  std::cout << hallu::coefficient_table(hallu::report_coefficients(*config.model));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-probability hallucination detection"};
  app.require_subcommand(1);

  Options o;
  auto* extract = app.add_subcommand("extract", "Score a dataset and fill the feature cache");
  add_common(extract, o, true);
  auto* train = app.add_subcommand("train-eval", "Train per seed and report Acc/F1/PR-AUC");
  add_common(train, o, true);
  auto* ablate = app.add_subcommand("ablate", "Retrain on feature subsets");
  add_common(ablate, o, true);
  auto* coef = app.add_subcommand("report-coefficients", "Odds ratios of a saved logistic model");
  add_common(coef, o, false);
  coef->add_option("--model", o.model, "Saved logistic model (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (extract->parsed()) return cmd_extract(o);
    if (train->parsed()) return cmd_train_eval(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (coef->parsed()) return cmd_report_coefficients(o);
  } catch (const hallu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hallu::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 3;
}
