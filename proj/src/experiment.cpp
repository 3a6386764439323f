#include "hallu/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hallu/error.hpp"

namespace hallu {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::ConfigError, what);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

ToyBigramLM parse_lm(const json& j) {
  const auto vocab = j.at("vocab").get<std::vector<std::string>>();
  const auto start = j.at("start").get<std::vector<double>>();
  const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(vocab.size());
  if (static_cast<Eigen::Index>(start.size()) != n || static_cast<Eigen::Index>(rows.size()) != n) {
    config_error("toy lm table does not match its vocabulary");
  }
  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(start.data(), n);
  Eigen::MatrixXd t(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n) {
      config_error("toy lm transition row has the wrong width");
    }
    for (Eigen::Index c = 0; c < n; ++c) t(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  try {
    return ToyBigramLM(vocab, s, t);
  } catch (const Error& e) {
    config_error(e.detail());
  }
}

ClassifierKind parse_classifier(std::string_view s) {
  if (s == "lr" || s == "logistic_regression") return ClassifierKind::LogisticRegression;
  if (s == "mlp" || s == "snn") return ClassifierKind::Mlp;
  config_error("unknown classifier '" + std::string(s) + "'");
}

SplitProtocol parse_protocol(std::string_view s) {
  if (s == "stratified_fraction") return SplitProtocol::StratifiedFraction;
  if (s == "leave_one_out") return SplitProtocol::LeaveOneOut;
  if (s == "balanced_subset") return SplitProtocol::BalancedSubset;
  config_error("unknown split protocol '" + std::string(s) + "'");
}

SplitKey parse_key(std::string_view s) {
  if (s == "generator" || s == "generator_id") return SplitKey::Generator;
  if (s == "category") return SplitKey::Category;
  config_error("unknown split key '" + std::string(s) + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) config_error("seeds must be non-empty");
  if (c.ablation_masks.empty()) config_error("ablation needs at least one mask");
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) config_error("threshold must lie in (0, 1)");
  if (c.split.protocol == SplitProtocol::StratifiedFraction &&
      !(c.split.fraction > 0.0 && c.split.fraction <= 1.0)) {
    config_error("split fraction must lie in (0, 1]");
  }
  if (c.split.protocol == SplitProtocol::LeaveOneOut && c.split.held_out.empty()) {
    config_error("leave_one_out needs held_out");
  }
  if (c.evaluator.kind != "toy" && c.evaluator.kind != "http") {
    config_error("evaluator kind must be 'toy' or 'http'");
  }
  if (c.task != "cache") parse_task(c.task);
}

// ---------------------------------------------------------------------------
// Train / evaluate

struct Pool {
  std::vector<PoolItem> items;
  FeatureMatrix features;  // rows follow items
  double exact_min_fraction = 1.0;
};

Pool build_pool(const ExperimentConfig& config) {
  const std::string evaluator = config.evaluator.resolved_name();
  std::map<std::string, FeatureRecord> rows;
  for (auto& r : read_cache(config.feature_cache)) {
    if (r.evaluator == evaluator && r.variant == config.variant) rows.emplace(r.sample_id, std::move(r));
  }

  Pool pool;
  std::vector<const FeatureRecord*> matched;
  if (config.task == "cache") {
    for (const auto& [id, r] : rows) {
      pool.items.push_back({id, r.label, std::nullopt, std::nullopt});
      matched.push_back(&r);
    }
    if (pool.items.empty()) {
      throw Error(ErrorCode::MissingCacheRows, "cache has no rows for " + evaluator + " / " +
                                                   config.variant.str());
    }
  } else {
    const auto pairs = load_dataset(parse_task(config.task), config.dataset_path);
    std::vector<std::string> missing;
    for (const auto& p : pairs) {
      const auto it = rows.find(p.id);
      if (it == rows.end()) {
        missing.push_back(p.id);
        continue;
      }
      if (it->second.label != p.label) {
        throw Error(ErrorCode::MalformedRecord, "cache label disagrees with dataset for " + p.id);
      }
      pool.items.push_back({p.id, p.label, p.generator_id, p.category});
      matched.push_back(&it->second);
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
      if (missing.size() > 10) list += ", ...";
      throw Error(ErrorCode::MissingCacheRows,
                  std::to_string(missing.size()) + " samples lack features for " + evaluator +
                      " / " + config.variant.str() + ": " + list);
    }
  }

  pool.features.resize(static_cast<Eigen::Index>(matched.size()), 4);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const auto a = matched[i]->features.as_array();
    for (Eigen::Index c = 0; c < 4; ++c) {
      pool.features(static_cast<Eigen::Index>(i), c) = a[static_cast<std::size_t>(c)];
    }
    exact += matched[i]->exact_min ? 1 : 0;
  }
  pool.exact_min_fraction =
      matched.empty() ? 1.0 : static_cast<double>(exact) / static_cast<double>(matched.size());
  return pool;
}

SplitPlan make_split(const Pool& pool, const SplitConfig& split, std::uint64_t seed) {
  switch (split.protocol) {
    case SplitProtocol::StratifiedFraction:
      return split_stratified(std::span<const PoolItem>(pool.items), split.fraction, seed);
    case SplitProtocol::LeaveOneOut: {
      auto plan = split_leave_one_out(std::span<const PoolItem>(pool.items), split.key, split.held_out);
      plan.seed = seed;
      return plan;
    }
    case SplitProtocol::BalancedSubset:
      return balanced_subset(std::span<const PoolItem>(pool.items), split.n_pos, split.n_neg, seed);
  }
  config_error("unhandled split protocol");
}

void gather(const Pool& pool, const std::unordered_map<std::string, Eigen::Index>& index,
            const std::vector<std::string>& ids, const std::vector<std::size_t>& cols,
            FeatureMatrix& X, LabelVector& y) {
  X.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(cols.size()));
  y.resize(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Eigen::Index row = index.at(ids[i]);
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      X(r, static_cast<Eigen::Index>(c)) = pool.features(row, static_cast<Eigen::Index>(cols[c]));
    }
    y[r] = pool.items[static_cast<std::size_t>(row)].label;
  }
}

SeedRun run_seed(const ExperimentConfig& config, const Pool& pool,
                 const std::unordered_map<std::string, Eigen::Index>& index,
                 const FeatureMask& mask, std::uint64_t seed, bool save) {
  const SplitPlan plan = make_split(pool, config.split, seed);
  const auto cols = mask.columns();
  FeatureMatrix X_train, X_test;
  LabelVector y_train, y_test;
  gather(pool, index, plan.train_ids, cols, X_train, y_train);
  gather(pool, index, plan.test_ids, cols, X_test, y_test);
  if (X_test.rows() == 0) throw Error(ErrorCode::EmptyInput, "split left no test samples");

  Classifier model;
  if (config.classifier == ClassifierKind::LogisticRegression) {
    auto lr = train_lr(X_train, y_train, config.lr, mask.names());
    lr.seed = seed;
    model = std::move(lr);
  } else {
    model = train_mlp(X_train, y_train, config.mlp, seed, mask.names());
  }
  if (save && config.model_out) {
    save_model(model, *config.model_out / (std::string(to_string(config.classifier)) + "-seed" +
                                           std::to_string(seed) + ".json"));
  }

  const Eigen::VectorXd scores = predict_proba_batch(model, X_test);
  std::vector<int> labels(static_cast<std::size_t>(y_test.size()));
  for (Eigen::Index i = 0; i < y_test.size(); ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(y_test[i]);
  const std::span<const double> score_span(scores.data(), static_cast<std::size_t>(scores.size()));

  SeedRun run;
  run.seed = seed;
  run.n_train = plan.train_ids.size();
  run.metrics = evaluate(labels, score_span, config.threshold);
  return run;
}

MaskResult run_mask(const ExperimentConfig& config, const Pool& pool, const FeatureMask& mask,
                    bool save) {
  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < pool.items.size(); ++i) index.emplace(pool.items[i].id, static_cast<Eigen::Index>(i));

  MaskResult out;
  out.mask = mask;
  out.runs.resize(config.seeds.size());
  if (config.threads > 1 && config.seeds.size() > 1) {
    std::vector<std::future<SeedRun>> futures;
    for (auto seed : config.seeds) {
      futures.push_back(std::async(std::launch::async, [&, seed] {
        return run_seed(config, pool, index, mask, seed, save);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) out.runs[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      out.runs[i] = run_seed(config, pool, index, mask, config.seeds[i], save);
    }
  }
  std::vector<RunMetrics> metrics;
  for (const auto& r : out.runs) metrics.push_back(r.metrics);
  out.report = aggregate(std::move(metrics));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

fs::path table_path(const fs::path& report) {
  fs::path p = report;
  p.replace_extension(".txt");
  return p;
}

ordered_json train_config_json(const ExperimentConfig& c) {
  if (c.classifier == ClassifierKind::LogisticRegression) {
    return {{"l2_strength", c.lr.l2_strength}, {"max_iter", c.lr.max_iter},
            {"tol", c.lr.tol}, {"standardize", c.lr.standardize}};
  }
  return {{"hidden", c.mlp.hidden},     {"epochs", c.mlp.epochs},
          {"learning_rate", c.mlp.learning_rate}, {"beta1", c.mlp.beta1},
          {"beta2", c.mlp.beta2},       {"epsilon", c.mlp.epsilon},
          {"standardize", c.mlp.standardize}};
}

ordered_json split_json(const SplitConfig& s) {
  ordered_json j;
  j["protocol"] = to_string(s.protocol);
  switch (s.protocol) {
    case SplitProtocol::StratifiedFraction: j["fraction"] = s.fraction; break;
    case SplitProtocol::LeaveOneOut:
      j["key"] = s.key == SplitKey::Generator ? "generator" : "category";
      j["held_out"] = s.held_out;
      break;
    case SplitProtocol::BalancedSubset:
      j["n_pos"] = s.n_pos;
      j["n_neg"] = s.n_neg;
      break;
  }
  return j;
}

ordered_json mask_json(const MaskResult& row) {
  ordered_json runs = ordered_json::array();
  for (const auto& r : row.runs) {
    runs.push_back({{"seed", r.seed},
                    {"n_train", r.n_train},
                    {"n_test", r.metrics.n},
                    {"accuracy", r.metrics.accuracy},
                    {"f1", r.metrics.f1},
                    {"pr_auc", r.metrics.pr_auc}});
  }
  ordered_json j;
  j["mask"] = row.mask.str();
  j["features"] = row.mask.names();
  j["runs"] = std::move(runs);
  j["mean"] = {{"accuracy", row.report.accuracy},
               {"f1", row.report.f1},
               {"pr_auc", row.report.pr_auc}};
  return j;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureMask FeatureMask::only(std::size_t feature) {
  FeatureMask m;
  m.bits_.reset();
  m.bits_.set(feature);
  return m;
}

FeatureMask FeatureMask::parse(std::string_view text) {
  if (text.size() != 4) config_error("feature mask must have 4 digits: '" + std::string(text) + "'");
  FeatureMask m;
  m.bits_.reset();
  for (std::size_t i = 0; i < 4; ++i) {
    if (text[i] == '1') m.bits_.set(i);
    else if (text[i] != '0') config_error("feature mask digits must be 0 or 1");
  }
  if (m.bits_.none()) config_error("feature mask selects no feature");
  return m;
}

std::vector<std::size_t> FeatureMask::columns() const {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < 4; ++i) {
    if (bits_.test(i)) cols.push_back(i);
  }
  return cols;
}

std::vector<std::string> FeatureMask::names() const {
  std::vector<std::string> out;
  for (auto c : columns()) out.emplace_back(kFeatureNames[c]);
  return out;
}

std::string FeatureMask::str() const {
  std::string s(4, '0');
  for (std::size_t i = 0; i < 4; ++i) {
    if (bits_.test(i)) s[i] = '1';
  }
  return s;
}

std::vector<FeatureMask> default_ablation_masks() {
  return {FeatureMask::all(), FeatureMask::only(0), FeatureMask::only(1), FeatureMask::only(2),
          FeatureMask::only(3)};
}

std::string_view to_string(ClassifierKind kind) {
  return kind == ClassifierKind::LogisticRegression ? "lr" : "mlp";
}

std::string EvaluatorConfig::resolved_name() const {
  if (!name.empty()) return name;
  return kind == "http" ? http.name : "toy-bigram";
}

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  const json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) config_error("config is not a JSON object");

  ExperimentConfig c;
  try {
    check_keys(doc,
               {"dataset", "evaluator", "variant", "classifier", "split", "seeds", "feature_cache",
                "output", "model_out", "model", "ablation", "threshold", "threads", "keep_going"},
               "config");
    if (doc.contains("dataset")) {
      const auto& d = doc["dataset"];
      check_keys(d, {"task", "path"}, "dataset");
      read_opt(d, "task", c.task);
      if (d.contains("path")) c.dataset_path = resolve(base_dir, d["path"].get<std::string>());
    }
    if (doc.contains("evaluator")) {
      const auto& e = doc["evaluator"];
      check_keys(e,
                 {"kind", "name", "context_window", "lm", "base_url", "endpoint", "model",
                  "vocab_size", "reserved_special", "top_k", "timeout_s", "attempts", "backoff_s",
                  "api_key_env", "segment_separator", "bos_text"},
                 "evaluator");
      auto& ev = c.evaluator;
      read_opt(e, "kind", ev.kind);
      read_opt(e, "name", ev.name);
      read_opt(e, "context_window", ev.context_window);
      if (e.contains("lm")) ev.lm = parse_lm(e["lm"]);
      auto& h = ev.http;
      if (!ev.name.empty()) h.name = ev.name;
      read_opt(e, "context_window", h.context_window);
      read_opt(e, "base_url", h.base_url);
      read_opt(e, "endpoint", h.endpoint);
      read_opt(e, "model", h.model);
      read_opt(e, "vocab_size", h.vocab_size);
      read_opt(e, "reserved_special", h.reserved_special);
      read_opt(e, "top_k", h.top_k);
      read_opt(e, "timeout_s", h.timeout_s);
      read_opt(e, "attempts", h.attempts);
      read_opt(e, "backoff_s", h.backoff_s);
      read_opt(e, "api_key_env", h.api_key_env);
      read_opt(e, "segment_separator", h.segment_separator);
      read_opt(e, "bos_text", h.bos_text);
    }
    if (doc.contains("variant")) {
      const auto& v = doc["variant"];
      if (v.is_string()) {
        c.variant = Variant::parse(v.get<std::string>());
      } else {
        check_keys(v, {"include_condition", "include_knowledge"}, "variant");
        read_opt(v, "include_condition", c.variant.include_condition);
        read_opt(v, "include_knowledge", c.variant.include_knowledge);
      }
    }
    if (doc.contains("classifier")) {
      const auto& k = doc["classifier"];
      if (k.is_string()) {
        c.classifier = parse_classifier(k.get<std::string>());
      } else {
        check_keys(k, {"kind", "lr", "mlp"}, "classifier");
        if (k.contains("kind")) c.classifier = parse_classifier(k["kind"].get<std::string>());
        if (k.contains("lr")) {
          const auto& lr = k["lr"];
          check_keys(lr, {"l2_strength", "C", "max_iter", "tol", "standardize"}, "classifier.lr");
          read_opt(lr, "l2_strength", c.lr.l2_strength);
          if (lr.contains("C")) {
            const double C = lr["C"].get<double>();
            if (!(C > 0.0)) config_error("C must be positive");
            c.lr.l2_strength = 1.0 / C;
          }
          read_opt(lr, "max_iter", c.lr.max_iter);
          read_opt(lr, "tol", c.lr.tol);
          read_opt(lr, "standardize", c.lr.standardize);
        }
        if (k.contains("mlp")) {
          const auto& m = k["mlp"];
          check_keys(m, {"hidden", "epochs", "learning_rate", "beta1", "beta2", "epsilon", "standardize"},
                     "classifier.mlp");
          read_opt(m, "hidden", c.mlp.hidden);
          read_opt(m, "epochs", c.mlp.epochs);
          read_opt(m, "learning_rate", c.mlp.learning_rate);
          read_opt(m, "beta1", c.mlp.beta1);
          read_opt(m, "beta2", c.mlp.beta2);
          read_opt(m, "epsilon", c.mlp.epsilon);
          read_opt(m, "standardize", c.mlp.standardize);
        }
      }
    }
    if (doc.contains("split")) {
      const auto& s = doc["split"];
      check_keys(s, {"protocol", "fraction", "key", "held_out", "n_pos", "n_neg"}, "split");
      if (s.contains("protocol")) c.split.protocol = parse_protocol(s["protocol"].get<std::string>());
      read_opt(s, "fraction", c.split.fraction);
      if (s.contains("key")) c.split.key = parse_key(s["key"].get<std::string>());
      read_opt(s, "held_out", c.split.held_out);
      read_opt(s, "n_pos", c.split.n_pos);
      read_opt(s, "n_neg", c.split.n_neg);
    }
    read_opt(doc, "seeds", c.seeds);
    if (doc.contains("feature_cache")) c.feature_cache = resolve(base_dir, doc["feature_cache"].get<std::string>());
    if (doc.contains("output")) c.output = resolve(base_dir, doc["output"].get<std::string>());
    if (doc.contains("model_out")) c.model_out = resolve(base_dir, doc["model_out"].get<std::string>());
    if (doc.contains("model")) c.model = resolve(base_dir, doc["model"].get<std::string>());
    if (doc.contains("ablation")) {
      const auto& a = doc["ablation"];
      check_keys(a, {"masks"}, "ablation");
      if (a.contains("masks")) {
        c.ablation_masks.clear();
        for (const auto& m : a["masks"]) c.ablation_masks.push_back(FeatureMask::parse(m.get<std::string>()));
      }
    }
    read_opt(doc, "threshold", c.threshold);
    read_opt(doc, "threads", c.threads);
    read_opt(doc, "keep_going", c.keep_going);
  } catch (const json::exception& e) {
    config_error(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.detail());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

void apply_overrides(ExperimentConfig& c, const ConfigOverrides& o) {
  if (o.evaluator) {
    c.evaluator.name = *o.evaluator;
    c.evaluator.http.name = *o.evaluator;
  }
  if (o.variant) c.variant = Variant::parse(*o.variant);
  if (o.classifier) c.classifier = parse_classifier(*o.classifier);
  if (o.seeds) c.seeds = *o.seeds;
  if (o.cache) c.feature_cache = *o.cache;
  if (o.out) c.output = *o.out;
  if (o.model) c.model = *o.model;
  if (o.keep_going) c.keep_going = true;
  validate(c);
}

std::unique_ptr<ProbabilityProvider> make_provider(const EvaluatorConfig& config) {
  if (config.kind == "toy") {
    return std::make_unique<ToyProvider>(config.lm.value_or(ToyBigramLM::reference()),
                                         config.context_window, config.resolved_name());
  }
  if (config.kind == "http") {
    HttpProviderConfig http = config.http;
    http.name = config.resolved_name();
    return std::make_unique<HttpProvider>(std::move(http));
  }
  config_error("unknown evaluator kind '" + config.kind + "'");
}

ExtractSummary run_extract(const ExperimentConfig& config) {
  if (config.task == "cache") config_error("extract needs a dataset task, not 'cache'");
  const auto pairs = load_dataset(parse_task(config.task), config.dataset_path);
  const auto provider = make_provider(config.evaluator);
  ExtractSummary s;
  s.samples = pairs.size();
  s.batch = extract_batch(pairs, *provider, config.variant, config.feature_cache, config.threads);
  return s;
}

TrainEvalResult run_train_eval(const ExperimentConfig& config) {
  const Pool pool = build_pool(config);
  TrainEvalResult result;
  result.evaluator = config.evaluator.resolved_name();
  result.variant = config.variant.str();
  result.exact_min_fraction = pool.exact_min_fraction;
  result.rows.push_back(run_mask(config, pool, FeatureMask::all(), /*save=*/true));
  write_text(config.output, report_json(config, result, "train-eval"));
  write_text(table_path(config.output), report_table(config, result, "train-eval"));
  return result;
}

TrainEvalResult run_ablate(const ExperimentConfig& config) {
  const Pool pool = build_pool(config);
  TrainEvalResult result;
  result.evaluator = config.evaluator.resolved_name();
  result.variant = config.variant.str();
  result.exact_min_fraction = pool.exact_min_fraction;
  for (const auto& mask : config.ablation_masks) {
    result.rows.push_back(run_mask(config, pool, mask, /*save=*/false));
  }
  write_text(config.output, report_json(config, result, "ablate"));
  write_text(table_path(config.output), report_table(config, result, "ablate"));
  return result;
}

std::string report_json(const ExperimentConfig& config, const TrainEvalResult& result,
                        std::string_view command) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["command"] = command;
  doc["task"] = config.task;
  doc["evaluator"] = result.evaluator;
  doc["variant"] = result.variant;
  doc["classifier"] = to_string(config.classifier);
  doc["train_config"] = train_config_json(config);
  doc["split"] = split_json(config.split);
  doc["threshold"] = config.threshold;
  doc["seeds"] = config.seeds;
  doc["exact_min_fraction"] = result.exact_min_fraction;
  if (command == "train-eval" && result.rows.size() == 1) {
    const auto row = mask_json(result.rows.front());
    doc["runs"] = row["runs"];
    doc["mean"] = row["mean"];
  } else {
    ordered_json rows = ordered_json::array();
    for (const auto& r : result.rows) rows.push_back(mask_json(r));
    doc["rows"] = std::move(rows);
  }
  return doc.dump(2) + "\n";
}

std::string report_table(const ExperimentConfig& config, const TrainEvalResult& result,
                         std::string_view command) {
  std::ostringstream out;
  const bool degraded = result.exact_min_fraction < 1.0;
  if (command == "ablate") {
    out << "Evaluator: " << result.evaluator << "  Task: " << config.task
        << "  Variant: " << result.variant << "  Classifier: " << to_string(config.classifier) << "\n";
    out << "mtp  avgtp  mpd  mps  | Acc     F1      PR-AUC\n";
    for (const auto& r : result.rows) {
      const char* marks[4];
      for (std::size_t i = 0; i < 4; ++i) marks[i] = r.mask.test(i) ? "x" : "-";
      out << pad(marks[0], 5) << pad(marks[1], 7) << pad(marks[2], 5) << pad(marks[3], 5) << "| "
          << pad(fixed(r.report.accuracy), 8) << pad(fixed(r.report.f1), 8)
          << fixed(r.report.pr_auc) << "\n";
    }
  } else {
    out << pad("Evaluator", 16) << pad("Task", 15) << pad("Variant", 30) << pad("Clf", 5)
        << pad("Acc", 8) << pad("F1", 8) << "PR-AUC\n";
    const auto& r = result.rows.front().report;
    out << pad(result.evaluator, 16) << pad(config.task, 15) << pad(result.variant, 30)
        << pad(std::string(to_string(config.classifier)), 5) << pad(fixed(r.accuracy), 8)
        << pad(fixed(r.f1), 8) << fixed(r.pr_auc) << "\n";
  }
  if (degraded) {
    out << "note: p_min is a lower bound for " << fixed(100.0 * (1.0 - result.exact_min_fraction), 1)
        << "% of rows (top-k backend)\n";
  }
  return out.str();
}

CoefficientReport report_coefficients(const fs::path& model_path) {
  const Classifier model = load_model(model_path);
  const auto* lr = std::get_if<LogisticModel>(&model);
  if (!lr) throw Error(ErrorCode::WrongModelKind, model_path.string() + " holds an MLP, not a logistic model");
  CoefficientReport r;
  r.features = lr->features;
  r.coefficients = lr->weights;
  r.odds = odds_ratios(*lr);
  if (r.odds.size() > 0) {
    Eigen::Index best = 0;
    r.odds.maxCoeff(&best);
    const auto ties = (r.odds.array() == r.odds[best]).count();
    if (ties == 1) r.largest = static_cast<std::size_t>(best);
  }
  return r;
}

std::string coefficient_table(const CoefficientReport& r) {
  std::ostringstream out;
  out << pad("feature", 10) << pad("coefficient", 14) << "odds_ratio\n";
  for (std::size_t i = 0; i < r.features.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << pad(r.features[i], 10) << pad(fixed(r.coefficients[k], 6), 14) << fixed(r.odds[k], 6)
        << (r.largest && *r.largest == i ? "  *" : "") << "\n";
  }
  return out.str();
}

}  // namespace hallu
