#include "hallu/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "hallu/error.hpp"
#include "hallu/rng.hpp"

namespace hallu {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string padded(std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, n);
  return buf;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& why) {
  throw Error(ErrorCode::MalformedRecord,
              path.filename().string() + ":" + std::to_string(line) + ": " + why);
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

/// Calls `fn(doc, line_no)` for each non-blank line of a JSON-lines file.
template <typename Fn>
void for_each_json_line(const fs::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) malformed(path, line_no, "not a JSON object");
    fn(doc, line_no);
  }
}

std::string text_field(const json& doc, const char* key, const fs::path& path,
                       std::size_t line_no) {
  if (!doc.contains(key) || !doc[key].is_string()) {
    malformed(path, line_no, std::string("missing text field '") + key + "'");
  }
  return doc[key].get<std::string>();
}

std::string nonempty_text(const json& doc, const char* key, const fs::path& path,
                          std::size_t line_no) {
  auto s = text_field(doc, key, path, line_no);
  if (s.find_first_not_of(" \t\r\n") == std::string::npos) {
    malformed(path, line_no, std::string("empty generated text in '") + key + "'");
  }
  return s;
}

std::optional<int> label_value(const json& v, bool truthy_means_positive) {
  if (v.is_boolean()) return (v.get<bool>() == truthy_means_positive) ? 1 : 0;
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i == 0 || i == 1) return truthy_means_positive ? static_cast<int>(i) : 1 - static_cast<int>(i);
    return std::nullopt;
  }
  if (v.is_string()) {
    const std::string s = lower(v.get<std::string>());
    if (s == "1" || s == "yes" || s == "true" || s == "hallucination" || s == "hallucinated") {
      return truthy_means_positive ? 1 : 0;
    }
    if (s == "0" || s == "no" || s == "false" || s == "faithful" || s == "factual") {
      return truthy_means_positive ? 0 : 1;
    }
  }
  return std::nullopt;
}

std::optional<std::string> id_field(const json& doc, const char* key) {
  if (!doc.contains(key)) return std::nullopt;
  const json& v = doc[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return std::nullopt;
}

struct PairedSchema {
  const char* condition;
  const char* knowledge;  // may be null
  const char* right;
  const char* hallucinated;
};

PairedSchema paired_schema(Task task) {
  switch (task) {
    case Task::QA: return {"question", "knowledge", "right_answer", "hallucinated_answer"};
    case Task::KGD:
      return {"dialogue_history", "knowledge", "right_response", "hallucinated_response"};
    case Task::Summarization:
      return {"document", nullptr, "right_summary", "hallucinated_summary"};
    default: break;
  }
  throw Error(ErrorCode::UnknownTask, std::string(to_string(task)) + " is not a paired HaluEval task");
}

std::vector<std::string> parse_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string category_from_filename(const fs::path& path) {
  std::string stem = path.stem().string();
  const std::string suffix = "_true_false";
  if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
    stem.erase(stem.size() - suffix.size());
  }
  return lower(stem);
}

void load_truefalse_csv(const fs::path& path, std::vector<LabeledPair>& out) {
  const std::string category = category_from_filename(path);
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t row = 0;
  std::ptrdiff_t statement_col = 0;
  std::ptrdiff_t label_col = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = parse_csv_row(line);
    if (line_no == 1) {
      auto lowered = fields;
      for (auto& f : lowered) f = lower(f);
      auto s = std::find(lowered.begin(), lowered.end(), "statement");
      auto l = std::find(lowered.begin(), lowered.end(), "label");
      if (s == lowered.end() || l == lowered.end()) {
        malformed(path, line_no, "header must name 'statement' and 'label' columns");
      }
      statement_col = s - lowered.begin();
      label_col = l - lowered.begin();
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max(statement_col, label_col));
    if (fields.size() <= need) malformed(path, line_no, "too few columns");
    const std::string& statement = fields[static_cast<std::size_t>(statement_col)];
    const std::string& truth = fields[static_cast<std::size_t>(label_col)];
    if (statement.find_first_not_of(" \t") == std::string::npos) {
      malformed(path, line_no, "empty statement");
    }
    auto label = label_value(json(truth), /*truthy_means_positive=*/false);
    if (!label) malformed(path, line_no, "label must be 0 or 1");

    LabeledPair p;
    p.id = "tf-" + category + "-" + padded(row++, 5);
    p.generated_text = statement;
    p.label = *label;
    p.task = Task::TrueFalse;
    p.category = category;
    out.push_back(std::move(p));
  }
}

void load_truefalse_jsonl(const fs::path& path, std::vector<LabeledPair>& out) {
  std::size_t row = 0;
  for_each_json_line(path, [&](const json& doc, std::size_t line_no) {
    LabeledPair p;
    p.generated_text = nonempty_text(doc, "statement", path, line_no);
    p.category = lower(text_field(doc, "category", path, line_no));
    if (!doc.contains("label")) malformed(path, line_no, "missing 'label'");
    auto label = label_value(doc["label"], /*truthy_means_positive=*/false);
    if (!label) malformed(path, line_no, "label must be 0 or 1");
    p.label = *label;
    p.task = Task::TrueFalse;
    p.id = id_field(doc, "id").value_or("tf-" + *p.category + "-" + padded(row, 5));
    ++row;
    out.push_back(std::move(p));
  });
}

void check_unique_ids(std::span<const PoolItem> pool) {
  std::unordered_set<std::string> seen;
  for (const auto& item : pool) {
    if (!seen.insert(item.id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate id in pool: " + item.id);
    }
  }
}

SplitPlan plan_from_mask(std::span<const PoolItem> pool, const std::vector<bool>& in_train,
                         SplitProtocol protocol, std::uint64_t seed) {
  SplitPlan plan;
  plan.protocol = protocol;
  plan.seed = seed;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (in_train[i] ? plan.train_ids : plan.test_ids).push_back(pool[i].id);
  }
  return plan;
}

/// Marks `count` randomly chosen members of `indices` as training items.
void sample_into(std::vector<std::size_t> indices, std::size_t count, Rng& rng,
                 std::vector<bool>& in_train) {
  rng.shuffle(indices);
  for (std::size_t i = 0; i < count; ++i) in_train[indices[i]] = true;
}

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Summarization: return "summarization";
    case Task::QA: return "qa";
    case Task::KGD: return "kgd";
    case Task::GUQ: return "guq";
    case Task::HELM: return "helm";
    case Task::TrueFalse: return "true_false";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  const std::string n = lower(std::string(name));
  if (n == "summarization") return Task::Summarization;
  if (n == "qa") return Task::QA;
  if (n == "kgd" || n == "dialogue") return Task::KGD;
  if (n == "guq" || n == "general") return Task::GUQ;
  if (n == "helm") return Task::HELM;
  if (n == "true_false" || n == "truefalse") return Task::TrueFalse;
  throw Error(ErrorCode::UnknownTask, "unknown task '" + std::string(name) + "'");
}

std::vector<LabeledPair> load_halueval(Task task, const fs::path& path) {
  std::vector<LabeledPair> out;
  const std::string prefix(to_string(task));
  std::size_t record = 0;

  if (task == Task::GUQ) {
    for_each_json_line(path, [&](const json& doc, std::size_t line_no) {
      LabeledPair p;
      p.condition_text = text_field(doc, "user_query", path, line_no);
      p.generated_text = nonempty_text(doc, "chatgpt_response", path, line_no);
      if (!doc.contains("hallucination")) malformed(path, line_no, "missing 'hallucination'");
      auto label = label_value(doc["hallucination"], /*truthy_means_positive=*/true);
      if (!label) malformed(path, line_no, "unrecognized hallucination value");
      p.label = *label;
      p.task = Task::GUQ;
      auto id = id_field(doc, "ID");
      p.id = prefix + "-" + (id ? *id : padded(record, 6));
      ++record;
      out.push_back(std::move(p));
    });
    return out;
  }

  const PairedSchema schema = paired_schema(task);
  for_each_json_line(path, [&](const json& doc, std::size_t line_no) {
    LabeledPair base;
    base.condition_text = text_field(doc, schema.condition, path, line_no);
    if (schema.knowledge) base.knowledge = text_field(doc, schema.knowledge, path, line_no);
    base.task = task;
    const std::string stem = prefix + "-" + padded(record++, 6);

    LabeledPair right = base;
    right.id = stem + "-0";
    right.generated_text = nonempty_text(doc, schema.right, path, line_no);
    right.label = 0;

    LabeledPair wrong = std::move(base);
    wrong.id = stem + "-1";
    wrong.generated_text = nonempty_text(doc, schema.hallucinated, path, line_no);
    wrong.label = 1;

    out.push_back(std::move(right));
    out.push_back(std::move(wrong));
  });
  return out;
}

std::vector<LabeledPair> load_helm(const fs::path& path) {
  std::vector<LabeledPair> out;
  std::size_t record = 0;
  for_each_json_line(path, [&](const json& doc, std::size_t line_no) {
    LabeledPair p;
    p.generated_text = nonempty_text(doc, "sentence", path, line_no);
    p.condition_text = text_field(doc, "context", path, line_no);
    p.generator_id = upper(text_field(doc, "generator", path, line_no));
    if (p.generator_id->empty()) malformed(path, line_no, "empty generator");
    if (!doc.contains("annotation")) malformed(path, line_no, "missing 'annotation'");
    auto label = label_value(doc["annotation"], /*truthy_means_positive=*/true);
    if (!label) malformed(path, line_no, "unrecognized annotation");
    p.label = *label;
    p.task = Task::HELM;
    p.id = id_field(doc, "id").value_or("helm-" + padded(record, 5));
    ++record;
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<LabeledPair> load_truefalse(const fs::path& path) {
  std::vector<LabeledPair> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_truefalse_csv(f, out);
  } else if (path.extension() == ".csv") {
    load_truefalse_csv(path, out);
  } else {
    load_truefalse_jsonl(path, out);
  }
  return out;
}

std::vector<LabeledPair> load_dataset(Task task, const fs::path& path) {
  switch (task) {
    case Task::HELM: return load_helm(path);
    case Task::TrueFalse: return load_truefalse(path);
    default: return load_halueval(task, path);
  }
}

std::string to_json_line(const LabeledPair& p) {
  json doc = {{"id", p.id},
              {"task", to_string(p.task)},
              {"condition_text", p.condition_text},
              {"generated_text", p.generated_text},
              {"label", p.label}};
  if (p.knowledge) doc["knowledge"] = *p.knowledge;
  if (p.generator_id) doc["generator_id"] = *p.generator_id;
  if (p.category) doc["category"] = *p.category;
  return doc.dump();
}

LabeledPair pair_from_json_line(std::string_view line) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::MalformedRecord, "pair line is not a JSON object");
  }
  try {
    LabeledPair p;
    p.id = doc.at("id").get<std::string>();
    p.task = parse_task(doc.at("task").get<std::string>());
    p.condition_text = doc.at("condition_text").get<std::string>();
    p.generated_text = doc.at("generated_text").get<std::string>();
    p.label = doc.at("label").get<int>();
    if (doc.contains("knowledge")) p.knowledge = doc["knowledge"].get<std::string>();
    if (doc.contains("generator_id")) p.generator_id = doc["generator_id"].get<std::string>();
    if (doc.contains("category")) p.category = doc["category"].get<std::string>();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  }
}

std::string_view to_string(SplitProtocol protocol) {
  switch (protocol) {
    case SplitProtocol::StratifiedFraction: return "stratified_fraction";
    case SplitProtocol::LeaveOneOut: return "leave_one_out";
    case SplitProtocol::BalancedSubset: return "balanced_subset";
  }
  return "unknown";
}

std::vector<PoolItem> pool_of(std::span<const LabeledPair> pairs) {
  std::vector<PoolItem> pool;
  pool.reserve(pairs.size());
  for (const auto& p : pairs) pool.push_back({p.id, p.label, p.generator_id, p.category});
  return pool;
}

SplitPlan split_stratified(std::span<const PoolItem> pool, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fraction must be in (0, 1]");
  }
  check_unique_ids(pool);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < pool.size(); ++i) (pool[i].label == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorCode::SingleClassInput, "stratified split needs both classes");
  }
  // Guard against n * f landing a hair under an integer.
  const auto per_class = static_cast<std::size_t>(
      std::floor(static_cast<double>(pool.size()) * fraction / 2.0 + 1e-9));
  if (per_class > pos.size() || per_class > neg.size()) {
    throw Error(ErrorCode::InsufficientClassCount,
                "stratified split needs " + std::to_string(per_class) + " items per class");
  }
  Rng rng(seed);
  std::vector<bool> in_train(pool.size(), false);
  sample_into(std::move(pos), per_class, rng, in_train);
  sample_into(std::move(neg), per_class, rng, in_train);
  return plan_from_mask(pool, in_train, SplitProtocol::StratifiedFraction, seed);
}

SplitPlan split_leave_one_out(std::span<const PoolItem> pool, SplitKey key,
                              std::string_view held_out) {
  check_unique_ids(pool);
  const std::string wanted = lower(std::string(held_out));
  std::vector<bool> in_train(pool.size(), true);
  bool found = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& value = key == SplitKey::Generator ? pool[i].generator_id : pool[i].category;
    if (value && lower(*value) == wanted) {
      in_train[i] = false;
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorCode::UnknownKeyValue,
                "'" + std::string(held_out) + "' does not occur in the pool");
  }
  return plan_from_mask(pool, in_train, SplitProtocol::LeaveOneOut, 0);
}

SplitPlan balanced_subset(std::span<const PoolItem> pool, std::size_t n_pos, std::size_t n_neg,
                          std::uint64_t seed) {
  check_unique_ids(pool);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < pool.size(); ++i) (pool[i].label == 1 ? pos : neg).push_back(i);
  if (pos.size() < n_pos || neg.size() < n_neg) {
    throw Error(ErrorCode::InsufficientClassCount,
                "requested " + std::to_string(n_pos) + "/" + std::to_string(n_neg) +
                    " but the pool has " + std::to_string(pos.size()) + " positives and " +
                    std::to_string(neg.size()) + " negatives");
  }
  Rng rng(seed);
  std::vector<bool> in_train(pool.size(), false);
  sample_into(std::move(pos), n_pos, rng, in_train);
  sample_into(std::move(neg), n_neg, rng, in_train);
  return plan_from_mask(pool, in_train, SplitProtocol::BalancedSubset, seed);
}

SplitPlan split_stratified(std::span<const LabeledPair> pairs, double fraction,
                           std::uint64_t seed) {
  const auto pool = pool_of(pairs);
  return split_stratified(std::span<const PoolItem>(pool), fraction, seed);
}

SplitPlan split_leave_one_out(std::span<const LabeledPair> pairs, SplitKey key,
                              std::string_view held_out) {
  const auto pool = pool_of(pairs);
  return split_leave_one_out(std::span<const PoolItem>(pool), key, held_out);
}

SplitPlan balanced_subset(std::span<const LabeledPair> pairs, std::size_t n_pos,
                          std::size_t n_neg, std::uint64_t seed) {
  const auto pool = pool_of(pairs);
  return balanced_subset(std::span<const PoolItem>(pool), n_pos, n_neg, seed);
}

}  // namespace hallu
