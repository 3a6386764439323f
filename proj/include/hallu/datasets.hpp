#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hallu {

enum class Task { Summarization, QA, KGD, GUQ, HELM, TrueFalse };

std::string_view to_string(Task task);
/// Also accepts "dialogue" (KGD) and "general" (GUQ). Throws UnknownTask.
Task parse_task(std::string_view name);

/// label: 0 faithful, 1 hallucination.
struct LabeledPair {
  std::string id;
  std::string condition_text;
  std::optional<std::string> knowledge;
  std::string generated_text;
  int label = 0;
  Task task = Task::QA;
  std::optional<std::string> generator_id;  // HELM only
  std::optional<std::string> category;      // True-False only

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// HaluEval JSON-lines. Paired tasks expand each record into a faithful
/// (label 0) and a hallucinated (label 1) pair:
///   qa            knowledge, question, right_answer, hallucinated_answer
///   kgd           knowledge, dialogue_history, right_response, hallucinated_response
///   summarization document, right_summary, hallucinated_summary
/// GUQ records load one-to-one:
///   guq           user_query, chatgpt_response, hallucination ("yes"/"no", bool or 0/1)
/// Throws MalformedRecord with the 1-based line number.
std::vector<LabeledPair> load_halueval(Task task, const std::filesystem::path& path);

/// HELM JSON-lines: sentence, context, generator, annotation (0/1, bool, or
/// "hallucination"/"faithful"), optional id. Generator ids are upper-cased.
std::vector<LabeledPair> load_helm(const std::filesystem::path& path);

/// True-False statements. `path` is a directory of per-category CSV files
/// (`<category>_true_false.csv` or `<category>.csv`, header `statement,label`)
/// or a single such file, or a JSON-lines file with statement, label,
/// category. The source label is truth (1 true); true statements map to 0.
/// Categories are lower-cased.
std::vector<LabeledPair> load_truefalse(const std::filesystem::path& path);

/// Dispatches on task.
std::vector<LabeledPair> load_dataset(Task task, const std::filesystem::path& path);

/// Lossless JSON-lines form of LabeledPair.
std::string to_json_line(const LabeledPair& pair);
LabeledPair pair_from_json_line(std::string_view line);

enum class SplitProtocol { StratifiedFraction, LeaveOneOut, BalancedSubset };

std::string_view to_string(SplitProtocol protocol);

struct SplitPlan {
  std::vector<std::string> train_ids;  // pool order
  std::vector<std::string> test_ids;   // pool order
  SplitProtocol protocol = SplitProtocol::StratifiedFraction;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Minimal view of a pool member used by the split protocols.
struct PoolItem {
  std::string id;
  int label = 0;
  std::optional<std::string> generator_id;
  std::optional<std::string> category;
};

std::vector<PoolItem> pool_of(std::span<const LabeledPair> pairs);

/// Train set holds floor(n * fraction / 2) items of each class.
SplitPlan split_stratified(std::span<const PoolItem> pool, double fraction, std::uint64_t seed);

enum class SplitKey { Generator, Category };

/// Test = items whose key equals `held_out` (case-insensitive); train = rest.
SplitPlan split_leave_one_out(std::span<const PoolItem> pool, SplitKey key,
                              std::string_view held_out);

/// Train = n_pos positives and n_neg negatives sampled per seed; test = rest.
SplitPlan balanced_subset(std::span<const PoolItem> pool, std::size_t n_pos,
                          std::size_t n_neg, std::uint64_t seed);

SplitPlan split_stratified(std::span<const LabeledPair> pairs, double fraction,
                           std::uint64_t seed);
SplitPlan split_leave_one_out(std::span<const LabeledPair> pairs, SplitKey key,
                              std::string_view held_out);
SplitPlan balanced_subset(std::span<const LabeledPair> pairs, std::size_t n_pos,
                          std::size_t n_neg, std::uint64_t seed);

}  // namespace hallu
