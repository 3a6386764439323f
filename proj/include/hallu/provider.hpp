#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hallu {

using TokenSeq = std::vector<std::string>;

struct ScoringRequest {
  std::string condition_text;
  std::optional<std::string> knowledge;
  std::string generated_text;
  bool include_condition = true;
  bool include_knowledge = false;
};

/// Evaluator probabilities at one generated position. `p_max` and `p_min`
/// are the probabilities of the most and least likely vocabulary entries.
/// When the backend cannot see the full vocabulary, `p_min` is a lower bound
/// (0) and `exact_min` is false.
struct TokenRecord {
  std::size_t position = 0;  // 1-based
  double p_token = 0.0;
  double p_max = 0.0;
  double p_min = 0.0;
  bool exact_min = true;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct ProviderInfo {
  std::string name;
  std::size_t context_window = 0;
  std::size_t vocab_size = 0;
  std::size_t reserved_special = 0;
};

/// Teacher-forced scorer. Implementations either support concurrent
/// `score_tokens` calls or report `concurrent() == false`, in which case
/// callers serialize access.
class ProbabilityProvider {
 public:
  virtual ~ProbabilityProvider() = default;

  virtual const ProviderInfo& info() const = 0;

  virtual TokenSeq tokenize(std::string_view text) const = 0;

  /// Scores `generated` one position at a time. `context` holds the prompt
  /// segments in order (knowledge, condition); an empty list means the
  /// first generated token is conditioned on the start state only.
  virtual std::vector<TokenRecord> score_tokens(
      std::span<const TokenSeq> context, const TokenSeq& generated) const = 0;

  virtual bool concurrent() const { return true; }
};

/// Token counts removed from the front of each prompt segment.
struct TruncationPlan {
  std::size_t drop_condition = 0;
  std::size_t drop_knowledge = 0;
};

/// Budget = window - reserved - |generated|. Overflow comes out of the
/// condition alone, or is split evenly with knowledge (odd token from the
/// condition). A segment too short for its half passes the remainder to the
/// other one. Throws ContextOverflow if the generation alone does not fit.
TruncationPlan plan_truncation(std::size_t condition_len,
                               std::optional<std::size_t> knowledge_len,
                               std::size_t generated_len,
                               const ProviderInfo& info);

struct Truncated {
  TokenSeq condition;
  std::optional<TokenSeq> knowledge;
};

Truncated truncate(TokenSeq condition, std::optional<TokenSeq> knowledge,
                   const TokenSeq& generated, const ProviderInfo& info);

/// Throws InvalidRecord unless 0 <= p_min <= p_token <= p_max <= 1 and
/// p_max >= 1/|V|.
void validate_record(const TokenRecord& record, std::size_t vocab_size);

/// Tokenizes, truncates, and scores `request`. Prompt order is knowledge,
/// condition, generation.
std::vector<TokenRecord> score(const ScoringRequest& request,
                               const ProbabilityProvider& provider);

}  // namespace hallu
