#include "hallu/provider.hpp"

#include <algorithm>
#include <cmath>

#include "hallu/error.hpp"

namespace hallu {

TruncationPlan plan_truncation(std::size_t condition_len,
                               std::optional<std::size_t> knowledge_len,
                               std::size_t generated_len,
                               const ProviderInfo& info) {
  const std::size_t usable = info.context_window > info.reserved_special
                                 ? info.context_window - info.reserved_special
                                 : 0;
  if (generated_len > usable) {
    throw Error(ErrorCode::ContextOverflow,
                "generated text has " + std::to_string(generated_len) +
                    " tokens but only " + std::to_string(usable) +
                    " fit in the context window");
  }
  const std::size_t budget = usable - generated_len;
  const std::size_t knowledge = knowledge_len.value_or(0);
  const std::size_t total = condition_len + knowledge;

  TruncationPlan plan;
  if (total <= budget) return plan;
  const std::size_t overflow = total - budget;

  if (!knowledge_len) {
    plan.drop_condition = overflow;
    return plan;
  }

  std::size_t from_knowledge = overflow / 2;
  std::size_t from_condition = overflow - from_knowledge;
  if (from_condition > condition_len) {
    from_knowledge += from_condition - condition_len;
    from_condition = condition_len;
  }
  if (from_knowledge > knowledge) {
    from_condition += from_knowledge - knowledge;
    from_knowledge = knowledge;
  }
  plan.drop_condition = from_condition;
  plan.drop_knowledge = from_knowledge;
  return plan;
}

Truncated truncate(TokenSeq condition, std::optional<TokenSeq> knowledge,
                   const TokenSeq& generated, const ProviderInfo& info) {
  std::optional<std::size_t> knowledge_len;
  if (knowledge) knowledge_len = knowledge->size();
  const auto plan =
      plan_truncation(condition.size(), knowledge_len, generated.size(), info);

  condition.erase(condition.begin(),
                  condition.begin() + static_cast<std::ptrdiff_t>(plan.drop_condition));
  if (knowledge) {
    knowledge->erase(knowledge->begin(),
                     knowledge->begin() + static_cast<std::ptrdiff_t>(plan.drop_knowledge));
  }
  return {std::move(condition), std::move(knowledge)};
}

void validate_record(const TokenRecord& r, std::size_t vocab_size) {
  const bool finite = std::isfinite(r.p_token) && std::isfinite(r.p_max) &&
                      std::isfinite(r.p_min);
  const bool ordered = finite && 0.0 <= r.p_min && r.p_min <= r.p_token &&
                       r.p_token <= r.p_max && r.p_max <= 1.0;
  if (!ordered) {
    throw Error(ErrorCode::InvalidRecord,
                "position " + std::to_string(r.position) +
                    " violates 0 <= p_min <= p_token <= p_max <= 1");
  }
  // Small slack: a max over |V| probabilities summing to 1 in floating point.
  if (vocab_size > 0 &&
      r.p_max < 1.0 / static_cast<double>(vocab_size) * (1.0 - 1e-9)) {
    throw Error(ErrorCode::InvalidRecord,
                "position " + std::to_string(r.position) +
                    " has p_max below the uniform probability");
  }
}

std::vector<TokenRecord> score(const ScoringRequest& request,
                               const ProbabilityProvider& provider) {
  if (request.include_knowledge && !request.knowledge) {
    throw Error(ErrorCode::InvalidArgument,
                "include_knowledge requires a knowledge text");
  }
  const TokenSeq generated = provider.tokenize(request.generated_text);
  if (generated.empty()) {
    throw Error(ErrorCode::EmptyGeneration, "generated text has no tokens");
  }

  TokenSeq condition;
  if (request.include_condition) condition = provider.tokenize(request.condition_text);
  std::optional<TokenSeq> knowledge;
  if (request.include_knowledge) knowledge = provider.tokenize(*request.knowledge);

  auto cut = truncate(std::move(condition), std::move(knowledge), generated,
                      provider.info());

  std::vector<TokenSeq> context;
  if (cut.knowledge && !cut.knowledge->empty()) context.push_back(std::move(*cut.knowledge));
  if (!cut.condition.empty()) context.push_back(std::move(cut.condition));

  auto records = provider.score_tokens(context, generated);
  if (records.empty()) {
    throw Error(ErrorCode::MalformedResponse, "provider returned no records");
  }
  for (const auto& r : records) validate_record(r, provider.info().vocab_size);
  return records;
}

}  // namespace hallu
