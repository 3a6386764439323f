#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hallu/provider.hpp"

namespace hallu {

/// Smoothed bigram table over a small vocabulary. Rows are keyed by the
/// previous token; the start row conditions the first token of a sequence.
class ToyBigramLM {
 public:
  ToyBigramLM(std::vector<std::string> vocab, Eigen::VectorXd start,
              Eigen::MatrixXd transition);

  /// Vocab {A, B, C}; start (0.5, 0.25, 0.25);
  /// A -> (0.6, 0.3, 0.1), B -> (0.2, 0.5, 0.3), C -> uniform.
  static ToyBigramLM reference();

  const std::vector<std::string>& vocab() const { return vocab_; }
  std::size_t size() const { return vocab_.size(); }
  std::size_t index_of(std::string_view token) const;

  const Eigen::VectorXd& start() const { return start_; }
  const Eigen::MatrixXd& transition() const { return transition_; }

 private:
  std::vector<std::string> vocab_;
  Eigen::VectorXd start_;
  Eigen::MatrixXd transition_;
};

inline constexpr std::nullopt_t kStart = std::nullopt;

/// Stored row for `previous`, or the start row when `previous` is kStart.
/// Throws UnknownToken.
Eigen::VectorXd toy_distribution(const ToyBigramLM& lm,
                                 std::optional<std::string_view> previous);

TokenSeq whitespace_tokenize(std::string_view text);

class ToyProvider final : public ProbabilityProvider {
 public:
  explicit ToyProvider(ToyBigramLM lm, std::size_t context_window = 1024,
                       std::string name = "toy-bigram");

  const ProviderInfo& info() const override { return info_; }
  TokenSeq tokenize(std::string_view text) const override;
  std::vector<TokenRecord> score_tokens(std::span<const TokenSeq> context,
                                        const TokenSeq& generated) const override;

  const ToyBigramLM& lm() const { return lm_; }

 private:
  ToyBigramLM lm_;
  ProviderInfo info_;
};

}  // namespace hallu
