#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hallu/provider.hpp"

namespace hallu {

/// Settings for an OpenAI-compatible `/v1/completions` server that supports
/// `echo` with `max_tokens: 0` (vLLM, llama.cpp server, text-generation
/// servers with the legacy completions route).
///
/// Request body: {"model", "prompt", "max_tokens": 0, "echo": true,
///                "logprobs": top_k, "temperature": 1.0}
/// Response: choices[0].logprobs.{tokens, token_logprobs, top_logprobs},
/// where top_logprobs[i] maps candidate token text to its log-probability.
struct HttpProviderConfig {
  std::string name = "http";
  std::string base_url = "http://127.0.0.1:8000";
  std::string endpoint = "/v1/completions";
  std::string model;
  std::size_t context_window = 2048;
  std::size_t vocab_size = 50257;
  std::size_t reserved_special = 2;
  int top_k = 5;
  double timeout_s = 60.0;
  int attempts = 3;
  double backoff_s = 1.0;  // doubles after each failed attempt
  std::string api_key_env = "HALLU_API_KEY";
  std::string segment_separator = "\n";
  /// Prepended to every prompt so the first scored token has a left context.
  /// Echo APIs return no log-probability for the very first prompt token.
  std::string bos_text;
};

class HttpProvider final : public ProbabilityProvider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  const ProviderInfo& info() const override { return info_; }
  TokenSeq tokenize(std::string_view text) const override;
  std::vector<TokenRecord> score_tokens(std::span<const TokenSeq> context,
                                        const TokenSeq& generated) const override;

  const HttpProviderConfig& config() const { return config_; }

 private:
  std::string post_echo(const std::string& prompt) const;

  HttpProviderConfig config_;
  ProviderInfo info_;
};

/// Token texts echoed back in a completions response.
TokenSeq parse_echo_tokens(std::string_view body);

/// Converts positions [skip, end) of a completions response into records.
/// With a full-vocabulary candidate list the log-probabilities are
/// renormalized via log-sum-exp and p_min is exact; with a top-k list p_min
/// is set to 0 and flagged inexact.
std::vector<TokenRecord> parse_logprob_response(std::string_view body, std::size_t skip,
                                                std::size_t vocab_size);

}  // namespace hallu
