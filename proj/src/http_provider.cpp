#include "hallu/http_provider.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <Eigen/Core>
#include <httplib.h>
#include <json.hpp>

#include "hallu/error.hpp"
#include "hallu/math.hpp"

namespace hallu {
namespace {

using nlohmann::json;

const json& logprobs_block(const json& doc) {
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw Error(ErrorCode::MalformedResponse, "response has no choices");
  }
  const json& choice = doc["choices"][0];
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
    throw Error(ErrorCode::MalformedResponse, "response has no logprobs block");
  }
  return choice["logprobs"];
}

json parse_body(std::string_view body) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(ErrorCode::MalformedResponse, "response is not JSON");
  return doc;
}

std::string join(const TokenSeq& pieces) {
  std::string out;
  for (const auto& p : pieces) out += p;
  return out;
}

}  // namespace

TokenSeq parse_echo_tokens(std::string_view body) {
  const json doc = parse_body(body);
  const json& lp = logprobs_block(doc);
  if (!lp.contains("tokens") || !lp["tokens"].is_array()) {
    throw Error(ErrorCode::MalformedResponse, "logprobs block has no tokens");
  }
  return lp["tokens"].get<TokenSeq>();
}

std::vector<TokenRecord> parse_logprob_response(std::string_view body, std::size_t skip,
                                                std::size_t vocab_size) {
  const json doc = parse_body(body);
  const json& lp = logprobs_block(doc);
  if (!lp.contains("token_logprobs") || !lp["token_logprobs"].is_array() ||
      !lp.contains("top_logprobs") || !lp["top_logprobs"].is_array()) {
    throw Error(ErrorCode::MalformedResponse, "logprobs block lacks token_logprobs/top_logprobs");
  }
  const json& token_lp = lp["token_logprobs"];
  const json& top_lp = lp["top_logprobs"];
  if (token_lp.size() != top_lp.size()) {
    throw Error(ErrorCode::MalformedResponse, "token_logprobs and top_logprobs differ in length");
  }
  const std::vector<std::string> tokens =
      lp.contains("tokens") ? lp["tokens"].get<TokenSeq>() : TokenSeq(token_lp.size());

  std::vector<TokenRecord> records;
  for (std::size_t i = skip; i < token_lp.size(); ++i) {
    const std::size_t position = i - skip + 1;
    if (!token_lp[i].is_number() || !top_lp[i].is_object()) {
      throw Error(ErrorCode::MalformedResponse,
                  "no log-probability at position " + std::to_string(position) +
                      " (set bos_text if the prompt starts with the generation)");
    }
    const double token_logprob = token_lp[i].get<double>();

    Eigen::VectorXd candidates(static_cast<Eigen::Index>(top_lp[i].size()));
    Eigen::Index k = 0;
    Eigen::Index token_slot = -1;
    for (const auto& [text, value] : top_lp[i].items()) {
      if (!value.is_number()) {
        throw Error(ErrorCode::MalformedResponse, "non-numeric candidate log-probability");
      }
      if (i < tokens.size() && text == tokens[i]) token_slot = k;
      candidates[k++] = value.get<double>();
    }

    TokenRecord r;
    r.position = position;
    if (vocab_size > 0 && static_cast<std::size_t>(candidates.size()) >= vocab_size) {
      // Full distribution visible: renormalize in log space.
      const double lse = log_sum_exp(candidates);
      const Eigen::VectorXd probs = (candidates.array() - lse).exp().matrix();
      r.p_token = token_slot >= 0 ? probs[token_slot] : std::exp(token_logprob - lse);
      r.p_max = probs.maxCoeff();
      r.p_min = probs.minCoeff();
      r.exact_min = true;
    } else {
      r.p_token = std::exp(token_logprob);
      r.p_max = r.p_token;
      if (candidates.size() > 0) r.p_max = std::max(r.p_max, std::exp(candidates.maxCoeff()));
      r.p_min = 0.0;
      r.exact_min = false;
    }
    records.push_back(r);
  }
  return records;
}

HttpProvider::HttpProvider(HttpProviderConfig config)
    : config_(std::move(config)),
      info_{config_.name, config_.context_window, config_.vocab_size, config_.reserved_special} {
  if (info_.context_window <= info_.reserved_special) {
    throw Error(ErrorCode::ConfigError, "context_window must exceed reserved_special");
  }
  if (info_.vocab_size < 2) throw Error(ErrorCode::ConfigError, "vocab_size must be >= 2");
  if (config_.attempts < 1) throw Error(ErrorCode::ConfigError, "attempts must be >= 1");
  if (config_.top_k < 1) throw Error(ErrorCode::ConfigError, "top_k must be >= 1");
}

std::string HttpProvider::post_echo(const std::string& prompt) const {
  const json body = {{"model", config_.model},   {"prompt", prompt},
                     {"max_tokens", 0},          {"echo", true},
                     {"logprobs", config_.top_k}, {"temperature", 1.0}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  std::string last_error;
  double wait = config_.backoff_s;
  for (int attempt = 1; attempt <= config_.attempts; ++attempt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(timeout_us);
    client.set_read_timeout(timeout_us);
    client.set_write_timeout(timeout_us);
    auto res = client.Post(config_.endpoint, headers, payload, "application/json");
    if (res && res->status == 200) return res->body;
    last_error = res ? "HTTP " + std::to_string(res->status)
                     : httplib::to_string(res.error());
    if (attempt < config_.attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      wait *= 2.0;
    }
  }
  throw Error(ErrorCode::BackendUnavailable,
              config_.base_url + config_.endpoint + " failed after " +
                  std::to_string(config_.attempts) + " attempts: " + last_error);
}

TokenSeq HttpProvider::tokenize(std::string_view text) const {
  if (text.empty()) return {};
  return parse_echo_tokens(post_echo(std::string(text)));
}

std::vector<TokenRecord> HttpProvider::score_tokens(std::span<const TokenSeq> context,
                                                    const TokenSeq& generated) const {
  std::string prefix = config_.bos_text;
  for (const auto& segment : context) {
    prefix += join(segment);
    prefix += config_.segment_separator;
  }
  // Boundary: positions past the token count of the prefix alone are generated.
  const std::size_t prefix_len = prefix.empty() ? 0 : tokenize(prefix).size();
  const std::string body = post_echo(prefix + join(generated));
  return parse_logprob_response(body, prefix_len, info_.vocab_size);
}

}  // namespace hallu
