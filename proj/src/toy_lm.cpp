#include "hallu/toy_lm.hpp"

#include <cctype>
#include <cmath>

#include "hallu/error.hpp"

namespace hallu {
namespace {

void check_row(const Eigen::Ref<const Eigen::VectorXd>& row, const std::string& what) {
  if ((row.array() <= 0.0).any() || !row.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, what + " has a non-positive entry");
  }
  if (std::abs(row.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, what + " does not sum to 1");
  }
}

}  // namespace

ToyBigramLM::ToyBigramLM(std::vector<std::string> vocab, Eigen::VectorXd start,
                         Eigen::MatrixXd transition)
    : vocab_(std::move(vocab)), start_(std::move(start)), transition_(std::move(transition)) {
  const auto n = static_cast<Eigen::Index>(vocab_.size());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "toy vocabulary needs >= 2 tokens");
  if (start_.size() != n || transition_.rows() != n || transition_.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "toy table shape does not match vocabulary");
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i].empty() || vocab_[i].find_first_of(" \t\n\r") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "toy tokens must be non-empty without whitespace");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (vocab_[i] == vocab_[j]) throw Error(ErrorCode::InvalidArgument, "duplicate toy token");
    }
  }
  check_row(start_, "start row");
  for (Eigen::Index r = 0; r < n; ++r) {
    check_row(transition_.row(r).transpose(), "row " + vocab_[static_cast<std::size_t>(r)]);
  }
}

ToyBigramLM ToyBigramLM::reference() {
  Eigen::VectorXd start(3);
  start << 0.5, 0.25, 0.25;
  Eigen::MatrixXd t(3, 3);
  t << 0.6, 0.3, 0.1,
       0.2, 0.5, 0.3,
       1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
  return ToyBigramLM({"A", "B", "C"}, start, t);
}

std::size_t ToyBigramLM::index_of(std::string_view token) const {
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i] == token) return i;
  }
  throw Error(ErrorCode::UnknownToken, "'" + std::string(token) + "' is not in the toy vocabulary");
}

Eigen::VectorXd toy_distribution(const ToyBigramLM& lm,
                                 std::optional<std::string_view> previous) {
  if (!previous) return lm.start();
  const auto row = static_cast<Eigen::Index>(lm.index_of(*previous));
  return lm.transition().row(row).transpose();
}

TokenSeq whitespace_tokenize(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

ToyProvider::ToyProvider(ToyBigramLM lm, std::size_t context_window, std::string name)
    : lm_(std::move(lm)), info_{std::move(name), context_window, lm_.size(), 0} {}

TokenSeq ToyProvider::tokenize(std::string_view text) const {
  return whitespace_tokenize(text);
}

std::vector<TokenRecord> ToyProvider::score_tokens(std::span<const TokenSeq> context,
                                                   const TokenSeq& generated) const {
  for (const auto& segment : context) {
    for (const auto& token : segment) lm_.index_of(token);
  }
  std::optional<std::string_view> previous = kStart;
  for (auto it = context.rbegin(); it != context.rend(); ++it) {
    if (!it->empty()) {
      previous = it->back();
      break;
    }
  }

  std::vector<TokenRecord> records;
  records.reserve(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const Eigen::VectorXd row = toy_distribution(lm_, previous);
    const auto idx = static_cast<Eigen::Index>(lm_.index_of(generated[i]));
    records.push_back({i + 1, row[idx], row.maxCoeff(), row.minCoeff(), true});
    previous = generated[i];
  }
  return records;
}

}  // namespace hallu
