#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include "hallu/error.hpp"
#include "hallu/provider.hpp"
#include "hallu/toy_lm.hpp"

using namespace hallu;

namespace {

ScoringRequest request(std::string condition, std::string generation, bool with_condition = true) {
  ScoringRequest r;
  r.condition_text = std::move(condition);
  r.generated_text = std::move(generation);
  r.include_condition = with_condition;
  return r;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

TokenSeq tokens(std::size_t n, const std::string& prefix = "t") {
  TokenSeq out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("toy_distribution returns the stored rows") {
  const auto lm = ToyBigramLM::reference();
  const auto start = toy_distribution(lm, kStart);
  CHECK(start[0] == 0.5);
  CHECK(start[1] == 0.25);
  CHECK(start[2] == 0.25);
  const auto a = toy_distribution(lm, "A");
  CHECK(a[0] == 0.6);
  CHECK(a[1] == 0.3);
  CHECK(a[2] == 0.1);
  const auto c = toy_distribution(lm, "C");
  for (int i = 0; i < 3; ++i) CHECK(c[i] == 1.0 / 3.0);
  CHECK(code_of([&] { toy_distribution(lm, "D"); }) == ErrorCode::UnknownToken);
}

TEST_CASE("toy table invariants are enforced") {
  Eigen::VectorXd start(2);
  start << 0.5, 0.5;
  Eigen::MatrixXd bad(2, 2);
  bad << 0.7, 0.4, 0.5, 0.5;
  CHECK(code_of([&] { ToyBigramLM({"x", "y"}, start, bad); }) == ErrorCode::InvalidArgument);
  Eigen::MatrixXd zero(2, 2);
  zero << 1.0, 0.0, 0.5, 0.5;
  CHECK(code_of([&] { ToyBigramLM({"x", "y"}, start, zero); }) == ErrorCode::InvalidArgument);
  Eigen::MatrixXd ok(2, 2);
  ok << 0.5, 0.5, 0.5, 0.5;
  CHECK(code_of([&] { ToyBigramLM({"x"}, start.head(1), ok.topLeftCorner(1, 1)); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([&] { ToyBigramLM({"x", "x"}, start, ok); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("score on the toy model matches hand enumeration") {
  const ToyProvider toy(ToyBigramLM::reference());

  SUBCASE("condition A, generation B C") {
    const auto r = score(request("A", "B C"), toy);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == TokenRecord{1, 0.3, 0.6, 0.1, true});
    CHECK(r[1] == TokenRecord{2, 0.3, 0.5, 0.2, true});
  }
  SUBCASE("generated argmax token") {
    const auto r = score(request("A", "A"), toy);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == TokenRecord{1, 0.6, 0.6, 0.1, true});
  }
  SUBCASE("uniform row") {
    const auto r = score(request("C", "A"), toy);
    REQUIRE(r.size() == 1);
    CHECK(r[0].p_token == 1.0 / 3.0);
    CHECK(r[0].p_max == 1.0 / 3.0);
    CHECK(r[0].p_min == 1.0 / 3.0);
  }
  SUBCASE("without condition the first token sees the start row") {
    const auto r = score(request("A", "B C", false), toy);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == TokenRecord{1, 0.25, 0.5, 0.25, true});
    CHECK(r[1] == TokenRecord{2, 0.3, 0.5, 0.2, true});
  }
  SUBCASE("empty condition behaves like the start state") {
    CHECK(score(request("", "B C"), toy) == score(request("A", "B C", false), toy));
  }
}

TEST_CASE("knowledge precedes the condition in the prompt") {
  const ToyProvider toy(ToyBigramLM::reference());
  ScoringRequest r = request("C", "A");
  r.knowledge = "B";
  r.include_knowledge = true;
  // Last context token is the condition's C: uniform row.
  CHECK(score(r, toy)[0].p_token == 1.0 / 3.0);
  // Without the condition, knowledge's B is the left neighbour.
  r.include_condition = false;
  CHECK(score(r, toy)[0].p_token == 0.2);
}

TEST_CASE("score errors") {
  const ToyProvider toy(ToyBigramLM::reference());
  CHECK(code_of([&] { score(request("A", "   "), toy); }) == ErrorCode::EmptyGeneration);
  CHECK(code_of([&] { score(request("A", "A Z"), toy); }) == ErrorCode::UnknownToken);
  CHECK(code_of([&] { score(request("Z", "A"), toy); }) == ErrorCode::UnknownToken);
  ScoringRequest r = request("A", "B");
  r.include_knowledge = true;
  CHECK(code_of([&] { score(r, toy); }) == ErrorCode::InvalidArgument);

  const ToyProvider tiny(ToyBigramLM::reference(), 3);
  CHECK(code_of([&] { score(request("A", "A B C A"), tiny); }) == ErrorCode::ContextOverflow);
  // Condition is trimmed from the front to fit: only "C" survives, uniform row.
  const auto trimmed = score(request("A B C", "A B"), tiny);
  CHECK(trimmed[0].p_token == 1.0 / 3.0);
}

TEST_CASE("truncation policy examples") {
  const ProviderInfo info{"x", 512, 0, 2};

  SUBCASE("under budget is unchanged") {
    const auto plan = plan_truncation(300, std::nullopt, 100, info);
    CHECK(plan.drop_condition == 0);
    CHECK(plan.drop_knowledge == 0);
  }
  SUBCASE("overflow splits evenly with knowledge") {
    const auto out = truncate(tokens(300, "c"), tokens(300, "k"), tokens(100), info);
    CHECK(out.condition.size() == 205);
    CHECK(out.knowledge->size() == 205);
    // Front of each text is removed.
    CHECK(out.condition.front() == "c95");
    CHECK(out.knowledge->front() == "k95");
    CHECK(out.condition.back() == "c299");
  }
  SUBCASE("odd overflow takes the extra token from the condition") {
    const auto plan = plan_truncation(300, 301, 100, info);
    CHECK(plan.drop_condition == 96);
    CHECK(plan.drop_knowledge == 95);
  }
  SUBCASE("overflow without knowledge comes from the condition") {
    const auto plan = plan_truncation(500, std::nullopt, 100, info);
    CHECK(plan.drop_condition == 90);
  }
  SUBCASE("short knowledge hands its share to the condition") {
    const auto plan = plan_truncation(500, 10, 100, info);
    CHECK(plan.drop_knowledge == 10);
    CHECK(plan.drop_condition == 90);
  }
  SUBCASE("generation alone too long") {
    CHECK(code_of([&] { plan_truncation(0, std::nullopt, 600, info); }) == ErrorCode::ContextOverflow);
    CHECK(code_of([&] { plan_truncation(0, std::nullopt, 511, info); }) == ErrorCode::ContextOverflow);
    CHECK_NOTHROW(plan_truncation(0, std::nullopt, 510, info));
  }
}

TEST_CASE("truncate property: generation untouched and everything fits") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t window = 2 + gen() % 200;
    const std::size_t reserved = gen() % std::min<std::size_t>(window, 8);
    const ProviderInfo info{"x", window, 0, reserved};
    const std::size_t g = 1 + gen() % (window - reserved);
    const std::size_t c = gen() % 300;
    const bool with_k = gen() % 2;
    const std::size_t k = gen() % 300;
    const auto generated = tokens(g, "g");
    std::optional<TokenSeq> knowledge;
    if (with_k) knowledge = tokens(k, "k");
    const auto out = truncate(tokens(c, "c"), knowledge, generated, info);
    const std::size_t kept_k = out.knowledge ? out.knowledge->size() : 0;
    REQUIRE(out.condition.size() + kept_k + g + reserved <= window);
    // Nothing is dropped when it already fits.
    if (c + (with_k ? k : 0) + g + reserved <= window) {
      CHECK(out.condition.size() == c);
      CHECK(kept_k == (with_k ? k : 0));
    } else {
      CHECK(out.condition.size() + kept_k + g + reserved == window);
    }
    // Kept tokens are a suffix.
    if (!out.condition.empty()) CHECK(out.condition.back() == "c" + std::to_string(c - 1));
  }
}

TEST_CASE("record bounds hold on random toy models and inputs") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int model = 0; model < 20; ++model) {
    const std::size_t n = 2 + gen() % 6;
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < n; ++i) vocab.push_back("w" + std::to_string(i));
    Eigen::VectorXd start(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (auto& v : start) v = u(gen);
    start /= start.sum();
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = u(gen);
      t.row(r) /= t.row(r).sum();
    }
    // Renormalization can leave rows a few ulps off; accept within 1e-12.
    const ToyProvider toy(ToyBigramLM(vocab, start, t));
    for (int s = 0; s < 50; ++s) {
      std::string cond, gen_text;
      for (std::size_t i = 0, m = gen() % 5; i < m; ++i) cond += vocab[gen() % n] + " ";
      for (std::size_t i = 0, m = 1 + gen() % 8; i < m; ++i) gen_text += vocab[gen() % n] + " ";
      for (const auto& r : score(request(cond, gen_text, gen() % 2), toy)) {
        CHECK(0.0 <= r.p_min);
        CHECK(r.p_min <= r.p_token);
        CHECK(r.p_token <= r.p_max);
        CHECK(r.p_max <= 1.0);
        CHECK(r.p_max >= 1.0 / static_cast<double>(n));
      }
    }
  }
}

TEST_CASE("toy scoring is deterministic across threads") {
  const ToyProvider toy(ToyBigramLM::reference());
  const auto req = request("A B", "C A B B A C C A");
  const auto expected = score(req, toy);
  std::vector<std::vector<TokenRecord>> results(8);
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < results.size(); ++i) {
      workers.emplace_back([&, i] { results[i] = score(req, toy); });
    }
  }
  for (const auto& r : results) CHECK(r == expected);
}

TEST_CASE("validate_record rejects non-compliant records") {
  CHECK_NOTHROW(validate_record({1, 0.3, 0.6, 0.1, true}, 3));
  CHECK(code_of([] { validate_record({1, 0.7, 0.6, 0.1, true}, 3); }) == ErrorCode::InvalidRecord);
  CHECK(code_of([] { validate_record({1, 0.05, 0.6, 0.1, true}, 3); }) == ErrorCode::InvalidRecord);
  CHECK(code_of([] { validate_record({1, 0.2, 0.2, 0.1, true}, 3); }) == ErrorCode::InvalidRecord);
  CHECK(code_of([] { validate_record({1, 0.5, 1.2, 0.1, true}, 3); }) == ErrorCode::InvalidRecord);
}

TEST_CASE("whitespace tokenizer") {
  CHECK(whitespace_tokenize("  A\tB \n C ") == TokenSeq{"A", "B", "C"});
  CHECK(whitespace_tokenize("").empty());
}
