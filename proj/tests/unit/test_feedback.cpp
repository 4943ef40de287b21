#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "clarq/errors.hpp"
#include "clarq/feedback.hpp"

using namespace clarq;

namespace {

double total(const std::map<std::string, double>& m) {
  double s = 0.0;
  for (const auto& [_, p] : m) s += p;
  return s;
}

}  // namespace

TEST_CASE("EM stationary point on the two-term fixture") {
  const auto ix = InvertedIndex<int>::build({{1, "x"}, {2, "y"}});
  const auto m = estimate_negative_model({"x x y"}, ix.stats());
  CHECK(std::abs(m.prob("x") - 5.0 / 6.0) <= 1e-6);
  CHECK(std::abs(m.prob("y") - 1.0 / 6.0) <= 1e-6);
  for (std::size_t i = 1; i < m.log_likelihood.size(); ++i)
    CHECK(m.log_likelihood[i] >= m.log_likelihood[i - 1]);
  const auto again = estimate_negative_model({"x x y"}, ix.stats());
  CHECK(again.probs == m.probs);
}

TEST_CASE("vanishing background weight gives the maximum-likelihood model") {
  const auto ix = InvertedIndex<int>::build({{1, "x y z"}, {2, "z z"}});
  NegativeModelOptions opt;
  opt.background_weight = 1e-12;
  const auto m = estimate_negative_model({"x x y", "z"}, ix.stats(), opt);
  CHECK(m.prob("x") == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(m.prob("y") == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(m.prob("z") == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("EM monotone and normalized on random inputs, including after truncation") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::pair<int, std::string>> items;
    for (int i = 0; i < 30; ++i) {
      std::string t;
      for (int j = 0; j < 1 + static_cast<int>(rng() % 6); ++j) t += "w" + std::to_string(rng() % 20) + " ";
      items.push_back({i, t});
    }
    const auto ix = InvertedIndex<int>::build(items);
    std::vector<std::string> neg{items[rng() % 30].second, items[rng() % 30].second};
    const auto m = estimate_negative_model(neg, ix.stats());
    for (std::size_t i = 1; i < m.log_likelihood.size(); ++i)
      CHECK(m.log_likelihood[i] >= m.log_likelihood[i - 1]);
    CHECK(total(m.probs) == doctest::Approx(1.0).epsilon(1e-9));
    const auto cut = truncate(m, 3);
    CHECK(cut.probs.size() <= 3);
    CHECK(total(cut.probs) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("empty negative set is rejected") {
  const auto ix = InvertedIndex<int>::build({{1, "x"}});
  CHECK_THROWS_AS(estimate_negative_model({}, ix.stats()), UsageError);
}

TEST_CASE("SingleNeg penalizes candidates resembling the negative texts") {
  // Candidates 1 and 2 share the topic term equally; 1 repeats the negative text.
  const auto ix = InvertedIndex<QuestionId>::build({{1, "t n1 n2"}, {2, "t d1 d2"}, {3, "other"}});
  const auto neg = estimate_negative_model({"t n1 n2"}, ix.stats());
  const auto topic = tokenize("t");
  CHECK(singleneg_score(ix, 1, topic, neg, 1.0, Dirichlet{1.0}) ==
        singleneg_score(ix, 2, topic, neg, 1.0, Dirichlet{1.0}));
  for (double a : {0.5, 0.9, 0.99})
    CHECK(singleneg_score(ix, 2, topic, neg, a, Dirichlet{1.0}) >
          singleneg_score(ix, 1, topic, neg, a, Dirichlet{1.0}));
  CHECK_THROWS_AS(singleneg_score(ix, 2, topic, neg, 0.0, Dirichlet{1.0}), UsageError);
}

TEST_CASE("SingleNeg ordering matches direct formula evaluation") {
  const auto ix = InvertedIndex<QuestionId>::build({{1, "a b"}, {2, "a c c"}, {3, "b c"}});
  NegativeTopicModel neg;
  neg.probs = {{"b", 0.7}, {"c", 0.3}};
  const double mu = 2.0, alpha = 0.6;
  // P(w|C): a 2/7, b 2/7, c 3/7.
  auto p = [&](double tf, double len, double bg) { return std::log((tf + mu * bg) / (len + mu)); };
  const double pa = 2.0 / 7, pb = 2.0 / 7, pc = 3.0 / 7;
  const double s1 = alpha * p(1, 2, pa) - (1 - alpha) * (0.7 * p(1, 2, pb) + 0.3 * p(0, 2, pc));
  const double s2 = alpha * p(1, 3, pa) - (1 - alpha) * (0.7 * p(0, 3, pb) + 0.3 * p(2, 3, pc));
  const double s3 = alpha * p(0, 2, pa) - (1 - alpha) * (0.7 * p(1, 2, pb) + 0.3 * p(1, 2, pc));
  const auto topic = tokenize("a");
  CHECK(singleneg_score(ix, 1, topic, neg, alpha, Dirichlet{mu}) == doctest::Approx(s1));
  CHECK(singleneg_score(ix, 2, topic, neg, alpha, Dirichlet{mu}) == doctest::Approx(s2));
  CHECK(singleneg_score(ix, 3, topic, neg, alpha, Dirichlet{mu}) == doctest::Approx(s3));
}

TEST_CASE("MMR worked example selects B") {
  const std::vector<MmrCandidate> pool{{1, "A"}, {2, "B"}};
  const std::vector<MmrCandidate> asked{{9, "q1"}};
  const std::map<std::pair<std::string, std::string>, double> f{
      {{"t", "A"}, 0.9}, {{"t", "B"}, 0.8}, {{"q1", "A"}, 0.9}, {{"q1", "B"}, 0.1}};
  Similarity sim = [&](const std::string& a, const std::string& b) {
    auto it = f.find({a, b});
    return it != f.end() ? it->second : f.at({b, a});
  };
  CHECK(mmr_select(pool, "t", asked, 0.5, sim) == 2);
  CHECK(mmr_select(pool, "t", {}, 0.5, sim) == 1);
}

TEST_CASE("MMR never returns an asked item and scales with f") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<MmrCandidate> pool;
    for (QuestionId i = 0; i < 8; ++i) pool.push_back({i, "c" + std::to_string(i)});
    std::vector<MmrCandidate> asked(pool.begin(), pool.begin() + static_cast<long>(rng() % 7));
    std::map<std::pair<std::string, std::string>, double> table;
    Similarity sim = [&](const std::string& a, const std::string& b) {
      auto [it, fresh] = table.try_emplace({std::min(a, b), std::max(a, b)}, 0.0);
      if (fresh) it->second = u(rng);
      return it->second;
    };
    const double lambda = u(rng);
    const QuestionId pick = mmr_select(pool, "t", asked, lambda, sim);
    CHECK(std::none_of(asked.begin(), asked.end(), [&](const auto& a) { return a.id == pick; }));
    Similarity scaled = [&](const std::string& a, const std::string& b) { return 3.0 * sim(a, b); };
    CHECK(mmr_select(pool, "t", asked, lambda, scaled) == pick);
  }
}

TEST_CASE("MMR on an exhausted pool throws") {
  const std::vector<MmrCandidate> pool{{1, "a"}};
  CHECK_THROWS_AS(mmr_select(pool, "t", pool, 0.5, lexical_cosine), PoolExhausted);
  CHECK_THROWS_AS(mmr_select(pool, "t", {}, 1.5, lexical_cosine), UsageError);
}

TEST_CASE("lexical cosine") {
  CHECK(lexical_cosine("a b", "a b") == doctest::Approx(1.0));
  CHECK(lexical_cosine("a", "b") == 0.0);
  CHECK(lexical_cosine("", "b") == 0.0);
  CHECK(lexical_cosine("a b", "a c") == doctest::Approx(0.5));
}
