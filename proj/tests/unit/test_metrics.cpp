#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "clarq/errors.hpp"
#include "clarq/metrics.hpp"

using namespace clarq;

using G = std::vector<int>;

TEST_CASE("reciprocal rank") {
  CHECK(mrr(G{1, 2, 0}) == 0.5);
  CHECK(mrr(G{2, 0, 1}) == 1.0);
  CHECK(mrr(G{1, 1, 1, 1, 1}) == 0.0);
  CHECK(mrr(G{}) == 0.0);
}

TEST_CASE("NDCG hand values") {
  CHECK(ndcg_at(G{2, 1, 0}, 3, GainScheme::multigrade) == doctest::Approx(1.0));
  const double expect = (1.0 + 3.0 / std::log2(3.0)) / (3.0 + 1.0 / std::log2(3.0));
  CHECK(ndcg_at(G{1, 2, 0}, 3, GainScheme::multigrade) == doctest::Approx(expect));
  CHECK(ndcg_at(G{1, 2, 0}, 3, GainScheme::multigrade) == doctest::Approx(0.7967).epsilon(1e-4));
  CHECK(ndcg_at(G{0, 0, 0}, 3, GainScheme::multigrade) == 0.0);
  CHECK(ndcg_at(G{1, 2}, 5, GainScheme::label2_only) == doctest::Approx(1.0 / std::log2(3.0)));
  // Ideal taken from a wider pool.
  CHECK(ndcg_at(G{1}, G{2, 1}, 3, GainScheme::multigrade) < 1.0);
  CHECK_THROWS_AS(ndcg_at(G{1}, 0, GainScheme::multigrade), UsageError);
}

TEST_CASE("metric ranges and invariances") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    G g(1 + rng() % 12);
    for (auto& x : g) x = static_cast<int>(rng() % 3);
    for (auto scheme : {GainScheme::label2_only, GainScheme::multigrade}) {
      const double n = ndcg_at(g, 5, scheme);
      CHECK(n >= 0.0);
      CHECK(n <= 1.0 + 1e-12);
      G ideal = g;
      std::sort(ideal.begin(), ideal.end(), [&](int a, int b) { return gain(a, scheme) > gain(b, scheme); });
      if (ndcg_at(ideal, 5, scheme) > 0.0) CHECK(ndcg_at(ideal, 5, scheme) == doctest::Approx(1.0));
      // Swap two equal-gain items inside the top k.
      for (std::size_t i = 0; i < std::min<std::size_t>(5, g.size()); ++i)
        for (std::size_t j = i + 1; j < std::min<std::size_t>(5, g.size()); ++j)
          if (gain(g[i], scheme) == gain(g[j], scheme)) {
            G s = g;
            std::swap(s[i], s[j]);
            CHECK(ndcg_at(s, 5, scheme) == doctest::Approx(n));
          }
    }
    const double m = mrr(g);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    auto first = std::find(g.begin(), g.end(), 2);
    if (first != g.end()) {
      G s = g;
      std::shuffle(s.begin() + (first - g.begin()) + 1, s.end(), rng);
      CHECK(mrr(s) == m);
    }
  }
}

TEST_CASE("document metrics") {
  std::map<std::string, int> qrels{{"a", 3}, {"b", 0}, {"c", 1}, {"d", 4}};
  const auto m = doc_metrics({"a", "x", "b", "c", "d"}, qrels);
  CHECK(m.p1 == 1.0);
  CHECK(m.mrr == 1.0);
  const auto late = doc_metrics({"x", "y", "b", "c"}, qrels);
  CHECK(late.mrr == 0.25);
  CHECK(late.p1 == 0.0);
  // Brute force on the five-document fixture.
  const double dcg5 = 7.0 + 0 + 0 + 1.0 / std::log2(5.0) + 15.0 / std::log2(6.0);
  const double idcg5 = 15.0 + 7.0 / std::log2(3.0) + 1.0 / std::log2(4.0);
  CHECK(m.ndcg5 == doctest::Approx(dcg5 / idcg5));
  CHECK(m.ndcg1 == doctest::Approx(7.0 / 15.0));
  CHECK(m.ndcg20 == doctest::Approx(dcg5 / idcg5));
}

TEST_CASE("cumulative success") {
  const std::vector<int> turns{3, 4, 5};
  const auto all = cumulative_success(std::vector<int>{1, 1, 1}, turns);
  for (const auto& c : all) CHECK(c.fraction == 1.0);
  const auto none = cumulative_success(std::vector<int>{0, 0}, turns);
  for (const auto& c : none) CHECK(c.fraction == 0.0);
  const std::vector<int> mixed{1, 0, 3, 4, 5, 2, 0, 4, 3, 5};
  const auto got = cumulative_success(mixed, turns);
  for (std::size_t i = 0; i < turns.size(); ++i) {
    std::size_t tally = 0;
    for (int t : mixed) tally += t >= 1 && t <= turns[i];
    CHECK(got[i].count == tally);
    CHECK(got[i].fraction == doctest::Approx(tally / 10.0));
  }
}

TEST_CASE("group means") {
  const std::vector<double> v{1.0, 0.0, 0.5};
  const auto one = group_means(v, {"g", "g", "g"});
  CHECK(one.at("g").mean == doctest::Approx(mean(v)));
  const auto two = group_means(std::vector<double>{1.0, 0.0}, {"a", "b"});
  CHECK(two.at("a").mean == 1.0);
  CHECK(two.at("b").mean == 0.0);
  CHECK_THROWS_AS(group_means(v, {"a"}), UsageError);
}

TEST_CASE("Fisher randomization") {
  CHECK(fisher_randomization(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 0}).p_value == 0.5);
  const std::vector<double> up(20, 0.1), zero(20, 0.0);
  CHECK(fisher_randomization(up, zero).p_value == 2.0 / 1048576.0);
  const std::vector<double> a{0.1, 0.9, 0.4};
  CHECK(fisher_randomization(a, a).p_value == 1.0);
  CHECK_THROWS_AS(fisher_randomization(std::vector<double>{}, std::vector<double>{}), InputError);
  CHECK_THROWS_AS(fisher_randomization(a, std::vector<double>{1.0}), UsageError);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = u(rng);
      y[i] = u(rng);
    }
    const auto exact = fisher_randomization(x, y);
    CHECK(exact.exhaustive);
    CHECK(fisher_randomization(y, x).p_value == exact.p_value);
    FisherOptions sampled;
    sampled.exhaustive_limit = 0;
    sampled.iterations = 20000;
    sampled.seed = static_cast<std::uint64_t>(trial);
    const auto approx = fisher_randomization(x, y, sampled);
    CHECK_FALSE(approx.exhaustive);
    const double se = std::sqrt(std::max(exact.p_value * (1 - exact.p_value), 1e-4) / 20000.0);
    CHECK(std::abs(approx.p_value - exact.p_value) <= 3 * se + 1.0 / 20001.0);
    CHECK(fisher_randomization(x, y, sampled).p_value == approx.p_value);
  }
}
