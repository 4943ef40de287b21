#include "clarq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "clarq/errors.hpp"
#include "rng.hpp"

namespace clarq {

const char* to_string(GainScheme s) {
  return s == GainScheme::label2_only ? "label2_only" : "multigrade";
}

double gain(int grade, GainScheme scheme) {
  if (scheme == GainScheme::label2_only) return grade == 2 ? 1.0 : 0.0;
  return grade <= 0 ? 0.0 : std::exp2(static_cast<double>(grade)) - 1.0;
}

double mrr(std::span<const int> ranked) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i] == 2) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

namespace {

double dcg(std::span<const double> gains, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(k, gains.size()); ++i)
    s += gains[i] / std::log2(static_cast<double>(i + 2));
  return s;
}

std::vector<double> gains_of(std::span<const int> grades, GainScheme scheme) {
  std::vector<double> g;
  g.reserve(grades.size());
  for (int x : grades) g.push_back(gain(x, scheme));
  return g;
}

}  // namespace

double ndcg_at(std::span<const int> ranked, std::span<const int> ideal_pool, std::size_t k,
               GainScheme scheme) {
  if (k == 0) throw UsageError("NDCG cutoff must be >= 1");
  auto ideal = gains_of(ideal_pool, scheme);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, k);
  if (idcg <= 0.0) return 0.0;
  return dcg(gains_of(ranked, scheme), k) / idcg;
}

double ndcg_at(std::span<const int> ranked, std::size_t k, GainScheme scheme) {
  return ndcg_at(ranked, ranked, k, scheme);
}

double precision_at_1(std::span<const int> ranked) {
  return !ranked.empty() && ranked[0] >= 1 ? 1.0 : 0.0;
}

double reciprocal_rank_binary(std::span<const int> ranked) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i] >= 1) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

DocMetrics doc_metrics(const std::vector<std::string>& ranked,
                       const std::map<std::string, int>& judgments) {
  std::vector<int> grades;
  grades.reserve(ranked.size());
  for (const auto& d : ranked) {
    auto it = judgments.find(d);
    grades.push_back(it == judgments.end() ? 0 : it->second);
  }
  std::vector<int> pool;
  for (const auto& [doc, g] : judgments) pool.push_back(g);
  DocMetrics m;
  m.mrr = reciprocal_rank_binary(grades);
  m.p1 = precision_at_1(grades);
  m.ndcg1 = ndcg_at(grades, pool, 1, GainScheme::multigrade);
  m.ndcg5 = ndcg_at(grades, pool, 5, GainScheme::multigrade);
  m.ndcg20 = ndcg_at(grades, pool, 20, GainScheme::multigrade);
  return m;
}

std::vector<CumulativeSuccess> cumulative_success(std::span<const int> confirmed_turns,
                                                  std::span<const int> turns) {
  std::vector<CumulativeSuccess> out;
  for (int tau : turns) {
    CumulativeSuccess c;
    c.turn = tau;
    for (int t : confirmed_turns)
      if (t > 0 && t <= tau) ++c.count;
    c.fraction = confirmed_turns.empty()
                     ? 0.0
                     : static_cast<double>(c.count) / static_cast<double>(confirmed_turns.size());
    out.push_back(c);
  }
  return out;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::map<std::string, GroupMean> group_means(std::span<const double> values,
                                             const std::vector<std::string>& keys) {
  if (values.size() != keys.size()) throw UsageError("values and group keys differ in length");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& a = acc[keys[i]];
    a.first += values[i];
    ++a.second;
  }
  std::map<std::string, GroupMean> out;
  for (const auto& [k, a] : acc)
    out[k] = {a.first / static_cast<double>(a.second), a.second};
  return out;
}

FisherResult fisher_randomization(std::span<const double> a, std::span<const double> b,
                                  const FisherOptions& options) {
  if (a.size() != b.size()) throw UsageError("paired vectors differ in length");
  if (a.empty()) throw InputError("significance test needs at least one query");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    scale += std::abs(d[i]);
  }
  double observed = 0.0;
  for (double x : d) observed += x;
  // Sums that differ from |observed| only by rounding count as ties.
  const double threshold = std::abs(observed) - 1e-12 * std::max(1.0, scale);

  FisherResult r;
  r.observed = observed / static_cast<double>(n);
  if (n <= options.exhaustive_limit) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1) ? -d[i] : d[i];
      if (std::abs(s) >= threshold) ++hits;
    }
    r.exhaustive = true;
    r.permutations = total;
    r.p_value = static_cast<double>(hits) / static_cast<double>(total);
    return r;
  }
  if (options.iterations == 0) throw UsageError("sampled significance test needs iterations > 0");
  std::mt19937_64 rng(mix_seed(options.seed, n));
  std::uint64_t hits = 0;
  for (std::uint64_t it = 0; it < options.iterations; ++it) {
    double s = 0.0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng();
      s += (bits & 1) ? -d[i] : d[i];
      bits >>= 1;
    }
    if (std::abs(s) >= threshold) ++hits;
  }
  r.permutations = options.iterations;
  r.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + options.iterations);
  return r;
}

}  // namespace clarq
