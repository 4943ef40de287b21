#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clarq/corpus.hpp"

namespace clarq {

enum class GainScheme { label2_only, multigrade };
const char* to_string(GainScheme s);

// 2^g - 1 for multigrade; 1 iff g == 2 for label2_only.
double gain(int grade, GainScheme scheme);

// 1 / rank of the first grade-2 item, 0 when there is none.
double mrr(std::span<const int> ranked);

// DCG@k over `ranked` divided by the DCG@k of `ideal_pool` sorted by gain.
double ndcg_at(std::span<const int> ranked, std::span<const int> ideal_pool, std::size_t k,
               GainScheme scheme);
// Ideal taken from the ranked list itself.
double ndcg_at(std::span<const int> ranked, std::size_t k, GainScheme scheme);

// Binary relevance is grade >= 1.
double precision_at_1(std::span<const int> ranked);
double reciprocal_rank_binary(std::span<const int> ranked);

struct DocMetrics {
  double mrr = 0.0;
  double p1 = 0.0;
  double ndcg1 = 0.0;
  double ndcg5 = 0.0;
  double ndcg20 = 0.0;
};

// Ranked document ids against one query's graded judgments; unjudged
// documents are grade 0 and the ideal uses every judged grade.
DocMetrics doc_metrics(const std::vector<std::string>& ranked,
                       const std::map<std::string, int>& judgments);

struct CumulativeSuccess {
  int turn = 0;
  std::size_t count = 0;
  double fraction = 0.0;
};

// confirmed_turns[i] is the 1-based turn of confirmation or 0 if none.
std::vector<CumulativeSuccess> cumulative_success(std::span<const int> confirmed_turns,
                                                  std::span<const int> turns);

struct GroupMean {
  double mean = 0.0;
  std::size_t count = 0;
};

std::map<std::string, GroupMean> group_means(std::span<const double> values,
                                             const std::vector<std::string>& keys);

double mean(std::span<const double> values);

struct FisherOptions {
  std::uint64_t iterations = 100000;
  std::uint64_t seed = 0;
  // Exhaustive enumeration up to this many queries.
  std::size_t exhaustive_limit = 20;
};

struct FisherResult {
  double p_value = 1.0;
  double observed = 0.0;
  bool exhaustive = false;
  std::uint64_t permutations = 0;
};

// Two-sided paired sign-flip test on per-query differences a - b; p is the
// share of assignments with |mean| >= |observed mean|, observed included.
FisherResult fisher_randomization(std::span<const double> a, std::span<const double> b,
                                  const FisherOptions& options = {});

}  // namespace clarq
