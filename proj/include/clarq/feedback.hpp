#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "clarq/corpus.hpp"
#include "clarq/index.hpp"
#include "clarq/retrieval.hpp"

namespace clarq {

struct NegativeModelOptions {
  double background_weight = 0.5;
  int max_iters = 200;
  double tol = 1e-14;
};

// Negative topic model estimated from non-relevant texts, with the EM trace
// kept for inspection.
struct NegativeTopicModel {
  std::map<std::string, double> probs;
  double background_weight = 0.5;
  std::vector<double> log_likelihood;  // before the first step, then after each
  int iterations = 0;

  double prob(const std::string& term) const {
    auto it = probs.find(term);
    return it == probs.end() ? 0.0 : it->second;
  }
};

// Maximizes sum_w c(w) log((1 - bg) theta(w) + bg P(w|C)) over theta by EM.
NegativeTopicModel estimate_negative_model(const std::vector<std::string>& negative_texts,
                                           const CollectionStats& background,
                                           const NegativeModelOptions& options = {});

// Keeps the `m` most probable terms (ties by term) and renormalizes.
NegativeTopicModel truncate(const NegativeTopicModel& model, std::size_t m);

// alpha * QL(topic | candidate) - (1 - alpha) * sum_w theta_N(w) log P(w | candidate).
double singleneg_score(const QuestionIndex& index, QuestionId candidate,
                       const TokenSequence& topic_tokens, const NegativeTopicModel& neg,
                       double alpha, Dirichlet smoothing);

// Text-pair similarity in [0, 1].
using Similarity = std::function<double(const std::string& a, const std::string& b)>;

// Cosine of raw term-frequency vectors.
double lexical_cosine(const std::string& a, const std::string& b);

struct MmrCandidate {
  QuestionId id = 0;
  std::string text;
};

// argmax over candidates not in `asked` of
//   lambda f(topic, q) - (1 - lambda) max_{q' in asked} f(q', q),
// with the max term 0 when nothing was asked. Ties go to the lower id.
QuestionId mmr_select(const std::vector<MmrCandidate>& pool, const std::string& topic,
                      const std::vector<MmrCandidate>& asked, double lambda,
                      const Similarity& f);

}  // namespace clarq
