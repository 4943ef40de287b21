#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "clarq/corpus.hpp"
#include "clarq/index.hpp"

namespace clarq {

using QuestionIndex = InvertedIndex<QuestionId>;
using DocumentIndex = InvertedIndex<std::string>;

struct RetrievalDefaults {
  static constexpr double question_mu = 100.0;
  static constexpr double document_mu = 1000.0;
  static constexpr std::size_t pool_size = 100;
};

// Unigram language model over its support; probabilities sum to 1.
struct LanguageModel {
  std::map<std::string, double> probs;

  double prob(const std::string& term) const {
    auto it = probs.find(term);
    return it == probs.end() ? 0.0 : it->second;
  }
  double mass() const;
  WeightedQuery as_query() const { return {probs.begin(), probs.end()}; }
};

LanguageModel max_likelihood_model(const TokenSequence& tokens);

QuestionIndex build_question_index(const Corpus& corpus);

// Query-likelihood log score of `query_tokens` against one indexed item.
template <typename Id>
double ql_score(const TokenSequence& query_tokens, const InvertedIndex<Id>& index,
                const Id& item, Dirichlet smoothing) {
  auto pos = index.find(item);
  if (!pos) throw UsageError("item is not in the index");
  return index.score(count_terms(query_tokens), *pos, smoothing);
}

struct ScoredQuestion {
  QuestionId id = 0;
  double score = 0.0;
};

// Top-n questions for a topic by QL; score descending, id ascending on ties.
struct CandidatePool {
  TopicId topic_id = 0;
  std::vector<ScoredQuestion> entries;

  std::vector<QuestionId> ids() const;
  bool contains(QuestionId q) const;
};

CandidatePool rank_questions_ql(const Topic& topic, const QuestionIndex& index,
                                Dirichlet smoothing, std::size_t n);

std::map<TopicId, CandidatePool> build_candidate_pools(const Corpus& corpus,
                                                       const QuestionIndex& index,
                                                       Dirichlet smoothing, std::size_t n);
PoolMembers pool_members(const std::map<TopicId, CandidatePool>& pools);

struct HistoryTurn {
  std::string question_text;
  Polarity answer = Polarity::negative;
};

// w * theta_topic + (1 - w) * theta_history, where theta_history is the ML
// model of every asked question text followed by its yes/no surface answer.
// Empty history returns theta_topic for any w.
LanguageModel conversation_query_model(const std::string& topic_text,
                                       const std::vector<HistoryTurn>& history, double w);

struct ScoredDocument {
  std::string id;
  double score = 0.0;
};

// Negative cross-entropy of the query model against Dirichlet-smoothed
// document models; top-k, score descending then id ascending.
std::vector<ScoredDocument> retrieve_documents(const LanguageModel& model,
                                               const DocumentIndex& index,
                                               Dirichlet smoothing, std::size_t k);

// documents file: {"id": str, "text": str} per line.
DocumentIndex load_documents(const std::filesystem::path& path);

// qid -> doc id -> grade (0..4).
using Qrels = std::map<std::string, std::map<std::string, int>>;
Qrels load_qrels(const std::filesystem::path& path);

struct RunLine {
  std::string qid;
  std::string item;
  int rank = 0;
  double score = 0.0;
};

// "qid Q0 item rank score tag" per line.
void write_run(std::ostream& out, const std::vector<RunLine>& lines, const std::string& tag);
std::vector<RunLine> read_run(std::istream& in);

}  // namespace clarq
