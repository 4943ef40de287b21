#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarq/corpus.hpp"
#include "clarq/feedback.hpp"
#include "clarq/neural.hpp"
#include "clarq/retrieval.hpp"

namespace clarq {

enum class PolicyKind { ql, mmr, singleneg, neural_init, mmr_neural, oracle };
const char* to_string(PolicyKind k);
PolicyKind parse_policy_kind(const std::string& s);

struct Turn {
  QuestionId question = 0;
  Polarity answer = Polarity::negative;
};

struct ConversationState {
  TopicId topic_id = 0;
  FacetId facet_id = 0;
  std::vector<Turn> history;
  int budget = 5;

  bool asked(QuestionId q) const;
};

struct SelectionContext {
  const Corpus& corpus;
  const ConversationState& state;
  const CandidatePool& pool;
};

// Chooses the next question from pool \ asked. Implementations are immutable
// and may be shared across threads.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  // Argmax of the policy score, ties to the lower question id. Throws
  // PoolExhausted when nothing is left to ask.
  virtual QuestionId select_next(const SelectionContext& ctx) const = 0;
};

// Static QL order of the candidate pool.
std::unique_ptr<Policy> make_ql_policy();
// Prefers the highest-grade unasked question; test plumbing.
std::unique_ptr<Policy> make_oracle_policy(std::shared_ptr<const LabelTable> labels);
std::unique_ptr<Policy> make_mmr_policy(double lambda, Similarity f);

struct SingleNegConfig {
  double alpha = 0.9;
  std::size_t feedback_terms = 20;
  NegativeModelOptions em;
  Dirichlet smoothing{RetrievalDefaults::question_mu};
};
std::unique_ptr<Policy> make_singleneg_policy(std::shared_ptr<const QuestionIndex> index,
                                              SingleNegConfig config);
std::unique_ptr<Policy> make_neural_init_policy(std::shared_ptr<const InitScorer> scorer);
// With `first_turn` set, an empty history is ranked by that initial scorer;
// otherwise by MLP2([o(t, q); 0]).
std::unique_ptr<Policy> make_mmr_neural_policy(std::shared_ptr<const MmrScorer> scorer,
                                               std::shared_ptr<const InitScorer> first_turn);

// f(x, q) = sigmoid(s(q, x)) for the trained initial scorer.
Similarity sigmoid_similarity(std::shared_ptr<const InitScorer> scorer);

// Positive iff grade 2.
Polarity user_answer(const LabelTable& labels, FacetId facet, QuestionId question);

enum class Outcome { confirmed, exhausted };
const char* to_string(Outcome o);

struct Transcript {
  ConversationSeed seed;
  std::vector<Turn> turns;
  // Questions chosen by the policy, excluding the preset turn.
  std::vector<QuestionId> selected;
  Outcome outcome = Outcome::exhausted;
  int fold = -1;
  std::string error;

  std::string qid() const { return seed.qid(); }
  std::vector<QuestionId> asked() const;
};

struct SimulationOptions {
  int k = 5;
  bool preset_counts_toward_budget = true;
  unsigned threads = 1;
};

Transcript run_conversation(const Corpus& corpus, const LabelTable& labels,
                            const ConversationSeed& seed, const Policy& policy,
                            const CandidatePool& pool, const SimulationOptions& options);

// Transcripts in seed order. A failing conversation is recorded with its
// error and the run continues.
std::vector<Transcript> run_experiment(const Corpus& corpus, const LabelTable& labels,
                                       const std::vector<ConversationSeed>& seeds,
                                       const Policy& policy,
                                       const std::map<TopicId, CandidatePool>& pools,
                                       const SimulationOptions& options);

nlohmann::json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);
void write_transcripts(std::ostream& out, const std::vector<Transcript>& transcripts);
std::vector<Transcript> read_transcripts(std::istream& in);

// Asked questions in turn order, one ranked list per conversation.
std::vector<RunLine> question_run(const std::vector<Transcript>& transcripts);

}  // namespace clarq
