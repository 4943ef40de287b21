#include "clarq/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

namespace clarq {

using nlohmann::json;

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::ql: return "ql";
    case PolicyKind::mmr: return "mmr";
    case PolicyKind::singleneg: return "singleneg";
    case PolicyKind::neural_init: return "neural_init";
    case PolicyKind::mmr_neural: return "mmr_neural";
    case PolicyKind::oracle: return "oracle";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "ql") return PolicyKind::ql;
  if (s == "mmr") return PolicyKind::mmr;
  if (s == "singleneg") return PolicyKind::singleneg;
  if (s == "neural_init") return PolicyKind::neural_init;
  if (s == "mmr_neural") return PolicyKind::mmr_neural;
  if (s == "oracle") return PolicyKind::oracle;
  throw InputError("unknown policy '" + s + "'");
}

const char* to_string(Outcome o) { return o == Outcome::confirmed ? "confirmed" : "exhausted"; }

bool ConversationState::asked(QuestionId q) const {
  return std::any_of(history.begin(), history.end(),
                     [q](const Turn& t) { return t.question == q; });
}

namespace {

// Argmax of score(q) over unasked pool members; ties to the lower id.
template <typename Score>
QuestionId argmax_unasked(const SelectionContext& ctx, Score score) {
  bool found = false;
  QuestionId best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& e : ctx.pool.entries) {
    if (ctx.state.asked(e.id)) continue;
    const double s = score(e.id);
    if (!found || s > best_score || (s == best_score && e.id < best)) {
      found = true;
      best = e.id;
      best_score = s;
    }
  }
  if (!found) throw PoolExhausted();
  return best;
}

std::vector<std::string> history_texts(const SelectionContext& ctx) {
  std::vector<std::string> out;
  for (const auto& t : ctx.state.history) out.push_back(ctx.corpus.question(t.question).text);
  return out;
}

class QlPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::ql; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    for (const auto& e : ctx.pool.entries)
      if (!ctx.state.asked(e.id)) return e.id;
    throw PoolExhausted();
  }
};

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(std::shared_ptr<const LabelTable> labels) : labels_(std::move(labels)) {}
  PolicyKind kind() const override { return PolicyKind::oracle; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    return argmax_unasked(ctx, [&](QuestionId q) {
      return static_cast<double>(labels_->grade(ctx.state.facet_id, q));
    });
  }

 private:
  std::shared_ptr<const LabelTable> labels_;
};

class MmrPolicy final : public Policy {
 public:
  MmrPolicy(double lambda, Similarity f) : lambda_(lambda), f_(std::move(f)) {}
  PolicyKind kind() const override { return PolicyKind::mmr; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    std::vector<MmrCandidate> pool, asked;
    for (const auto& e : ctx.pool.entries)
      pool.push_back({e.id, ctx.corpus.question(e.id).text});
    for (const auto& t : ctx.state.history)
      asked.push_back({t.question, ctx.corpus.question(t.question).text});
    return mmr_select(pool, ctx.corpus.topic(ctx.state.topic_id).text, asked, lambda_, f_);
  }

 private:
  double lambda_;
  Similarity f_;
};

class SingleNegPolicy final : public Policy {
 public:
  SingleNegPolicy(std::shared_ptr<const QuestionIndex> index, SingleNegConfig config)
      : index_(std::move(index)), config_(config) {}
  PolicyKind kind() const override { return PolicyKind::singleneg; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    const auto topic = tokenize(ctx.corpus.topic(ctx.state.topic_id).text);
    if (ctx.state.history.empty()) {
      return argmax_unasked(ctx, [&](QuestionId q) {
        return ql_score(topic, *index_, q, config_.smoothing);
      });
    }
    const auto neg = truncate(
        estimate_negative_model(history_texts(ctx), index_->stats(), config_.em),
        config_.feedback_terms);
    return argmax_unasked(ctx, [&](QuestionId q) {
      return singleneg_score(*index_, q, topic, neg, config_.alpha, config_.smoothing);
    });
  }

 private:
  std::shared_ptr<const QuestionIndex> index_;
  SingleNegConfig config_;
};

class NeuralInitPolicy final : public Policy {
 public:
  explicit NeuralInitPolicy(std::shared_ptr<const InitScorer> scorer)
      : scorer_(std::move(scorer)) {}
  PolicyKind kind() const override { return PolicyKind::neural_init; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    const auto& topic = ctx.corpus.topic(ctx.state.topic_id).text;
    return argmax_unasked(
        ctx, [&](QuestionId q) { return scorer_->score(ctx.corpus.question(q).text, topic); });
  }

 private:
  std::shared_ptr<const InitScorer> scorer_;
};

class MmrNeuralPolicy final : public Policy {
 public:
  MmrNeuralPolicy(std::shared_ptr<const MmrScorer> scorer,
                  std::shared_ptr<const InitScorer> first_turn)
      : scorer_(std::move(scorer)), first_turn_(std::move(first_turn)) {}
  PolicyKind kind() const override { return PolicyKind::mmr_neural; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    const auto& topic = ctx.corpus.topic(ctx.state.topic_id).text;
    if (ctx.state.history.empty() && first_turn_) {
      return argmax_unasked(ctx, [&](QuestionId q) {
        return first_turn_->score(ctx.corpus.question(q).text, topic);
      });
    }
    const auto hist = history_texts(ctx);
    return argmax_unasked(ctx, [&](QuestionId q) {
      return scorer_->score(ctx.corpus.question(q).text, topic, hist);
    });
  }

 private:
  std::shared_ptr<const MmrScorer> scorer_;
  std::shared_ptr<const InitScorer> first_turn_;
};

}  // namespace

std::unique_ptr<Policy> make_ql_policy() { return std::make_unique<QlPolicy>(); }

std::unique_ptr<Policy> make_oracle_policy(std::shared_ptr<const LabelTable> labels) {
  return std::make_unique<OraclePolicy>(std::move(labels));
}

std::unique_ptr<Policy> make_mmr_policy(double lambda, Similarity f) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("MMR lambda must be in [0, 1]");
  return std::make_unique<MmrPolicy>(lambda, std::move(f));
}

std::unique_ptr<Policy> make_singleneg_policy(std::shared_ptr<const QuestionIndex> index,
                                              SingleNegConfig config) {
  if (!(config.alpha > 0.0 && config.alpha <= 1.0))
    throw UsageError("SingleNeg query weight must be in (0, 1]");
  return std::make_unique<SingleNegPolicy>(std::move(index), config);
}

std::unique_ptr<Policy> make_neural_init_policy(std::shared_ptr<const InitScorer> scorer) {
  return std::make_unique<NeuralInitPolicy>(std::move(scorer));
}

std::unique_ptr<Policy> make_mmr_neural_policy(std::shared_ptr<const MmrScorer> scorer,
                                               std::shared_ptr<const InitScorer> first_turn) {
  return std::make_unique<MmrNeuralPolicy>(std::move(scorer), std::move(first_turn));
}

Similarity sigmoid_similarity(std::shared_ptr<const InitScorer> scorer) {
  return [scorer](const std::string& x, const std::string& q) {
    return 1.0 / (1.0 + std::exp(-scorer->score(q, x)));
  };
}

Polarity user_answer(const LabelTable& labels, FacetId facet, QuestionId question) {
  return labels.grade(facet, question) == 2 ? Polarity::positive : Polarity::negative;
}

std::vector<QuestionId> Transcript::asked() const {
  std::vector<QuestionId> out;
  for (const auto& t : turns) out.push_back(t.question);
  return out;
}

Transcript run_conversation(const Corpus& corpus, const LabelTable& labels,
                            const ConversationSeed& seed, const Policy& policy,
                            const CandidatePool& pool, const SimulationOptions& options) {
  if (options.k < 1) throw UsageError("turn budget k must be >= 1");
  Transcript tr;
  tr.seed = seed;
  ConversationState state{seed.topic_id, seed.facet_id, {}, options.k};
  if (seed.preset) {
    const Polarity a = user_answer(labels, seed.facet_id, *seed.preset);
    state.history.push_back({*seed.preset, a});
    if (a == Polarity::positive) {
      tr.turns = state.history;
      tr.outcome = Outcome::confirmed;
      return tr;
    }
  }
  const std::size_t limit = static_cast<std::size_t>(options.k) +
                            ((seed.preset && !options.preset_counts_toward_budget) ? 1 : 0);
  tr.outcome = Outcome::exhausted;
  while (state.history.size() < limit) {
    QuestionId q;
    try {
      q = policy.select_next({corpus, state, pool});
    } catch (const PoolExhausted&) {
      break;
    }
    const Polarity a = user_answer(labels, seed.facet_id, q);
    state.history.push_back({q, a});
    tr.selected.push_back(q);
    if (a == Polarity::positive) {
      tr.outcome = Outcome::confirmed;
      break;
    }
  }
  tr.turns = std::move(state.history);
  return tr;
}

std::vector<Transcript> run_experiment(const Corpus& corpus, const LabelTable& labels,
                                       const std::vector<ConversationSeed>& seeds,
                                       const Policy& policy,
                                       const std::map<TopicId, CandidatePool>& pools,
                                       const SimulationOptions& options) {
  std::vector<Transcript> out(seeds.size());
  auto run_one = [&](std::size_t i) {
    const auto& seed = seeds[i];
    try {
      auto it = pools.find(seed.topic_id);
      if (it == pools.end())
        throw InputError("no candidate pool for topic " + std::to_string(seed.topic_id));
      out[i] = run_conversation(corpus, labels, seed, policy, it->second, options);
    } catch (const std::exception& e) {
      out[i] = Transcript{};
      out[i].seed = seed;
      out[i].outcome = Outcome::exhausted;
      out[i].error = e.what();
    }
  };
  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1 || seeds.size() < 2) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) run_one(i);
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

json to_json(const Transcript& t) {
  json turns = json::array();
  for (const auto& turn : t.turns)
    turns.push_back({{"q", turn.question}, {"a", surface_text(turn.answer)}});
  json j = {{"qid", t.qid()},
            {"topic", t.seed.topic_id},
            {"facet", t.seed.facet_id},
            {"turns", std::move(turns)},
            {"outcome", to_string(t.outcome)},
            {"selected", t.selected}};
  if (t.seed.preset) j["seed_question"] = *t.seed.preset;
  if (t.fold >= 0) j["fold"] = t.fold;
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

Transcript transcript_from_json(const json& j) {
  try {
    Transcript t;
    t.seed.topic_id = j.at("topic").get<TopicId>();
    t.seed.facet_id = j.at("facet").get<FacetId>();
    if (j.contains("seed_question")) {
      t.seed.kind = SeedKind::one_turn;
      t.seed.preset = j.at("seed_question").get<QuestionId>();
    }
    for (const auto& turn : j.at("turns")) {
      const auto a = turn.at("a").get<std::string>();
      if (a != "yes" && a != "no") throw InputError("answer must be \"yes\" or \"no\"");
      t.turns.push_back({turn.at("q").get<QuestionId>(),
                         a == "yes" ? Polarity::positive : Polarity::negative});
    }
    const auto outcome = j.at("outcome").get<std::string>();
    if (outcome == "confirmed") t.outcome = Outcome::confirmed;
    else if (outcome == "exhausted") t.outcome = Outcome::exhausted;
    else throw InputError("unknown outcome '" + outcome + "'");
    t.selected = j.value("selected", std::vector<QuestionId>{});
    t.fold = j.value("fold", -1);
    t.error = j.value("error", std::string());
    return t;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed transcript: ") + e.what());
  }
}

void write_transcripts(std::ostream& out, const std::vector<Transcript>& transcripts) {
  for (const auto& t : transcripts) out << to_json(t).dump() << '\n';
}

std::vector<Transcript> read_transcripts(std::istream& in) {
  std::vector<Transcript> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(transcript_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError("transcript line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("transcript line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RunLine> question_run(const std::vector<Transcript>& transcripts) {
  std::vector<RunLine> lines;
  for (const auto& t : transcripts) {
    const auto asked = t.asked();
    for (std::size_t i = 0; i < asked.size(); ++i) {
      lines.push_back({t.qid(), std::to_string(asked[i]), static_cast<int>(i + 1),
                       static_cast<double>(asked.size() - i)});
    }
  }
  return lines;
}

}  // namespace clarq
