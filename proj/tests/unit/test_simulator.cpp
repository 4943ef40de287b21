#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "clarq/errors.hpp"
#include "clarq/simulator.hpp"
#include "support.hpp"

using namespace clarq;

namespace {

struct World {
  Corpus corpus;
  std::shared_ptr<const LabelTable> labels;
  std::shared_ptr<const QuestionIndex> index;
  std::map<TopicId, CandidatePool> pools;
  std::vector<ConversationSeed> seeds;

  explicit World(testing::SyntheticSpec spec = {})
      : corpus(testing::synthetic_corpus(spec)),
        labels(std::make_shared<const LabelTable>(corpus)),
        index(std::make_shared<const QuestionIndex>(build_question_index(corpus))),
        pools(build_candidate_pools(corpus, *index, Dirichlet{100.0}, 100)),
        seeds(expand_conversations(corpus, *labels)) {}
};

// Never picks a grade-2 question for the conversation's facet.
class AvoidTarget final : public Policy {
 public:
  explicit AvoidTarget(std::shared_ptr<const LabelTable> l) : labels_(std::move(l)) {}
  PolicyKind kind() const override { return PolicyKind::ql; }
  QuestionId select_next(const SelectionContext& ctx) const override {
    for (const auto& e : ctx.pool.entries)
      if (!ctx.state.asked(e.id) && labels_->grade(ctx.state.facet_id, e.id) != 2) return e.id;
    throw PoolExhausted();
  }

 private:
  std::shared_ptr<const LabelTable> labels_;
};

}  // namespace

TEST_CASE("user answers") {
  World w({2, 2, 1});
  const FacetId f = testing::facet_id(1, 0);
  CHECK(user_answer(*w.labels, f, testing::question_id(1, 0, 0)) == Polarity::positive);
  CHECK(user_answer(*w.labels, f, testing::question_id(1, 1, 0)) == Polarity::negative);
  CHECK(user_answer(*w.labels, f, testing::question_id(2, 0, 0)) == Polarity::negative);
}

TEST_CASE("oracle conversations") {
  World w;
  const auto oracle = make_oracle_policy(w.labels);
  SimulationOptions opt;
  for (const auto& s : w.seeds) {
    const auto t = run_conversation(w.corpus, *w.labels, s, *oracle, w.pools.at(s.topic_id), opt);
    CHECK(t.outcome == Outcome::confirmed);
    CHECK(t.turns.size() == (s.preset ? 2u : 1u));
    if (s.preset) {
      CHECK(t.turns[0].question == *s.preset);
      CHECK(t.turns[0].answer == Polarity::negative);
    }
    CHECK(w.labels->grade(s.facet_id, t.turns.back().question) == 2);
  }
}

TEST_CASE("a policy avoiding the target exhausts the budget") {
  World w;
  const AvoidTarget avoid(w.labels);
  SimulationOptions opt;
  for (const auto& s : w.seeds) {
    const auto t = run_conversation(w.corpus, *w.labels, s, avoid, w.pools.at(s.topic_id), opt);
    CHECK(t.outcome == Outcome::exhausted);
    CHECK(t.turns.size() == 5);
  }
  opt.preset_counts_toward_budget = false;
  for (const auto& s : w.seeds) {
    const auto t = run_conversation(w.corpus, *w.labels, s, avoid, w.pools.at(s.topic_id), opt);
    CHECK(t.turns.size() == (s.preset ? 6u : 5u));
  }
}

TEST_CASE("short pools end in exhaustion before the budget") {
  World w({2, 2, 1});
  const AvoidTarget avoid(w.labels);
  const auto& s = w.seeds.front();
  CandidatePool pool = w.pools.at(s.topic_id);
  pool.entries.resize(2);
  const auto t = run_conversation(w.corpus, *w.labels, s, avoid, pool, SimulationOptions{});
  CHECK(t.outcome == Outcome::exhausted);
  CHECK(t.turns.size() <= 2);
}

TEST_CASE("transcript invariants across policies") {
  World w({10, 4, 3});
  SingleNegConfig sc;
  std::vector<std::unique_ptr<Policy>> policies;
  policies.push_back(make_ql_policy());
  policies.push_back(make_mmr_policy(0.7, lexical_cosine));
  policies.push_back(make_singleneg_policy(w.index, sc));
  SimulationOptions opt;
  for (const auto& p : policies) {
    const auto ts = run_experiment(w.corpus, *w.labels, w.seeds, *p, w.pools, opt);
    REQUIRE(ts.size() == w.seeds.size());
    for (const auto& t : ts) {
      CHECK(t.error.empty());
      const auto asked = t.asked();
      CHECK(std::set<QuestionId>(asked.begin(), asked.end()).size() == asked.size());
      CHECK(asked.size() <= 5);
      if (t.seed.preset) CHECK(asked.front() == *t.seed.preset);
      std::size_t grade2 = 0;
      for (QuestionId q : asked) grade2 += w.labels->grade(t.seed.facet_id, q) == 2;
      if (t.outcome == Outcome::confirmed) {
        CHECK(w.labels->grade(t.seed.facet_id, asked.back()) == 2);
        CHECK(grade2 == 1);
      } else {
        CHECK(grade2 == 0);
      }
    }
  }
}

TEST_CASE("ql policy follows the static ranking with asked items removed") {
  World w({3, 3, 2});
  const auto ql = make_ql_policy();
  for (const auto& s : w.seeds) {
    const auto t = run_conversation(w.corpus, *w.labels, s, *ql, w.pools.at(s.topic_id), SimulationOptions{});
    std::vector<QuestionId> expect;
    if (s.preset) expect.push_back(*s.preset);
    for (QuestionId q : w.pools.at(s.topic_id).ids()) {
      if (expect.size() == t.turns.size()) break;
      if (std::find(expect.begin(), expect.end(), q) == expect.end()) expect.push_back(q);
    }
    CHECK(t.asked() == expect);
  }
}

TEST_CASE("marginal-relevance policy with empty history uses the zero-pool score") {
  World w({4, 3, 2});
  const auto enc = std::make_shared<LexicalEncoder>(LexicalEncoder::fit({"tok1", "do you want"}, 4));
  std::mt19937_64 rng(6);
  auto scorer = std::make_shared<const MmrScorer>(MmrScorer::create(enc, MatchShape{}, HeadShape{}, rng, 0.3));
  const auto policy = make_mmr_neural_policy(scorer, nullptr);
  for (const auto& s : w.seeds) {
    if (s.preset) continue;
    const auto& pool = w.pools.at(s.topic_id);
    const auto& topic = w.corpus.topic(s.topic_id).text;
    QuestionId best = 0;
    double best_score = -1e300;
    for (const auto& e : pool.entries) {
      const double v = scorer->score(w.corpus.question(e.id).text, topic, {});
      if (v > best_score || (v == best_score && e.id < best)) {
        best_score = v;
        best = e.id;
      }
    }
    ConversationState state{s.topic_id, s.facet_id, {}, 5};
    CHECK(policy->select_next({w.corpus, state, pool}) == best);
  }
}

TEST_CASE("experiments are deterministic and serialize round-trip") {
  World w({6, 3, 2});
  const auto p = make_mmr_policy(0.8, lexical_cosine);
  SimulationOptions opt;
  const auto a = run_experiment(w.corpus, *w.labels, w.seeds, *p, w.pools, opt);
  opt.threads = 3;
  const auto b = run_experiment(w.corpus, *w.labels, w.seeds, *p, w.pools, opt);
  std::stringstream sa, sb;
  write_transcripts(sa, a);
  write_transcripts(sb, b);
  CHECK(sa.str() == sb.str());
  std::stringstream in(sa.str());
  const auto back = read_transcripts(in);
  std::stringstream again;
  write_transcripts(again, back);
  CHECK(again.str() == sa.str());

  std::stringstream ra, rb;
  write_run(ra, question_run(a), "x");
  write_run(rb, question_run(b), "x");
  CHECK(ra.str() == rb.str());
  const auto run = question_run(a);
  CHECK(run.front().rank == 1);
}

TEST_CASE("four-seed oracle fixture") {
  // One topic, facet 1 with three negatives and facet 2 with none: 4 + 1 seeds.
  Corpus c({{1, "t", TopicType::faceted}},
           {{1, 1, "", FacetType::informational}},
           {{1, 1, "t a"}, {2, 1, "t b"}, {3, 1, "t c"}, {4, 1, "t d"}},
           {{1, 1, Polarity::positive}, {1, 2, Polarity::negative}, {1, 3, Polarity::negative},
            {1, 4, Polarity::negative}});
  auto labels = std::make_shared<const LabelTable>(c);
  const auto seeds = expand_conversations(c, *labels);
  REQUIRE(seeds.size() == 4);
  const auto pools = build_candidate_pools(c, build_question_index(c), Dirichlet{100.0}, 100);
  const auto ts = run_experiment(c, *labels, seeds, *make_oracle_policy(labels), pools, SimulationOptions{});
  REQUIRE(ts.size() == 4);
  for (const auto& t : ts) CHECK(t.turns.size() == (t.seed.preset ? 2u : 1u));
}

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::ql, PolicyKind::mmr, PolicyKind::singleneg, PolicyKind::neural_init,
                 PolicyKind::mmr_neural, PolicyKind::oracle})
    CHECK(parse_policy_kind(to_string(k)) == k);
  CHECK_THROWS(parse_policy_kind("bogus"));
}
