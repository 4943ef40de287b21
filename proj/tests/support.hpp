#pragma once

#include <string>
#include <vector>

#include "clarq/corpus.hpp"

namespace clarq::testing {

// Topic t (ids 1..topics) has `facets` facets; facet f owns `questions`
// questions that share the planted token "intent<t>x<f>". Facet f's
// questions carry f filler words, so static relevance groups them in blocks.
// Every facet answers every question of its topic: its own questions yes,
// the rest no.
struct SyntheticSpec {
  int topics = 10;
  int facets = 4;
  int questions = 3;
};

inline FacetId facet_id(TopicId t, int f) { return t * 100 + f; }
inline QuestionId question_id(TopicId t, int f, int j) { return t * 1000 + f * 10 + j; }

inline Corpus synthetic_corpus(const SyntheticSpec& spec = {}) {
  std::vector<Topic> topics;
  std::vector<Facet> facets;
  std::vector<Question> questions;
  std::vector<AnswerRecord> answers;
  for (TopicId t = 1; t <= spec.topics; ++t) {
    const std::string ts = std::to_string(t);
    topics.push_back({t, "tok" + ts, t % 2 ? TopicType::faceted : TopicType::ambiguous});
    for (int f = 0; f < spec.facets; ++f) {
      const std::string planted = "intent" + ts + "x" + std::to_string(f);
      facets.push_back({facet_id(t, f), t, planted,
                        f == 0 ? FacetType::navigational : FacetType::informational});
      for (int j = 0; j < spec.questions; ++j) {
        std::string text = "do you want tok" + ts + " " + planted;
        for (int k = 0; k < f; ++k) text += " more";
        text += " q" + ts + "x" + std::to_string(f) + "x" + std::to_string(j);
        questions.push_back({question_id(t, f, j), t, text});
      }
    }
    for (int f = 0; f < spec.facets; ++f)
      for (int g = 0; g < spec.facets; ++g)
        for (int j = 0; j < spec.questions; ++j)
          answers.push_back({facet_id(t, f), question_id(t, g, j),
                             f == g ? Polarity::positive : Polarity::negative});
  }
  return Corpus(std::move(topics), std::move(facets), std::move(questions), std::move(answers));
}

}  // namespace clarq::testing
