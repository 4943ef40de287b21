#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace clarq {

using TopicId = std::int64_t;
using FacetId = std::int64_t;
using QuestionId = std::int64_t;

enum class TopicType { faceted, ambiguous };
enum class FacetType { informational, navigational };
enum class Polarity { positive, negative };

const char* to_string(TopicType t);
const char* to_string(FacetType t);
const char* to_string(Polarity p);
// "yes" for positive, "no" for negative.
const char* surface_text(Polarity p);

struct Topic {
  TopicId id = 0;
  std::string text;
  TopicType type = TopicType::faceted;
};

struct Facet {
  FacetId id = 0;
  TopicId topic_id = 0;
  std::string description;
  FacetType type = FacetType::informational;
};

struct Question {
  QuestionId id = 0;
  TopicId topic_id = 0;
  std::string text;
};

struct AnswerRecord {
  FacetId facet_id = 0;
  QuestionId question_id = 0;
  Polarity polarity = Polarity::negative;

  const char* surface() const { return surface_text(polarity); }
};

struct CorpusFiles {
  std::filesystem::path topics;
  std::filesystem::path facets;
  std::filesystem::path questions;
  std::filesystem::path answers;
};

// Cross-referenced, immutable view of a clarifying-question dataset. Records
// are kept sorted by id; answers by (facet_id, question_id).
class Corpus {
 public:
  Corpus() = default;
  // Validates references and uniqueness; throws InputError.
  Corpus(std::vector<Topic> topics, std::vector<Facet> facets,
         std::vector<Question> questions, std::vector<AnswerRecord> answers);

  static Corpus load(const CorpusFiles& files);
  static Corpus from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const std::vector<Topic>& topics() const { return topics_; }
  const std::vector<Facet>& facets() const { return facets_; }
  const std::vector<Question>& questions() const { return questions_; }
  const std::vector<AnswerRecord>& answers() const { return answers_; }

  const Topic& topic(TopicId id) const;
  const Facet& facet(FacetId id) const;
  const Question& question(QuestionId id) const;
  bool has_topic(TopicId id) const { return topic_pos_.count(id) != 0; }
  bool has_facet(FacetId id) const { return facet_pos_.count(id) != 0; }
  bool has_question(QuestionId id) const { return question_pos_.count(id) != 0; }

  std::vector<FacetId> facets_of(TopicId topic) const;
  std::vector<QuestionId> questions_of(TopicId topic) const;
  std::optional<Polarity> answer(FacetId facet, QuestionId question) const;
  // Answers of one facet, ordered by question id.
  std::vector<AnswerRecord> answers_of(FacetId facet) const;

 private:
  std::vector<Topic> topics_;
  std::vector<Facet> facets_;
  std::vector<Question> questions_;
  std::vector<AnswerRecord> answers_;
  std::unordered_map<TopicId, std::size_t> topic_pos_;
  std::unordered_map<FacetId, std::size_t> facet_pos_;
  std::unordered_map<QuestionId, std::size_t> question_pos_;
  std::map<std::pair<FacetId, QuestionId>, Polarity> answer_index_;
};

using Grade = int;

struct LabelOptions {
  // Grade of a same-topic question that has no answer record for the facet.
  Grade unanswered_same_topic = 1;
};

// y(q | topic, facet). Lookups are total: any (facet, question) pair known to
// the corpus has a grade.
class LabelTable {
 public:
  LabelTable(const Corpus& corpus, LabelOptions options = {});

  Grade grade(FacetId facet, QuestionId question) const;
  const LabelOptions& options() const { return options_; }

  std::size_t count_grade2() const { return grade2_count_; }
  // Number of (facet, question) entries with an explicit negative record.
  std::size_t count_answered_grade1() const { return answered_grade1_count_; }
  // Facets for which no question has grade 2.
  const std::vector<FacetId>& facets_without_target() const { return no_target_; }

 private:
  LabelOptions options_;
  std::unordered_map<QuestionId, TopicId> question_topic_;
  std::unordered_map<FacetId, TopicId> facet_topic_;
  std::map<std::pair<FacetId, QuestionId>, Polarity> answers_;
  std::size_t grade2_count_ = 0;
  std::size_t answered_grade1_count_ = 0;
  std::vector<FacetId> no_target_;
};

enum class SeedKind { zero_turn, one_turn };

struct ConversationSeed {
  TopicId topic_id = 0;
  FacetId facet_id = 0;
  SeedKind kind = SeedKind::zero_turn;
  // Preset negatively answered question for one_turn seeds.
  std::optional<QuestionId> preset;

  // "topic-facet" or "topic-facet-question".
  std::string qid() const;
};

// One zero-turn seed per facet plus one one-turn seed per explicitly negative
// answer. Ordered by facet id, then preset question id.
std::vector<ConversationSeed> expand_conversations(const Corpus& corpus,
                                                   const LabelTable& labels);

inline constexpr int kFoldCount = 5;

struct FoldRoles {
  int test = 0;
  int validation = 1;
  std::vector<int> train;
};

class FoldAssignment {
 public:
  explicit FoldAssignment(const Corpus& corpus);

  static int fold_of(TopicId topic);
  // Rotation r: test fold r, validation fold (r + 1) mod 5, train the rest.
  static FoldRoles roles(int rotation);

  const std::map<TopicId, int>& folds() const { return folds_; }
  std::vector<TopicId> topics_in(int fold) const;
  std::vector<TopicId> topics_in(const std::vector<int>& folds) const;

 private:
  std::map<TopicId, int> folds_;
};

struct Triplet {
  TopicId topic_id = 0;
  FacetId facet_id = 0;
  QuestionId target = 0;    // grade 2
  QuestionId related = 0;   // grade 1
  QuestionId negative = 0;  // grade 0
};

struct Pair {
  TopicId topic_id = 0;
  FacetId facet_id = 0;
  QuestionId positive = 0;  // grade > 0
  QuestionId negative = 0;  // grade 0
};

struct TrainingSetOptions {
  // Maximum entries per (topic, facet); 0 disables the cap.
  std::size_t cap = 50;
  std::uint64_t seed = 0;
};

struct TrainingSets {
  std::vector<Pair> pairs;
  std::vector<Triplet> triplets;
  // Facets that produced no entries.
  std::vector<FacetId> skipped;
};

// Candidate pool entries per topic, in pool order.
using PoolMembers = std::map<TopicId, std::vector<QuestionId>>;

TrainingSets build_pairs(const Corpus& corpus, const LabelTable& labels,
                         const PoolMembers& pools,
                         const std::vector<TopicId>& topics,
                         const TrainingSetOptions& options = {});
TrainingSets build_triplets(const Corpus& corpus, const LabelTable& labels,
                            const PoolMembers& pools,
                            const std::vector<TopicId>& topics,
                            const TrainingSetOptions& options = {});

TopicType parse_topic_type(const std::string& s);
FacetType parse_facet_type(const std::string& s);
Polarity parse_polarity(const std::string& s);

}  // namespace clarq
