#include "clarq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "clarq/errors.hpp"
#include "rng.hpp"

namespace clarq {

using nlohmann::json;

const char* to_string(TopicType t) {
  return t == TopicType::faceted ? "faceted" : "ambiguous";
}

const char* to_string(FacetType t) {
  return t == FacetType::informational ? "informational" : "navigational";
}

const char* to_string(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

const char* surface_text(Polarity p) {
  return p == Polarity::positive ? "yes" : "no";
}

TopicType parse_topic_type(const std::string& s) {
  if (s == "faceted") return TopicType::faceted;
  if (s == "ambiguous") return TopicType::ambiguous;
  throw InputError("unknown topic type '" + s + "'");
}

FacetType parse_facet_type(const std::string& s) {
  if (s == "informational" || s == "inf") return FacetType::informational;
  if (s == "navigational" || s == "nav") return FacetType::navigational;
  throw InputError("unknown facet type '" + s + "'");
}

Polarity parse_polarity(const std::string& s) {
  if (s == "positive" || s == "yes") return Polarity::positive;
  if (s == "negative" || s == "no") return Polarity::negative;
  throw InputError("unknown answer polarity '" + s + "'");
}

namespace {

template <typename T>
T field(const json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end()) throw InputError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("field '") + key + "' has the wrong type");
  }
}

std::int64_t id_field(const json& rec, const char* key) {
  auto v = field<std::int64_t>(rec, key);
  if (v < 0) throw InputError(std::string("field '") + key + "' must be non-negative");
  return v;
}

// Calls fn(record) for every nonblank line; rethrows with file:line context.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json rec = json::parse(line);
      if (!rec.is_object()) throw InputError("record is not a JSON object");
      fn(rec);
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": malformed line: " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

Topic topic_from(const json& rec) {
  Topic t;
  t.id = id_field(rec, "id");
  t.text = field<std::string>(rec, "text");
  t.type = parse_topic_type(field<std::string>(rec, "type"));
  return t;
}

Facet facet_from(const json& rec) {
  Facet f;
  f.id = id_field(rec, "id");
  f.topic_id = id_field(rec, "topic_id");
  f.description = rec.value("description", std::string());
  f.type = parse_facet_type(field<std::string>(rec, "type"));
  return f;
}

Question question_from(const json& rec) {
  Question q;
  q.id = id_field(rec, "id");
  q.topic_id = id_field(rec, "topic_id");
  q.text = field<std::string>(rec, "text");
  return q;
}

AnswerRecord answer_from(const json& rec) {
  AnswerRecord a;
  a.facet_id = id_field(rec, "facet_id");
  a.question_id = id_field(rec, "question_id");
  a.polarity = parse_polarity(field<std::string>(rec, "polarity"));
  return a;
}

template <typename T>
std::unordered_map<std::int64_t, std::size_t> index_by_id(std::vector<T>& items,
                                                          const char* what) {
  std::sort(items.begin(), items.end(),
            [](const T& a, const T& b) { return a.id < b.id; });
  std::unordered_map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!pos.emplace(items[i].id, i).second)
      throw InputError(std::string("duplicate ") + what + " id " +
                       std::to_string(items[i].id));
  }
  return pos;
}

}  // namespace

Corpus::Corpus(std::vector<Topic> topics, std::vector<Facet> facets,
               std::vector<Question> questions, std::vector<AnswerRecord> answers)
    : topics_(std::move(topics)),
      facets_(std::move(facets)),
      questions_(std::move(questions)),
      answers_(std::move(answers)) {
  topic_pos_ = index_by_id(topics_, "topic");
  facet_pos_ = index_by_id(facets_, "facet");
  question_pos_ = index_by_id(questions_, "question");

  for (const auto& t : topics_) {
    if (t.text.empty()) throw InputError("topic " + std::to_string(t.id) + " has empty text");
  }
  for (const auto& f : facets_) {
    if (!has_topic(f.topic_id))
      throw InputError("facet " + std::to_string(f.id) + " references unknown topic id " +
                       std::to_string(f.topic_id));
  }
  for (const auto& q : questions_) {
    if (!has_topic(q.topic_id))
      throw InputError("question " + std::to_string(q.id) +
                       " references unknown topic id " + std::to_string(q.topic_id));
    if (q.text.empty())
      throw InputError("question " + std::to_string(q.id) + " has empty text");
  }
  for (const auto& a : answers_) {
    if (!has_facet(a.facet_id))
      throw InputError("answer references unknown facet id " + std::to_string(a.facet_id));
    if (!has_question(a.question_id))
      throw InputError("answer references unknown question id " +
                       std::to_string(a.question_id));
    const auto& f = facet(a.facet_id);
    const auto& q = question(a.question_id);
    if (f.topic_id != q.topic_id)
      throw InputError("answer pairs facet " + std::to_string(f.id) + " (topic " +
                       std::to_string(f.topic_id) + ") with question " +
                       std::to_string(q.id) + " (topic " + std::to_string(q.topic_id) + ")");
    if (!answer_index_.emplace(std::pair{a.facet_id, a.question_id}, a.polarity).second)
      throw InputError("duplicate answer for facet " + std::to_string(a.facet_id) +
                       ", question " + std::to_string(a.question_id));
  }
  std::sort(answers_.begin(), answers_.end(), [](const auto& a, const auto& b) {
    return std::pair{a.facet_id, a.question_id} < std::pair{b.facet_id, b.question_id};
  });
}

Corpus Corpus::load(const CorpusFiles& files) {
  std::vector<Topic> topics;
  std::vector<Facet> facets;
  std::vector<Question> questions;
  std::vector<AnswerRecord> answers;
  for_each_record(files.topics, [&](const json& r) { topics.push_back(topic_from(r)); });
  for_each_record(files.facets, [&](const json& r) { facets.push_back(facet_from(r)); });
  for_each_record(files.questions,
                  [&](const json& r) { questions.push_back(question_from(r)); });
  for_each_record(files.answers, [&](const json& r) { answers.push_back(answer_from(r)); });
  return Corpus(std::move(topics), std::move(facets), std::move(questions),
                std::move(answers));
}

Corpus Corpus::from_json(const json& doc) {
  try {
    if (doc.value("schema", "") != "clarq.corpus")
      throw InputError("not a serialized corpus (schema mismatch)");
    if (doc.value("version", 0) != 1)
      throw InputError("unsupported corpus version " + doc.value("version", json()).dump());
    std::vector<Topic> topics;
    std::vector<Facet> facets;
    std::vector<Question> questions;
    std::vector<AnswerRecord> answers;
    for (const auto& r : doc.at("topics")) topics.push_back(topic_from(r));
    for (const auto& r : doc.at("facets")) facets.push_back(facet_from(r));
    for (const auto& r : doc.at("questions")) questions.push_back(question_from(r));
    for (const auto& r : doc.at("answers")) answers.push_back(answer_from(r));
    return Corpus(std::move(topics), std::move(facets), std::move(questions),
                  std::move(answers));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed corpus document: ") + e.what());
  }
}

json Corpus::to_json() const {
  json doc;
  doc["schema"] = "clarq.corpus";
  doc["version"] = 1;
  auto& ts = doc["topics"] = json::array();
  for (const auto& t : topics_)
    ts.push_back({{"id", t.id}, {"text", t.text}, {"type", to_string(t.type)}});
  auto& fs = doc["facets"] = json::array();
  for (const auto& f : facets_)
    fs.push_back({{"id", f.id},
                  {"topic_id", f.topic_id},
                  {"description", f.description},
                  {"type", to_string(f.type)}});
  auto& qs = doc["questions"] = json::array();
  for (const auto& q : questions_)
    qs.push_back({{"id", q.id}, {"topic_id", q.topic_id}, {"text", q.text}});
  auto& as = doc["answers"] = json::array();
  for (const auto& a : answers_)
    as.push_back({{"facet_id", a.facet_id},
                  {"question_id", a.question_id},
                  {"polarity", to_string(a.polarity)}});
  return doc;
}

const Topic& Corpus::topic(TopicId id) const {
  auto it = topic_pos_.find(id);
  if (it == topic_pos_.end()) throw InputError("unknown topic id " + std::to_string(id));
  return topics_[it->second];
}

const Facet& Corpus::facet(FacetId id) const {
  auto it = facet_pos_.find(id);
  if (it == facet_pos_.end()) throw InputError("unknown facet id " + std::to_string(id));
  return facets_[it->second];
}

const Question& Corpus::question(QuestionId id) const {
  auto it = question_pos_.find(id);
  if (it == question_pos_.end())
    throw InputError("unknown question id " + std::to_string(id));
  return questions_[it->second];
}

std::vector<FacetId> Corpus::facets_of(TopicId topic) const {
  std::vector<FacetId> out;
  for (const auto& f : facets_)
    if (f.topic_id == topic) out.push_back(f.id);
  return out;
}

std::vector<QuestionId> Corpus::questions_of(TopicId topic) const {
  std::vector<QuestionId> out;
  for (const auto& q : questions_)
    if (q.topic_id == topic) out.push_back(q.id);
  return out;
}

std::optional<Polarity> Corpus::answer(FacetId facet, QuestionId question) const {
  auto it = answer_index_.find({facet, question});
  if (it == answer_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<AnswerRecord> Corpus::answers_of(FacetId facet) const {
  std::vector<AnswerRecord> out;
  auto lo = std::lower_bound(answers_.begin(), answers_.end(), facet,
                             [](const AnswerRecord& a, FacetId f) { return a.facet_id < f; });
  for (auto it = lo; it != answers_.end() && it->facet_id == facet; ++it) out.push_back(*it);
  return out;
}

LabelTable::LabelTable(const Corpus& corpus, LabelOptions options) : options_(options) {
  if (options_.unanswered_same_topic != 0 && options_.unanswered_same_topic != 1)
    throw UsageError("unanswered_same_topic must be 0 or 1");
  for (const auto& q : corpus.questions()) question_topic_.emplace(q.id, q.topic_id);
  for (const auto& f : corpus.facets()) facet_topic_.emplace(f.id, f.topic_id);
  std::set<FacetId> with_target;
  for (const auto& a : corpus.answers()) {
    answers_.emplace(std::pair{a.facet_id, a.question_id}, a.polarity);
    if (a.polarity == Polarity::positive) {
      ++grade2_count_;
      with_target.insert(a.facet_id);
    } else {
      ++answered_grade1_count_;
    }
  }
  for (const auto& f : corpus.facets())
    if (!with_target.count(f.id)) no_target_.push_back(f.id);
}

Grade LabelTable::grade(FacetId facet, QuestionId question) const {
  auto ft = facet_topic_.find(facet);
  auto qt = question_topic_.find(question);
  if (ft == facet_topic_.end() || qt == question_topic_.end()) return 0;
  if (ft->second != qt->second) return 0;
  auto it = answers_.find({facet, question});
  if (it == answers_.end()) return options_.unanswered_same_topic;
  return it->second == Polarity::positive ? 2 : 1;
}

std::string ConversationSeed::qid() const {
  std::string s = std::to_string(topic_id) + "-" + std::to_string(facet_id);
  if (preset) s += "-" + std::to_string(*preset);
  return s;
}

std::vector<ConversationSeed> expand_conversations(const Corpus& corpus,
                                                   const LabelTable& labels) {
  std::vector<ConversationSeed> seeds;
  for (const auto& f : corpus.facets()) {
    seeds.push_back({f.topic_id, f.id, SeedKind::zero_turn, std::nullopt});
    for (const auto& a : corpus.answers_of(f.id)) {
      if (a.polarity != Polarity::negative) continue;
      if (labels.grade(f.id, a.question_id) != 1) continue;
      seeds.push_back({f.topic_id, f.id, SeedKind::one_turn, a.question_id});
    }
  }
  return seeds;
}

FoldAssignment::FoldAssignment(const Corpus& corpus) {
  for (const auto& t : corpus.topics()) folds_.emplace(t.id, fold_of(t.id));
}

int FoldAssignment::fold_of(TopicId topic) {
  return static_cast<int>(((topic % kFoldCount) + kFoldCount) % kFoldCount);
}

FoldRoles FoldAssignment::roles(int rotation) {
  if (rotation < 0 || rotation >= kFoldCount)
    throw UsageError("fold rotation must be in [0, 5)");
  FoldRoles r;
  r.test = rotation;
  r.validation = (rotation + 1) % kFoldCount;
  for (int f = 0; f < kFoldCount; ++f)
    if (f != r.test && f != r.validation) r.train.push_back(f);
  return r;
}

std::vector<TopicId> FoldAssignment::topics_in(int fold) const {
  return topics_in(std::vector<int>{fold});
}

std::vector<TopicId> FoldAssignment::topics_in(const std::vector<int>& folds) const {
  std::vector<TopicId> out;
  for (const auto& [topic, fold] : folds_)
    if (std::find(folds.begin(), folds.end(), fold) != folds.end()) out.push_back(topic);
  return out;
}

namespace {

struct GradedPool {
  std::vector<QuestionId> g2, g1, g0;
};

GradedPool split_pool(const LabelTable& labels, FacetId facet,
                      const std::vector<QuestionId>& pool) {
  GradedPool out;
  for (QuestionId q : pool) {
    switch (labels.grade(facet, q)) {
      case 2: out.g2.push_back(q); break;
      case 1: out.g1.push_back(q); break;
      default: out.g0.push_back(q); break;
    }
  }
  for (auto* v : {&out.g2, &out.g1, &out.g0}) std::sort(v->begin(), v->end());
  return out;
}

// Indices into a cross product of size `total`, all of them or a seeded
// uniform subsample of `cap`, ascending.
std::vector<std::size_t> choose(std::size_t total, std::size_t cap, std::uint64_t seed,
                                FacetId facet) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (cap == 0 || total <= cap) return all;
  std::vector<std::size_t> picked;
  picked.reserve(cap);
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(facet)));
  std::sample(all.begin(), all.end(), std::back_inserter(picked), cap, rng);
  return picked;
}

}  // namespace

TrainingSets build_pairs(const Corpus& corpus, const LabelTable& labels,
                         const PoolMembers& pools, const std::vector<TopicId>& topics,
                         const TrainingSetOptions& options) {
  TrainingSets out;
  for (TopicId t : topics) {
    auto pit = pools.find(t);
    for (FacetId f : corpus.facets_of(t)) {
      if (pit == pools.end()) {
        out.skipped.push_back(f);
        continue;
      }
      auto g = split_pool(labels, f, pit->second);
      std::vector<QuestionId> pos = g.g2;
      pos.insert(pos.end(), g.g1.begin(), g.g1.end());
      std::sort(pos.begin(), pos.end());
      if (pos.empty() || g.g0.empty()) {
        out.skipped.push_back(f);
        continue;
      }
      const std::size_t n0 = g.g0.size();
      for (std::size_t idx : choose(pos.size() * n0, options.cap, options.seed, f))
        out.pairs.push_back({t, f, pos[idx / n0], g.g0[idx % n0]});
    }
  }
  return out;
}

TrainingSets build_triplets(const Corpus& corpus, const LabelTable& labels,
                            const PoolMembers& pools, const std::vector<TopicId>& topics,
                            const TrainingSetOptions& options) {
  TrainingSets out;
  for (TopicId t : topics) {
    auto pit = pools.find(t);
    for (FacetId f : corpus.facets_of(t)) {
      if (pit == pools.end()) {
        out.skipped.push_back(f);
        continue;
      }
      auto g = split_pool(labels, f, pit->second);
      if (g.g2.empty() || g.g1.empty() || g.g0.empty()) {
        out.skipped.push_back(f);
        continue;
      }
      const std::size_t n1 = g.g1.size(), n0 = g.g0.size();
      for (std::size_t idx : choose(g.g2.size() * n1 * n0, options.cap, options.seed, f)) {
        out.triplets.push_back(
            {t, f, g.g2[idx / (n1 * n0)], g.g1[(idx / n0) % n1], g.g0[idx % n0]});
      }
    }
  }
  return out;
}

}  // namespace clarq
