#include "clarq/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace clarq {

WeightedQuery count_terms(const TokenSequence& tokens) {
  std::map<std::string, double> counts;
  for (const auto& t : tokens) counts[t] += 1.0;
  return {counts.begin(), counts.end()};
}

double LanguageModel::mass() const {
  double s = 0.0;
  for (const auto& [_, p] : probs) s += p;
  return s;
}

LanguageModel max_likelihood_model(const TokenSequence& tokens) {
  LanguageModel m;
  if (tokens.empty()) return m;
  for (const auto& t : tokens) m.probs[t] += 1.0;
  const double n = static_cast<double>(tokens.size());
  for (auto& [_, p] : m.probs) p /= n;
  return m;
}

QuestionIndex build_question_index(const Corpus& corpus) {
  std::vector<std::pair<QuestionId, std::string>> items;
  items.reserve(corpus.questions().size());
  for (const auto& q : corpus.questions()) items.emplace_back(q.id, q.text);
  return QuestionIndex::build(std::move(items));
}

std::vector<QuestionId> CandidatePool::ids() const {
  std::vector<QuestionId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

bool CandidatePool::contains(QuestionId q) const {
  return std::any_of(entries.begin(), entries.end(),
                     [q](const ScoredQuestion& e) { return e.id == q; });
}

CandidatePool rank_questions_ql(const Topic& topic, const QuestionIndex& index,
                                Dirichlet smoothing, std::size_t n) {
  if (n == 0) throw UsageError("candidate pool size must be >= 1");
  const auto scores = index.score_all(count_terms(tokenize(topic.text)), smoothing);
  CandidatePool pool;
  pool.topic_id = topic.id;
  pool.entries.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) pool.entries.push_back({index.id(i), scores[i]});
  auto better = [](const ScoredQuestion& a, const ScoredQuestion& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  const std::size_t keep = std::min(n, pool.entries.size());
  std::partial_sort(pool.entries.begin(), pool.entries.begin() + keep, pool.entries.end(),
                    better);
  pool.entries.resize(keep);
  return pool;
}

std::map<TopicId, CandidatePool> build_candidate_pools(const Corpus& corpus,
                                                       const QuestionIndex& index,
                                                       Dirichlet smoothing, std::size_t n) {
  std::map<TopicId, CandidatePool> pools;
  for (const auto& t : corpus.topics()) pools.emplace(t.id, rank_questions_ql(t, index, smoothing, n));
  return pools;
}

PoolMembers pool_members(const std::map<TopicId, CandidatePool>& pools) {
  PoolMembers out;
  for (const auto& [t, p] : pools) out.emplace(t, p.ids());
  return out;
}

LanguageModel conversation_query_model(const std::string& topic_text,
                                       const std::vector<HistoryTurn>& history, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw UsageError("history mixing weight must be in [0, 1]");
  LanguageModel topic = max_likelihood_model(tokenize(topic_text));
  if (history.empty()) return topic;
  TokenSequence hist;
  for (const auto& turn : history) {
    for (auto& t : tokenize(turn.question_text)) hist.push_back(std::move(t));
    hist.emplace_back(surface_text(turn.answer));
  }
  LanguageModel h = max_likelihood_model(hist);
  if (topic.probs.empty()) return h;
  LanguageModel out;
  for (const auto& [t, p] : topic.probs) out.probs[t] += w * p;
  for (const auto& [t, p] : h.probs) out.probs[t] += (1.0 - w) * p;
  for (auto it = out.probs.begin(); it != out.probs.end();) {
    if (it->second == 0.0)
      it = out.probs.erase(it);
    else
      ++it;
  }
  return out;
}

std::vector<ScoredDocument> retrieve_documents(const LanguageModel& model,
                                               const DocumentIndex& index,
                                               Dirichlet smoothing, std::size_t k) {
  if (model.probs.empty()) throw UsageError("empty query model");
  const auto scores = index.score_all(model.as_query(), smoothing);
  std::vector<std::size_t> order(index.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<ScoredDocument> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back({index.id(order[i]), scores[order[i]]});
  return out;
}

DocumentIndex load_documents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      items.emplace_back(rec.at("id").get<std::string>(), rec.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " +
                       e.what());
    }
  }
  return DocumentIndex::build(std::move(items));
}

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string qid, iter, doc;
    int rel = 0;
    if (!(ss >> qid)) continue;
    if (!(ss >> iter >> doc >> rel))
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed qrels line");
    if (rel < 0 || rel > 4)
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": relevance must be in 0..4");
    qrels[qid][doc] = rel;
  }
  return qrels;
}

void write_run(std::ostream& out, const std::vector<RunLine>& lines, const std::string& tag) {
  for (const auto& l : lines) {
    out << l.qid << " Q0 " << l.item << ' ' << l.rank << ' ' << std::setprecision(17)
        << l.score << ' ' << tag << '\n';
  }
}

std::vector<RunLine> read_run(std::istream& in) {
  std::vector<RunLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    RunLine r;
    std::string q0, tag;
    if (!(ss >> r.qid)) continue;
    if (!(ss >> q0 >> r.item >> r.rank >> r.score >> tag) || r.rank < 1)
      throw InputError("run line " + std::to_string(lineno) + " is malformed");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace clarq
