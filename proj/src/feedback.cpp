#include "clarq/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace clarq {

namespace {

double mixture_log_likelihood(const std::map<std::string, double>& counts,
                              const std::map<std::string, double>& theta,
                              const std::map<std::string, double>& bg, double lambda) {
  double ll = 0.0;
  for (const auto& [w, c] : counts)
    ll += c * std::log((1.0 - lambda) * theta.at(w) + lambda * bg.at(w));
  return ll;
}

}  // namespace

NegativeTopicModel estimate_negative_model(const std::vector<std::string>& negative_texts,
                                           const CollectionStats& background,
                                           const NegativeModelOptions& options) {
  const double lambda = options.background_weight;
  if (!(lambda > 0.0 && lambda < 1.0))
    throw UsageError("background weight must be in (0, 1)");
  std::map<std::string, double> counts;
  for (const auto& text : negative_texts)
    for (const auto& t : tokenize(text)) counts[t] += 1.0;
  if (counts.empty()) throw UsageError("negative feedback model needs at least one token");

  std::map<std::string, double> bg;
  std::map<std::string, double> theta;
  for (const auto& [w, _] : counts) {
    bg[w] = background.background(w);
    theta[w] = 1.0 / static_cast<double>(counts.size());
  }

  NegativeTopicModel model;
  model.background_weight = lambda;
  model.log_likelihood.push_back(mixture_log_likelihood(counts, theta, bg, lambda));
  for (int it = 0; it < options.max_iters; ++it) {
    double norm = 0.0;
    std::map<std::string, double> next;
    for (const auto& [w, c] : counts) {
      const double fg = (1.0 - lambda) * theta[w];
      const double share = fg / (fg + lambda * bg[w]);
      next[w] = c * share;
      norm += next[w];
    }
    for (auto& [_, p] : next) p /= norm;
    theta = std::move(next);
    const double ll = mixture_log_likelihood(counts, theta, bg, lambda);
    const double gain = ll - model.log_likelihood.back();
    model.log_likelihood.push_back(ll);
    model.iterations = it + 1;
    if (gain < options.tol) break;
  }
  model.probs = std::move(theta);
  return model;
}

NegativeTopicModel truncate(const NegativeTopicModel& model, std::size_t m) {
  std::vector<std::pair<std::string, double>> terms(model.probs.begin(), model.probs.end());
  std::stable_sort(terms.begin(), terms.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (terms.size() > m) terms.resize(m);
  NegativeTopicModel out = model;
  out.probs.clear();
  double mass = 0.0;
  for (const auto& [_, p] : terms) mass += p;
  for (const auto& [w, p] : terms) out.probs[w] = mass > 0.0 ? p / mass : 0.0;
  return out;
}

double singleneg_score(const QuestionIndex& index, QuestionId candidate,
                       const TokenSequence& topic_tokens, const NegativeTopicModel& neg,
                       double alpha, Dirichlet smoothing) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("query weight must be in (0, 1]");
  auto pos = index.find(candidate);
  if (!pos) throw UsageError("candidate is not in the question index");
  const double relevance = index.score(count_terms(topic_tokens), *pos, smoothing);
  if (alpha == 1.0) return relevance;
  double penalty = 0.0;
  for (const auto& [w, p] : neg.probs) penalty += p * index.log_prob(w, *pos, smoothing);
  return alpha * relevance - (1.0 - alpha) * penalty;
}

double lexical_cosine(const std::string& a, const std::string& b) {
  std::map<std::string, double> va, vb;
  for (const auto& t : tokenize(a)) va[t] += 1.0;
  for (const auto& t : tokenize(b)) vb[t] += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, x] : va) {
    na += x * x;
    auto it = vb.find(t);
    if (it != vb.end()) dot += x * it->second;
  }
  for (const auto& [_, y] : vb) nb += y * y;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

QuestionId mmr_select(const std::vector<MmrCandidate>& pool, const std::string& topic,
                      const std::vector<MmrCandidate>& asked, double lambda,
                      const Similarity& f) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("MMR lambda must be in [0, 1]");
  std::set<QuestionId> asked_ids;
  for (const auto& a : asked) asked_ids.insert(a.id);
  bool found = false;
  QuestionId best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& q : pool) {
    if (asked_ids.count(q.id)) continue;
    double redundancy = 0.0;
    if (!asked.empty()) {
      redundancy = -std::numeric_limits<double>::infinity();
      for (const auto& a : asked) redundancy = std::max(redundancy, f(a.text, q.text));
    }
    const double s = lambda * f(topic, q.text) - (1.0 - lambda) * redundancy;
    if (!found || s > best_score || (s == best_score && q.id < best)) {
      found = true;
      best = q.id;
      best_score = s;
    }
  }
  if (!found) throw PoolExhausted();
  return best;
}

}  // namespace clarq
