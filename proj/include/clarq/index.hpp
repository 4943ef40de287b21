#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "clarq/errors.hpp"
#include "clarq/text.hpp"

namespace clarq {

using TermId = std::uint32_t;

// Dirichlet-prior smoothing: P(w|d) = (tf + mu * P(w|C)) / (|d| + mu).
struct Dirichlet {
  double mu = 1000.0;
};

// Probability assigned to a term that never occurs in the collection.
inline constexpr double kOutOfCollectionFloor = 1e-10;

class CollectionStats {
 public:
  std::size_t item_count() const { return item_count_; }
  std::uint64_t total_tokens() const { return total_; }
  std::size_t vocabulary_size() const { return terms_.size(); }
  const std::vector<std::string>& vocabulary() const { return terms_; }

  std::optional<TermId> find(const std::string& term) const {
    auto it = ids_.find(term);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  std::uint64_t collection_frequency(const std::string& term) const {
    auto t = find(term);
    return t ? cf_[*t] : 0;
  }
  std::uint64_t collection_frequency(TermId t) const { return cf_[t]; }
  std::uint32_t document_frequency(const std::string& term) const {
    auto t = find(term);
    return t ? df_[*t] : 0;
  }
  // Maximum-likelihood background model P(w|C); 0 for unseen terms.
  double background(const std::string& term) const {
    auto t = find(term);
    return t ? background(*t) : 0.0;
  }
  double background(TermId t) const {
    return total_ == 0 ? 0.0 : static_cast<double>(cf_[t]) / static_cast<double>(total_);
  }

 private:
  template <typename Id>
  friend class InvertedIndex;

  TermId intern(const std::string& term) {
    auto [it, inserted] = ids_.emplace(term, static_cast<TermId>(terms_.size()));
    if (inserted) {
      terms_.push_back(term);
      cf_.push_back(0);
      df_.push_back(0);
    }
    return it->second;
  }

  std::size_t item_count_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> ids_;
  std::vector<std::uint64_t> cf_;
  std::vector<std::uint32_t> df_;
};

// Weighted query: term -> weight (raw counts for QL, probabilities for a
// query language model).
using WeightedQuery = std::vector<std::pair<std::string, double>>;

WeightedQuery count_terms(const TokenSequence& tokens);

// Term-level inverted index over items identified by `Id`. Items are kept in
// ascending id order and postings are sorted by item position, so position
// order equals id order.
template <typename Id>
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t item;
    std::uint32_t tf;
  };

  InvertedIndex() = default;

  static InvertedIndex build(std::vector<std::pair<Id, std::string>> items,
                             const std::unordered_set<std::string>* stopwords = nullptr) {
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    InvertedIndex ix;
    ix.ids_.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0 && !(items[i - 1].first < items[i].first))
        throw InputError("duplicate item id in index input");
      ix.ids_.push_back(items[i].first);
    }
    ix.lengths_.resize(items.size(), 0);
    ix.item_terms_.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      TokenSequence toks =
          stopwords ? tokenize(items[i].second, *stopwords) : tokenize(items[i].second);
      std::unordered_map<TermId, std::uint32_t> counts;
      for (const auto& tok : toks) ++counts[ix.stats_.intern(tok)];
      auto& row = ix.item_terms_[i];
      row.assign(counts.begin(), counts.end());
      std::sort(row.begin(), row.end());
      ix.lengths_[i] = toks.size();
      ix.stats_.total_ += toks.size();
      for (const auto& [t, tf] : row) {
        ix.stats_.cf_[t] += tf;
        ix.stats_.df_[t] += 1;
      }
    }
    ix.stats_.item_count_ = items.size();
    ix.postings_.resize(ix.stats_.terms_.size());
    for (std::size_t i = 0; i < items.size(); ++i)
      for (const auto& [t, tf] : ix.item_terms_[i])
        ix.postings_[t].push_back({static_cast<std::uint32_t>(i), tf});
    return ix;
  }

  std::size_t size() const { return ids_.size(); }
  const Id& id(std::size_t pos) const { return ids_[pos]; }
  std::optional<std::size_t> find(const Id& id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
  }
  std::size_t length(std::size_t pos) const { return lengths_[pos]; }
  const CollectionStats& stats() const { return stats_; }

  std::uint32_t tf(const std::string& term, std::size_t pos) const {
    auto t = stats_.find(term);
    return t ? tf(*t, pos) : 0;
  }
  std::uint32_t tf(TermId t, std::size_t pos) const {
    const auto& row = item_terms_[pos];
    auto it = std::lower_bound(row.begin(), row.end(), std::pair<TermId, std::uint32_t>{t, 0});
    return (it != row.end() && it->first == t) ? it->second : 0;
  }
  std::span<const Posting> postings(const std::string& term) const {
    auto t = stats_.find(term);
    if (!t) return {};
    return postings_[*t];
  }

  // Smoothed log P(term | item).
  double log_prob(const std::string& term, std::size_t pos, Dirichlet s) const {
    check(s);
    auto t = stats_.find(term);
    if (!t) return std::log(kOutOfCollectionFloor);
    const double p = stats_.background(*t);
    return std::log((tf(*t, pos) + s.mu * p) /
                    (static_cast<double>(lengths_[pos]) + s.mu));
  }

  // Sum over query terms of weight * log P(term | item).
  double score(const WeightedQuery& query, std::size_t pos, Dirichlet s) const {
    double total = 0.0;
    for (const auto& [term, w] : query) total += w * log_prob(term, pos, s);
    return total;
  }

  // score() for every item, accumulated through postings.
  std::vector<double> score_all(const WeightedQuery& query, Dirichlet s) const {
    check(s);
    double constant = 0.0;
    double in_collection_weight = 0.0;
    std::vector<double> acc(size(), 0.0);
    for (const auto& [term, w] : query) {
      auto t = stats_.find(term);
      if (!t) {
        constant += w * std::log(kOutOfCollectionFloor);
        continue;
      }
      const double mp = s.mu * stats_.background(*t);
      const double base = std::log(mp);
      constant += w * base;
      in_collection_weight += w;
      for (const auto& p : postings_[*t]) acc[p.item] += w * (std::log(p.tf + mp) - base);
    }
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i)
      out[i] = constant - in_collection_weight * std::log(static_cast<double>(lengths_[i]) + s.mu) +
               acc[i];
    return out;
  }

 private:
  static void check(Dirichlet s) {
    if (!(s.mu > 0.0)) throw UsageError("Dirichlet mu must be positive");
  }

  std::vector<Id> ids_;
  std::vector<std::size_t> lengths_;
  std::vector<std::vector<std::pair<TermId, std::uint32_t>>> item_terms_;
  std::vector<std::vector<Posting>> postings_;
  CollectionStats stats_;
};

}  // namespace clarq
