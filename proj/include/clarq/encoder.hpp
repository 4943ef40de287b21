#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace clarq {

using Vector = std::vector<double>;

// Maps an ordered text pair to a fixed-width feature vector. Implementations
// are immutable after construction and safe to share across threads.
class PairEncoder {
 public:
  virtual ~PairEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual Vector encode(const std::string& a, const std::string& b) const = 0;
  // Self-describing spec stored in model files.
  virtual nlohmann::json to_json() const = 0;
};

inline constexpr std::size_t kLexicalFeatureCount = 8;

// Eight lexical match features followed by `hash_width` hashed token-pair
// co-occurrence buckets:
//   0 unigram Jaccard          4 padded-bigram Jaccard
//   1 tf-idf cosine            5 |lenA - lenB| / max(lenA, lenB, 1)
//   2 share of A tokens in B   6 idf-weighted set overlap
//   3 share of B tokens in A   7 contiguous containment indicator
class LexicalEncoder final : public PairEncoder {
 public:
  LexicalEncoder(std::map<std::string, std::uint32_t> document_frequency,
                 std::size_t document_count, std::size_t hash_width);

  // Collects document frequencies from `texts`.
  static LexicalEncoder fit(const std::vector<std::string>& texts, std::size_t hash_width);

  std::size_t dim() const override { return kLexicalFeatureCount + hash_width_; }
  Vector encode(const std::string& a, const std::string& b) const override;
  nlohmann::json to_json() const override;

  double idf(const std::string& term) const;
  std::size_t hash_width() const { return hash_width_; }

 private:
  std::map<std::string, std::uint32_t> df_;
  std::size_t n_ = 0;
  std::size_t hash_width_ = 0;
};

// Externally produced pair vectors keyed by (fnv1a64(a), fnv1a64(b)).
//
// Binary layout, little-endian:
//   bytes 0-3  magic "CQPV"
//   u32        version (1)
//   u32        dimension D
//   u64        record count N
//   N records: u64 hash_a, u64 hash_b, D x f64
//
// JSON layout: {"dim": D, "entries": [{"a": "<16 hex digits>",
//                "b": "<16 hex digits>", "v": [D numbers]}, ...]}
class PrecomputedEncoder final : public PairEncoder {
 public:
  using Key = std::pair<std::uint64_t, std::uint64_t>;

  PrecomputedEncoder(std::size_t dim, std::map<Key, Vector> table,
                     std::filesystem::path source = {});

  // Chooses the format from the leading bytes.
  static PrecomputedEncoder load(const std::filesystem::path& path);
  static void write_binary(const std::filesystem::path& path, std::size_t dim,
                           const std::map<Key, Vector>& table);

  std::size_t dim() const override { return dim_; }
  // Throws InputError for a pair missing from the table.
  Vector encode(const std::string& a, const std::string& b) const override;
  nlohmann::json to_json() const override;

  std::size_t size() const { return table_.size(); }

 private:
  std::size_t dim_;
  std::map<Key, Vector> table_;
  std::filesystem::path source_;
};

std::shared_ptr<const PairEncoder> encoder_from_json(const nlohmann::json& spec);

}  // namespace clarq
