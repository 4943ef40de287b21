#include "clarq/text.hpp"

#include <cstdint>

namespace clarq {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                           : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TokenSequence tokenize(std::string_view text,
                       const std::unordered_set<std::string>& stopwords) {
  TokenSequence all = tokenize(text);
  TokenSequence out;
  out.reserve(all.size());
  for (auto& t : all)
    if (!stopwords.count(t)) out.push_back(std::move(t));
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace clarq
