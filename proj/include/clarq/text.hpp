#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace clarq {

using TokenSequence = std::vector<std::string>;

// Lowercases ASCII and splits on runs of characters that are not ASCII
// letters or digits. Bytes >= 0x80 are kept inside tokens so UTF-8 words
// survive intact. No stemming.
TokenSequence tokenize(std::string_view text);

// Same, then drops tokens found in `stopwords`.
TokenSequence tokenize(std::string_view text,
                       const std::unordered_set<std::string>& stopwords);

// 64-bit FNV-1a. Stable across platforms; used for hashed features and
// precomputed-vector keys.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace clarq
