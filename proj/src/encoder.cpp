#include "clarq/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "clarq/errors.hpp"
#include "clarq/text.hpp"

namespace clarq {

using nlohmann::json;

LexicalEncoder::LexicalEncoder(std::map<std::string, std::uint32_t> document_frequency,
                               std::size_t document_count, std::size_t hash_width)
    : df_(std::move(document_frequency)), n_(document_count), hash_width_(hash_width) {}

LexicalEncoder LexicalEncoder::fit(const std::vector<std::string>& texts,
                                   std::size_t hash_width) {
  std::map<std::string, std::uint32_t> df;
  for (const auto& text : texts) {
    auto toks = tokenize(text);
    std::set<std::string> uniq(toks.begin(), toks.end());
    for (const auto& t : uniq) ++df[t];
  }
  return LexicalEncoder(std::move(df), texts.size(), hash_width);
}

double LexicalEncoder::idf(const std::string& term) const {
  auto it = df_.find(term);
  const double df = it == df_.end() ? 0.0 : it->second;
  return std::log((static_cast<double>(n_) + 1.0) / (df + 0.5));
}

namespace {

using TokenSet = std::set<std::string>;

double jaccard(const TokenSet& a, const TokenSet& b) {
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double share_present(const TokenSequence& from, const TokenSet& in) {
  if (from.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& t : from) hit += in.count(t);
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

std::set<std::pair<std::string, std::string>> padded_bigrams(const TokenSequence& toks) {
  std::set<std::pair<std::string, std::string>> out;
  std::string prev = "<s>";
  for (const auto& t : toks) {
    out.emplace(prev, t);
    prev = t;
  }
  out.emplace(prev, "</s>");
  return out;
}

bool contains_contiguous(const TokenSequence& hay, const TokenSequence& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

Vector LexicalEncoder::encode(const std::string& a, const std::string& b) const {
  const TokenSequence ta = tokenize(a), tb = tokenize(b);
  const TokenSet sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  Vector f(dim(), 0.0);

  f[0] = jaccard(sa, sb);

  std::map<std::string, double> va, vb;
  for (const auto& t : ta) va[t] += 1.0;
  for (const auto& t : tb) vb[t] += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (auto& [t, x] : va) {
    x *= idf(t);
    na += x * x;
  }
  for (auto& [t, y] : vb) {
    y *= idf(t);
    nb += y * y;
    auto it = va.find(t);
    if (it != va.end()) dot += it->second * y;
  }
  f[1] = (na > 0.0 && nb > 0.0) ? std::min(1.0, dot / std::sqrt(na * nb)) : 0.0;

  f[2] = share_present(ta, sb);
  f[3] = share_present(tb, sa);

  if (!ta.empty() && !tb.empty()) {
    const auto ba = padded_bigrams(ta), bb = padded_bigrams(tb);
    std::size_t inter = 0;
    for (const auto& g : ba) inter += bb.count(g);
    f[4] = static_cast<double>(inter) / static_cast<double>(ba.size() + bb.size() - inter);
  }

  const double la = static_cast<double>(ta.size()), lb = static_cast<double>(tb.size());
  f[5] = std::abs(la - lb) / std::max({la, lb, 1.0});

  double idf_inter = 0.0, idf_union = 0.0;
  for (const auto& t : sa) {
    idf_union += idf(t);
    if (sb.count(t)) idf_inter += idf(t);
  }
  for (const auto& t : sb)
    if (!sa.count(t)) idf_union += idf(t);
  f[6] = idf_union > 0.0 ? idf_inter / idf_union : 0.0;

  if (!ta.empty() && !tb.empty()) {
    const bool contained = ta.size() <= tb.size() ? contains_contiguous(tb, ta)
                                                  : contains_contiguous(ta, tb);
    f[7] = contained ? 1.0 : 0.0;
  }

  if (hash_width_ > 0 && !sa.empty() && !sb.empty()) {
    const double unit = 1.0 / static_cast<double>(sa.size() * sb.size());
    for (const auto& x : sa) {
      for (const auto& y : sb) {
        const std::string key = x + '\x1f' + y;
        f[kLexicalFeatureCount + fnv1a64(key) % hash_width_] += unit;
      }
    }
  }
  return f;
}

json LexicalEncoder::to_json() const {
  json df = json::object();
  for (const auto& [t, n] : df_) df[t] = n;
  return {{"kind", "lexical"},
          {"hash_width", hash_width_},
          {"document_count", n_},
          {"df", std::move(df)}};
}

PrecomputedEncoder::PrecomputedEncoder(std::size_t dim, std::map<Key, Vector> table,
                                       std::filesystem::path source)
    : dim_(dim), table_(std::move(table)), source_(std::move(source)) {
  if (dim_ == 0) throw InputError("precomputed vectors must have positive dimension");
  for (const auto& [_, v] : table_)
    if (v.size() != dim_) throw InputError("precomputed vector has the wrong dimension");
}

namespace {

constexpr char kMagic[4] = {'C', 'Q', 'P', 'V'};

template <typename T>
T read_le(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw InputError("precomputed vector file is truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
  off += sizeof(T);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(v);
  } else {
    return static_cast<T>(v);
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::uint64_t v;
  if constexpr (std::is_same_v<T, double>) {
    v = std::bit_cast<std::uint64_t>(value);
  } else {
    v = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t parse_hex(const std::string& s) {
  if (s.empty() || s.size() > 16) throw InputError("bad hash key '" + s + "'");
  std::size_t used = 0;
  std::uint64_t v = std::stoull(s, &used, 16);
  if (used != s.size()) throw InputError("bad hash key '" + s + "'");
  return v;
}

}  // namespace

PrecomputedEncoder PrecomputedEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::map<Key, Vector> table;
  if (buf.size() >= 4 && std::memcmp(buf.data(), kMagic, 4) == 0) {
    std::size_t off = 4;
    const auto version = read_le<std::uint32_t>(buf, off);
    if (version != 1) throw InputError("unsupported precomputed vector version");
    const auto dim = read_le<std::uint32_t>(buf, off);
    const auto count = read_le<std::uint64_t>(buf, off);
    for (std::uint64_t r = 0; r < count; ++r) {
      Key k;
      k.first = read_le<std::uint64_t>(buf, off);
      k.second = read_le<std::uint64_t>(buf, off);
      Vector v(dim);
      for (auto& x : v) x = read_le<double>(buf, off);
      table[k] = std::move(v);
    }
    return PrecomputedEncoder(dim, std::move(table), path);
  }
  try {
    const json doc = json::parse(buf);
    const auto dim = doc.at("dim").get<std::size_t>();
    for (const auto& e : doc.at("entries")) {
      Key k{parse_hex(e.at("a").get<std::string>()), parse_hex(e.at("b").get<std::string>())};
      table[k] = e.at("v").get<Vector>();
    }
    return PrecomputedEncoder(dim, std::move(table), path);
  } catch (const json::exception& e) {
    throw InputError("malformed precomputed vector file " + path.string() + ": " + e.what());
  }
}

void PrecomputedEncoder::write_binary(const std::filesystem::path& path, std::size_t dim,
                                      const std::map<Key, Vector>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  write_le<std::uint64_t>(out, table.size());
  for (const auto& [k, v] : table) {
    if (v.size() != dim) throw UsageError("vector dimension mismatch");
    write_le(out, k.first);
    write_le(out, k.second);
    for (double x : v) write_le(out, x);
  }
}

Vector PrecomputedEncoder::encode(const std::string& a, const std::string& b) const {
  auto it = table_.find({fnv1a64(a), fnv1a64(b)});
  if (it == table_.end())
    throw InputError("precomputed vectors do not cover the pair (\"" + a + "\", \"" + b + "\")");
  return it->second;
}

json PrecomputedEncoder::to_json() const {
  return {{"kind", "precomputed"}, {"dim", dim_}, {"path", source_.string()}};
}

std::shared_ptr<const PairEncoder> encoder_from_json(const json& spec) {
  try {
    const auto kind = spec.at("kind").get<std::string>();
    if (kind == "lexical") {
      return std::make_shared<LexicalEncoder>(
          spec.at("df").get<std::map<std::string, std::uint32_t>>(),
          spec.at("document_count").get<std::size_t>(), spec.at("hash_width").get<std::size_t>());
    }
    if (kind == "precomputed") {
      auto enc = std::make_shared<PrecomputedEncoder>(
          PrecomputedEncoder::load(spec.at("path").get<std::string>()));
      if (spec.contains("dim") && spec.at("dim").get<std::size_t>() != enc->dim())
        throw InputError("precomputed vector dimension differs from the model's encoder spec");
      return enc;
    }
    throw InputError("unknown encoder kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed encoder spec: ") + e.what());
  }
}

}  // namespace clarq
