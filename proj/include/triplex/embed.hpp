#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "triplex/error.hpp"
#include "triplex/matrix.hpp"
#include "triplex/repr.hpp"
#include "triplex/rng.hpp"

namespace triplex {

// Row i is the unit-norm embedding of doc_ids[i].
struct EmbeddingMatrix {
  std::vector<std::string> doc_ids;
  Matrix vectors;
  std::string provider_name;
  ReprMode mode = ReprMode::Abstract;

  std::size_t rows() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

// Source of raw (unnormalized) vectors. Implementations make no thread-safety
// promise unless concurrent() says otherwise.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
  virtual bool concurrent() const { return false; }
};

// In-place l2 normalization. Throws NormalizationError for zero or
// non-finite input, naming the document.
inline void normalize_l2_inplace(std::span<double> v, std::string_view doc_id = {}) {
  double sq = 0.0;
  bool finite = !v.empty();
  for (double x : v) {
    if (!std::isfinite(x)) finite = false;
    sq += x * x;
  }
  if (!finite || !(sq > 0.0) || !std::isfinite(sq))
    throw NormalizationError("cannot normalize " +
                                 std::string(finite ? "all-zero" : "non-finite") +
                                 " vector for document '" + std::string(doc_id) + "'",
                             std::string(doc_id));
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
}

inline std::vector<double> normalize_l2(std::vector<double> v, std::string_view doc_id = {}) {
  normalize_l2_inplace(v, doc_id);
  return v;
}

// Embeds every representation with one provider call and normalizes rows.
inline EmbeddingMatrix embed_corpus(const std::vector<ReprDoc>& reprs, EmbeddingProvider& provider) {
  EmbeddingMatrix m;
  m.provider_name = provider.name();
  const std::size_t dim = provider.dim();
  if (dim == 0) throw ContractError("provider " + m.provider_name + " reports dim 0");
  if (!reprs.empty()) m.mode = reprs.front().mode;

  std::vector<std::string> texts;
  texts.reserve(reprs.size());
  std::unordered_set<std::string> seen;
  for (const auto& r : reprs) {
    if (r.mode != m.mode) throw ContractError("embed_corpus: representations mix modes");
    if (!seen.insert(r.doc_id).second) throw DataError("duplicate doc id " + r.doc_id);
    m.doc_ids.push_back(r.doc_id);
    texts.push_back(r.text);
  }

  m.vectors = Matrix(reprs.size(), dim);
  if (reprs.empty()) return m;

  const auto raw = provider.embed(texts);
  if (raw.size() != texts.size())
    throw ContractError("provider " + m.provider_name + " returned " + std::to_string(raw.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != dim)
      throw ContractError("provider " + m.provider_name + " returned dim " +
                          std::to_string(raw[i].size()) + ", expected " + std::to_string(dim));
    auto row = m.vectors.row(i);
    std::copy(raw[i].begin(), raw[i].end(), row.begin());
    normalize_l2_inplace(row, m.doc_ids[i]);
  }
  return m;
}

// Offline stand-in for a sentence encoder: signed feature hashing of word
// unigrams and bigrams. Texts sharing words share buckets, so overlapping
// texts get high cosine similarity. Empty input maps to e_1.
class HashProvider final : public EmbeddingProvider {
 public:
  HashProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 2) throw ConfigError("hash provider needs dim >= 2");
  }

  std::string name() const override { return "hash"; }
  std::size_t dim() const override { return dim_; }
  bool concurrent() const override { return true; }

  std::vector<double> embed_one(std::string_view text) const {
    std::vector<double> v(dim_, 0.0);
    const auto words = tokenize(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
      add_feature(v, "u\x1f" + words[i]);
      if (i + 1 < words.size()) add_feature(v, "b\x1f" + words[i] + "\x1f" + words[i + 1]);
    }
    bool any = false;
    for (double x : v) any = any || x != 0.0;
    if (!any) v[0] = 1.0;
    return v;
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  // Maximal runs of ASCII alphanumerics or non-ASCII bytes, ASCII-lowercased.
  static std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
      const auto c = static_cast<unsigned char>(ch);
      const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                        (c >= 'A' && c <= 'Z') || c >= 0x80;
      if (word) {
        cur.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c + 32 : c));
      } else if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
  }

 private:
  void add_feature(std::vector<double>& v, std::string_view feature) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : feature) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h = SplitMix64::mix(h ^ SplitMix64::mix(seed_));
    const std::size_t bucket = static_cast<std::size_t>(h % dim_);
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Matrix files.
//
//   "EMB1"                         4 bytes
//   dim                            u32 LE
//   rows                           u64 LE
//   metadata length                u32 LE
//   metadata JSON                  {provider_name, mode, doc_ids}
//   rows * dim float32 LE          row-major
//
// Values are narrowed to float32 on save and widened back on load. A loaded
// matrix therefore round-trips bit-exactly; a freshly computed one comes back
// within float32 rounding (relative 2^-24 per component).
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

template <class T>
T get_le(const unsigned char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | p[i]);
  return static_cast<T>(u);
}

inline constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

}  // namespace detail

inline std::string serialize_matrix(const EmbeddingMatrix& m) {
  if (m.doc_ids.size() != m.rows()) throw ContractError("doc_ids and rows disagree");
  const nlohmann::json meta = {{"provider_name", m.provider_name},
                               {"mode", std::string(mode_name(m.mode))},
                               {"doc_ids", m.doc_ids}};
  const std::string meta_text = meta.dump();
  std::string out = "EMB1";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  out.reserve(out.size() + m.vectors.data().size() * 4);
  for (double x : m.vectors.data())
    detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  return out;
}

inline EmbeddingMatrix deserialize_matrix(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < detail::kHeaderBytes)
    throw FormatError("corrupt matrix file: expected at least " +
                      std::to_string(detail::kHeaderBytes) + " header bytes, got " +
                      std::to_string(bytes.size()));
  if (bytes.substr(0, 3) != "EMB")
    throw FormatError("not a matrix file (bad magic)");
  if (bytes[3] != '1')
    throw FormatError("unsupported matrix file version '" + std::string(1, bytes[3]) + "'");
  const auto dim = detail::get_le<std::uint32_t>(p + 4);
  const auto rows = detail::get_le<std::uint64_t>(p + 8);
  const auto meta_len = detail::get_le<std::uint32_t>(p + 16);
  const std::uint64_t expected =
      detail::kHeaderBytes + std::uint64_t{meta_len} + rows * std::uint64_t{dim} * 4;
  if (bytes.size() != expected)
    throw FormatError("corrupt matrix file: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  if (dim == 0) throw FormatError("corrupt matrix file: dim 0");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(detail::kHeaderBytes, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt matrix metadata: ") + e.what());
  }
  EmbeddingMatrix m;
  try {
    m.provider_name = meta.at("provider_name").get<std::string>();
    m.mode = parse_mode(meta.at("mode").get<std::string>());
    m.doc_ids = meta.at("doc_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt matrix metadata: ") + e.what());
  }
  if (m.doc_ids.size() != rows)
    throw FormatError("corrupt matrix file: " + std::to_string(m.doc_ids.size()) +
                      " doc ids for " + std::to_string(rows) + " rows");
  m.vectors = Matrix(static_cast<std::size_t>(rows), dim);
  const unsigned char* body = p + detail::kHeaderBytes + meta_len;
  auto& data = m.vectors.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(body + 4 * i)));
  return m;
}

inline void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  const std::string bytes = serialize_matrix(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write matrix file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read matrix file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_matrix(bytes);
}

// Rows whose doc id is in `ids`, in the order of `ids`.
inline EmbeddingMatrix select_documents(const EmbeddingMatrix& m,
                                        const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < m.doc_ids.size(); ++i) where.emplace(m.doc_ids[i], i);
  std::vector<std::size_t> idx;
  idx.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = where.find(id);
    if (it == where.end()) throw DataError("document " + id + " missing from embedding matrix");
    idx.push_back(it->second);
  }
  return {ids, m.vectors.select_rows(idx), m.provider_name, m.mode};
}

}  // namespace triplex
