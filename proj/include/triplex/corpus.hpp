#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "triplex/error.hpp"
#include "triplex/rng.hpp"
#include "triplex/unicode.hpp"

namespace triplex {

struct Document {
  std::string id;
  std::string abstract_raw;
  std::string abstract_clean;
  std::vector<std::string> categories;
  std::string primary_label;

  friend bool operator==(const Document&, const Document&) = default;
};

struct SplitSpec {
  std::uint64_t seed = 42;
  std::size_t n_cluster = 5000;
  std::size_t n_class = 10000;
};

struct CorpusSplit {
  std::vector<Document> cluster_set;
  std::vector<Document> class_set;
};

// Lowercases (Unicode-aware), collapses every whitespace run to one space
// and trims. Idempotent.
inline std::string clean_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t pos = 0; pos < raw.size();) {
    const char32_t cp = unicode::decode_next(raw, pos);
    if (unicode::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unicode::append_utf8(out, unicode::to_lower(cp));
  }
  return out;
}

// "cs.AI" -> "cs"; strings without a '.' come back unchanged.
inline std::string map_label(std::string_view category) {
  if (category.empty()) throw DataError("invalid category: empty string");
  return std::string(category.substr(0, category.find('.')));
}

inline Document make_document(std::string id, std::string abstract_raw,
                              std::vector<std::string> categories) {
  if (categories.empty()) throw DataError("document " + id + " has no categories");
  Document d;
  d.id = std::move(id);
  d.abstract_clean = clean_text(abstract_raw);
  d.abstract_raw = std::move(abstract_raw);
  d.primary_label = map_label(categories.front());
  d.categories = std::move(categories);
  return d;
}

struct CorpusLoad {
  std::vector<Document> documents;
  std::size_t skipped = 0;               // records lacking abstract/categories
  std::vector<std::string> diagnostics;  // one entry per rejected line
};

namespace detail {

inline std::vector<std::string> read_categories(const nlohmann::json& v) {
  std::vector<std::string> cats;
  if (v.is_array()) {
    for (const auto& c : v)
      if (c.is_string() && !c.get_ref<const std::string&>().empty())
        cats.push_back(c.get<std::string>());
  } else if (v.is_string()) {
    // The arXiv metadata dump stores categories as one space-separated string.
    const auto& s = v.get_ref<const std::string&>();
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && s[i] == ' ') ++i;
      const std::size_t j = s.find(' ', i);
      const std::size_t end = j == std::string::npos ? s.size() : j;
      if (end > i) cats.push_back(s.substr(i, end - i));
      i = end;
    }
  }
  return cats;
}

}  // namespace detail

// Parses JSON-lines text. Blank lines are ignored.
inline CorpusLoad parse_corpus(std::istream& in) {
  CorpusLoad result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      result.diagnostics.push_back("line " + std::to_string(lineno) + ": malformed JSON (" +
                                   e.what() + ")");
      continue;
    }
    if (!rec.is_object() || !rec.contains("id")) {
      result.diagnostics.push_back("line " + std::to_string(lineno) + ": record has no id");
      continue;
    }
    std::string id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    const auto abs = rec.find("abstract");
    const auto cats = rec.find("categories");
    std::vector<std::string> categories;
    if (cats != rec.end()) categories = detail::read_categories(*cats);
    if (abs == rec.end() || !abs->is_string() || categories.empty()) {
      ++result.skipped;
      continue;
    }
    if (!seen.insert(id).second) {
      result.diagnostics.push_back("line " + std::to_string(lineno) + ": duplicate id " + id);
      continue;
    }
    result.documents.push_back(
        make_document(std::move(id), abs->get<std::string>(), std::move(categories)));
  }
  return result;
}

inline CorpusLoad load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus file " + path);
  CorpusLoad result = parse_corpus(in);
  if (result.documents.empty()) throw DataError("empty corpus: " + path);
  return result;
}

// Seeded Fisher-Yates over the input order; the first n_cluster documents
// of the permutation form the clustering set, the next n_class the
// classification set.
inline CorpusSplit split_corpus(const std::vector<Document>& docs, const SplitSpec& spec) {
  const std::size_t need = spec.n_cluster + spec.n_class;
  if (docs.size() < need)
    throw DataError("insufficient documents for split: need " + std::to_string(need) +
                    ", have " + std::to_string(docs.size()));
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(spec.seed);
  shuffle(std::span<std::size_t>(order), rng);

  CorpusSplit split;
  split.cluster_set.reserve(spec.n_cluster);
  split.class_set.reserve(spec.n_class);
  for (std::size_t i = 0; i < spec.n_cluster; ++i) split.cluster_set.push_back(docs[order[i]]);
  for (std::size_t i = spec.n_cluster; i < need; ++i) split.class_set.push_back(docs[order[i]]);
  return split;
}

// {seed, cluster_ids:[...], class_ids:[...]}
inline nlohmann::json split_manifest(const CorpusSplit& split, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  auto& c = j["cluster_ids"] = nlohmann::json::array();
  for (const auto& d : split.cluster_set) c.push_back(d.id);
  auto& k = j["class_ids"] = nlohmann::json::array();
  for (const auto& d : split.class_set) k.push_back(d.id);
  return j;
}

inline nlohmann::json to_json(const Document& d) {
  return {{"id", d.id},
          {"abstract", d.abstract_raw},
          {"abstract_clean", d.abstract_clean},
          {"categories", d.categories},
          {"primary_label", d.primary_label}};
}

inline Document document_from_json(const nlohmann::json& j) {
  Document d;
  d.id = j.at("id").get<std::string>();
  d.abstract_raw = j.at("abstract").get<std::string>();
  d.abstract_clean = j.at("abstract_clean").get<std::string>();
  d.categories = j.at("categories").get<std::vector<std::string>>();
  d.primary_label = j.at("primary_label").get<std::string>();
  return d;
}

}  // namespace triplex
