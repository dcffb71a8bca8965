#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "triplex/corpus.hpp"
#include "triplex/error.hpp"
#include "triplex/triples.hpp"

namespace triplex {

enum class ReprMode { Abstract, Triples, AbstractTriples, Hybrid };

inline constexpr std::array<ReprMode, 4> kAllModes = {
    ReprMode::Abstract, ReprMode::Triples, ReprMode::AbstractTriples, ReprMode::Hybrid};

// Separator between hybrid segments, as stored in the text.
inline constexpr std::string_view kSegmentSeparator = " [SEP] ";

// Machine name used in file names, flags and JSON.
inline constexpr std::string_view mode_name(ReprMode m) noexcept {
  switch (m) {
    case ReprMode::Abstract: return "abstract";
    case ReprMode::Triples: return "triples";
    case ReprMode::AbstractTriples: return "abstract_triples";
    case ReprMode::Hybrid: return "hybrid";
  }
  return "abstract";
}

// Row labels of the clustering table.
inline constexpr std::string_view mode_title(ReprMode m) noexcept {
  switch (m) {
    case ReprMode::Abstract: return "Full Abstract";
    case ReprMode::Triples: return "Triples Only";
    case ReprMode::AbstractTriples: return "Abstract+Triples";
    case ReprMode::Hybrid: return "Hybrid Approach";
  }
  return "";
}

// Short form used in "Abs/Hyb" mode pairs of the classification table.
inline constexpr std::string_view mode_abbrev(ReprMode m) noexcept {
  switch (m) {
    case ReprMode::Abstract: return "Abs";
    case ReprMode::Triples: return "Trip";
    case ReprMode::AbstractTriples: return "Abs_Trip";
    case ReprMode::Hybrid: return "Hyb";
  }
  return "";
}

inline ReprMode parse_mode(std::string_view s) {
  for (ReprMode m : kAllModes)
    if (s == mode_name(m)) return m;
  throw ConfigError("unknown representation mode '" + std::string(s) +
                    "' (expected abstract|triples|abstract_triples|hybrid)");
}

struct ReprDoc {
  std::string doc_id;
  ReprMode mode = ReprMode::Abstract;
  std::string text;

  friend bool operator==(const ReprDoc&, const ReprDoc&) = default;
};

// Linearized statements in (sentence_index, verb position) order.
inline std::string triples_text(std::vector<Triple> triples) {
  std::stable_sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
    if (a.sentence_index != b.sentence_index) return a.sentence_index < b.sentence_index;
    return a.verb_index < b.verb_index;
  });
  std::string out;
  for (const auto& t : triples) {
    if (!out.empty()) out.push_back(' ');
    out += linearize(t);
  }
  return out;
}

// Edges as "s —r→ o" joined by "; ".
inline std::string serialize_graph(const KnowledgeGraph& g) {
  std::string out;
  for (const auto& e : g.edges) {
    if (!out.empty()) out += "; ";
    out += e.subject + " —" + e.relation + "→ " + e.object;
  }
  return out;
}

inline ReprDoc build_representation(const Document& doc, const std::vector<Triple>& triples,
                                    ReprMode mode, bool include_graph = false) {
  ReprDoc r{doc.id, mode, {}};
  switch (mode) {
    case ReprMode::Abstract:
      r.text = doc.abstract_clean;
      break;
    case ReprMode::Triples:
      r.text = triples_text(triples);
      break;
    case ReprMode::AbstractTriples: {
      const std::string t = triples_text(triples);
      r.text = t.empty() ? doc.abstract_clean
               : doc.abstract_clean.empty() ? t
                                            : doc.abstract_clean + " " + t;
      break;
    }
    case ReprMode::Hybrid:
      r.text = doc.abstract_clean;
      r.text += kSegmentSeparator;
      r.text += triples_text(triples);
      if (include_graph) {
        r.text += kSegmentSeparator;
        r.text += serialize_graph(build_graph(triples));
      }
      break;
  }
  return r;
}

inline nlohmann::json to_json(const ReprDoc& r) {
  return {{"doc_id", r.doc_id}, {"mode", std::string(mode_name(r.mode))}, {"text", r.text}};
}

inline ReprDoc repr_from_json(const nlohmann::json& j) {
  return {j.at("doc_id").get<std::string>(), parse_mode(j.at("mode").get<std::string>()),
          j.at("text").get<std::string>()};
}

}  // namespace triplex
