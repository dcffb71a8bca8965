#pragma once

// Verb-anchored (subject, relation, object) extraction over dependency
// parses, statement linearization, and the per-corpus knowledge graph.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "triplex/conllu.hpp"
#include "triplex/error.hpp"
#include "triplex/unicode.hpp"

namespace triplex {

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;
  std::string doc_id;
  std::size_t sentence_index = 0;
  std::string sentence_text;
  int verb_index = 0;  // token position of the relation verb in its sentence

  friend bool operator==(const Triple&, const Triple&) = default;
};

// Dependency-label inventory used by the extractor. Two presets ship:
// spaCy/ClearNLP labels and Universal Dependencies labels.
struct DeprelPreset {
  std::string name;
  std::vector<std::string> subject;
  std::vector<std::string> passive_subject;
  std::vector<std::string> direct_object;
  std::vector<std::string> preposition;   // V -prep-> P -pobj-> O
  std::vector<std::string> prep_object;
  std::vector<std::string> oblique;       // V -obl-> O (case marker dropped)
  std::vector<std::string> case_marker;

  static DeprelPreset spacy() {
    return {"spacy", {"nsubj"}, {"nsubjpass"}, {"dobj"}, {"prep"}, {"pobj"}, {}, {}};
  }
  static DeprelPreset ud() {
    return {"ud", {"nsubj"}, {"nsubj:pass"}, {"obj"}, {}, {}, {"obl"}, {"case"}};
  }
  static DeprelPreset by_name(std::string_view name) {
    if (name == "spacy") return spacy();
    if (name == "ud") return ud();
    throw ConfigError("unknown deprel preset '" + std::string(name) + "' (expected spacy|ud)");
  }
};

enum class RelationForm { Surface, Lemma };

struct ExtractOptions {
  DeprelPreset preset = DeprelPreset::spacy();
  bool accept_passive = true;
  RelationForm relation = RelationForm::Surface;
};

// Replaces every line break (and the blanks around it) with one space.
inline std::string flatten_abstract(std::string_view text) {
  const auto is_break = [](char c) { return c == '\n' || c == '\r'; };
  const auto is_blank = [](char c) { return c == ' ' || c == '\t'; };
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_break(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    while (!out.empty() && is_blank(out.back())) out.pop_back();
    while (i < text.size() && (is_break(text[i]) || is_blank(text[i]))) ++i;
    if (!out.empty() && i < text.size()) out.push_back(' ');
  }
  return out;
}

namespace detail {

inline bool has_label(const std::vector<std::string>& set, std::string_view label) {
  return std::find(set.begin(), set.end(), label) != set.end();
}

class DependencyView {
 public:
  explicit DependencyView(const std::vector<ParsedToken>& tokens) : tokens_(tokens) {
    children_.resize(tokens.size() + 1);
    for (const auto& t : tokens) children_[static_cast<std::size_t>(t.head)].push_back(t.index);
  }

  const ParsedToken& token(int index) const { return tokens_[static_cast<std::size_t>(index) - 1]; }
  const std::vector<int>& children(int index) const {
    return children_[static_cast<std::size_t>(index)];
  }

  // Leftmost child of `head` whose deprel is in `labels`, or 0.
  int first_child(int head, const std::vector<std::string>& labels) const {
    for (int c : children(head))
      if (has_label(labels, token(c).deprel)) return c;
    return 0;
  }

  // Subtree text of `head` without punctuation; direct children whose label
  // is in `drop` are removed together with their subtrees.
  std::string span(int head, const std::vector<std::string>& drop = {}) const {
    std::vector<int> members;
    std::vector<int> stack{head};
    std::vector<bool> seen(tokens_.size() + 1, false);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      if (seen[static_cast<std::size_t>(cur)]) continue;
      seen[static_cast<std::size_t>(cur)] = true;
      members.push_back(cur);
      for (int c : children(cur)) {
        if (cur == head && has_label(drop, token(c).deprel)) continue;
        stack.push_back(c);
      }
    }
    std::sort(members.begin(), members.end());
    std::string out;
    for (int m : members) {
      const auto& t = token(m);
      if (t.upos == "PUNCT") continue;
      if (!out.empty()) out.push_back(' ');
      out += t.form;
    }
    return out;
  }

 private:
  const std::vector<ParsedToken>& tokens_;
  std::vector<std::vector<int>> children_;
};

}  // namespace detail

// One triple per VERB token that has both a subject and an object. The object
// falls back to a prepositional object (spaCy preset) or oblique nominal (UD
// preset) when there is no direct object. Output is in verb-position order.
inline std::vector<Triple> extract_triples(const std::vector<ParsedToken>& sentence,
                                           const std::string& doc_id,
                                           std::size_t sentence_index,
                                           const std::string& sentence_text,
                                           const ExtractOptions& opts = {}) {
  std::vector<Triple> out;
  if (sentence.empty()) return out;
  const detail::DependencyView view(sentence);
  const auto& p = opts.preset;

  std::vector<std::string> subject_labels = p.subject;
  if (opts.accept_passive)
    subject_labels.insert(subject_labels.end(), p.passive_subject.begin(), p.passive_subject.end());

  for (const auto& verb : sentence) {
    if (verb.upos != "VERB") continue;
    const int subj = view.first_child(verb.index, subject_labels);
    if (subj == 0) continue;

    std::string object;
    if (const int obj = view.first_child(verb.index, p.direct_object); obj != 0) {
      object = view.span(obj);
    } else {
      for (int c : view.children(verb.index)) {
        const auto& child = view.token(c);
        if (detail::has_label(p.preposition, child.deprel)) {
          if (const int pobj = view.first_child(c, p.prep_object); pobj != 0) {
            object = view.span(pobj);
            break;
          }
        } else if (detail::has_label(p.oblique, child.deprel)) {
          object = view.span(c, p.case_marker);
          break;
        }
      }
    }
    std::string subject = view.span(subj);
    if (object.empty() || subject.empty()) continue;

    Triple t;
    t.subject = std::move(subject);
    t.relation = opts.relation == RelationForm::Lemma && !verb.lemma.empty() && verb.lemma != "_"
                     ? verb.lemma
                     : verb.form;
    t.object = std::move(object);
    t.doc_id = doc_id;
    t.sentence_index = sentence_index;
    t.sentence_text = sentence_text;
    t.verb_index = verb.index;
    out.push_back(std::move(t));
  }
  return out;
}

// Runs extraction over parsed sentences, numbering sentences per document in
// input order. Sentence text is flattened before it is attached.
inline std::vector<Triple> extract_corpus_triples(const std::vector<ParsedSentence>& sentences,
                                                  const ExtractOptions& opts = {}) {
  std::vector<Triple> out;
  std::map<std::string, std::size_t> next_index;
  for (const auto& s : sentences) {
    const std::size_t idx = next_index[s.doc_id]++;
    auto ts = extract_triples(s.tokens, s.doc_id, idx, flatten_abstract(s.text), opts);
    out.insert(out.end(), std::make_move_iterator(ts.begin()), std::make_move_iterator(ts.end()));
  }
  return out;
}

// "<Subject> <relation> <object>." with only the first character uppercased.
inline std::string linearize(const Triple& t) {
  std::string s = t.subject + " " + t.relation + " " + t.object;
  s = unicode::capitalize_first(s);
  if (s.empty() || s.back() != '.') s.push_back('.');
  return s;
}

struct GraphEdge {
  std::string subject;
  std::string relation;
  std::string object;
  std::string sentence_text;

  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

// Multigraph: duplicate triples give duplicate edges.
struct KnowledgeGraph {
  std::set<std::string> nodes;
  std::vector<GraphEdge> edges;
};

inline KnowledgeGraph build_graph(const std::vector<Triple>& triples) {
  KnowledgeGraph g;
  g.edges.reserve(triples.size());
  for (const auto& t : triples) {
    g.nodes.insert(t.subject);
    g.nodes.insert(t.object);
    g.edges.push_back({t.subject, t.relation, t.object, t.sentence_text});
  }
  return g;
}

inline nlohmann::json to_json(const Triple& t) {
  return {{"doc_id", t.doc_id},         {"sentence_index", t.sentence_index},
          {"subject", t.subject},       {"relation", t.relation},
          {"object", t.object},         {"sentence_text", t.sentence_text},
          {"verb_index", t.verb_index}};
}

inline Triple triple_from_json(const nlohmann::json& j) {
  Triple t;
  t.doc_id = j.at("doc_id").get<std::string>();
  t.sentence_index = j.at("sentence_index").get<std::size_t>();
  t.subject = j.at("subject").get<std::string>();
  t.relation = j.at("relation").get<std::string>();
  t.object = j.at("object").get<std::string>();
  t.sentence_text = j.value("sentence_text", std::string{});
  t.verb_index = j.value("verb_index", 0);
  if (t.subject.empty() || t.relation.empty() || t.object.empty())
    throw DataError("triple for " + t.doc_id + " has an empty field");
  return t;
}

}  // namespace triplex
