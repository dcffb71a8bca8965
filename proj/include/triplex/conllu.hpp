#pragma once

// CoNLL-U reader. Only the columns needed for triple extraction are kept.
// Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "triplex/error.hpp"

namespace triplex {

struct ParsedToken {
  int index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string upos;
  int head = 0;  // 0 = root
  std::string deprel;
  bool space_after = true;

  friend bool operator==(const ParsedToken&, const ParsedToken&) = default;
};

struct ParsedSentence {
  std::string doc_id;  // from "# newdoc id = ..." (or the file default)
  std::string sent_id;
  std::string text;    // "# text = ..." or the forms joined
  std::vector<ParsedToken> tokens;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "# key = value" -> value when the key matches.
inline bool comment_value(std::string_view line, std::string_view key, std::string& value) {
  std::string_view body = trim(line.substr(1));
  if (body.substr(0, key.size()) != key) return false;
  body = trim(body.substr(key.size()));
  if (body.empty() || body.front() != '=') {
    // "# newdoc" without an id is legal and starts an anonymous document.
    if (body.empty()) {
      value.clear();
      return true;
    }
    return false;
  }
  value = std::string(trim(body.substr(1)));
  return true;
}

inline std::string join_forms(const std::vector<ParsedToken>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += t.form;
    if (t.space_after) out += ' ';
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace detail

// Parses CoNLL-U text. `default_doc_id` applies until the first
// "# newdoc id" comment.
inline std::vector<ParsedSentence> parse_conllu(std::istream& in,
                                                const std::string& default_doc_id = {}) {
  std::vector<ParsedSentence> sentences;
  std::string doc_id = default_doc_id;
  ParsedSentence current;
  bool open = false;
  std::size_t first_line = 0;

  const auto finish = [&](std::size_t lineno) {
    if (!open) return;
    const int n = static_cast<int>(current.tokens.size());
    for (std::size_t i = 0; i < current.tokens.size(); ++i) {
      const auto& t = current.tokens[i];
      if (t.index != static_cast<int>(i) + 1)
        throw ParseError("token ids are not 1..n in sentence starting here", first_line);
      if (t.head < 0 || t.head > n)
        throw ParseError("head " + std::to_string(t.head) + " outside sentence", lineno);
    }
    if (current.text.empty()) current.text = detail::join_forms(current.tokens);
    current.doc_id = doc_id;
    sentences.push_back(std::move(current));
    current = ParsedSentence{};
    open = false;
  };

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view line = raw;
    if (detail::trim(line).empty()) {
      finish(lineno);
      continue;
    }
    if (line.front() == '#') {
      std::string value;
      if (detail::comment_value(line, "newdoc id", value) ||
          detail::comment_value(line, "newdoc", value)) {
        finish(lineno);
        doc_id = value.empty() ? default_doc_id : value;
      } else if (detail::comment_value(line, "sent_id", value)) {
        current.sent_id = value;
      } else if (detail::comment_value(line, "text", value)) {
        current.text = value;
      }
      continue;
    }
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 10)
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(cols.size()),
                       lineno);
    if (!open) {
      open = true;
      first_line = lineno;
    }
    // Multiword ranges and empty nodes carry no syntactic head of their own.
    if (cols[0].find('-') != std::string_view::npos || cols[0].find('.') != std::string_view::npos)
      continue;
    ParsedToken tok;
    if (!detail::parse_int(cols[0], tok.index))
      throw ParseError("non-integer token id '" + std::string(cols[0]) + "'", lineno);
    if (!detail::parse_int(cols[6], tok.head))
      throw ParseError("non-integer head '" + std::string(cols[6]) + "'", lineno);
    tok.form = std::string(cols[1]);
    tok.lemma = std::string(cols[2]);
    tok.upos = std::string(cols[3]);
    tok.deprel = std::string(cols[7]);
    tok.space_after = cols[9].find("SpaceAfter=No") == std::string_view::npos;
    current.tokens.push_back(std::move(tok));
  }
  finish(lineno + 1);
  return sentences;
}

inline std::vector<ParsedSentence> parse_conllu(std::string_view text,
                                                const std::string& default_doc_id = {}) {
  std::istringstream in{std::string(text)};
  return parse_conllu(in, default_doc_id);
}

// A single file, or every *.conllu file in a directory (sorted by name, each
// defaulting its doc id to the file stem).
inline std::vector<ParsedSentence> load_conllu(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const auto read_one = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read CoNLL-U file " + p.string());
    try {
      return parse_conllu(in, p.stem().string());
    } catch (const ParseError& e) {
      throw ParseError(e.detail(), e.line(), p.string());
    }
  };
  if (!fs::exists(path)) throw IoError("missing CoNLL-U input " + path.string());
  if (!fs::is_directory(path)) return read_one(path);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_regular_file() && entry.path().extension() == ".conllu")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ParsedSentence> all;
  for (const auto& f : files) {
    auto part = read_one(f);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

}  // namespace triplex
