#pragma once

// Pipeline settings and the `key = value` config file that mirrors the CLI
// flags. The file format is the common subset of INI and TOML: one
// assignment per line, `#` or `;` comments, `[section]` headers ignored,
// values optionally quoted, lists comma-separated (optionally in brackets).

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "triplex/error.hpp"
#include "triplex/repr.hpp"

namespace triplex {

inline constexpr std::string_view kDefaultEmbedUrl = "http://localhost:8000";
inline constexpr const char* kEmbedUrlEnv = "TRIPLEX_EMBED_URL";

struct Settings {
  std::uint64_t seed = 42;
  std::size_t threads = 0;
  std::filesystem::path workdir = "triplex-run";
  std::filesystem::path input;
  std::filesystem::path conllu;
  std::vector<ReprMode> modes{kAllModes.begin(), kAllModes.end()};
  std::vector<std::string> providers{"hash"};
  std::size_t dim = 384;
  std::string embed_url{kDefaultEmbedUrl};
  std::size_t batch_size = 64;
  std::string preset = "spacy";
  std::string relation = "surface";
  bool include_graph = false;
  std::size_t k_min = 3;
  std::size_t k_max = 12;
  std::vector<std::size_t> sizes{5, 10, 15, 25, 50, 100};
  std::size_t restarts = 10;
  std::size_t n_cluster = 5000;
  std::size_t n_class = 10000;
  std::size_t trials = 20;
  bool record_time = false;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_list(std::string v) {
  v = trim_copy(v);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = unquote(trim_copy(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("invalid value for " + key + ": '" + v + "' (expected a non-negative integer)");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid value for " + key + ": '" + v + "' (expected true|false)");
}

}  // namespace detail

// Keys accept '-' or '_' as separators ("k-min" == "k_min").
inline std::string normalize_key(std::string key) {
  for (char& c : key)
    if (c == '-') c = '_';
  return key;
}

// Relative paths are resolved against `base` (the config file's directory).
inline void apply_setting(Settings& s, const std::string& raw_key, const std::string& raw_value,
                          const std::filesystem::path& base = {}) {
  const std::string key = normalize_key(raw_key);
  const std::string v = detail::unquote(detail::trim_copy(raw_value));
  auto path = [&] {
    std::filesystem::path p(v);
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  using detail::parse_unsigned;
  if (key == "seed") s.seed = parse_unsigned<std::uint64_t>(key, v);
  else if (key == "threads") s.threads = parse_unsigned<std::size_t>(key, v);
  else if (key == "workdir") s.workdir = path();
  else if (key == "input") s.input = path();
  else if (key == "conllu") s.conllu = path();
  else if (key == "mode") {
    s.modes.clear();
    for (const auto& m : detail::split_list(v)) {
      if (m == "all") {
        s.modes.assign(kAllModes.begin(), kAllModes.end());
        break;
      }
      s.modes.push_back(parse_mode(m));
    }
    if (s.modes.empty()) throw ConfigError("mode list is empty");
  } else if (key == "provider") {
    s.providers = detail::split_list(v);
    if (s.providers.empty()) throw ConfigError("provider list is empty");
    for (const auto& p : s.providers)
      if (p != "hash" && (p.rfind("remote:", 0) != 0 || p.size() == 7))
        throw ConfigError("unknown provider '" + p + "' (expected hash or remote:<model>)");
  } else if (key == "dim") s.dim = parse_unsigned<std::size_t>(key, v);
  else if (key == "embed_url") s.embed_url = v;
  else if (key == "batch_size") s.batch_size = parse_unsigned<std::size_t>(key, v);
  else if (key == "preset") {
    if (v != "spacy" && v != "ud") throw ConfigError("unknown preset '" + v + "' (expected spacy|ud)");
    s.preset = v;
  } else if (key == "relation") {
    if (v != "surface" && v != "lemma") throw ConfigError("unknown relation form '" + v + "' (expected surface|lemma)");
    s.relation = v;
  } else if (key == "include_graph") s.include_graph = detail::parse_bool(key, v);
  else if (key == "k_min") s.k_min = parse_unsigned<std::size_t>(key, v);
  else if (key == "k_max") s.k_max = parse_unsigned<std::size_t>(key, v);
  else if (key == "sizes") {
    s.sizes.clear();
    for (const auto& x : detail::split_list(v)) s.sizes.push_back(parse_unsigned<std::size_t>(key, x));
    if (s.sizes.empty()) throw ConfigError("sizes list is empty");
  } else if (key == "restarts") s.restarts = parse_unsigned<std::size_t>(key, v);
  else if (key == "n_cluster") s.n_cluster = parse_unsigned<std::size_t>(key, v);
  else if (key == "n_class") s.n_class = parse_unsigned<std::size_t>(key, v);
  else if (key == "trials") s.trials = parse_unsigned<std::size_t>(key, v);
  else if (key == "record_time") s.record_time = detail::parse_bool(key, v);
  else throw ConfigError("unknown setting '" + raw_key + "'");
}

inline void check_settings(const Settings& s) {
  if (s.k_min < 1 || s.k_max < s.k_min) throw ConfigError("need 1 <= k_min <= k_max");
  if (s.restarts < 1) throw ConfigError("restarts must be at least 1");
  if (s.trials < 1) throw ConfigError("trials must be at least 1");
  if (s.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (s.dim < 2) throw ConfigError("dim must be at least 2");
}

// Ordered (key, value) pairs from a config file.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string t = detail::trim_copy(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ": line " + std::to_string(lineno) + ": expected key = value");
    std::string value = detail::trim_copy(t.substr(eq + 1));
    // Trailing comment, unless inside quotes.
    if (!value.empty() && value[0] != '"' && value[0] != '\'') {
      const auto hash = value.find(" #");
      if (hash != std::string::npos) value = detail::trim_copy(value.substr(0, hash));
    }
    out.emplace_back(detail::trim_copy(t.substr(0, eq)), value);
  }
  return out;
}

inline void load_config_file(Settings& s, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  for (const auto& [k, v] : read_config_file(path)) apply_setting(s, k, v, base);
}

// Everything that can change results; workdir and thread count do not.
inline nlohmann::json settings_snapshot(const Settings& s) {
  std::vector<std::string> modes;
  for (auto m : s.modes) modes.emplace_back(mode_name(m));
  return {{"seed", s.seed},
          {"input", s.input.generic_string()},
          {"conllu", s.conllu.generic_string()},
          {"mode", modes},
          {"provider", s.providers},
          {"dim", s.dim},
          {"embed_url", s.embed_url},
          {"batch_size", s.batch_size},
          {"preset", s.preset},
          {"relation", s.relation},
          {"include_graph", s.include_graph},
          {"k_min", s.k_min},
          {"k_max", s.k_max},
          {"sizes", s.sizes},
          {"restarts", s.restarts},
          {"n_cluster", s.n_cluster},
          {"n_class", s.n_class},
          {"trials", s.trials}};
}

}  // namespace triplex
