#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "triplex/error.hpp"
#include "triplex/kmeans.hpp"
#include "triplex/metrics.hpp"
#include "triplex/repr.hpp"
#include "triplex/sweep.hpp"

namespace triplex {

// Decimal rendering rounded half-to-even on the exact binary value, so
// 0.4703 (stored as 0.47029999...) prints as "0.4703" and 0.0625 at three
// places prints as "0.062". Non-finite values print as "n/a".
inline std::string round_half_even(double v, int places) {
  if (!std::isfinite(v)) return "n/a";
  // Every finite double has at most 1074 fractional digits.
  std::string buf(1400, '\0');
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), std::fabs(v), std::chars_format::fixed, 1100);
  buf.resize(static_cast<std::size_t>(res.ptr - buf.data()));
  const auto dot = buf.find('.');
  std::string digits = buf.substr(0, dot) + buf.substr(dot + 1, static_cast<std::size_t>(places));
  const std::string rest = buf.substr(dot + 1 + static_cast<std::size_t>(places));
  bool up = false;
  if (!rest.empty() && rest[0] > '5') {
    up = true;
  } else if (!rest.empty() && rest[0] == '5') {
    const bool tail = rest.find_first_not_of('0', 1) != std::string::npos;
    up = tail || ((digits.back() - '0') % 2 == 1);
  }
  if (up) {
    std::size_t i = digits.size();
    while (i > 0) {
      --i;
      if (digits[i] == '9') {
        digits[i] = '0';
      } else {
        ++digits[i];
        break;
      }
      if (i == 0) digits.insert(digits.begin(), '1');
    }
  }
  const std::size_t int_len = digits.size() - static_cast<std::size_t>(places);
  std::string out = digits.substr(0, int_len);
  if (places > 0) out += "." + digits.substr(int_len);
  const bool zero = out.find_first_not_of("0.") == std::string::npos;
  return (v < 0 && !zero ? "-" : "") + out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& out, const Table& t) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

inline void write_markdown(std::ostream& out, const Table& t) {
  auto line = [&](const std::vector<std::string>& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
  };
  line(t.header);
  out << '|';
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i == 0 ? " :--- |" : " ---: |");
  out << '\n';
  for (const auto& r : t.rows) line(r);
}

// Minimal RFC 4180 reader, enough to read back the emitted tables.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n') {
      row.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Cells of a Markdown table, header first, separator row dropped.
inline std::vector<std::vector<std::string>> parse_markdown_table(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() != '|') continue;
    std::vector<std::string> cells;
    std::size_t start = 1;
    for (std::size_t bar; (bar = line.find('|', start)) != std::string::npos; start = bar + 1) {
      std::string c = line.substr(start, bar - start);
      const auto b = c.find_first_not_of(' '), e = c.find_last_not_of(' ');
      cells.push_back(b == std::string::npos ? "" : c.substr(b, e - b + 1));
    }
    const bool separator = !first && !cells.empty() && cells[0].find("---") != std::string::npos;
    first = false;
    if (!separator) rows.push_back(std::move(cells));
  }
  return rows;
}

// ---- clustering table -------------------------------------------------------

struct ClusteringOutcome {
  ReprMode mode = ReprMode::Abstract;
  std::string provider;
  Algorithm algorithm = Algorithm::KMeans;
  std::size_t k = 0;  // clusters found
  double ari = 0.0, nmi = 0.0, silhouette = 0.0;
};

inline const std::vector<std::string>& clustering_columns() {
  static const std::vector<std::string> cols = {"Representation", "Best Model (Algorithm)", "Clusters (K)",
                                                "ARI",            "NMI",                    "Silh."};
  return cols;
}

// One row per mode: the outcome with the highest ARI (first listed wins
// ties). KMeans and GMM share the cell when both reach the same k and their
// ARI differs by at most 0.001.
inline Table clustering_table(const std::vector<ClusteringOutcome>& outcomes) {
  Table t{clustering_columns(), {}};
  for (ReprMode mode : kAllModes) {
    const ClusteringOutcome* best = nullptr;
    for (const auto& o : outcomes)
      if (o.mode == mode && std::isfinite(o.ari) && (!best || o.ari > best->ari)) best = &o;
    if (!best) {
      t.rows.push_back({std::string(mode_title(mode)), "n/a", "n/a", "n/a", "n/a", "n/a"});
      continue;
    }
    std::string algo(algorithm_title(best->algorithm));
    if (best->algorithm != Algorithm::Hdbscan) {
      const Algorithm other = best->algorithm == Algorithm::KMeans ? Algorithm::Gmm : Algorithm::KMeans;
      for (const auto& o : outcomes)
        if (o.mode == mode && o.provider == best->provider && o.algorithm == other && o.k == best->k &&
            std::fabs(o.ari - best->ari) <= 0.001)
          algo = "KMeans/GMM";
    }
    t.rows.push_back({std::string(mode_title(mode)), best->provider + " (" + algo + ")", std::to_string(best->k),
                      round_half_even(best->ari, 4), round_half_even(best->nmi, 4),
                      round_half_even(best->silhouette, 4)});
  }
  return t;
}

// ---- classification table ---------------------------------------------------

struct ClassificationOutcome {
  ReprMode cluster_mode = ReprMode::Abstract;
  ReprMode classify_mode = ReprMode::Abstract;
  std::string provider;
  MetricReport metrics;
};

inline std::vector<std::string> classification_columns() {
  std::vector<std::string> cols = {"Using_mode", "model"};
  for (const auto& c : MetricReport::columns()) cols.push_back(c);
  return cols;
}

inline std::string mode_pair(ReprMode cluster_mode, ReprMode classify_mode) {
  return std::string(mode_abbrev(cluster_mode)) + "/" + std::string(mode_abbrev(classify_mode));
}

// One row per (cluster mode, classify mode) pair that has outcomes, in the
// fixed mode order; the model shown is the provider with the best macro-F1
// (accuracy breaks ties, then input order).
inline Table classification_table(const std::vector<ClassificationOutcome>& outcomes) {
  Table t{classification_columns(), {}};
  for (ReprMode cm : kAllModes)
    for (ReprMode km : kAllModes) {
      const ClassificationOutcome* best = nullptr;
      for (const auto& o : outcomes) {
        if (o.cluster_mode != cm || o.classify_mode != km) continue;
        if (!best || o.metrics.f1_macro > best->metrics.f1_macro ||
            (o.metrics.f1_macro == best->metrics.f1_macro && o.metrics.accuracy > best->metrics.accuracy))
          best = &o;
      }
      if (!best) continue;
      std::vector<std::string> row = {mode_pair(cm, km), best->provider};
      for (double v : best->metrics.values()) row.push_back(round_half_even(v, 3));
      t.rows.push_back(std::move(row));
    }
  return t;
}

// ---- composition ------------------------------------------------------------

inline void write_composition_csv(std::ostream& out, const std::string& provider, ReprMode mode,
                                  Algorithm algorithm, const CompositionReport& rep, bool header = true) {
  if (header) out << "provider,mode,algorithm,cluster,total,dominant,dominant_count,purity,counts\n";
  for (const auto& c : rep.clusters) {
    std::string counts;
    for (const auto& [label, n] : c.counts) counts += (counts.empty() ? "" : ";") + label + ":" + std::to_string(n);
    out << csv_escape(provider) << ',' << mode_name(mode) << ',' << algorithm_name(algorithm) << ',' << c.cluster
        << ',' << c.total << ',' << csv_escape(c.dominant) << ',' << c.dominant_count << ','
        << round_half_even(c.purity, 4) << ',' << csv_escape(counts) << '\n';
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

inline void write_table_files(const std::filesystem::path& dir, const std::string& stem, const Table& t) {
  std::ostringstream csv, md;
  write_csv(csv, t);
  write_markdown(md, t);
  write_text_file(dir / (stem + ".csv"), csv.str());
  write_text_file(dir / (stem + ".md"), md.str());
}

}  // namespace triplex
