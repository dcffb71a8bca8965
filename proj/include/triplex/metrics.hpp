#pragma once

// External and internal clustering metrics (ARI, NMI, silhouette) and the
// multiclass classification suite (accuracy, P/R/F1 macro and weighted,
// Cohen's kappa, MCC, top-k accuracy, one-vs-rest ROC-AUC).
//
// Conventions that change results on degenerate inputs:
//   * NMI is normalized by the arithmetic mean of the two entropies.
//   * ROC-AUC ranks ties by midrank; top-k prefers the lower class index.
//   * Zero denominators: per-class P/R/F1 -> 0, MCC -> 0, kappa with
//     chance agreement 1 -> 1 if observed agreement is 1, else 0.
//   * Macro averages run over the classes that occur in truth or prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ranges>
#include <type_traits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triplex/error.hpp"
#include "triplex/matrix.hpp"

namespace triplex {

template <class R>
concept LabelRange = std::ranges::random_access_range<R> && std::ranges::sized_range<R>;

// Dense ids 0..k-1 in order of first appearance.
template <LabelRange R>
std::vector<int> encode_labels(const R& labels) {
  using L = std::ranges::range_value_t<R>;
  std::vector<int> out;
  out.reserve(std::ranges::size(labels));
  if constexpr (std::is_integral_v<L>) {
    // Compact integer ranges use a lookup table instead of hashing.
    if (!std::ranges::empty(labels)) {
      const auto [lo, hi] = std::ranges::minmax(labels);
      const auto span = static_cast<long double>(hi) - static_cast<long double>(lo);
      if (span < 4.0L * static_cast<long double>(std::ranges::size(labels)) + 64) {
        std::vector<int> table(static_cast<std::size_t>(span) + 1, -1);
        int next = 0;
        for (const auto& l : labels) {
          int& id = table[static_cast<std::size_t>(l - lo)];
          if (id < 0) id = next++;
          out.push_back(id);
        }
        return out;
      }
    }
  }
  std::unordered_map<L, int> ids;
  for (const auto& l : labels) {
    const auto [it, inserted] = ids.try_emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

struct Contingency {
  std::size_t rows = 0;  // distinct truth labels
  std::size_t cols = 0;  // distinct predicted labels
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t n = 0;

  std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }
};

template <LabelRange A, LabelRange B>
Contingency contingency(const A& truth, const B& pred) {
  if (std::ranges::size(truth) != std::ranges::size(pred))
    throw ContractError("label arrays differ in length: " + std::to_string(std::ranges::size(truth)) +
                        " vs " + std::to_string(std::ranges::size(pred)));
  const auto t = encode_labels(truth);
  const auto p = encode_labels(pred);
  Contingency c;
  c.rows = t.empty() ? 0 : static_cast<std::size_t>(*std::max_element(t.begin(), t.end())) + 1;
  c.cols = p.empty() ? 0 : static_cast<std::size_t>(*std::max_element(p.begin(), p.end())) + 1;
  c.counts.assign(c.rows * c.cols, 0);
  c.row_sums.assign(c.rows, 0);
  c.col_sums.assign(c.cols, 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++c.counts[static_cast<std::size_t>(t[i]) * c.cols + static_cast<std::size_t>(p[i])];
    ++c.row_sums[static_cast<std::size_t>(t[i])];
    ++c.col_sums[static_cast<std::size_t>(p[i])];
  }
  c.n = static_cast<std::int64_t>(t.size());
  return c;
}

namespace detail {
inline long double pairs(std::int64_t x) { return static_cast<long double>(x) * (x - 1) / 2; }
}  // namespace detail

// Adjusted Rand index (Hubert & Arabie) from the contingency table.
template <LabelRange A, LabelRange B>
double ari(const A& truth, const B& pred) {
  if (std::ranges::size(truth) < 2) throw ContractError("ARI needs at least 2 samples");
  const Contingency c = contingency(truth, pred);
  long double index = 0, sum_rows = 0, sum_cols = 0;
  for (auto x : c.counts) index += detail::pairs(x);
  for (auto x : c.row_sums) sum_rows += detail::pairs(x);
  for (auto x : c.col_sums) sum_cols += detail::pairs(x);
  const long double total = detail::pairs(c.n);
  // (index - E) / (max - E) scaled by 2 * total to stay in integers as long as possible.
  const long double num = 2 * total * index - 2 * sum_rows * sum_cols;
  const long double den = total * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols;
  if (den == 0) return 1.0;  // both partitions trivial and identical
  return static_cast<double>(num / den);
}

// Normalized mutual information, arithmetic-mean normalization.
template <LabelRange A, LabelRange B>
double nmi(const A& truth, const B& pred) {
  if (std::ranges::size(truth) < 2) throw ContractError("NMI needs at least 2 samples");
  const Contingency c = contingency(truth, pred);
  const double n = static_cast<double>(c.n);
  const auto entropy = [n](const std::vector<std::int64_t>& sums) {
    double h = 0.0;
    for (auto s : sums)
      if (s > 0) {
        const double p = static_cast<double>(s) / n;
        h -= p * std::log(p);
      }
    return h;
  };
  const double ht = entropy(c.row_sums);
  const double hp = entropy(c.col_sums);
  if (ht == 0.0 && hp == 0.0) return 1.0;
  if (ht == 0.0 || hp == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      const auto nij = c.at(i, j);
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / n;
      mi += pij * (std::log(static_cast<double>(nij) * n) -
                   std::log(static_cast<double>(c.row_sums[i]) * static_cast<double>(c.col_sums[j])));
    }
  const double v = mi / (0.5 * (ht + hp));
  return std::clamp(v, 0.0, 1.0);
}

// Mean silhouette coefficient with Euclidean distances. Points alone in their
// cluster score 0. Any integer labels work, including -1 for HDBSCAN noise.
inline double silhouette(const PairwiseDistances& dist, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (dist.size() != n) throw ContractError("silhouette: labels and distances disagree");
  const auto ids = encode_labels(labels);
  const std::size_t k = ids.empty() ? 0 : static_cast<std::size_t>(*std::max_element(ids.begin(), ids.end())) + 1;
  if (k < 2) throw ContractError("silhouette is undefined for fewer than 2 clusters");
  std::vector<std::size_t> sizes(k, 0);
  for (int id : ids) ++sizes[static_cast<std::size_t>(id)];

  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(ids[i]);
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[static_cast<std::size_t>(ids[j])] += dist(i, j);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

inline double silhouette(const Matrix& x, std::span<const int> labels) {
  if (x.rows() != labels.size()) throw ContractError("silhouette: labels and rows disagree");
  return silhouette(PairwiseDistances(x), labels);
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::int64_t> counts;

  ConfusionMatrix() = default;
  ConfusionMatrix(std::span<const int> truth, std::span<const int> pred, std::size_t n_classes)
      : classes(n_classes), counts(n_classes * n_classes, 0) {
    if (truth.size() != pred.size()) throw ContractError("truth and prediction lengths differ");
    for (std::size_t i = 0; i < truth.size(); ++i) {
      check(truth[i], "truth");
      check(pred[i], "prediction");
      ++counts[static_cast<std::size_t>(truth[i]) * classes + static_cast<std::size_t>(pred[i])];
    }
  }

  std::int64_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }
  std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }
  std::int64_t row_sum(std::size_t t) const {
    std::int64_t s = 0;
    for (std::size_t p = 0; p < classes; ++p) s += at(t, p);
    return s;
  }
  std::int64_t col_sum(std::size_t p) const {
    std::int64_t s = 0;
    for (std::size_t t = 0; t < classes; ++t) s += at(t, p);
    return s;
  }

 private:
  void check(int label, const char* what) const {
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw ContractError(std::string(what) + " label " + std::to_string(label) +
                          " outside class set of size " + std::to_string(classes));
  }
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;    // true count
  std::int64_t predicted = 0;  // predicted count
};

inline std::vector<ClassScores> per_class_scores(const ConfusionMatrix& cm) {
  std::vector<ClassScores> out(cm.classes);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    auto& s = out[c];
    const auto tp = cm.at(c, c);
    s.support = cm.row_sum(c);
    s.predicted = cm.col_sum(c);
    s.precision = s.predicted > 0 ? static_cast<double>(tp) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support > 0 ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return out;
}

inline double macro_f1(std::span<const int> truth, std::span<const int> pred, std::size_t n_classes) {
  const ConfusionMatrix cm(truth, pred, n_classes);
  const auto scores = per_class_scores(cm);
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& s : scores)
    if (s.support > 0 || s.predicted > 0) sum += s.f1, ++used;
  return used ? sum / static_cast<double>(used) : 0.0;
}

inline double cohen_kappa(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n == 0) return 0.0;
  double po = 0.0, pe = 0.0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    po += static_cast<double>(cm.at(c, c));
    pe += static_cast<double>(cm.row_sum(c)) * static_cast<double>(cm.col_sum(c));
  }
  po /= n;
  pe /= n * n;
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

// Multiclass Matthews correlation (Gorodkin's R_K).
inline double matthews_corrcoef(const ConfusionMatrix& cm) {
  const double s = static_cast<double>(cm.total());
  double correct = 0.0, pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    const double t = static_cast<double>(cm.row_sum(c));
    const double p = static_cast<double>(cm.col_sum(c));
    correct += static_cast<double>(cm.at(c, c));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const double den = std::sqrt(s * s - pp) * std::sqrt(s * s - tt);
  if (den == 0.0) return 0.0;
  return (correct * s - pt) / den;
}

// Fraction of rows whose true class is among the k highest scores; equal
// scores rank the lower class index first.
inline double top_k_accuracy(std::span<const int> truth, const Matrix& scores, std::size_t k) {
  if (scores.rows() != truth.size()) throw ContractError("scores rows differ from sample count");
  if (k == 0 || k > scores.cols()) throw ContractError("top-k needs 1 <= k <= classes");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    if (t >= scores.cols()) throw ContractError("true label outside score columns");
    const auto row = scores.row(i);
    std::size_t rank = 0;
    for (std::size_t c = 0; c < row.size(); ++c)
      if (row[c] > row[t] || (row[c] == row[t] && c < t)) ++rank;
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// One-vs-rest AUC for class `c` via the Mann-Whitney statistic with midranks.
// NaN when the class has no positives or no negatives.
inline double roc_auc_one_vs_rest(std::span<const int> truth, const Matrix& scores, std::size_t c) {
  const std::size_t n = truth.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores(a, c) < scores(b, c); });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores(order[j], c) == scores(order[i], c)) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t r = i; r < j; ++r)
      if (static_cast<std::size_t>(truth[order[r]]) == c) rank_sum += midrank, ++pos;
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(neg));
}

// Macro average over classes that occur in truth (and are not the only class).
inline double roc_auc_macro(std::span<const int> truth, const Matrix& scores) {
  if (scores.rows() != truth.size()) throw ContractError("scores rows differ from sample count");
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    const double auc = roc_auc_one_vs_rest(truth, scores, c);
    if (!std::isnan(auc)) sum += auc, ++used;
  }
  return used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
}

struct MetricReport {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  double precision_macro = 0.0;
  double precision_weighted = 0.0;
  double recall_macro = 0.0;
  double recall_weighted = 0.0;
  double kappa = 0.0;
  double mcc = 0.0;
  double top3_accuracy = 0.0;
  double roc_auc_macro = 0.0;
  std::vector<int> zero_division_classes;  // classes with no predicted positives

  // Column order of the classification table.
  std::vector<double> values() const {
    return {accuracy,           f1_macro,     f1_weighted, precision_macro,
            precision_weighted, recall_macro, recall_weighted, kappa,
            mcc,                top3_accuracy, roc_auc_macro};
  }
  static const std::vector<std::string>& columns() {
    static const std::vector<std::string> cols = {"acc", "f1_m", "f1_w", "p_m",      "p_w", "r_m",
                                                  "r_w", "kappa", "mcc", "top3_acc", "roc"};
    return cols;
  }
};

// `scores` is n x C; class ids are 0..C-1. Top-k uses k = min(3, C).
inline MetricReport classification_report(std::span<const int> truth, std::span<const int> pred,
                                           const Matrix& scores) {
  if (scores.rows() != truth.size())
    throw ContractError("scores have " + std::to_string(scores.rows()) + " rows for " +
                        std::to_string(truth.size()) + " samples");
  const std::size_t n_classes = scores.cols();
  const ConfusionMatrix cm(truth, pred, n_classes);
  const auto per_class = per_class_scores(cm);

  MetricReport r;
  const double n = static_cast<double>(truth.size());
  if (truth.empty()) throw ContractError("classification_report on empty input");
  double correct = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) correct += static_cast<double>(cm.at(c, c));
  r.accuracy = correct / n;

  std::size_t used = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& s = per_class[c];
    if (s.support == 0 && s.predicted == 0) continue;
    ++used;
    if (s.predicted == 0) r.zero_division_classes.push_back(static_cast<int>(c));
    r.precision_macro += s.precision;
    r.recall_macro += s.recall;
    r.f1_macro += s.f1;
    const double w = static_cast<double>(s.support) / n;
    r.precision_weighted += w * s.precision;
    r.recall_weighted += w * s.recall;
    r.f1_weighted += w * s.f1;
  }
  if (used > 0) {
    r.precision_macro /= static_cast<double>(used);
    r.recall_macro /= static_cast<double>(used);
    r.f1_macro /= static_cast<double>(used);
  }
  r.kappa = cohen_kappa(cm);
  r.mcc = matthews_corrcoef(cm);
  r.top3_accuracy = top_k_accuracy(truth, scores, std::min<std::size_t>(3, n_classes));
  r.roc_auc_macro = roc_auc_macro(truth, scores);
  return r;
}

}  // namespace triplex
