#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "triplex/gmm.hpp"
#include "triplex/hdbscan.hpp"
#include "triplex/kmeans.hpp"
#include "triplex/metrics.hpp"
#include "triplex/parallel.hpp"

namespace triplex {

inline double selection_score(double ari_v, double nmi_v) noexcept { return 0.5 * ari_v + 0.5 * nmi_v; }

inline double composite_score(double nmi_v, double ari_v, double noise_fraction) noexcept {
  return nmi_v + 0.5 * ari_v - 0.5 * noise_fraction;
}

struct SweepRow {
  Algorithm algorithm = Algorithm::KMeans;
  std::size_t param = 0;  // k, or min_cluster_size for hdbscan
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double ari = 0.0, nmi = 0.0, silhouette = 0.0, noise_fraction = 0.0;
  double score = 0.0;  // selection score, or composite for hdbscan
  std::size_t n_clusters = 0;
};

struct SweepOutcome {
  Algorithm algorithm = Algorithm::KMeans;
  std::vector<SweepRow> table;
  std::size_t best_index = 0;
  std::vector<int> best_labels;

  const SweepRow& best() const { return table.at(best_index); }
  double best_score() const { return best().score; }
};

struct SweepOptions {
  std::size_t threads = 1;
  KMeansOptions kmeans;
  GmmOptions gmm;
  std::size_t min_samples = 0;  // hdbscan; 0 = min_cluster_size
};

inline constexpr std::size_t kDefaultKMin = 3;
inline constexpr std::size_t kDefaultKMax = 12;
inline const std::vector<std::size_t> kDefaultSizes{5, 10, 15, 25, 50, 100};

namespace detail {

struct SweepFit {
  SweepRow row;
  std::vector<int> labels;
};

inline void score_labels(SweepRow& row, const std::vector<int>& truth, const std::vector<int>& labels,
                         const PairwiseDistances& dist) {
  std::size_t noise = 0;
  for (int l : labels) noise += l < 0 ? 1 : 0;
  row.noise_fraction = labels.empty() ? 0.0 : static_cast<double>(noise) / static_cast<double>(labels.size());
  if (row.n_clusters == 0) {
    // Nothing but noise: external scores are defined as 0.
    row.ari = row.nmi = row.silhouette = 0.0;
    return;
  }
  // Noise points (-1) act as one extra pseudo-cluster.
  row.ari = ari(truth, labels);
  row.nmi = nmi(truth, labels);
  row.silhouette = silhouette(dist, labels);
}

inline SweepOutcome pick_best(Algorithm algorithm, std::vector<SweepFit> fits) {
  SweepOutcome out;
  out.algorithm = algorithm;
  bool found = false;
  std::size_t best = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& r = fits[i].row;
    if (r.failed) continue;
    const auto& b = fits[best].row;
    if (!found || r.score > b.score || (r.score == b.score && r.param < b.param)) best = i, found = true;
  }
  if (!found) {
    std::string why = fits.empty() ? "empty grid" : fits.front().row.error;
    throw ContractError(std::string(algorithm_name(algorithm)) + " sweep: every configuration failed (" + why + ")");
  }
  out.best_index = best;
  out.best_labels = std::move(fits[best].labels);
  out.table.reserve(fits.size());
  for (auto& f : fits) out.table.push_back(std::move(f.row));
  return out;
}

}  // namespace detail

// Fits every k in [k_min, k_max] and keeps the one with the highest
// 0.5 * ARI + 0.5 * NMI (smallest k on ties). Config i runs with seed ^ i.
template <LabelRange R>
SweepOutcome partition_sweep(const Matrix& x, const R& true_labels, Algorithm algorithm,
                             std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                             const SweepOptions& opts = {}, const PairwiseDistances* dist = nullptr) {
  if (algorithm == Algorithm::Hdbscan) throw ConfigError("partition_sweep takes kmeans or gmm");
  if (std::ranges::size(true_labels) != x.rows())
    throw ContractError("true labels (" + std::to_string(std::ranges::size(true_labels)) +
                        ") not aligned with " + std::to_string(x.rows()) + " rows");
  if (k_min < 1 || k_max < k_min) throw ConfigError("invalid k range");
  const auto truth = encode_labels(true_labels);
  PairwiseDistances local;
  if (!dist) local = PairwiseDistances(x), dist = &local;

  auto fits = parallel_map(k_max - k_min + 1, opts.threads, [&](std::size_t i) {
    detail::SweepFit f;
    f.row.algorithm = algorithm;
    f.row.param = k_min + i;
    f.row.seed = seed ^ static_cast<std::uint64_t>(i);
    try {
      if (algorithm == Algorithm::KMeans)
        f.labels = kmeans_fit(x, f.row.param, f.row.seed, opts.kmeans).labels;
      else
        f.labels = gmm_fit(x, f.row.param, f.row.seed, opts.gmm).labels;
      f.row.n_clusters = static_cast<std::size_t>(*std::max_element(f.labels.begin(), f.labels.end())) + 1;
      detail::score_labels(f.row, truth, f.labels, *dist);
      f.row.score = selection_score(f.row.ari, f.row.nmi);
    } catch (const Error& e) {
      f.row.failed = true;
      f.row.error = e.what();
      f.labels.clear();
    }
    return f;
  });
  return detail::pick_best(algorithm, std::move(fits));
}

// HDBSCAN over min_cluster_size values, best by
// NMI + 0.5 * ARI - 0.5 * noise_fraction (smallest size on ties).
template <LabelRange R>
SweepOutcome density_sweep(const Matrix& x, const R& true_labels, const std::vector<std::size_t>& sizes,
                           const SweepOptions& opts = {}, const PairwiseDistances* dist = nullptr) {
  if (sizes.empty()) throw ConfigError("density_sweep needs at least one min_cluster_size");
  if (std::ranges::size(true_labels) != x.rows())
    throw ContractError("true labels (" + std::to_string(std::ranges::size(true_labels)) +
                        ") not aligned with " + std::to_string(x.rows()) + " rows");
  const auto truth = encode_labels(true_labels);
  PairwiseDistances local;
  if (!dist) local = PairwiseDistances(x), dist = &local;

  auto fits = parallel_map(sizes.size(), opts.threads, [&](std::size_t i) {
    detail::SweepFit f;
    f.row.algorithm = Algorithm::Hdbscan;
    f.row.param = sizes[i];
    try {
      auto d = hdbscan_fit(*dist, sizes[i], opts.min_samples);
      f.row.n_clusters = d.n_clusters;
      f.labels = std::move(d.labels);
      detail::score_labels(f.row, truth, f.labels, *dist);
      f.row.score = composite_score(f.row.nmi, f.row.ari, f.row.noise_fraction);
    } catch (const Error& e) {
      f.row.failed = true;
      f.row.error = e.what();
      f.labels.clear();
    }
    return f;
  });
  return detail::pick_best(Algorithm::Hdbscan, std::move(fits));
}

inline std::string format_metric(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Columns: algorithm,param,ARI,NMI,silhouette,noise_fraction,selection_score,seed.
// Failed rows carry "failed" in every metric column.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool header = true) {
  if (header) out << "algorithm,param,ARI,NMI,silhouette,noise_fraction,selection_score,seed\n";
  for (const auto& r : rows) {
    out << algorithm_name(r.algorithm) << ',' << r.param << ',';
    if (r.failed) {
      out << "failed,failed,failed,failed,failed";
    } else {
      out << format_metric(r.ari) << ',' << format_metric(r.nmi) << ',' << format_metric(r.silhouette) << ','
          << format_metric(r.noise_fraction) << ',' << format_metric(r.score);
    }
    out << ',' << r.seed << '\n';
  }
}

struct ClusterComposition {
  int cluster = 0;
  std::size_t total = 0;
  std::map<std::string, std::size_t> counts;
  std::string dominant;
  std::size_t dominant_count = 0;
  double purity = 0.0;
};

struct CompositionReport {
  std::vector<ClusterComposition> clusters;  // ascending id; noise (-1) first
  double overall_purity = 0.0;
};

// Per-cluster label histogram. Dominant-label ties go to the smallest label.
template <LabelRange R>
CompositionReport cluster_composition(std::span<const int> labels, const R& true_labels) {
  if (labels.size() != std::ranges::size(true_labels))
    throw ContractError("cluster labels and true labels differ in length");
  CompositionReport rep;
  if (labels.empty()) return rep;
  std::map<int, ClusterComposition> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& c = by_id[labels[i]];
    c.cluster = labels[i];
    ++c.total;
    ++c.counts[std::string(true_labels[i])];
  }
  std::size_t dominant_sum = 0;
  for (auto& [id, c] : by_id) {
    for (const auto& [label, count] : c.counts)
      if (count > c.dominant_count) c.dominant = label, c.dominant_count = count;
    c.purity = static_cast<double>(c.dominant_count) / static_cast<double>(c.total);
    dominant_sum += c.dominant_count;
    rep.clusters.push_back(std::move(c));
  }
  rep.overall_purity = static_cast<double>(dominant_sum) / static_cast<double>(labels.size());
  return rep;
}

}  // namespace triplex
