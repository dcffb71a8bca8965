#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "triplex/embed.hpp"
#include "triplex/error.hpp"
#include "triplex/matrix.hpp"
#include "triplex/rng.hpp"

namespace triplex {

enum class Algorithm { KMeans, Gmm, Hdbscan };

inline constexpr std::string_view algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::KMeans: return "kmeans";
    case Algorithm::Gmm: return "gmm";
    case Algorithm::Hdbscan: return "hdbscan";
  }
  return "";
}

inline constexpr std::string_view algorithm_title(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::KMeans: return "KMeans";
    case Algorithm::Gmm: return "GMM";
    case Algorithm::Hdbscan: return "HDBSCAN";
  }
  return "";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::KMeans, Algorithm::Gmm, Algorithm::Hdbscan})
    if (s == algorithm_name(a)) return a;
  throw ConfigError("unknown clustering algorithm '" + std::string(s) + "'");
}

// Hard partition into k clusters. Every id in [0, k) occurs in `labels`.
struct PartitionResult {
  Algorithm algorithm = Algorithm::KMeans;
  std::size_t k = 0;
  std::vector<int> labels;
  double inertia = 0.0;         // kmeans
  double log_likelihood = 0.0;  // gmm
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  // Objective after every assignment (kmeans) or E-step (gmm) of the winning
  // restart.
  std::vector<double> history;
  std::vector<std::string> events;
};

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;  // stop when no centroid moves farther than this
  std::size_t n_init = 10;
};

struct KMeansResult : PartitionResult {
  Matrix centroids;
};

namespace detail {

// k-means++: first centre uniform, the rest by D^2 sampling.
inline Matrix kmeanspp_init(const Matrix& x, std::size_t k, SplitMix64& rng) {
  const std::size_t n = x.rows();
  Matrix c(k, x.cols());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy(x.row(first).begin(), x.row(first).end(), c.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), c.row(0));
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;  // guards the r ~ total rounding edge
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), c.row(j)));
  }
  return c;
}

// Nearest-centroid labels (ties -> lower index); returns the inertia.
inline double assign(const Matrix& x, const Matrix& c, std::vector<int>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t j = 0; j < c.rows(); ++j) {
      const double d = squared_distance(x.row(i), c.row(j));
      if (d < best) best = d, arg = static_cast<int>(j);
    }
    labels[i] = arg;
    inertia += best;
  }
  return inertia;
}

inline double inertia_of(const Matrix& x, const Matrix& c, const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    s += squared_distance(x.row(i), c.row(static_cast<std::size_t>(labels[i])));
  return s;
}

inline void recompute_mean(const Matrix& x, const std::vector<int>& labels, int cluster,
                           std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (labels[i] != cluster) continue;
    const auto r = x.row(i);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += r[d];
    ++count;
  }
  if (count > 0)
    for (double& v : out) v /= static_cast<double>(count);
}

// Empty cluster j takes the point farthest from the centroid of the largest
// cluster; that point becomes j's centroid. Returns the number of repairs.
inline std::size_t repair_empty(const Matrix& x, Matrix& c, std::vector<int>& labels,
                                std::vector<std::string>* events) {
  const std::size_t k = c.rows();
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  std::size_t repairs = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] > 0) continue;
    std::size_t largest = 0;
    for (std::size_t m = 1; m < k; ++m)
      if (counts[m] > counts[largest]) largest = m;
    if (counts[largest] < 2) break;  // cannot happen while k <= n
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (labels[i] != static_cast<int>(largest)) continue;
      const double d = squared_distance(x.row(i), c.row(largest));
      if (d > far_d) far_d = d, far = i;
    }
    labels[far] = static_cast<int>(j);
    --counts[largest];
    ++counts[j];
    std::copy(x.row(far).begin(), x.row(far).end(), c.row(j).begin());
    recompute_mean(x, labels, static_cast<int>(largest), c.row(largest));
    ++repairs;
    if (events)
      events->push_back("empty cluster " + std::to_string(j) + " re-seeded from point " +
                        std::to_string(far));
  }
  return repairs;
}

inline KMeansResult kmeans_single(const Matrix& x, std::size_t k, std::uint64_t seed,
                                  const KMeansOptions& opts) {
  SplitMix64 rng(seed);
  KMeansResult r;
  r.algorithm = Algorithm::KMeans;
  r.k = k;
  r.seed = seed;
  r.centroids = kmeanspp_init(x, k, rng);
  r.labels.assign(x.rows(), 0);
  std::vector<int> previous;
  Matrix next(k, x.cols());

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    r.history.push_back(assign(x, r.centroids, r.labels));
    if (it > 0 && r.labels == previous) break;
    previous = r.labels;

    for (std::size_t j = 0; j < k; ++j) recompute_mean(x, r.labels, static_cast<int>(j), next.row(j));
    // Clusters that lost every point keep a placeholder until repaired.
    std::vector<std::size_t> counts(k, 0);
    for (int l : r.labels) ++counts[static_cast<std::size_t>(l)];
    double shift = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (counts[j] > 0) shift = std::max(shift, squared_distance(next.row(j), r.centroids.row(j)));
    std::swap(r.centroids, next);
    if (repair_empty(x, r.centroids, r.labels, &r.events) > 0) shift = std::numeric_limits<double>::infinity();
    ++r.iterations;
    if (std::sqrt(shift) < opts.tol) break;
  }
  assign(x, r.centroids, r.labels);
  repair_empty(x, r.centroids, r.labels, &r.events);
  r.inertia = inertia_of(x, r.centroids, r.labels);
  r.history.push_back(r.inertia);
  return r;
}

}  // namespace detail

// k-means++ seeding plus Lloyd iterations, best of n_init restarts by
// inertia (ties keep the earlier restart).
inline KMeansResult kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed,
                               const KMeansOptions& opts = {}) {
  if (k < 1) throw ContractError("kmeans needs k >= 1");
  if (k > x.rows())
    throw ContractError("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(x.rows()) +
                        " rows");
  const std::size_t restarts = std::max<std::size_t>(1, opts.n_init);
  KMeansResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = detail::kmeans_single(x, k, restarts == 1 ? seed : derive_seed(seed, r), opts);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  best.seed = seed;
  return best;
}

inline KMeansResult kmeans_fit(const EmbeddingMatrix& x, std::size_t k, std::uint64_t seed,
                               const KMeansOptions& opts = {}) {
  return kmeans_fit(x.vectors, k, seed, opts);
}

}  // namespace triplex
