#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "triplex/embed.hpp"
#include "triplex/error.hpp"
#include "triplex/matrix.hpp"

namespace triplex {

struct DensityResult {
  std::vector<int> labels;  // -1 = noise
  std::size_t n_clusters = 0;
  double noise_fraction = 0.0;
  std::size_t min_cluster_size = 0;
  std::size_t min_samples = 0;
};

// One edge of the condensed tree: `child` is either a cluster id (>= n) or a
// point index (< n) leaving `parent` at `lambda`.
struct CondensedEdge {
  std::size_t parent = 0;
  std::size_t child = 0;
  double lambda = 0.0;
  std::size_t size = 0;
};

namespace detail {

struct MstEdge {
  std::size_t a = 0, b = 0;
  double w = 0.0;
};

// Prim's algorithm on the dense mutual-reachability graph.
inline std::vector<MstEdge> mutual_reachability_mst(const PairwiseDistances& dist,
                                                    const std::vector<double>& core) {
  const std::size_t n = dist.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  std::vector<bool> in(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::size_t cur = 0;
  in[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = n;
    double next_w = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (in[j]) continue;
      const double mr = std::max({dist(cur, j), core[cur], core[j]});
      if (mr < best[j]) best[j] = mr, from[j] = cur;
      if (best[j] < next_w) next_w = best[j], next = j;
    }
    in[next] = true;
    edges.push_back({from[next], next, next_w});
    cur = next;
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const MstEdge& x, const MstEdge& y) { return x.w < y.w; });
  return edges;
}

struct Dendrogram {
  // Internal node n + i merges left[i] and right[i] at height[i].
  std::vector<std::size_t> left, right, size;
  std::vector<double> height;
};

inline Dendrogram single_linkage(std::size_t n, const std::vector<MstEdge>& mst) {
  Dendrogram d;
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<std::size_t> sz(2 * n - 1, 1);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t next = n;
  for (const auto& e : mst) {
    const std::size_t ra = find(e.a), rb = find(e.b);
    d.left.push_back(ra);
    d.right.push_back(rb);
    d.height.push_back(e.w);
    sz[next] = sz[ra] + sz[rb];
    d.size.push_back(sz[next]);
    parent[ra] = parent[rb] = next;
    ++next;
  }
  return d;
}

}  // namespace detail

// Condensed cluster tree. Cluster ids start at n; n itself is the root.
struct CondensedTree {
  std::size_t n_points = 0;
  std::size_t n_clusters = 0;  // including the root
  std::vector<CondensedEdge> edges;
};

inline CondensedTree condense(const detail::Dendrogram& d, std::size_t n, std::size_t min_cluster_size,
                              double lambda_cap) {
  CondensedTree t;
  t.n_points = n;
  t.n_clusters = 1;
  if (n < 2) return t;
  const std::size_t root = 2 * n - 2;
  auto node_size = [&](std::size_t v) { return v < n ? std::size_t{1} : d.size[v - n]; };
  auto lambda_of = [&](double h) { return h > 0.0 ? std::min(1.0 / h, lambda_cap) : lambda_cap; };
  auto leaves = [&](std::size_t v, std::vector<std::size_t>& out) {
    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (u < n) {
        out.push_back(u);
      } else {
        stack.push_back(d.right[u - n]);
        stack.push_back(d.left[u - n]);
      }
    }
  };

  // (dendrogram node, cluster it belongs to), processed top-down.
  std::vector<std::pair<std::size_t, std::size_t>> work{{root, n}};
  std::vector<std::size_t> pts;
  while (!work.empty()) {
    const auto [v, cluster] = work.back();
    work.pop_back();
    const std::size_t l = d.left[v - n], r = d.right[v - n];
    const double lambda = lambda_of(d.height[v - n]);
    const std::size_t ls = node_size(l), rs = node_size(r);
    const bool big_l = ls >= min_cluster_size, big_r = rs >= min_cluster_size;
    if (big_l && big_r) {
      const std::size_t cl = n + t.n_clusters++;
      const std::size_t cr = n + t.n_clusters++;
      t.edges.push_back({cluster, cl, lambda, ls});
      t.edges.push_back({cluster, cr, lambda, rs});
      work.push_back({r, cr});
      work.push_back({l, cl});
      continue;
    }
    for (const auto& [child, big] : {std::pair{l, big_l}, std::pair{r, big_r}}) {
      if (big) {
        work.push_back({child, cluster});
      } else {
        pts.clear();
        leaves(child, pts);
        for (std::size_t p : pts) t.edges.push_back({cluster, p, lambda, 1});
      }
    }
  }
  return t;
}

// Excess-of-mass selection. The root is never selectable, so a dataset with
// no split yields only noise.
inline std::vector<bool> select_clusters(const CondensedTree& t) {
  const std::size_t n = t.n_points, m = t.n_clusters;
  std::vector<double> birth(m, 0.0), stability(m, 0.0);
  std::vector<std::vector<std::size_t>> children(m);
  for (const auto& e : t.edges)
    if (e.child >= n) {
      birth[e.child - n] = e.lambda;
      children[e.parent - n].push_back(e.child - n);
    }
  for (const auto& e : t.edges)
    stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * static_cast<double>(e.size);

  std::vector<bool> selected(m, false);
  std::vector<double> value = stability;
  // Children always carry larger ids than their parent.
  for (std::size_t c = m; c-- > 1;) {
    double child_sum = 0.0;
    for (std::size_t ch : children[c]) child_sum += value[ch];
    if (!children[c].empty() && child_sum > stability[c]) {
      value[c] = child_sum;
    } else {
      selected[c] = true;
      std::vector<std::size_t> stack(children[c]);
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        selected[u] = false;
        stack.insert(stack.end(), children[u].begin(), children[u].end());
      }
    }
  }
  return selected;
}

inline DensityResult finalize_density(std::vector<int> labels, std::size_t mcs, std::size_t ms) {
  DensityResult r;
  r.labels = std::move(labels);
  r.min_cluster_size = mcs;
  r.min_samples = ms;
  std::set<int> ids;
  std::size_t noise = 0;
  for (int l : r.labels) {
    if (l < 0)
      ++noise;
    else
      ids.insert(l);
  }
  r.n_clusters = ids.size();
  r.noise_fraction = r.labels.empty() ? 0.0 : static_cast<double>(noise) / static_cast<double>(r.labels.size());
  return r;
}

// Euclidean HDBSCAN with excess-of-mass extraction. min_samples = 0 means
// min_cluster_size. The core distance counts the point itself as its first
// neighbour.
inline DensityResult hdbscan_fit(const PairwiseDistances& dist, std::size_t min_cluster_size,
                                 std::size_t min_samples = 0) {
  const std::size_t n = dist.size();
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be at least 2");
  if (n < min_cluster_size)
    throw ContractError("hdbscan: " + std::to_string(n) + " points is fewer than min_cluster_size " +
                        std::to_string(min_cluster_size));
  const std::size_t ms = min_samples == 0 ? min_cluster_size : min_samples;
  if (ms > n)
    throw ContractError("hdbscan: min_samples " + std::to_string(ms) + " exceeds " + std::to_string(n) +
                        " points");

  double max_d = 0.0, min_pos = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = dist(i, j);
      max_d = std::max(max_d, v);
      if (v > 0.0) min_pos = std::min(min_pos, v);
    }
  if (max_d == 0.0) return finalize_density(std::vector<int>(n, 0), min_cluster_size, ms);

  std::vector<double> core(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) buf[j] = dist(i, j);
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(ms - 1), buf.end());
    core[i] = buf[ms - 1];
  }

  const auto mst = detail::mutual_reachability_mst(dist, core);
  const auto dendro = detail::single_linkage(n, mst);
  // Zero-distance merges get a finite lambda above every real one.
  const double lambda_cap = 10.0 / min_pos;
  const auto tree = condense(dendro, n, min_cluster_size, lambda_cap);
  const auto selected = select_clusters(tree);

  std::vector<std::size_t> cluster_parent(tree.n_clusters, 0), point_parent(n, 0);
  for (const auto& e : tree.edges) {
    if (e.child >= n)
      cluster_parent[e.child - n] = e.parent - n;
    else
      point_parent[e.child] = e.parent - n;
  }
  std::vector<int> label_of(tree.n_clusters, -1);
  int next = 0;
  for (std::size_t c = 0; c < tree.n_clusters; ++c)
    if (selected[c]) label_of[c] = next++;

  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = point_parent[i];
    while (c != 0 && !selected[c]) c = cluster_parent[c];
    labels[i] = selected[c] ? label_of[c] : -1;
  }
  return finalize_density(std::move(labels), min_cluster_size, ms);
}

inline DensityResult hdbscan_fit(const Matrix& x, std::size_t min_cluster_size, std::size_t min_samples = 0) {
  return hdbscan_fit(PairwiseDistances(x), min_cluster_size, min_samples);
}

inline DensityResult hdbscan_fit(const EmbeddingMatrix& x, std::size_t min_cluster_size,
                                 std::size_t min_samples = 0) {
  return hdbscan_fit(x.vectors, min_cluster_size, min_samples);
}

}  // namespace triplex
