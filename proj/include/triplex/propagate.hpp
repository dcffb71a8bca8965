#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "triplex/embed.hpp"
#include "triplex/error.hpp"
#include "triplex/parallel.hpp"

namespace triplex {

struct Assignment {
  std::string doc_id;
  int cluster = 0;
  std::string neighbor_id;
  std::size_t neighbor_index = 0;
  double similarity = 0.0;  // cosine, clamped to [-1, 1]

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct PropagationMap {
  std::string provider;
  ReprMode mode = ReprMode::Abstract;
  std::vector<Assignment> assignments;  // target order

  std::vector<int> clusters() const {
    std::vector<int> out;
    out.reserve(assignments.size());
    for (const auto& a : assignments) out.push_back(a.cluster);
    return out;
  }
};

struct PropagateOptions {
  // Neighbours voting on the label. 1 = plain nearest neighbour. With more,
  // the majority label wins and ties go to the label of the closer voter.
  std::size_t k = 1;
  std::size_t threads = 1;
};

// Exact maximum-cosine search; rows are assumed unit-norm so the dot product
// is the cosine. Ties go to the lower source index.
inline PropagationMap propagate_labels(const EmbeddingMatrix& source, std::span<const int> source_labels,
                                       const EmbeddingMatrix& target, const PropagateOptions& opts = {}) {
  if (source.rows() == 0) throw ContractError("propagation needs a non-empty source");
  if (source.dim() != target.dim())
    throw ContractError("dimension mismatch: source " + std::to_string(source.dim()) + ", target " +
                        std::to_string(target.dim()));
  if (source.provider_name != target.provider_name)
    throw ContractError("provider mismatch: '" + source.provider_name + "' vs '" + target.provider_name + "'");
  if (source_labels.size() != source.rows())
    throw ContractError(std::to_string(source_labels.size()) + " labels for " + std::to_string(source.rows()) +
                        " source rows");
  if (opts.k < 1) throw ConfigError("propagation k must be at least 1");
  const std::size_t k = std::min(opts.k, source.rows());

  PropagationMap out;
  out.provider = source.provider_name;
  out.mode = source.mode;
  out.assignments = parallel_map(target.rows(), opts.threads, [&](std::size_t t) {
    const auto row = target.vectors.row(t);
    // (similarity, index), best first; ties by lower index.
    std::vector<std::pair<double, std::size_t>> top;
    top.reserve(k + 1);
    const auto better = [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    };
    for (std::size_t s = 0; s < source.rows(); ++s) {
      const std::pair<double, std::size_t> cand{dot(row, source.vectors.row(s)), s};
      if (top.size() == k && !better(cand, top.back())) continue;
      top.insert(std::upper_bound(top.begin(), top.end(), cand, better), cand);
      if (top.size() > k) top.pop_back();
    }
    Assignment a;
    a.doc_id = target.doc_ids[t];
    a.neighbor_index = top.front().second;
    a.neighbor_id = source.doc_ids[a.neighbor_index];
    a.similarity = std::clamp(top.front().first, -1.0, 1.0);
    a.cluster = source_labels[a.neighbor_index];
    if (k > 1) {
      std::map<int, std::size_t> votes;
      for (const auto& [sim, s] : top) ++votes[source_labels[s]];
      std::size_t most = 0;
      for (const auto& [label, v] : votes) most = std::max(most, v);
      for (const auto& [sim, s] : top)
        if (votes[source_labels[s]] == most) {
          a.cluster = source_labels[s];
          break;
        }
    }
    return a;
  });
  return out;
}

inline nlohmann::json to_json(const Assignment& a) {
  return {{"doc_id", a.doc_id}, {"cluster", a.cluster}, {"neighbor_id", a.neighbor_id}, {"similarity", a.similarity}};
}

inline Assignment assignment_from_json(const nlohmann::json& j) {
  Assignment a;
  a.doc_id = j.at("doc_id").get<std::string>();
  a.cluster = j.at("cluster").get<int>();
  a.neighbor_id = j.at("neighbor_id").get<std::string>();
  a.similarity = j.at("similarity").get<double>();
  return a;
}

}  // namespace triplex
