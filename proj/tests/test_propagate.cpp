#include <gtest/gtest.h>

#include "support.hpp"
#include "triplex/propagate.hpp"

using namespace triplex;

namespace {
EmbeddingMatrix unit_rows(std::size_t n, std::size_t d, std::uint64_t seed, const std::string& prefix) {
  SplitMix64 rng(seed);
  EmbeddingMatrix m;
  m.provider_name = "hash";
  m.vectors = triplex::testing::random_matrix(n, d, rng);
  for (std::size_t i = 0; i < n; ++i) {
    normalize_l2_inplace(m.vectors.row(i));
    m.doc_ids.push_back(prefix + std::to_string(i));
  }
  return m;
}
}  // namespace

TEST(Propagate, SelfMatch) {
  const auto src = unit_rows(5, 4, 1, "s");
  const std::vector<int> labels{3, 1, 4, 1, 5};
  EmbeddingMatrix tgt = src;
  tgt.doc_ids = {"t0", "t1", "t2", "t3", "t4"};
  const auto map = propagate_labels(src, labels, tgt);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(map.assignments[i].cluster, labels[i]);
    EXPECT_EQ(map.assignments[i].neighbor_id, src.doc_ids[i]);
    EXPECT_NEAR(map.assignments[i].similarity, 1.0, 1e-12);
    EXPECT_LE(map.assignments[i].similarity, 1.0);
  }
}

TEST(Propagate, TiesGoToLowerSourceIndex) {
  EmbeddingMatrix src{{"a", "b"}, Matrix::from_rows({{1, 0}, {0, 1}}), "hash", ReprMode::Abstract};
  const double h = std::sqrt(0.5);
  EmbeddingMatrix tgt{{"t"}, Matrix::from_rows({{h, h}}), "hash", ReprMode::Abstract};
  const auto map = propagate_labels(src, std::vector<int>{7, 9}, tgt);
  EXPECT_EQ(map.assignments[0].cluster, 7);
  EXPECT_EQ(map.assignments[0].neighbor_id, "a");
}

TEST(Propagate, MatchesDoubleLoopOracle) {
  const auto src = unit_rows(50, 8, 2, "s");
  const auto tgt = unit_rows(100, 8, 3, "t");
  std::vector<int> labels(50);
  for (std::size_t i = 0; i < 50; ++i) labels[i] = static_cast<int>(i % 6);
  PropagateOptions o;
  o.threads = 3;
  const auto map = propagate_labels(src, labels, tgt, o);
  for (std::size_t t = 0; t < 100; ++t) {
    std::size_t best = 0;
    double best_sim = -2;
    for (std::size_t s = 0; s < 50; ++s) {
      double sim = 0;
      for (std::size_t d = 0; d < 8; ++d) sim += tgt.vectors(t, d) * src.vectors(s, d);
      if (sim > best_sim) best_sim = sim, best = s;
    }
    EXPECT_EQ(map.assignments[t].neighbor_index, best);
    EXPECT_EQ(map.assignments[t].cluster, labels[best]);
    EXPECT_NEAR(map.assignments[t].similarity, best_sim, 1e-12);
  }
}

TEST(Propagate, MajorityVote) {
  EmbeddingMatrix src{{"a", "b", "c"}, Matrix::from_rows({{1, 0}, {0.8, 0.6}, {0.6, 0.8}}), "hash",
                      ReprMode::Abstract};
  EmbeddingMatrix tgt{{"t"}, Matrix::from_rows({{1, 0}}), "hash", ReprMode::Abstract};
  PropagateOptions o;
  o.k = 3;
  EXPECT_EQ(propagate_labels(src, std::vector<int>{0, 1, 1}, tgt, o).assignments[0].cluster, 1);
  // 1-1-1 split: the closest voter decides.
  EXPECT_EQ(propagate_labels(src, std::vector<int>{4, 2, 3}, tgt, o).assignments[0].cluster, 4);
}

TEST(Propagate, Errors) {
  const auto src = unit_rows(3, 4, 1, "s");
  auto other = unit_rows(2, 5, 1, "t");
  const std::vector<int> labels{0, 1, 2};
  EXPECT_THROW(propagate_labels(src, labels, other), ContractError);
  other = unit_rows(2, 4, 1, "t");
  other.provider_name = "remote:x";
  EXPECT_THROW(propagate_labels(src, labels, other), ContractError);
  EXPECT_THROW(propagate_labels(EmbeddingMatrix{}, {}, src), ContractError);
  EXPECT_THROW(propagate_labels(src, std::vector<int>{0}, src), ContractError);
}

TEST(Propagate, JsonRoundTrip) {
  const Assignment a{"t1", 4, "s9", 0, 0.25};
  EXPECT_EQ(assignment_from_json(to_json(a)), a);
}
