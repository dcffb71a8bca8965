#include <gtest/gtest.h>

#include <string>

#include "support.hpp"
#include "triplex/metrics.hpp"

using namespace triplex;
using triplex::testing::all_labelings;
using triplex::testing::ari_oracle;
using triplex::testing::nmi_oracle;

TEST(Ari, KnownValues) {
  const std::vector<int> t{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(ari(t, t), 1.0);
  EXPECT_DOUBLE_EQ(ari(t, std::vector<int>{5, 5, 9, 9}), 1.0);
  EXPECT_DOUBLE_EQ(ari(t, std::vector<int>{0, 0, 0, 0}), 0.0);
  EXPECT_NEAR(ari(t, std::vector<int>{0, 0, 1, 2}), 4.0 / 7.0, 1e-15);
  EXPECT_THROW(ari(t, std::vector<int>{0, 1}), ContractError);
}

TEST(Ari, AcceptsStringLabels) {
  const std::vector<std::string> t{"cs", "cs", "math", "math"};
  EXPECT_DOUBLE_EQ(ari(t, std::vector<int>{1, 1, 0, 0}), 1.0);
}

TEST(Nmi, KnownValues) {
  const std::vector<int> t{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(nmi(t, t), 1.0);
  EXPECT_DOUBLE_EQ(nmi(t, std::vector<int>{3, 3, 3, 3}), 0.0);
  EXPECT_NEAR(nmi(t, std::vector<int>{0, 1, 0, 1}), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(nmi(std::vector<int>{1, 1, 1}, std::vector<int>{2, 2, 2}), 1.0);
}

TEST(PartitionMetrics, MatchBruteForceOnSmallLabelings) {
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto all = all_labelings(n, 3);
    for (const auto& a : all)
      for (const auto& b : all) {
        ASSERT_NEAR(ari(a, b), ari_oracle(a, b), 1e-12);
        ASSERT_NEAR(nmi(a, b), nmi_oracle(a, b), 1e-12);
      }
  }
}

TEST(Silhouette, HandComputed) {
  const auto x = Matrix::from_rows({{0}, {1}, {2}, {3}});
  const std::vector<int> l{0, 0, 1, 1};
  EXPECT_NEAR(silhouette(x, l), 7.0 / 15.0, 1e-12);
  EXPECT_NEAR(silhouette(Matrix::from_rows({{0}, {0}, {10}, {10}}), l), 1.0, 1e-12);
  EXPECT_THROW(silhouette(x, std::vector<int>{0, 0, 0, 0}), ContractError);
}

TEST(Silhouette, NoiseIsAPseudoCluster) {
  const auto x = Matrix::from_rows({{0}, {1}, {2}, {3}, {9}});
  const std::vector<int> noisy{-1, 0, 0, 1, -1};
  const std::vector<int> relabeled{7, 0, 0, 1, 7};
  EXPECT_DOUBLE_EQ(silhouette(x, noisy), silhouette(x, relabeled));
}

TEST(Silhouette, SingletonScoresZero) {
  // Point 2 is alone: s = 0. Points 0 and 1: a = 1, b = 5 and 4.
  const auto x = Matrix::from_rows({{0}, {1}, {5}});
  const double s0 = 1 - 1 / 5.0, s1 = 1 - 1 / 4.0;
  EXPECT_NEAR(silhouette(x, std::vector<int>{0, 0, 1}), (s0 + s1) / 3, 1e-12);
}

// ---- classification ------------------------------------------------------------

namespace {
Matrix one_hot(const std::vector<int>& pred, std::size_t classes) {
  Matrix m(pred.size(), classes);
  for (std::size_t i = 0; i < pred.size(); ++i) m(i, static_cast<std::size_t>(pred[i])) = 1.0;
  return m;
}
}  // namespace

TEST(Classification, PerfectPredictions) {
  const std::vector<int> t{0, 1, 2, 2, 1, 0};
  const auto r = classification_report(t, t, one_hot(t, 3));
  for (double v : r.values()) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_TRUE(r.zero_division_classes.empty());
}

TEST(Classification, ThreeClassFixture) {
  const std::vector<int> t{0, 1, 2, 2}, p{0, 2, 2, 2};
  const auto r = classification_report(t, p, one_hot(p, 3));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_NEAR(r.precision_macro, 5.0 / 9.0, 1e-15);
  EXPECT_NEAR(r.recall_macro, 2.0 / 3.0, 1e-15);
  // Confusion diagonal 1,0,2; marginals truth (1,1,2), pred (1,0,3):
  // p_o = 3/4, p_e = (1 + 0 + 6)/16 = 7/16, kappa = (5/16)/(9/16).
  EXPECT_NEAR(r.kappa, 5.0 / 9.0, 1e-15);
  EXPECT_EQ(r.zero_division_classes, std::vector<int>{1});
  // Weighted: supports 1,1,2 of 4; F1 per class 1, 0, 0.8.
  EXPECT_NEAR(r.f1_weighted, (1 * 1.0 + 1 * 0.0 + 2 * 0.8) / 4, 1e-15);
  EXPECT_NEAR(r.f1_macro, (1.0 + 0.0 + 0.8) / 3, 1e-15);
}

TEST(Classification, ConstantPredictorIsChance) {
  const std::vector<int> t{0, 1, 0, 1, 0, 1}, p(6, 0);
  const auto r = classification_report(t, p, Matrix(6, 2, 0.5));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.kappa, 0.0);
  EXPECT_DOUBLE_EQ(r.mcc, 0.0);
  EXPECT_NEAR(r.roc_auc_macro, 0.5, 1e-12);
}

TEST(Classification, MccMatchesBinaryFormula) {
  const std::vector<int> t{1, 1, 1, 0, 0, 0, 1, 0}, p{1, 0, 1, 0, 1, 0, 1, 0};
  const double tp = 3, tn = 3, fp = 1, fn = 1;
  const double want = (tp * tn - fp * fn) / std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  EXPECT_NEAR(matthews_corrcoef(ConfusionMatrix(t, p, 2)), want, 1e-15);
}

TEST(Classification, MacroF1ComputedOverObservedClasses) {
  // Class 2 never appears in truth or prediction and does not dilute the mean.
  EXPECT_DOUBLE_EQ(macro_f1(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 3), 1.0);
}

TEST(Classification, LabelsOutsideClassSet) {
  EXPECT_THROW(ConfusionMatrix(std::vector<int>{0}, std::vector<int>{3}, 2), ContractError);
  EXPECT_THROW(classification_report(std::vector<int>{0}, std::vector<int>{0}, Matrix(2, 2)), ContractError);
}

TEST(TopK, RankConstruction) {
  // True class always second best.
  const std::vector<int> t{0, 1, 2};
  const auto s = Matrix::from_rows({{0.3, 0.5, 0.2, 0.0}, {0.1, 0.3, 0.0, 0.6}, {0.6, 0.0, 0.3, 0.1}});
  EXPECT_DOUBLE_EQ(top_k_accuracy(t, s, 3), 1.0);
  EXPECT_DOUBLE_EQ(top_k_accuracy(t, s, 1), 0.0);
  EXPECT_DOUBLE_EQ(top_k_accuracy(t, s, 4), 1.0);
  EXPECT_THROW(top_k_accuracy(t, s, 0), ContractError);
  EXPECT_THROW(top_k_accuracy(t, s, 5), ContractError);
}

TEST(TopK, ConstructedHitRate) {
  // 1971 of 2000 rows have the true class in the top three: 98.55%.
  const std::size_t n = 2000, hits = 1971;
  std::vector<int> t(n, 0);
  Matrix s(n, 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 5; ++c) s(i, c) = static_cast<double>(c);  // class 0 ranks last
    if (i < hits) s(i, 0) = 10.0;
  }
  EXPECT_NEAR(top_k_accuracy(t, s, 3), 0.9855, 1e-12);
}

TEST(RocAuc, MidranksAndUndefinedClasses) {
  const std::vector<int> t{0, 0, 1, 1};
  const auto s = Matrix::from_rows({{0.9, 0.1}, {0.4, 0.6}, {0.6, 0.4}, {0.1, 0.9}});
  // Class 1 scores: negatives {0.1, 0.6}, positives {0.4, 0.9}; 3 of 4 pairs ordered.
  EXPECT_DOUBLE_EQ(roc_auc_one_vs_rest(t, s, 1), 0.75);
  EXPECT_TRUE(std::isnan(roc_auc_one_vs_rest(std::vector<int>{0, 0}, Matrix(2, 2), 1)));
  const auto tied = Matrix(4, 2, 0.5);
  EXPECT_DOUBLE_EQ(roc_auc_one_vs_rest(t, tied, 0), 0.5);
}
