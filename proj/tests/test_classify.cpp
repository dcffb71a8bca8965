#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "support.hpp"
#include "triplex/classify.hpp"
#include "triplex/embed.hpp"

using namespace triplex;

namespace {

LinearHead random_head(std::size_t C, std::size_t d, SplitMix64& rng) {
  LinearHead h{triplex::testing::random_matrix(C, d, rng), std::vector<double>(C)};
  for (double& v : h.b) v = rng.normal();
  return h;
}

// Two unit-vector classes pointing in opposite directions, plus jitter.
void separable(std::size_t n, Matrix& x, std::vector<int>& y, std::uint64_t seed) {
  SplitMix64 rng(seed);
  x = Matrix(n, 4);
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (std::size_t d = 0; d < 4; ++d) x(i, d) = 0.1 * rng.normal();
    x(i, 0) += y[i] ? 1.0 : -1.0;
    normalize_l2_inplace(x.row(i));
  }
}

}  // namespace

TEST(Softmax, UniformAtZero) {
  LinearHead h{Matrix(4, 3), std::vector<double>(4, 0.0)};
  const auto p = predict_scores(h, Matrix(2, 3, 1.5));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, KnownLogits) {
  std::vector<double> z{std::log(1.0), std::log(3.0)};
  softmax_inplace(z);
  EXPECT_NEAR(z[0], 0.25, 1e-15);
  EXPECT_NEAR(z[1], 0.75, 1e-15);
  std::vector<double> big{1000.0, 1000.0};
  softmax_inplace(big);
  EXPECT_DOUBLE_EQ(big[0], 0.5);
}

TEST(Softmax, ArgmaxMatchesLogits) {
  SplitMix64 rng(2);
  const auto h = random_head(5, 6, rng);
  const auto x = triplex::testing::random_matrix(40, 6, rng);
  const auto labels = predict_labels(predict_scores(h, x));
  for (std::size_t i = 0; i < 40; ++i) {
    std::size_t best = 0;
    double top = -INFINITY;
    for (std::size_t c = 0; c < 5; ++c) {
      const double z = h.b[c] + dot(h.W.row(c), x.row(i));
      if (z > top) top = z, best = c;
    }
    EXPECT_EQ(labels[i], static_cast<int>(best));
  }
  EXPECT_THROW(predict_scores(h, Matrix(1, 7)), ContractError);
}

TEST(Gradient, MatchesCentralDifferences) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto head = random_head(3, 8, rng);
    const auto x = triplex::testing::random_matrix(10, 8, rng);
    std::vector<int> y(10);
    for (auto& v : y) v = static_cast<int>(rng.below(3));
    std::vector<std::size_t> idx(10);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Gradient g;
    loss_and_gradient(head, x, y, idx, &g);
    const double h = 1e-5;
    auto check = [&](double analytic, auto&& perturb) {
      LinearHead plus = head, minus = head;
      perturb(plus, h);
      perturb(minus, -h);
      const double numeric = (mean_loss(plus, x, y) - mean_loss(minus, x, y)) / (2 * h);
      EXPECT_LE(std::fabs(analytic - numeric), 1e-6 * std::max(1.0, std::fabs(numeric)));
    };
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t d = 0; d < 8; ++d)
        check(g.W(c, d), [&](LinearHead& m, double e) { m.W(c, d) += e; });
      check(g.b[c], [&](LinearHead& m, double e) { m.b[c] += e; });
    }
  }
}

TEST(StratifiedSplit, ExactProportions) {
  std::vector<int> y(100, 0);
  std::fill(y.begin() + 60, y.end(), 1);
  const auto s = stratified_split(y, 0.8, 1);
  std::size_t t0 = 0, v0 = 0;
  for (auto i : s.train) t0 += y[i] == 0;
  for (auto i : s.val) v0 += y[i] == 0;
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(t0, 48u);
  EXPECT_EQ(v0, 12u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
}

TEST(StratifiedSplit, SmallClassesAndRemainders) {
  const std::vector<int> five{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto a = stratified_split(five, 0.8, 3);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.val.size(), 2u);
  EXPECT_NE(five[a.val[0]], five[a.val[1]]);

  const std::vector<std::string> seven{"x", "x", "x", "x", "x", "x", "x", "y", "y", "y"};
  const auto b = stratified_split(seven, 0.8, 3);
  std::size_t tx = 0;
  for (auto i : b.train) tx += seven[i] == "x";
  EXPECT_EQ(tx, 6u);
  EXPECT_EQ(b.train.size() - tx, 2u);
}

TEST(StratifiedSplit, Errors) {
  try {
    stratified_split(std::vector<std::string>{"a", "a", "lonely"}, 0.8, 0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("lonely"), std::string::npos);
  }
  EXPECT_THROW(stratified_split(std::vector<int>{0, 0, 1, 1}, 1.0, 0), ConfigError);
}

TEST(StratifiedSplit, DeterministicAndDisjoint) {
  std::vector<int> y;
  for (int i = 0; i < 57; ++i) y.push_back(i % 4);
  const auto a = stratified_split(y, 0.8, 9), b = stratified_split(y, 0.8, 9);
  EXPECT_EQ(a.train, b.train);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto i : a.val) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), y.size());
}

TEST(Train, SeparableToyReachesPerfectAccuracy) {
  Matrix xt, xv;
  std::vector<int> yt, yv;
  separable(80, xt, yt, 1);
  separable(20, xv, yv, 2);
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 50;
  c.patience = 50;
  c.enforce_search_ranges = false;
  const auto [head, res] = train_head(xt, yt, xv, yv, 2, c);
  const auto pred = predict_labels(predict_scores(head, xt));
  EXPECT_EQ(pred, yt);
  EXPECT_DOUBLE_EQ(res.val_macro_f1, 1.0);
  EXPECT_EQ(res.val_loss_curve.size(), res.train_loss_curve.size());
}

TEST(Train, EarlyStoppingKeepsBestEpoch) {
  Matrix xt, xv;
  std::vector<int> yt, yv;
  separable(40, xt, yt, 3);
  separable(10, xv, yv, 4);
  // Validation labels flipped: validation loss rises once training learns.
  for (auto& v : yv) v = 1 - v;
  TrainConfig c;
  c.learning_rate = 5e-2;
  c.epochs = 30;
  c.patience = 2;
  c.enforce_search_ranges = false;
  const auto [head, res] = train_head(xt, yt, xv, yv, 2, c);
  EXPECT_LT(res.val_loss_curve.size(), 30u);
  EXPECT_EQ(res.stopped_epoch, std::min<std::size_t>(res.best_epoch + 2, 30));
  EXPECT_EQ(res.val_loss_curve.size(), res.stopped_epoch);
  const double best = *std::min_element(res.val_loss_curve.begin(), res.val_loss_curve.end());
  EXPECT_DOUBLE_EQ(res.val_loss_curve[res.best_epoch - 1], best);
  EXPECT_DOUBLE_EQ(mean_loss(head, xv, yv), best);
}

TEST(Train, ConfigValidation) {
  Matrix x(4, 2, 1.0);
  const std::vector<int> y{0, 1, 0, 1};
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(train_head(x, y, x, y, 2, c), ConfigError);
  c.epochs = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.learning_rate = 1e-2;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.batch_size = 12;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_NO_THROW(validate(TrainConfig{}));
}

TEST(Train, MissingTrainingClass) {
  Matrix x(4, 2, 1.0);
  EXPECT_THROW(train_head(x, std::vector<int>{0, 0, 0, 0}, x, std::vector<int>{0, 1, 0, 1}, 2, TrainConfig{}),
               DataError);
}

TEST(Train, DivergenceIsReported) {
  Matrix x(4, 2, 1.0);
  x(2, 1) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> y{0, 1, 0, 1};
  EXPECT_THROW(train_head(x, y, x, y, 2, TrainConfig{}), NumericError);
}

TEST(Train, WeightDecaySkipsBias) {
  // With all-zero features only the bias moves, so decay must change nothing.
  Matrix x(4, 2, 0.0);
  const std::vector<int> y{0, 0, 0, 1};
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 3;
  c.batch_size = 4;
  c.patience = 5;
  c.enforce_search_ranges = false;
  c.weight_decay = 0.0;
  const auto plain = train_head(x, y, x, y, 2, c).first;
  c.weight_decay = 50.0;
  const auto decayed = train_head(x, y, x, y, 2, c).first;
  EXPECT_EQ(plain, decayed);
  EXPECT_GT(decayed.b[0], 0.0);
  EXPECT_LT(decayed.b[1], 0.0);
}

TEST(Train, WeightDecayShrinksWeights) {
  Matrix xt, xv;
  std::vector<int> yt, yv;
  separable(40, xt, yt, 12);
  separable(10, xv, yv, 13);
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 10;
  c.patience = 10;
  c.enforce_search_ranges = false;
  c.weight_decay = 0.0;
  const auto plain = train_head(xt, yt, xv, yv, 2, c).first;
  c.weight_decay = 5.0;
  const auto decayed = train_head(xt, yt, xv, yv, 2, c).first;
  double a = 0, b = 0;
  for (double w : plain.W.data()) a += w * w;
  for (double w : decayed.W.data()) b += w * w;
  EXPECT_LT(b, a);
}

TEST(Search, SampledConfigsStayInRange) {
  SplitMix64 rng(5);
  std::set<std::size_t> batches, epochs;
  for (int i = 0; i < 1000; ++i) {
    const auto c = sample_config(rng);
    EXPECT_GE(c.learning_rate, kLrMin);
    EXPECT_LE(c.learning_rate, kLrMax);
    batches.insert(c.batch_size);
    epochs.insert(c.epochs);
  }
  EXPECT_EQ(batches, (std::set<std::size_t>{8, 16, 32}));
  EXPECT_EQ(epochs, (std::set<std::size_t>{2, 3, 4, 5, 6, 7}));
}

TEST(Search, DeterministicAcrossThreadCounts) {
  Matrix x;
  std::vector<int> y;
  separable(60, x, y, 6);
  SearchOptions one, many;
  many.threads = 4;
  const auto a = random_search(x, y, 2, 6, 42, one);
  const auto b = random_search(x, y, 2, 6, 42, many);
  ASSERT_EQ(a.trials.size(), 6u);
  EXPECT_EQ(a.best_index, b.best_index);
  EXPECT_EQ(a.best_head, b.best_head);
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_EQ(to_json(a.trials[t], t), to_json(b.trials[t], t));
    EXPECT_GE(a.best().val_macro_f1, a.trials[t].val_macro_f1);
    if (t < a.best_index) {
      EXPECT_LT(a.trials[t].val_macro_f1, a.best().val_macro_f1);
    }
  }
}

TEST(Search, SingleTrial) {
  Matrix x;
  std::vector<int> y;
  separable(30, x, y, 7);
  const auto r = random_search(x, y, 2, 1, 3);
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.trials.size(), 1u);
}

TEST(Head, JsonRoundTrip) {
  SplitMix64 rng(8);
  const auto h = random_head(3, 4, rng);
  const auto j = head_to_json(h, {"a", "b", "c"});
  EXPECT_EQ(head_from_json(j), h);
  auto broken = j;
  broken["dim"] = 5;
  EXPECT_THROW(head_from_json(broken), FormatError);
  EXPECT_THROW(head_from_json(nlohmann::json::object()), FormatError);
}
