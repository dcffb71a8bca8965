#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "triplex/error.hpp"
#include "triplex/matrix.hpp"
#include "triplex/metrics.hpp"
#include "triplex/parallel.hpp"
#include "triplex/rng.hpp"

namespace triplex {

// Softmax classifier: logits = W x + b.
struct LinearHead {
  Matrix W;  // C x d
  std::vector<double> b;

  std::size_t classes() const noexcept { return W.rows(); }
  std::size_t dim() const noexcept { return W.cols(); }

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

inline constexpr double kLrMin = 1e-6;
inline constexpr double kLrMax = 1e-4;
inline constexpr std::size_t kEpochsMin = 2;
inline constexpr std::size_t kEpochsMax = 7;
inline constexpr std::size_t kBatchChoices[] = {8, 16, 32};

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;
  std::size_t patience = 2;
  // Off only for experiments outside the search space (e.g. lr 1e-2).
  bool enforce_search_ranges = true;
};

inline void validate(const TrainConfig& c) {
  std::ostringstream why;
  if (c.epochs < 1) why << "epochs must be at least 1";
  else if (c.batch_size < 1) why << "batch size must be positive";
  else if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) why << "learning rate must be positive";
  else if (c.weight_decay < 0.0) why << "weight decay must be non-negative";
  else if (c.patience < 1) why << "patience must be at least 1";
  else if (c.enforce_search_ranges) {
    if (c.learning_rate < kLrMin || c.learning_rate > kLrMax)
      why << "learning rate " << c.learning_rate << " outside [1e-6, 1e-4]";
    else if (std::find(std::begin(kBatchChoices), std::end(kBatchChoices), c.batch_size) == std::end(kBatchChoices))
      why << "batch size " << c.batch_size << " not in {8, 16, 32}";
    else if (c.epochs < kEpochsMin || c.epochs > kEpochsMax)
      why << "epochs " << c.epochs << " outside [2, 7]";
  }
  if (!why.str().empty()) throw ConfigError("invalid training config: " + why.str());
}

inline std::string describe(const TrainConfig& c) {
  std::ostringstream s;
  s << "lr=" << c.learning_rate << " batch=" << c.batch_size << " epochs=" << c.epochs << " seed=" << c.seed;
  return s.str();
}

struct TrialResult {
  TrainConfig config;
  double val_macro_f1 = 0.0;
  std::vector<double> val_loss_curve;    // per epoch run
  std::vector<double> train_loss_curve;  // mean loss over the train split, per epoch
  std::size_t best_epoch = 0;
  std::size_t stopped_epoch = 0;
  bool failed = false;
  std::string error;
};

inline void softmax_inplace(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - top));
  for (double& v : z) v /= sum;
}

// n x C softmax probabilities.
inline Matrix predict_scores(const LinearHead& head, const Matrix& x) {
  if (x.cols() != head.dim())
    throw ContractError("dimension mismatch: head expects " + std::to_string(head.dim()) + ", input has " +
                        std::to_string(x.cols()));
  Matrix p(x.rows(), head.classes());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto out = p.row(i);
    for (std::size_t c = 0; c < head.classes(); ++c) out[c] = head.b[c] + dot(head.W.row(c), x.row(i));
    softmax_inplace(out);
  }
  return p;
}

inline std::vector<int> predict_labels(const Matrix& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto r = scores.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

struct Gradient {
  Matrix W;
  std::vector<double> b;
};

// Mean cross-entropy over rows `idx` and, if `grad` is given, its gradient.
inline double loss_and_gradient(const LinearHead& head, const Matrix& x, std::span<const int> y,
                                std::span<const std::size_t> idx, Gradient* grad) {
  const std::size_t C = head.classes(), d = head.dim();
  if (grad) {
    grad->W = Matrix(C, d);
    grad->b.assign(C, 0.0);
  }
  if (idx.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(idx.size());
  std::vector<double> z(C);
  double loss = 0.0;
  for (std::size_t i : idx) {
    const auto xi = x.row(i);
    for (std::size_t c = 0; c < C; ++c) z[c] = head.b[c] + dot(head.W.row(c), xi);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    const double lse = top + std::log(sum);
    const auto yi = static_cast<std::size_t>(y[i]);
    loss += lse - z[yi];
    if (!grad) continue;
    for (std::size_t c = 0; c < C; ++c) {
      const double g = (std::exp(z[c] - lse) - (c == yi ? 1.0 : 0.0)) * inv;
      grad->b[c] += g;
      auto gw = grad->W.row(c);
      for (std::size_t k = 0; k < d; ++k) gw[k] += g * xi[k];
    }
  }
  return loss * inv;
}

inline double mean_loss(const LinearHead& head, const Matrix& x, std::span<const int> y) {
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_gradient(head, x, y, all, nullptr);
}

namespace detail {

// Decoupled weight decay Adam; decay skips the bias.
struct AdamW {
  static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> mw, vw, mb, vb;
  std::size_t t = 0;

  AdamW(std::size_t nw, std::size_t nb) : mw(nw, 0.0), vw(nw, 0.0), mb(nb, 0.0), vb(nb, 0.0) {}

  static void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                     std::vector<double>& v, double lr, double wd, double c1, double c2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= lr * wd * p[i];
      m[i] = beta1 * m[i] + (1 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }

  void step(LinearHead& h, const Gradient& g, double lr, double wd) {
    ++t;
    const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
    update(h.W.data(), g.W.data(), mw, vw, lr, wd, c1, c2);
    update(h.b, g.b, mb, vb, lr, 0.0, c1, c2);
  }
};

}  // namespace detail

// Mini-batch AdamW from zero weights. Validation loss after every epoch
// drives early stopping; the head from the best epoch is returned.
inline std::pair<LinearHead, TrialResult> train_head(const Matrix& x_train, std::span<const int> y_train,
                                                     const Matrix& x_val, std::span<const int> y_val,
                                                     std::size_t n_classes, const TrainConfig& config) {
  validate(config);
  if (x_train.rows() != y_train.size() || x_val.rows() != y_val.size())
    throw ContractError("feature and label counts differ");
  if (x_train.cols() != x_val.cols()) throw ContractError("train and validation dims differ");
  if (x_train.rows() == 0 || x_val.rows() == 0) throw ContractError("empty train or validation split");
  if (n_classes < 2) throw ContractError("classification needs at least 2 classes");
  std::vector<std::size_t> present(n_classes, 0);
  for (int l : y_train) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw ContractError("label outside class set");
    ++present[static_cast<std::size_t>(l)];
  }
  for (int l : y_val)
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw ContractError("label outside class set");
  for (std::size_t c = 0; c < n_classes; ++c)
    if (present[c] == 0) throw DataError("class " + std::to_string(c) + " has no training examples");

  LinearHead head{Matrix(n_classes, x_train.cols()), std::vector<double>(n_classes, 0.0)};
  LinearHead best = head;
  TrialResult res;
  res.config = config;
  detail::AdamW opt(head.W.data().size(), n_classes);
  SplitMix64 rng(config.seed);
  std::vector<std::size_t> order(x_train.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradient g;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      loss_and_gradient(head, x_train, y_train, std::span<const std::size_t>(order).subspan(start, len), &g);
      opt.step(head, g, config.learning_rate, config.weight_decay);
    }
    const double train_loss = mean_loss(head, x_train, y_train);
    const double val_loss = mean_loss(head, x_val, y_val);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + " (" + describe(config) + ")");
    res.train_loss_curve.push_back(train_loss);
    res.val_loss_curve.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best = head;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  res.stopped_epoch = std::min(res.best_epoch + config.patience, config.epochs);
  const auto pred = predict_labels(predict_scores(best, x_val));
  res.val_macro_f1 = macro_f1(y_val, pred, n_classes);
  return {std::move(best), std::move(res)};
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Per-class allocation of round(fraction * N) training rows by largest
// remainder (ties to the lower class id); members are shuffled under `seed`
// before the cut. Both index lists come back sorted.
template <LabelRange R>
SplitIndices stratified_split(const R& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  using L = std::ranges::range_value_t<R>;
  const std::size_t n = std::ranges::size(labels);
  // Class order is sorted label order, so the tie rule ignores row order.
  std::vector<L> distinct(std::ranges::begin(labels), std::ranges::end(labels));
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const std::size_t C = distinct.size();
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i = 0; i < n; ++i)
    members[static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), labels[i]) -
                                     distinct.begin())]
        .push_back(i);
  for (std::size_t c = 0; c < C; ++c) {
    if (members[c].size() < 2) {
      std::ostringstream name;
      name << labels[members[c].front()];
      throw DataError("class '" + name.str() + "' has " + std::to_string(members[c].size()) +
                      " member; stratified split needs at least 2");
    }
  }
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> take(C);
  std::vector<double> rem(C);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double exact = fraction * static_cast<double>(members[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    rem[c] = exact - static_cast<double>(take[c]);
    assigned += take[c];
  }
  std::vector<std::size_t> by_rem(C);
  std::iota(by_rem.begin(), by_rem.end(), std::size_t{0});
  std::stable_sort(by_rem.begin(), by_rem.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < target && i < C; ++i, ++assigned) ++take[by_rem[i]];

  SplitMix64 rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < C; ++c) {
    auto& m = members[c];
    shuffle(std::span<std::size_t>(m), rng);
    out.train.insert(out.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(take[c]));
    out.val.insert(out.val.end(), m.begin() + static_cast<std::ptrdiff_t>(take[c]), m.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

// One random-search draw: lr log-uniform in [1e-6, 1e-4], batch from
// {8, 16, 32}, epochs from [2, 7].
inline TrainConfig sample_config(SplitMix64& rng) {
  TrainConfig c;
  c.learning_rate = std::exp(rng.uniform(std::log(kLrMin), std::log(kLrMax)));
  c.learning_rate = std::clamp(c.learning_rate, kLrMin, kLrMax);
  c.batch_size = kBatchChoices[rng.below(3)];
  c.epochs = static_cast<std::size_t>(rng.between(kEpochsMin, kEpochsMax));
  return c;
}

struct SearchOptions {
  double train_fraction = 0.8;
  std::size_t threads = 1;
  double weight_decay = 0.01;
  std::size_t patience = 2;
};

struct SearchResult {
  std::vector<TrialResult> trials;
  std::size_t best_index = 0;
  LinearHead best_head;
  SplitIndices split;

  const TrialResult& best() const { return trials.at(best_index); }
};

// Seeded random search. The stratified split depends only on `seed`, not on
// any trial, and is shared by all trials. Best = highest validation macro-F1,
// earliest trial on ties; failed trials stay in the list.
inline SearchResult random_search(const Matrix& x, std::span<const int> labels, std::size_t n_classes,
                                  std::size_t n_trials, std::uint64_t seed, const SearchOptions& opts = {}) {
  if (n_trials < 1) throw ConfigError("random search needs at least one trial");
  if (x.rows() != labels.size()) throw ContractError("feature and label counts differ");
  SearchResult out;
  out.split = stratified_split(labels, opts.train_fraction, derive_seed(seed, 0x5eed5));
  const Matrix xt = x.select_rows(out.split.train);
  const Matrix xv = x.select_rows(out.split.val);
  std::vector<int> yt, yv;
  for (auto i : out.split.train) yt.push_back(labels[i]);
  for (auto i : out.split.val) yv.push_back(labels[i]);

  SplitMix64 sampler(derive_seed(seed, 0x7a1a));
  std::vector<TrainConfig> configs;
  for (std::size_t t = 0; t < n_trials; ++t) {
    TrainConfig c = sample_config(sampler);
    c.weight_decay = opts.weight_decay;
    c.patience = opts.patience;
    c.seed = derive_seed(seed, 1000 + t);
    configs.push_back(c);
  }

  auto runs = parallel_map(n_trials, opts.threads, [&](std::size_t t) {
    std::pair<LinearHead, TrialResult> r;
    try {
      r = train_head(xt, yt, xv, yv, n_classes, configs[t]);
    } catch (const Error& e) {
      r.second.config = configs[t];
      r.second.failed = true;
      r.second.error = e.what();
    }
    return r;
  });

  bool found = false;
  for (std::size_t t = 0; t < runs.size(); ++t) {
    const auto& tr = runs[t].second;
    if (!tr.failed && (!found || tr.val_macro_f1 > runs[out.best_index].second.val_macro_f1))
      out.best_index = t, found = true;
  }
  if (!found) throw ContractError("random search: all " + std::to_string(n_trials) + " trials failed (" +
                                  runs.front().second.error + ")");
  out.best_head = runs[out.best_index].first;
  for (auto& r : runs) out.trials.push_back(std::move(r.second));
  return out;
}

inline nlohmann::json to_json(const TrialResult& t, std::size_t index) {
  nlohmann::json j = {{"trial", index},
                      {"lr", t.config.learning_rate},
                      {"batch", t.config.batch_size},
                      {"epochs", t.config.epochs},
                      {"seed", t.config.seed},
                      {"stopped_epoch", t.stopped_epoch},
                      {"best_epoch", t.best_epoch},
                      {"val_loss", t.val_loss_curve},
                      {"train_loss", t.train_loss_curve},
                      {"val_macro_f1", t.val_macro_f1}};
  if (t.failed) j["error"] = t.error;
  return j;
}

inline nlohmann::json head_to_json(const LinearHead& h, const std::vector<std::string>& classes) {
  std::vector<std::vector<double>> w(h.classes());
  for (std::size_t c = 0; c < h.classes(); ++c) w[c].assign(h.W.row(c).begin(), h.W.row(c).end());
  return {{"classes", classes}, {"dim", h.dim()}, {"W", w}, {"b", h.b}};
}

inline LinearHead head_from_json(const nlohmann::json& j) {
  try {
    LinearHead h;
    h.W = Matrix::from_rows(j.at("W").get<std::vector<std::vector<double>>>());
    h.b = j.at("b").get<std::vector<double>>();
    if (h.b.size() != h.W.rows() || j.at("dim").get<std::size_t>() != h.W.cols())
      throw FormatError("head JSON: inconsistent shapes");
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("head JSON: ") + e.what());
  }
}

}  // namespace triplex
