#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "triplex/kmeans.hpp"

namespace triplex {

struct GmmOptions {
  std::size_t max_iter = 200;
  double tol = 1e-6;  // on the change of mean per-sample log-likelihood
  double reg = 1e-6;  // added to every variance
  std::size_t n_init = 10;
};

// Diagonal-covariance mixture. `history` holds the total log-likelihood after
// each E-step; steps listed in `reseeds` follow a component re-seed and are
// exempt from the monotonicity guarantee.
struct GmmResult : PartitionResult {
  Matrix means;
  Matrix variances;
  std::vector<double> weights;
  Matrix responsibilities;
  std::vector<std::size_t> reseeds;
};

namespace detail {

struct GmmState {
  Matrix means, variances;
  std::vector<double> weights;
};

// Fills resp with posteriors and lse with per-row log p(x); returns sum of lse.
inline double gmm_estep(const Matrix& x, const GmmState& s, Matrix& resp, std::vector<double>& lse) {
  const std::size_t n = x.rows(), k = s.means.rows(), dim = x.cols();
  std::vector<double> constant(k);
  for (std::size_t j = 0; j < k; ++j) {
    double c = std::log(s.weights[j]) - 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
    for (std::size_t d = 0; d < dim; ++d) c -= 0.5 * std::log(s.variances(j, d));
    constant[j] = c;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    auto ri = resp.row(i);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const auto mu = s.means.row(j);
      const auto var = s.variances.row(j);
      double q = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double z = xi[d] - mu[d];
        q += z * z / var[d];
      }
      ri[j] = constant[j] - 0.5 * q;
      top = std::max(top, ri[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(ri[j] - top);
    const double l = top + std::log(sum);
    for (std::size_t j = 0; j < k; ++j) ri[j] = std::exp(ri[j] - l);
    lse[i] = l;
    total += l;
  }
  return total;
}

inline GmmState gmm_init(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& opts) {
  KMeansOptions ko;
  ko.n_init = 1;
  const auto km = kmeans_fit(x, k, seed, ko);
  GmmState s{km.centroids, Matrix(k, x.cols()), std::vector<double>(k, 0.0)};
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto j = static_cast<std::size_t>(km.labels[i]);
    ++counts[j];
    for (std::size_t d = 0; d < x.cols(); ++d) {
      const double z = x(i, d) - s.means(j, d);
      s.variances(j, d) += z * z;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t d = 0; d < x.cols(); ++d)
      s.variances(j, d) = s.variances(j, d) / static_cast<double>(counts[j]) + opts.reg;
    s.weights[j] = static_cast<double>(counts[j]) / static_cast<double>(x.rows());
  }
  return s;
}

// Returns true when a collapsed component had to be re-seeded.
inline bool gmm_mstep(const Matrix& x, const Matrix& resp, const std::vector<double>& lse,
                      GmmState& s, const GmmOptions& opts, std::vector<std::string>& events,
                      std::size_t step) {
  const std::size_t n = x.rows(), k = s.means.rows(), dim = x.cols();
  std::vector<double> nk(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) nk[j] += resp(i, j);

  bool reseeded = false;
  std::vector<bool> taken(n, false);
  for (std::size_t j = 0; j < k; ++j) {
    auto mu = s.means.row(j);
    auto var = s.variances.row(j);
    if (nk[j] / static_cast<double>(n) < 1e-12) {
      std::size_t worst = 0;
      double worst_l = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && lse[i] < worst_l) worst_l = lse[i], worst = i;
      taken[worst] = true;
      std::copy(x.row(worst).begin(), x.row(worst).end(), mu.begin());
      // Global per-dimension variance keeps the new component broad.
      for (std::size_t d = 0; d < dim; ++d) {
        double m = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += x(i, d);
        m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) m2 += (x(i, d) - m) * (x(i, d) - m);
        var[d] = m2 / static_cast<double>(n) + opts.reg;
      }
      nk[j] = 1.0;
      reseeded = true;
      events.push_back("step " + std::to_string(step) + ": component " + std::to_string(j) +
                       " collapsed; re-seeded at point " + std::to_string(worst));
      continue;
    }
    std::fill(mu.begin(), mu.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp(i, j);
      if (r == 0.0) continue;
      const auto xi = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) mu[d] += r * xi[d];
    }
    for (double& v : mu) v /= nk[j];
    std::vector<double> scatter(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp(i, j);
      if (r == 0.0) continue;
      const auto xi = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) {
        const double z = xi[d] - mu[d];
        scatter[d] += r * z * z;
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const double sd = scatter[d] / nk[j];
      // S + reg is not the exact maximizer of the expected log-likelihood,
      // so it is only taken when it scores at least as well as the previous
      // variance (generalized EM; keeps the likelihood monotone).
      const double old = var[d];
      const double cand = sd + opts.reg;
      const auto q = [sd](double v) { return -(std::log(v) + sd / v); };
      var[d] = q(old) > q(cand) ? old : cand;
    }
  }
  double total = 0.0;
  for (double v : nk) total += v;
  for (std::size_t j = 0; j < k; ++j) s.weights[j] = nk[j] / total;
  return reseeded;
}

inline GmmResult gmm_single(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& opts) {
  const std::size_t n = x.rows();
  GmmState s = gmm_init(x, k, seed, opts);
  GmmResult r;
  r.algorithm = Algorithm::Gmm;
  r.seed = seed;
  r.responsibilities = Matrix(n, k);
  std::vector<double> lse(n);
  double ll = gmm_estep(x, s, r.responsibilities, lse);
  r.history.push_back(ll);
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    if (gmm_mstep(x, r.responsibilities, lse, s, opts, r.events, it)) r.reseeds.push_back(it);
    const double next = gmm_estep(x, s, r.responsibilities, lse);
    r.history.push_back(next);
    r.iterations = it;
    const double change = std::abs(next - ll) / static_cast<double>(n);
    ll = next;
    if (change < opts.tol && (r.reseeds.empty() || r.reseeds.back() != it)) break;
  }
  r.log_likelihood = ll;
  r.means = std::move(s.means);
  r.variances = std::move(s.variances);
  r.weights = std::move(s.weights);
  return r;
}

}  // namespace detail

// EM for a diagonal Gaussian mixture, each restart initialized from one
// kmeans run; the restart with the highest log-likelihood wins.
inline GmmResult gmm_fit(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& opts = {}) {
  if (k < 1) throw ContractError("gmm needs k >= 1");
  if (k > x.rows())
    throw ContractError("gmm: k=" + std::to_string(k) + " exceeds " + std::to_string(x.rows()) + " rows");
  if (!(opts.reg > 0.0)) throw ConfigError("gmm regularization must be positive");
  const std::size_t restarts = std::max<std::size_t>(1, opts.n_init);
  GmmResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = detail::gmm_single(x, k, restarts == 1 ? seed : derive_seed(seed, r), opts);
    if (!std::isfinite(run.log_likelihood))
      throw NumericError("gmm: non-finite log-likelihood on restart " + std::to_string(r));
    if (r == 0 || run.log_likelihood > best.log_likelihood) best = std::move(run);
  }
  best.seed = seed;

  const std::size_t n = x.rows();
  best.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = best.responsibilities.row(i);
    best.labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  // A component that wins no point is dropped from the hard labels.
  std::vector<int> remap(k, -1);
  int next = 0;
  for (std::size_t j = 0; j < k; ++j)
    if (std::find(best.labels.begin(), best.labels.end(), static_cast<int>(j)) != best.labels.end())
      remap[j] = next++;
  if (static_cast<std::size_t>(next) != k) {
    for (int& l : best.labels) l = remap[static_cast<std::size_t>(l)];
    best.events.push_back(std::to_string(k - static_cast<std::size_t>(next)) +
                          " component(s) own no point; labels compacted");
  }
  best.k = static_cast<std::size_t>(next);
  return best;
}

inline GmmResult gmm_fit(const EmbeddingMatrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& opts = {}) {
  return gmm_fit(x.vectors, k, seed, opts);
}

}  // namespace triplex
