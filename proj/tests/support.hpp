#pragma once

// Helpers shared by the unit tests and the acceptance runner: fixture paths,
// scratch directories, planted-cluster generators and brute-force oracles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include "triplex/conllu.hpp"
#include "triplex/matrix.hpp"
#include "triplex/rng.hpp"
#include "triplex/triples.hpp"

namespace triplex::testing {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(TRIPLEX_TEST_DATA) / rel; }
inline std::filesystem::path demo_path(const std::string& rel) { return std::filesystem::path(TRIPLEX_DEMO_DIR) / rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("triplex-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct Blobs {
  Matrix x;
  std::vector<int> labels;
};

// `k` isotropic Gaussian blobs with unit spread whose centers sit on scaled
// coordinate axes, `separation` standard deviations from the origin.
inline Blobs make_blobs(std::size_t n, std::size_t d, std::size_t k, double separation, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Blobs b{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    b.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < d; ++j) b.x(i, j) = rng.normal() + (j == c % d ? separation : 0.0);
  }
  return b;
}

inline Matrix random_matrix(std::size_t n, std::size_t d, SplitMix64& rng, double scale = 1.0) {
  Matrix m(n, d);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

// ---- pair-counting and information oracles written from the definitions ----

inline double choose2(double x) { return x * (x - 1) / 2; }

// ARI by walking every pair of samples.
inline double ari_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  const double pairs = choose2(static_cast<double>(n));
  const double expected = in_a * in_b / pairs;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

// NMI with arithmetic-mean normalization from joint counts. Labels are
// small non-negative ints.
inline double nmi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  const int ka = *std::max_element(a.begin(), a.end()) + 1, kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> ca(ka, 0), cb(kb, 0), cab(ka * kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++cab[a[i] * kb + b[i]];
  }
  double ha = 0, hb = 0, mi = 0;
  for (double c : ca)
    if (c > 0) ha -= c / n * std::log(c / n);
  for (double c : cb)
    if (c > 0) hb -= c / n * std::log(c / n);
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j)
      if (const double c = cab[i * kb + j]; c > 0) mi += c / n * std::log(c * n / (ca[i] * cb[j]));
  if (ha == 0 && hb == 0) return 1.0;
  if (ha == 0 || hb == 0) return 0.0;
  return mi / (0.5 * (ha + hb));
}

// Every labeling of n items with labels in [0, classes).
inline std::vector<std::vector<int>> all_labelings(std::size_t n, int classes) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  for (;;) {
    out.push_back(cur);
    std::size_t i = 0;
    while (i < n && ++cur[i] == classes) cur[i++] = 0;
    if (i == n) break;
  }
  return out;
}

// Optimal 2-means inertia by enumerating every two-way assignment.
inline double best_two_means(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  double best = INFINITY;
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    double total = 0;
    for (int side = 0; side < 2; ++side) {
      std::vector<double> mean(d, 0.0);
      double count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) {
          for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
          ++count;
        }
      for (double& m : mean) m /= count;
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side))
          for (std::size_t j = 0; j < d; ++j) total += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
    }
    best = std::min(best, total);
  }
  return best;
}

// Hand-annotated triples for data/triples_fixture.conllu, one per line:
// doc_id, sentence_index, subject, relation, object (tab separated).
inline std::vector<Triple> expected_fixture_triples() {
  std::ifstream in(data_path("triples_expected.tsv"));
  std::vector<Triple> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
      f.push_back(line.substr(start, tab - start));
    f.push_back(line.substr(start));
    Triple t;
    t.doc_id = f.at(0);
    t.sentence_index = std::stoul(f.at(1));
    t.subject = f.at(2);
    t.relation = f.at(3);
    t.object = f.at(4);
    out.push_back(std::move(t));
  }
  return out;
}

// Fields compared by the parity check.
inline std::string triple_key(const Triple& t) {
  return t.doc_id + "|" + std::to_string(t.sentence_index) + "|" + t.subject + "|" + t.relation + "|" + t.object;
}

}  // namespace triplex::testing
