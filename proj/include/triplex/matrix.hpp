#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "triplex/error.hpp"

namespace triplex {

// Dense row-major matrix of doubles. Rows are handed out as spans.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ContractError("matrix data size does not match rows*cols");
  }

  // Builds from nested rows; all rows must share a length.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw ContractError("ragged rows");
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<double> row(std::size_t i) noexcept {
    assert(i < rows_);
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    assert(i < rows_);
    return {data_.data() + i * cols_, cols_};
  }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  // Copy of the selected rows, in the given order.
  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto src = row(idx[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// All pairwise Euclidean distances, stored as the strict upper triangle.
// Shared by silhouette and HDBSCAN so sweeps pay the O(n^2 d) cost once.
class PairwiseDistances {
 public:
  PairwiseDistances() = default;
  explicit PairwiseDistances(const Matrix& x) : n_(x.rows()) {
    values_.resize(n_ < 2 ? 0 : n_ * (n_ - 1) / 2);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        values_[index(i, j)] = euclidean(x.row(i), x.row(j));
  }

  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    if (i == j) return 0.0;
    return i < j ? values_[index(i, j)] : values_[index(j, i)];
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    // Row i of the upper triangle starts after sum_{r<i} (n-1-r) entries.
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

  std::size_t n_ = 0;
  std::vector<double> values_;
};

}  // namespace triplex
