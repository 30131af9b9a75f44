// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "madmm/error.hpp"

namespace madmm {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Dense vector kernels. All reductions run in index order so results are
// bitwise reproducible.
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dot: sizes differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector operator+(const Vector& a, const Vector& b) {
  Vector r(a);
  axpy(1.0, b, r);
  return r;
}

inline Vector operator-(const Vector& a, const Vector& b) {
  Vector r(a);
  axpy(-1.0, b, r);
  return r;
}

inline Vector operator*(double s, const Vector& a) {
  Vector r(a);
  for (double& v : r) v *= s;
  return r;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// Coordinate-format entry used while building a matrix.
struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed-row sparse matrix. Column indices are strictly increasing within
/// each row; duplicate entries are summed on construction.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(std::size_t nrows, std::size_t ncols) : nrows_(nrows), ncols_(ncols), row_offsets_(nrows + 1, 0) {}

  SparseMatrix(std::size_t nrows, std::size_t ncols, std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values)
      : nrows_(nrows),
        ncols_(ncols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  static SparseMatrix from_triplets(std::size_t nrows, std::size_t ncols, std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
      if (t.row >= nrows || t.col >= ncols) {
        throw Error(ErrorCode::kDimensionMismatch, "triplet index out of range");
      }
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<std::size_t> offsets(nrows + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(triplets.size());
    vals.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
      const std::size_t r = triplets[k].row;
      const std::size_t c = triplets[k].col;
      double v = 0.0;
      while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) v += triplets[k++].value;
      cols.push_back(c);
      vals.push_back(v);
      ++offsets[r + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    SparseMatrix m;
    m.nrows_ = nrows;
    m.ncols_ = ncols;
    m.row_offsets_ = std::move(offsets);
    m.col_indices_ = std::move(cols);
    m.values_ = std::move(vals);
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<std::size_t> offsets(n + 1);
    std::vector<std::size_t> cols(n);
    std::iota(offsets.begin(), offsets.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
  }

  static SparseMatrix diagonal(std::span<const double> d) {
    SparseMatrix m = identity(d.size());
    std::copy(d.begin(), d.end(), m.values_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return nrows_; }
  std::size_t cols() const noexcept { return ncols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Entry lookup by binary search; zero when not stored.
  double coeff(std::size_t i, std::size_t j) const {
    const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != ncols_ || y.size() != nrows_) {
      throw Error(ErrorCode::kDimensionMismatch, "spmv: operand sizes do not match matrix");
    }
    for (std::size_t i = 0; i < nrows_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) s += values_[k] * x[col_indices_[k]];
      y[i] = s;
    }
  }

  Vector operator*(std::span<const double> x) const {
    Vector y(nrows_);
    multiply(x, y);
    return y;
  }

  /// y = A^T x without forming the transpose.
  Vector multiply_transposed(std::span<const double> x) const {
    if (x.size() != nrows_) {
      throw Error(ErrorCode::kDimensionMismatch, "spmv^T: operand size does not match matrix");
    }
    Vector y(ncols_, 0.0);
    for (std::size_t i = 0; i < nrows_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) y[col_indices_[k]] += values_[k] * x[i];
    }
    return y;
  }

  SparseMatrix transpose() const {
    std::vector<std::size_t> offsets(ncols_ + 1, 0);
    for (std::size_t c : col_indices_) ++offsets[c + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<std::size_t> cols(nnz());
    std::vector<double> vals(nnz());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < nrows_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const std::size_t dst = cursor[col_indices_[k]]++;
        cols[dst] = i;
        vals[dst] = values_[k];
      }
    }
    return SparseMatrix(ncols_, nrows_, std::move(offsets), std::move(cols), std::move(vals));
  }

  Vector diagonal_entries() const {
    Vector d(std::min(nrows_, ncols_), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = coeff(i, i);
    return d;
  }

  Vector row_sums() const {
    Vector s(nrows_, 0.0);
    for (std::size_t i = 0; i < nrows_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) s[i] += values_[k];
    }
    return s;
  }

  double max_abs() const { return norm_inf(values_); }

  /// ‖A − Aᵀ‖_max ≤ rel_tol · ‖A‖_max
  bool is_symmetric(double rel_tol = 1e-12) const {
    if (nrows_ != ncols_) return false;
    const double scale = max_abs();
    for (std::size_t i = 0; i < nrows_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        if (std::abs(values_[k] - coeff(col_indices_[k], i)) > rel_tol * scale) return false;
      }
    }
    return true;
  }

  /// Submatrix keeping the listed rows and columns, renumbered in list order.
  SparseMatrix select(std::span<const std::size_t> row_list, std::span<const std::size_t> col_list) const {
    constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
    std::vector<std::size_t> col_map(ncols_, kDropped);
    for (std::size_t j = 0; j < col_list.size(); ++j) col_map[col_list[j]] = j;
    std::vector<Triplet> trips;
    for (std::size_t r = 0; r < row_list.size(); ++r) {
      const std::size_t i = row_list[r];
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const std::size_t c = col_map[col_indices_[k]];
        if (c != kDropped) trips.push_back({r, c, values_[k]});
      }
    }
    return from_triplets(row_list.size(), col_list.size(), std::move(trips));
  }

  /// alpha * A + beta * B (same shape)
  friend SparseMatrix add(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "add: shapes differ");
    }
    std::vector<Triplet> trips;
    trips.reserve(a.nnz() + b.nnz());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t k = a.row_offsets_[i]; k < a.row_offsets_[i + 1]; ++k) {
        trips.push_back({i, a.col_indices_[k], alpha * a.values_[k]});
      }
      for (std::size_t k = b.row_offsets_[i]; k < b.row_offsets_[i + 1]; ++k) {
        trips.push_back({i, b.col_indices_[k], beta * b.values_[k]});
      }
    }
    return from_triplets(a.rows(), a.cols(), std::move(trips));
  }

  /// Sparse product A * B with a dense accumulator row.
  friend SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.cols() != b.rows()) throw Error(ErrorCode::kDimensionMismatch, "spgemm: inner dimensions differ");
    std::vector<std::size_t> offsets(a.rows() + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    std::vector<double> acc(b.cols(), 0.0);
    std::vector<char> used(b.cols(), 0);
    std::vector<std::size_t> pattern;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      pattern.clear();
      for (std::size_t ka = a.row_offsets_[i]; ka < a.row_offsets_[i + 1]; ++ka) {
        const std::size_t j = a.col_indices_[ka];
        const double av = a.values_[ka];
        for (std::size_t kb = b.row_offsets_[j]; kb < b.row_offsets_[j + 1]; ++kb) {
          const std::size_t c = b.col_indices_[kb];
          if (!used[c]) {
            used[c] = 1;
            pattern.push_back(c);
          }
          acc[c] += av * b.values_[kb];
        }
      }
      std::sort(pattern.begin(), pattern.end());
      for (std::size_t c : pattern) {
        cols.push_back(c);
        vals.push_back(acc[c]);
        acc[c] = 0.0;
        used[c] = 0;
      }
      offsets[i + 1] = cols.size();
    }
    return SparseMatrix(a.rows(), b.cols(), std::move(offsets), std::move(cols), std::move(vals));
  }

 private:
  void validate() const {
    if (row_offsets_.size() != nrows_ + 1 || row_offsets_.front() != 0 || row_offsets_.back() != values_.size() ||
        col_indices_.size() != values_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "inconsistent CSR arrays");
    }
    for (std::size_t i = 0; i < nrows_; ++i) {
      if (row_offsets_[i] > row_offsets_[i + 1]) throw Error(ErrorCode::kInvalidArgument, "row offsets decrease");
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        if (col_indices_[k] >= ncols_) throw Error(ErrorCode::kInvalidArgument, "column index out of range");
        if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1]) {
          throw Error(ErrorCode::kInvalidArgument, "column indices not strictly increasing");
        }
      }
    }
  }

  std::size_t nrows_ = 0;
  std::size_t ncols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

inline Vector spmv(const SparseMatrix& a, std::span<const double> x) { return a * x; }

}  // namespace madmm
