// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "madmm/solvers.hpp"
#include "madmm/sparse.hpp"

namespace madmm {

/// Geometric V-cycle for an SPD operator on a nested hierarchy. Coarse
/// operators are Galerkin products PᵀAP; smoothing is symmetric Gauss-Seidel,
/// so one cycle is a symmetric positive definite preconditioner.
class Multigrid {
 public:
  /// `chain[i]` maps level i to level i+1 (interior dofs only); `fine` lives on
  /// the last level of the chain.
  Multigrid(SparseMatrix fine, std::span<const SparseMatrix> chain, std::size_t sweeps = 1) : sweeps_(sweeps) {
    std::vector<SparseMatrix> ops{std::move(fine)};
    std::vector<SparseMatrix> transfers;
    for (std::size_t l = chain.size(); l-- > 0;) {
      const SparseMatrix& p = chain[l];
      if (p.rows() != ops.back().rows()) throw Error(ErrorCode::kHierarchyMismatch, "multigrid chain does not match operator");
      if (p.cols() == 0) break;
      SparseMatrix coarse = multiply(p.transpose(), multiply(ops.back(), p));
      transfers.push_back(p);
      ops.push_back(std::move(coarse));
      if (ops.back().rows() <= kCoarseDirectSize) break;
    }
    // Stored coarsest first.
    for (std::size_t i = ops.size(); i-- > 0;) {
      Level lvl;
      lvl.a = std::move(ops[i]);
      lvl.diag = lvl.a.diagonal_entries();
      lvl.diag_pos = diagonal_positions(lvl.a);
      levels_.push_back(std::move(lvl));
    }
    for (std::size_t i = 1; i < levels_.size(); ++i) {
      levels_[i].prolongation = transfers[levels_.size() - 1 - i];
      levels_[i].restriction = levels_[i].prolongation->transpose();
    }
    coarse_ = DenseLU(DenseMatrix::from_sparse(levels_.front().a));
  }

  std::size_t num_levels() const noexcept { return levels_.size(); }
  const SparseMatrix& fine_operator() const noexcept { return levels_.back().a; }

  /// z = V(r), one cycle from a zero initial guess.
  void apply(std::span<const double> r, std::span<double> z) const {
    std::fill(z.begin(), z.end(), 0.0);
    cycle(levels_.size() - 1, r, z);
  }

  Preconditioner as_preconditioner(std::shared_ptr<const Multigrid> self) const {
    return [mg = std::move(self)](std::span<const double> r, std::span<double> z) { mg->apply(r, z); };
  }

 private:
  static constexpr std::size_t kCoarseDirectSize = 100;

  struct Level {
    SparseMatrix a;
    Vector diag;
    std::vector<std::size_t> diag_pos;
    std::optional<SparseMatrix> prolongation;  // from the next coarser level
    std::optional<SparseMatrix> restriction;
  };

  static std::vector<std::size_t> diagonal_positions(const SparseMatrix& a) {
    std::vector<std::size_t> pos(a.rows());
    const auto off = a.row_offsets();
    const auto col = a.col_indices();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      pos[i] = off[i + 1];
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
        if (col[k] == i) pos[i] = k;
      }
      if (pos[i] == off[i + 1]) throw Error(ErrorCode::kInvalidArgument, "multigrid operator has an empty diagonal");
    }
    return pos;
  }

  static void gauss_seidel(const Level& lvl, std::span<const double> b, std::span<double> x, bool forward) {
    const auto off = lvl.a.row_offsets();
    const auto col = lvl.a.col_indices();
    const auto val = lvl.a.values();
    const std::size_t n = b.size();
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t i = forward ? s : n - 1 - s;
      double acc = b[i];
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
        if (k != lvl.diag_pos[i]) acc -= val[k] * x[col[k]];
      }
      x[i] = acc / lvl.diag[i];
    }
  }

  void cycle(std::size_t l, std::span<const double> b, std::span<double> x) const {
    const Level& lvl = levels_[l];
    if (l == 0) {
      const Vector sol = coarse_->solve(b);
      std::copy(sol.begin(), sol.end(), x.begin());
      return;
    }
    for (std::size_t s = 0; s < sweeps_; ++s) gauss_seidel(lvl, b, x, true);
    Vector r = residual(lvl.a, x, b);
    Vector rc = *lvl.restriction * r;
    Vector ec(rc.size(), 0.0);
    cycle(l - 1, rc, ec);
    Vector e = *lvl.prolongation * ec;
    axpy(1.0, e, x);
    for (std::size_t s = 0; s < sweeps_; ++s) gauss_seidel(lvl, b, x, false);
  }

  std::size_t sweeps_;
  std::vector<Level> levels_;
  std::optional<DenseLU> coarse_;
};

}  // namespace madmm
