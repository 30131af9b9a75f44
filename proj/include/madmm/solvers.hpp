// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madmm/error.hpp"
#include "madmm/sparse.hpp"

namespace madmm {

/// Outcome of an iterative or direct linear solve.
struct SolveReport {
  std::size_t iterations = 0;
  double final_residual = 0.0;  // ‖b − A x‖₂, recomputed from the returned x
  bool converged = false;
  std::string method;
  std::string diagnostic;
};

/// z = P⁻¹ r. Must be a fixed linear operator for the Krylov contracts to hold.
using Preconditioner = std::function<void(std::span<const double> r, std::span<double> z)>;

/// Residual floor applied on top of every relative tolerance.
inline constexpr double kAbsoluteResidualFloor = 1e-14;

inline double residual_target(double tol, double bnorm) { return std::max(tol * bnorm, kAbsoluteResidualFloor); }

inline Vector residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> b) {
  Vector r = a * x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return r;
}

inline Preconditioner jacobi_preconditioner(const SparseMatrix& a) {
  Vector inv = a.diagonal_entries();
  for (double& d : inv) d = (d != 0.0) ? 1.0 / d : 1.0;
  return [inv = std::move(inv)](std::span<const double> r, std::span<double> z) {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv[i] * r[i];
  };
}

namespace detail {

inline void check_square_system(const SparseMatrix& a, std::span<const double> b, std::span<const double> x) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::kDimensionMismatch, "system matrix is not square");
  if (b.size() != a.rows() || x.size() != a.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "right-hand side or initial guess has wrong size");
  }
  if (!all_finite(a.values()) || !all_finite(b)) throw Error(ErrorCode::kNonFinite, "non-finite system data");
}

inline void finish_report(const SparseMatrix& a, std::span<const double> x, std::span<const double> b, double target,
                          SolveReport& report) {
  report.final_residual = norm2(residual(a, x, b));
  report.converged = report.final_residual <= target;
}

}  // namespace detail

/// Preconditioned conjugate gradients for SPD `a`. `x` holds the initial guess
/// on entry. On exhaustion of `maxit` the best iterate seen (smallest recursive
/// residual) is returned with converged=false.
inline SolveReport solve_spd_inplace(const SparseMatrix& a, std::span<const double> b, std::span<double> x,
                                     double tol, std::size_t maxit, const Preconditioner& precond = {}) {
  detail::check_square_system(a, b, x);
  SolveReport report;
  report.method = precond ? "pcg" : "cg";
  const std::size_t n = b.size();
  const double target = residual_target(tol, norm2(b));

  Vector r = residual(a, x, b);
  double rnorm = norm2(r);
  if (rnorm <= target) {
    detail::finish_report(a, x, b, target, report);
    if (report.converged) return report;
  }
  Vector z(n), p(n), ap(n);
  auto apply_precond = [&](const Vector& in, Vector& out) {
    if (precond) {
      precond(in, out);
    } else {
      out = in;
    }
  };
  apply_precond(r, z);
  p = z;
  double rz = dot(r, z);
  Vector best(x.begin(), x.end());
  double best_norm = rnorm;

  // Recursive residuals drift from the true residual near machine precision;
  // a few true-residual restarts close that gap.
  int refreshes = 0;
  for (std::size_t it = 0; it < maxit; ++it) {
    a.multiply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      report.diagnostic = "non-positive curvature";
      break;
    }
    const double step = rz / pap;
    axpy(step, p, x);
    axpy(-step, ap, r);
    ++report.iterations;
    rnorm = norm2(r);
    if (rnorm < best_norm) {
      best_norm = rnorm;
      std::copy(x.begin(), x.end(), best.begin());
    }
    if (rnorm <= target) {
      r = residual(a, x, b);
      rnorm = norm2(r);
      if (rnorm <= target || refreshes >= 3) break;
      ++refreshes;
      best_norm = rnorm;
      std::copy(x.begin(), x.end(), best.begin());
      apply_precond(r, z);
      p = z;
      rz = dot(r, z);
      continue;
    }
    apply_precond(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (rnorm > target) std::copy(best.begin(), best.end(), x.begin());
  detail::finish_report(a, x, b, target, report);
  if (!report.converged && report.diagnostic.empty()) report.diagnostic = "iteration limit reached";
  return report;
}

inline std::pair<Vector, SolveReport> solve_spd(const SparseMatrix& a, std::span<const double> b, double tol,
                                                std::size_t maxit, const Preconditioner& precond = {}) {
  Vector x(b.size(), 0.0);
  SolveReport rep = solve_spd_inplace(a, b, x, tol, maxit, precond);
  return {std::move(x), std::move(rep)};
}

/// Restarted GMRES with right preconditioning and modified Gram-Schmidt.
/// Minimizes ‖b − A x‖₂ over each restart cycle, so the reported residual
/// is the unpreconditioned one.
inline SolveReport solve_gmres_inplace(const SparseMatrix& a, std::span<const double> b, std::span<double> x,
                                       double tol, std::size_t maxit, const Preconditioner& precond = {},
                                       std::size_t restart = 50) {
  detail::check_square_system(a, b, x);
  SolveReport report;
  report.method = precond ? "gmres(" + std::to_string(restart) + ")+right-precond" : "gmres(" + std::to_string(restart) + ")";
  const std::size_t n = b.size();
  const double target = residual_target(tol, norm2(b));
  restart = std::max<std::size_t>(1, std::min(restart, n));

  std::vector<Vector> basis(restart + 1, Vector(n));
  std::vector<Vector> hess(restart + 1, Vector(restart, 0.0));  // hess[row][col]
  Vector cs(restart), sn(restart), g(restart + 1), w(n), zvec(n);

  auto apply_precond = [&](std::span<const double> in, std::span<double> out) {
    if (precond) {
      precond(in, out);
    } else {
      std::copy(in.begin(), in.end(), out.begin());
    }
  };

  Vector r = residual(a, x, b);
  double beta = norm2(r);
  while (beta > target && report.iterations < maxit) {
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    std::size_t k = 0;
    bool breakdown = false;
    for (; k < restart && report.iterations < maxit; ++k) {
      apply_precond(basis[k], zvec);
      a.multiply(zvec, w);
      for (std::size_t j = 0; j <= k; ++j) {
        hess[j][k] = dot(w, basis[j]);
        axpy(-hess[j][k], basis[j], w);
      }
      hess[k + 1][k] = norm2(w);
      ++report.iterations;
      if (hess[k + 1][k] > 0.0) {
        for (std::size_t i = 0; i < n; ++i) basis[k + 1][i] = w[i] / hess[k + 1][k];
      } else {
        breakdown = true;
      }
      for (std::size_t j = 0; j < k; ++j) {
        const double t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
        hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
        hess[j][k] = t;
      }
      const double denom = std::hypot(hess[k][k], hess[k + 1][k]);
      if (denom == 0.0) {
        report.diagnostic = "breakdown: singular Hessenberg column";
        breakdown = true;
        break;
      }
      cs[k] = hess[k][k] / denom;
      sn[k] = hess[k + 1][k] / denom;
      hess[k][k] = denom;
      hess[k + 1][k] = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= target || breakdown) {
        ++k;
        break;
      }
    }
    // Back substitution for the k Krylov coefficients, then x += P⁻¹ V y.
    Vector y(k, 0.0);
    for (std::size_t ii = k; ii-- > 0;) {
      double s = g[ii];
      for (std::size_t j = ii + 1; j < k; ++j) s -= hess[ii][j] * y[j];
      y[ii] = (hess[ii][ii] != 0.0) ? s / hess[ii][ii] : 0.0;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) axpy(y[j], basis[j], w);
    apply_precond(w, zvec);
    axpy(1.0, zvec, x);
    r = residual(a, x, b);
    const double new_beta = norm2(r);
    if (breakdown && new_beta > target) {
      if (report.diagnostic.empty()) report.diagnostic = "breakdown: Krylov space exhausted";
      beta = new_beta;
      break;
    }
    if (!(new_beta < beta)) {
      beta = new_beta;
      report.diagnostic = "stagnation across restart";
      break;
    }
    beta = new_beta;
  }
  detail::finish_report(a, x, b, target, report);
  if (!report.converged && report.diagnostic.empty()) report.diagnostic = "iteration limit reached";
  return report;
}

inline std::pair<Vector, SolveReport> solve_block_nonsym(const SparseMatrix& a, std::span<const double> b, double tol,
                                                         std::size_t maxit, const Preconditioner& precond = {},
                                                         std::size_t restart = 50) {
  Vector x(b.size(), 0.0);
  SolveReport rep = solve_gmres_inplace(a, b, x, tol, maxit, precond, restart);
  return {std::move(x), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting.
// ---------------------------------------------------------------------------

/// Row-major dense matrix, used for small direct solves and test oracles.
struct DenseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : n_rows(r), n_cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * n_cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n_cols + j]; }

  static DenseMatrix from_sparse(const SparseMatrix& a) {
    DenseMatrix d(a.rows(), a.cols());
    const auto off = a.row_offsets();
    const auto col = a.col_indices();
    const auto val = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) d(i, col[k]) = val[k];
    }
    return d;
  }
};

class DenseLU {
 public:
  explicit DenseLU(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.n_rows) {
    if (lu_.n_rows != lu_.n_cols) throw Error(ErrorCode::kDimensionMismatch, "LU of non-square matrix");
    const std::size_t n = lu_.n_rows;
    double scale = 0.0;
    for (double v : lu_.data) scale = std::max(scale, std::abs(v));
    const double tiny = static_cast<double>(std::max<std::size_t>(n, 1)) * std::numeric_limits<double>::epsilon() * scale;
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      }
      if (!(std::abs(lu_(piv, k)) > tiny)) {
        throw Error(ErrorCode::kSingularMatrix, "matrix is singular to working precision");
      }
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      const double inv = 1.0 / lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = (lu_(i, k) *= inv);
        if (f == 0.0) continue;
        double* row_i = &lu_.data[i * n];
        const double* row_k = &lu_.data[k * n];
        for (std::size_t j = k + 1; j < n; ++j) row_i[j] -= f * row_k[j];
      }
    }
  }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = lu_.n_rows;
    if (b.size() != n) throw Error(ErrorCode::kDimensionMismatch, "LU solve: wrong right-hand side size");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    }
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

  std::size_t size() const noexcept { return lu_.n_rows; }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

inline constexpr std::size_t kDefaultDirectCap = 20000;

/// Dense factorization solve, refused above `cap` unknowns.
inline Vector solve_direct(const SparseMatrix& a, std::span<const double> b, std::size_t cap = kDefaultDirectCap) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::kDimensionMismatch, "direct solve of non-square matrix");
  if (a.rows() > cap) {
    throw Error(ErrorCode::kInvalidArgument,
                "dimension " + std::to_string(a.rows()) + " exceeds direct-solve cap " + std::to_string(cap));
  }
  if (!all_finite(a.values()) || !all_finite(b)) throw Error(ErrorCode::kNonFinite, "non-finite system data");
  return DenseLU(DenseMatrix::from_sparse(a)).solve(b);
}

}  // namespace madmm
