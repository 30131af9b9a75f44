// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense reference computations for the tests. Everything here is plain
// Gaussian elimination on std::vector, independent of the library's sparse
// kernels and Krylov solvers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "madmm/fem.hpp"
#include "madmm/sparse.hpp"

namespace oracle {

using Vec = std::vector<double>;

struct Dense {
  std::size_t n = 0, m = 0;
  std::vector<double> a;
  Dense() = default;
  Dense(std::size_t rows, std::size_t cols) : n(rows), m(cols), a(rows * cols, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * m + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * m + j]; }
};

/// Entry-by-entry copy through coeff(), so CSR traversal is not reused.
inline Dense to_dense(const madmm::SparseMatrix& s) {
  Dense d(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) d(i, j) = s.coeff(i, j);
  }
  return d;
}

inline Dense transpose(const Dense& x) {
  Dense t(x.m, x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t j = 0; j < x.m; ++j) t(j, i) = x(i, j);
  }
  return t;
}

inline Dense mul(const Dense& x, const Dense& y) {
  if (x.m != y.n) throw std::invalid_argument("mul: shape");
  Dense r(x.n, y.m);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t k = 0; k < x.m; ++k) {
      const double v = x(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < y.m; ++j) r(i, j) += v * y(k, j);
    }
  }
  return r;
}

inline Vec mul(const Dense& x, const Vec& v) {
  Vec r(x.n, 0.0);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t j = 0; j < x.m; ++j) r[i] += x(i, j) * v[j];
  }
  return r;
}

inline Dense add(const Dense& x, double s, const Dense& y) {
  Dense r = x;
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += s * y.a[i];
  return r;
}

/// Solves X Z = B column by column with partial pivoting.
inline Dense solve(Dense x, Dense b) {
  const std::size_t n = x.n;
  if (x.m != n || b.n != n) throw std::invalid_argument("solve: shape");
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(x(i, k)) > std::abs(x(p, k))) p = i;
    }
    if (x(p, k) == 0.0) throw std::runtime_error("solve: singular");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(x(k, j), x(p, j));
      for (std::size_t j = 0; j < b.m; ++j) std::swap(b(k, j), b(p, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = x(i, k) / x(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) x(i, j) -= f * x(k, j);
      for (std::size_t j = 0; j < b.m; ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (std::size_t c = 0; c < b.m; ++c) {
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, c);
      for (std::size_t j = i + 1; j < n; ++j) s -= x(i, j) * b(j, c);
      b(i, c) = s / x(i, i);
    }
  }
  return b;
}

inline Vec solve(const Dense& x, const Vec& v) {
  Dense b(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) b(i, 0) = v[i];
  const Dense r = solve(x, b);
  return Vec(r.a.begin(), r.a.end());
}

/// Reduced quadratic f(u) = ½uᵀHu − cᵀu + const of the discrete problem:
///   H = αM + Bᵀ K⁻¹ M_ss K⁻¹ B,   c = Bᵀ K⁻¹ M_ss (y_d − K⁻¹ B y_r),   B = M_sc.
struct ReducedProblem {
  Dense H, M, K, Mss, B, KinvB;
  Vec c;
  double alpha = 0.0, lower = 0.0, upper = 0.0;

  Vec gradient(const Vec& u) const {
    Vec g = mul(H, u);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c[i];
    return g;
  }
};

inline ReducedProblem reduced_problem(const madmm::AssembledLevel& lvl) {
  ReducedProblem r;
  r.M = to_dense(lvl.mass);
  r.K = to_dense(lvl.stiffness);
  r.Mss = to_dense(lvl.mass_ss);
  r.B = to_dense(lvl.mass_sc);
  r.KinvB = solve(r.K, r.B);
  const Dense bt = transpose(r.B);
  const Dense kinv_mss = solve(r.K, r.Mss);
  r.H = r.M;
  for (double& v : r.H.a) v *= lvl.alpha;
  r.H = add(r.H, 1.0, mul(mul(bt, kinv_mss), r.KinvB));
  Vec yr_state = mul(r.KinvB, lvl.source_offset);
  Vec rhs(lvl.desired_state.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = lvl.desired_state[i] - yr_state[i];
  r.c = mul(bt, mul(kinv_mss, rhs));
  r.alpha = lvl.alpha;
  r.lower = lvl.lower;
  r.upper = lvl.upper;
  return r;
}

/// Minimizer of f(u) + ⟨λ, M(u − z)⟩ + (σ/2)‖u − z‖²_M, no box.
inline Vec augmented_minimizer(const ReducedProblem& rp, const Vec& z, const Vec& lambda, double sigma) {
  const Dense a = add(rp.H, sigma, rp.M);
  Vec shift(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) shift[i] = sigma * z[i] - lambda[i];
  Vec rhs = mul(rp.M, shift);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += rp.c[i];
  return solve(a, rhs);
}

/// Fixed point of the ADMM iteration: u in [a,b] with μ = M⁻¹∇f(u) satisfying
/// μ_i = 0 where a < u_i < b, μ_i ≥ 0 at a, μ_i ≤ 0 at b. Primal-dual
/// active-set iteration on G = M⁻¹H, r = M⁻¹c with dense factorizations.
struct FixedPoint {
  Vec u;
  Vec mu;
  std::size_t iterations = 0;
  bool converged = false;
};

inline FixedPoint projected_kkt(const ReducedProblem& rp, std::size_t max_iter = 100) {
  const std::size_t n = rp.c.size();
  const Dense g = solve(rp.M, rp.H);
  const Vec r = solve(rp.M, rp.c);
  const double cpar = 1.0 / rp.alpha;
  FixedPoint fp;
  fp.u.assign(n, std::clamp(0.0, rp.lower, rp.upper));
  fp.mu.assign(n, 0.0);
  std::vector<int> state(n, 2), prev(n, -1);  // 0 lower, 1 upper, 2 inactive
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = fp.u[i] - cpar * fp.mu[i];
      state[i] = t < rp.lower ? 0 : (t > rp.upper ? 1 : 2);
    }
    fp.iterations = it + 1;
    if (state == prev) {
      fp.converged = true;
      break;
    }
    prev = state;
    std::vector<std::size_t> inactive;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 0) fp.u[i] = rp.lower;
      if (state[i] == 1) fp.u[i] = rp.upper;
      if (state[i] == 2) inactive.push_back(i);
    }
    if (!inactive.empty()) {
      Dense gi(inactive.size(), inactive.size());
      Vec rhs(inactive.size());
      for (std::size_t a = 0; a < inactive.size(); ++a) {
        const std::size_t i = inactive[a];
        double s = r[i];
        for (std::size_t j = 0; j < n; ++j) {
          if (state[j] != 2) s -= g(i, j) * fp.u[j];
        }
        rhs[a] = s;
        for (std::size_t b = 0; b < inactive.size(); ++b) gi(a, b) = g(i, inactive[b]);
      }
      const Vec ui = solve(gi, rhs);
      for (std::size_t a = 0; a < inactive.size(); ++a) fp.u[inactive[a]] = ui[a];
    }
    fp.mu = mul(g, fp.u);
    for (std::size_t i = 0; i < n; ++i) fp.mu[i] -= r[i];
  }
  return fp;
}

inline double m_norm(const Dense& m, const Vec& v) {
  const Vec mv = mul(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * mv[i];
  return std::sqrt(std::max(0.0, s));
}

}  // namespace oracle
