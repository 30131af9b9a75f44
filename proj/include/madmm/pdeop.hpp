// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madmm/error.hpp"
#include "madmm/fem.hpp"
#include "madmm/multigrid.hpp"
#include "madmm/solvers.hpp"
#include "madmm/sparse.hpp"

namespace madmm {

inline constexpr std::size_t kMaxKrylovIterations = 20000;

/// State y (and optionally adjoint p) on state dofs with the solver reports.
struct StateSolve {
  Vector y;
  Vector p;
  SolveReport state_report;
  SolveReport adjoint_report;
};

namespace detail {

inline Vector state_rhs(const AssembledLevel& level, std::span<const double> u) {
  if (u.size() != level.num_control()) throw Error(ErrorCode::kDimensionMismatch, "control vector has wrong size");
  Vector src(u.begin(), u.end());
  axpy(1.0, level.source_offset, src);
  return level.mass_sc * src;
}

inline Vector adjoint_rhs(const AssembledLevel& level, std::span<const double> y) {
  if (y.size() != level.num_state()) throw Error(ErrorCode::kDimensionMismatch, "state vector has wrong size");
  Vector d = level.desired_state;
  axpy(-1.0, y, d);
  return level.mass_ss * d;
}

}  // namespace detail

/// Solves K y = M_sc (u + y_r) in place; `y` is the initial guess.
inline SolveReport solve_state_inplace(const AssembledLevel& level, std::span<const double> u, std::span<double> y,
                                       double tol) {
  const Vector rhs = detail::state_rhs(level, u);
  return solve_spd_inplace(level.stiffness, rhs, y, tol, kMaxKrylovIterations, level.stiffness_preconditioner());
}

/// Solves K p = M_ss (y_d − y) in place; `p` is the initial guess.
inline SolveReport solve_adjoint_inplace(const AssembledLevel& level, std::span<const double> y, std::span<double> p,
                                         double tol) {
  const Vector rhs = detail::adjoint_rhs(level, y);
  return solve_spd_inplace(level.stiffness, rhs, p, tol, kMaxKrylovIterations, level.stiffness_preconditioner());
}

inline std::pair<Vector, SolveReport> solve_state(const AssembledLevel& level, std::span<const double> u, double tol) {
  Vector y(level.num_state(), 0.0);
  SolveReport rep = solve_state_inplace(level, u, y, tol);
  return {std::move(y), std::move(rep)};
}

inline std::pair<Vector, SolveReport> solve_adjoint(const AssembledLevel& level, std::span<const double> y, double tol) {
  Vector p(level.num_state(), 0.0);
  SolveReport rep = solve_adjoint_inplace(level, y, p, tol);
  return {std::move(p), std::move(rep)};
}

/// ½‖y − y_d‖²_M + (α/2)‖u‖²_M with y = S_h(u + y_r).
inline double objective(const AssembledLevel& level, std::span<const double> u, double tol) {
  const auto [y, rep] = solve_state(level, u, tol);
  Vector misfit = y;
  axpy(-1.0, level.desired_state, misfit);
  return 0.5 * l2_inner(level.mass_ss, misfit, misfit) + 0.5 * level.alpha * l2_inner(level.mass, u, u);
}

/// α M u − M_scᵀ p, given the adjoint p belonging to u.
inline Vector gradient_from_adjoint(const AssembledLevel& level, std::span<const double> u, std::span<const double> p) {
  Vector g = level.mass * u;
  for (double& v : g) v *= level.alpha;
  axpy(-1.0, level.mass_sc.multiply_transposed(p), g);
  return g;
}

/// Coefficient-space gradient of the reduced objective (state and adjoint
/// solved at tol/10).
inline Vector gradient(const AssembledLevel& level, std::span<const double> u, double tol) {
  const auto [y, ry] = solve_state(level, u, tol / 10.0);
  const auto [p, rp] = solve_adjoint(level, y, tol / 10.0);
  return gradient_from_adjoint(level, u, p);
}

// ---------------------------------------------------------------------------
// u-subproblem
// ---------------------------------------------------------------------------

/// The coupled optimality system of the u-subproblem on one level for a fixed
/// penalty σ. Writing c = α + σ and w = σz − λ, stationarity forces
///   u = w / c on boundary nodes,  u = (p + w)/c on interior nodes,
/// and the remaining unknowns (y, u on interior nodes) solve
///   [ M_ss   c K  ] [y]   [ M_ss y_d + K w_s          ]
///   [ K     −M_ss ] [u] = [ M_sc y_r + M_sb w_b / c    ].
/// The system is solved by right-preconditioned GMRES. The preconditioner is
/// block diagonal: lumped M_ss on the first block and
/// c⁻¹ (K + M/√c)⁻¹ M (K + M/√c)⁻¹ on the second, each inverse one V-cycle.
class BlockSystem {
 public:
  BlockSystem(const AssembledLevel& level, double sigma) : level_(&level), sigma_(sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
    coupling_ = level.alpha + sigma;
    const std::size_t ns = level.num_state();
    std::vector<Triplet> trips;
    trips.reserve(2 * (level.mass_ss.nnz() + level.stiffness.nnz()));
    append(trips, level.mass_ss, 0, 0, 1.0);
    append(trips, level.stiffness, 0, ns, coupling_);
    append(trips, level.stiffness, ns, 0, 1.0);
    append(trips, level.mass_ss, ns, ns, -1.0);
    matrix_ = SparseMatrix::from_triplets(2 * ns, 2 * ns, std::move(trips));

    inv_lumped_state_ = level.mass_ss.row_sums();
    for (double& v : inv_lumped_state_) v = 1.0 / v;
    if (ns > 0) {
      const SparseMatrix shifted = add(1.0, level.stiffness, 1.0 / std::sqrt(coupling_), level.mass_ss);
      if (level.stiffness_mg) {
        shifted_mg_ = std::make_shared<const Multigrid>(shifted, level.interior_chain);
      } else {
        shifted_jacobi_ = jacobi_preconditioner(shifted);
      }
    }
  }

  const AssembledLevel& level() const noexcept { return *level_; }
  double sigma() const noexcept { return sigma_; }
  double coupling() const noexcept { return coupling_; }
  const SparseMatrix& matrix() const noexcept { return matrix_; }

  /// Right-hand side for given z, λ (control dofs).
  Vector rhs(std::span<const double> z, std::span<const double> lambda) const {
    const AssembledLevel& lvl = *level_;
    const std::size_t ns = lvl.num_state();
    const Vector w = weighted_shift(z, lambda);
    Vector boundary_u(lvl.num_control(), 0.0);
    for (std::size_t i : lvl.dofs.boundary_nodes) boundary_u[i] = w[i] / coupling_;
    Vector src = lvl.source_offset;
    axpy(1.0, boundary_u, src);

    Vector b(2 * ns);
    const Vector top = lvl.mass_ss * lvl.desired_state;
    const Vector kw = lvl.stiffness * lvl.dofs.restrict_to_state(w);
    const Vector bottom = lvl.mass_sc * src;
    for (std::size_t i = 0; i < ns; ++i) {
      b[i] = top[i] + kw[i];
      b[ns + i] = bottom[i];
    }
    return b;
  }

  /// Full control vector from the interior block solution.
  Vector control_from_block(std::span<const double> x, std::span<const double> z, std::span<const double> lambda) const {
    const AssembledLevel& lvl = *level_;
    const std::size_t ns = lvl.num_state();
    Vector u = weighted_shift(z, lambda);
    for (double& v : u) v /= coupling_;
    for (std::size_t k = 0; k < ns; ++k) u[lvl.dofs.state_dofs[k]] = x[ns + k];
    return u;
  }

  Preconditioner preconditioner() const {
    return [this](std::span<const double> r, std::span<double> out) { apply_preconditioner(r, out); };
  }

  /// w = σ z − λ
  Vector weighted_shift(std::span<const double> z, std::span<const double> lambda) const {
    if (z.size() != level_->num_control() || lambda.size() != level_->num_control()) {
      throw Error(ErrorCode::kDimensionMismatch, "z and lambda must live on control dofs");
    }
    Vector w(z.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = sigma_ * z[i] - lambda[i];
    return w;
  }

 private:
  static void append(std::vector<Triplet>& trips, const SparseMatrix& m, std::size_t r0, std::size_t c0, double s) {
    const auto off = m.row_offsets();
    const auto col = m.col_indices();
    const auto val = m.values();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) trips.push_back({r0 + i, c0 + col[k], s * val[k]});
    }
  }

  void apply_shifted_inverse(std::span<const double> r, std::span<double> z) const {
    if (shifted_mg_) {
      shifted_mg_->apply(r, z);
    } else {
      shifted_jacobi_(r, z);
    }
  }

  void apply_preconditioner(std::span<const double> r, std::span<double> out) const {
    const std::size_t ns = level_->num_state();
    for (std::size_t i = 0; i < ns; ++i) out[i] = inv_lumped_state_[i] * r[i];
    Vector t1(ns), t2(ns);
    apply_shifted_inverse(r.subspan(ns, ns), t1);
    level_->mass_ss.multiply(t1, t2);
    apply_shifted_inverse(t2, out.subspan(ns, ns));
    for (std::size_t i = ns; i < 2 * ns; ++i) out[i] /= coupling_;
  }

  const AssembledLevel* level_;
  double sigma_;
  double coupling_;
  SparseMatrix matrix_;
  Vector inv_lumped_state_;
  std::shared_ptr<const Multigrid> shifted_mg_;
  Preconditioner shifted_jacobi_;
};

struct SubproblemResult {
  Vector u;           // control dofs
  Vector y;           // state from an independent re-solve
  Vector p;           // adjoint from an independent re-solve
  double delta_norm;  // ‖δ‖₂ of the M-weighted stationarity residual
  std::size_t krylov_iterations = 0;
  std::size_t tightenings = 0;
  SolveReport block_report;
};

/// δ = α M u − M_scᵀ p + M λ + σ M (u − z)
inline Vector stationarity_residual(const AssembledLevel& level, std::span<const double> u, std::span<const double> p,
                                    std::span<const double> z, std::span<const double> lambda, double sigma) {
  Vector g = gradient_from_adjoint(level, u, p);
  Vector shift(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) shift[i] = lambda[i] + sigma * (u[i] - z[i]);
  axpy(1.0, level.mass * shift, g);
  return g;
}

inline constexpr std::size_t kMaxTightenings = 6;
/// Block systems up to this size fall back to dense LU when GMRES fails.
inline constexpr std::size_t kBlockDirectCap = 3000;

/// Approximately minimizes Ĵ_h(u) + ⟨λ, u − z⟩_M + (σ/2)‖u − z‖²_M until
/// ‖δ‖₂ ≤ tol_xi. `warm_y`, `warm_p` (state dofs, may be empty) seed the
/// Krylov iteration.
inline SubproblemResult solve_u_subproblem(const BlockSystem& system, std::span<const double> z,
                                           std::span<const double> lambda, double tol_xi,
                                           std::span<const double> warm_y = {}, std::span<const double> warm_p = {}) {
  const AssembledLevel& lvl = system.level();
  const std::size_t ns = lvl.num_state();
  const double c = system.coupling();
  const Vector b = system.rhs(z, lambda);
  const Vector w = system.weighted_shift(z, lambda);

  Vector x(2 * ns, 0.0);
  if (warm_y.size() == ns && warm_p.size() == ns) {
    for (std::size_t k = 0; k < ns; ++k) {
      x[k] = warm_y[k];
      x[ns + k] = (warm_p[k] + w[lvl.dofs.state_dofs[k]]) / c;
    }
  }

  SubproblemResult out;
  double inner_tol = std::max(tol_xi / 10.0, 1e-13);
  const double resolve_tol = std::max(tol_xi / 10.0, 1e-13);
  const Preconditioner precond = system.preconditioner();
  for (std::size_t attempt = 0; attempt <= kMaxTightenings; ++attempt) {
    out.block_report = solve_gmres_inplace(system.matrix(), b, x, inner_tol, kMaxKrylovIterations, precond);
    out.krylov_iterations += out.block_report.iterations;
    if (!out.block_report.converged && 2 * ns <= kBlockDirectCap) {
      x = solve_direct(system.matrix(), b, kBlockDirectCap);
      out.block_report.method = "dense-lu after " + out.block_report.method + " (" + out.block_report.diagnostic + ")";
      out.block_report.final_residual = norm2(residual(system.matrix(), x, b));
      out.block_report.converged = true;
    }
    out.u = system.control_from_block(x, z, lambda);

    // Independent certificate: fresh state and adjoint, seeded by the block solution.
    out.y.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(ns));
    out.p.resize(ns);
    for (std::size_t k = 0; k < ns; ++k) out.p[k] = c * x[ns + k] - w[lvl.dofs.state_dofs[k]];
    out.krylov_iterations += solve_state_inplace(lvl, out.u, out.y, resolve_tol).iterations;
    out.krylov_iterations += solve_adjoint_inplace(lvl, out.y, out.p, resolve_tol).iterations;
    out.delta_norm = norm2(stationarity_residual(lvl, out.u, out.p, z, lambda, system.sigma()));
    out.tightenings = attempt;
    if (out.delta_norm <= tol_xi) return out;
    inner_tol = std::max(inner_tol / 10.0, 1e-16);
  }
  throw Error(ErrorCode::kSubproblemFailure,
              "‖δ‖₂ = " + std::to_string(out.delta_norm) + " > ξ = " + std::to_string(tol_xi) + " after " +
                  std::to_string(kMaxTightenings) + " tightenings (last block solve: " + out.block_report.method +
                  ", residual " + std::to_string(out.block_report.final_residual) + ", " + out.block_report.diagnostic + ")");
}

/// Convenience overload that builds the block system on the fly.
inline SubproblemResult solve_u_subproblem(const AssembledLevel& level, std::span<const double> z,
                                           std::span<const double> lambda, double sigma, double tol_xi) {
  const BlockSystem system(level, sigma);
  return solve_u_subproblem(system, z, lambda, tol_xi);
}

}  // namespace madmm
