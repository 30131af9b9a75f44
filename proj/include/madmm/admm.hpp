// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madmm/error.hpp"
#include "madmm/fem.hpp"
#include "madmm/pdeop.hpp"
#include "madmm/problem_spec.hpp"
#include "madmm/solvers.hpp"
#include "madmm/sparse.hpp"

namespace madmm {

enum class Algorithm { kClassical, kInexact, kMadmm };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kClassical: return "classical";
    case Algorithm::kInexact: return "inexact";
    case Algorithm::kMadmm: return "madmm";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "classical") return Algorithm::kClassical;
  if (s == "inexact" || s == "ihadmm") return Algorithm::kInexact;
  if (s == "madmm") return Algorithm::kMadmm;
  throw Error(ErrorCode::kInvalidArgument, "unknown algorithm '" + s + "'");
}

/// Which complementarity residual drives termination. Both are always logged.
/// z − Π(z + λ) vanishes at every fixed point of the iteration; z − Π(z + Mλ)
/// does not, because Mλ mixes neighbouring nodes across the active-set
/// boundary, so it stalls at an O(h²) floor.
enum class Eta5Variant { kMassWeighted, kPlain };

/// Norm applied to the η residual vectors. kEuclidean takes plain coefficient
/// 2-norms. kL2 measures every quantity as the L² norm of the function it
/// represents: nodal vectors in ‖·‖_M, mass-weighted residuals in the dual norm
/// with the lumped mass, so the η values do not drift with h.
enum class ResidualNorm { kEuclidean, kL2 };

/// ξ_{k+1} = scale / (k+1)^power, summable for power > 1.
struct XiSchedule {
  double scale = 1e-3;
  double power = 2.0;
  double operator()(std::size_t k) const { return scale / std::pow(static_cast<double>(k + 1), power); }
};

/// min(start + k, target)
inline std::size_t default_level_schedule(std::size_t k, std::size_t start_level, std::size_t target_level) {
  if (start_level > target_level) throw Error(ErrorCode::kInvalidArgument, "start level above target level");
  return std::min(start_level + k, target_level);
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::kMadmm;
  std::optional<double> sigma;  // defaults to 0.1·α
  double tau = 1.618;
  double eta_tol = 1e-6;
  std::size_t max_iter = 500;
  XiSchedule xi;
  /// u-subproblem tolerance of the classical driver.
  double classical_tol = 1e-12;
  /// Step length of the classical driver; the classical scheme uses a unit step.
  double classical_tau = 1.0;
  /// First level of the multi-level schedule; nullopt means target − 3.
  std::optional<std::size_t> start_level;
  /// Overrides the default level schedule k ↦ min(start + k, target).
  std::function<std::size_t(std::size_t)> level_schedule;
  Eta5Variant eta5_variant = Eta5Variant::kPlain;
  ResidualNorm residual_norm = ResidualNorm::kL2;

  double resolved_sigma(double alpha) const { return sigma.value_or(0.1 * alpha); }

  void validate() const {
    if (sigma && !(*sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
    if (!(tau > 0.0 && tau < 0.5 * (1.0 + std::sqrt(5.0)))) {
      throw Error(ErrorCode::kInvalidArgument, "tau must lie in (0, (1+√5)/2)");
    }
    if (!(eta_tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eta_tol must be positive");
    if (!(xi.scale > 0.0) || !(xi.power > 1.0)) throw Error(ErrorCode::kInvalidArgument, "xi schedule must be summable");
    if (max_iter == 0) throw Error(ErrorCode::kInvalidArgument, "max_iter must be positive");
  }
};

/// ADMM iterate on one mesh level. u, z, λ live on control dofs; y, p on
/// state dofs.
struct IterateState {
  std::size_t level = 0;
  Vector u, z, lambda, y, p;
  double delta_norm = 0.0;
};

struct ResidualReport {
  double eta1 = 0.0, eta2 = 0.0, eta3 = 0.0, eta4 = 0.0, eta5 = 0.0;
  double eta5_plain = 0.0;  // z − Π(z + λ) variant
  double eta = 0.0;         // max of eta1..eta5 (mass-weighted eta5)
  double eta_plain = 0.0;   // max of eta1..eta4 and eta5_plain
  double R = 0.0;
};

struct IterationRow {
  std::size_t k = 0;  // 1-based iteration count
  std::size_t level = 0;
  std::size_t state_dofs = 0;
  std::size_t control_dofs = 0;
  ResidualReport res;
  double eta_used = 0.0;  // value compared against eta_tol
  double delta_norm = 0.0;
  double delta_l2 = 0.0;
  double xi = 0.0;
  std::size_t inner_iterations = 0;
  double wall_time = 0.0;  // seconds spent in this iteration
};

enum class Termination { kTolerance, kMaxIter, kFailure };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::kTolerance: return "tolerance";
    case Termination::kMaxIter: return "max_iter";
    case Termination::kFailure: return "failure";
  }
  return "unknown";
}

struct RunRecord {
  std::string problem;
  Algorithm algorithm = Algorithm::kMadmm;
  std::size_t target_level = 0;
  std::vector<IterationRow> rows;
  IterateState final_state;
  Termination termination = Termination::kMaxIter;
  std::string failure;
  std::string krylov_method;
  // config echo
  double sigma = 0.0;
  double tau = 0.0;
  double eta_tol = 0.0;
  std::size_t max_iter = 0;
  double xi_scale = 0.0;
  double xi_power = 0.0;
  std::size_t start_level = 0;
  double wall_time = 0.0;

  std::size_t iterations() const noexcept { return rows.size(); }
  bool converged() const noexcept { return termination == Termination::kTolerance; }
  double final_eta() const noexcept { return rows.empty() ? 0.0 : rows.back().eta_used; }
};

// ---------------------------------------------------------------------------
// Elementary updates
// ---------------------------------------------------------------------------

/// z = Π_[a,b](u + λ/σ) componentwise.
inline Vector z_update(std::span<const double> u, std::span<const double> lambda, double sigma, double lower, double upper) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  if (!(lower < upper)) throw Error(ErrorCode::kInvalidArgument, "bounds must satisfy a < b");
  if (u.size() != lambda.size()) throw Error(ErrorCode::kDimensionMismatch, "z_update: u and lambda differ in size");
  Vector z(u.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::min(upper, std::max(lower, u[i] + lambda[i] / sigma));
  return z;
}

/// λ⁺ = λ + τσ(u − z)
inline Vector lambda_update(std::span<const double> lambda, std::span<const double> u, std::span<const double> z,
                            double tau, double sigma) {
  if (u.size() != lambda.size() || z.size() != lambda.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "lambda_update: size mismatch");
  }
  Vector out(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tau * sigma * (u[i] - z[i]);
  return out;
}

/// Recomputes y and p for the current u in place (warm-started).
inline std::size_t refresh_state_adjoint(const AssembledLevel& level, std::span<const double> u, Vector& y, Vector& p,
                                         double tol) {
  if (y.size() != level.num_state()) y.assign(level.num_state(), 0.0);
  if (p.size() != level.num_state()) p.assign(level.num_state(), 0.0);
  std::size_t it = solve_state_inplace(level, u, y, tol).iterations;
  it += solve_adjoint_inplace(level, y, p, tol).iterations;
  return it;
}

/// Solves M s = v (mass matrix, Jacobi-preconditioned CG).
inline Vector solve_mass(const AssembledLevel& level, std::span<const double> v) {
  auto [s, rep] = solve_spd(level.mass, v, 1e-12, kMaxKrylovIterations, jacobi_preconditioner(level.mass));
  return s;
}

namespace detail {

class ResidualNorms {
 public:
  ResidualNorms(const AssembledLevel& level, ResidualNorm kind) : level_(&level), kind_(kind) {
    if (kind_ == ResidualNorm::kL2) {
      state_lumped_.resize(level.num_state());
      for (std::size_t k = 0; k < state_lumped_.size(); ++k) state_lumped_[k] = level.lumped_mass[level.dofs.state_dofs[k]];
    }
  }

  double control(std::span<const double> v) const {
    return kind_ == ResidualNorm::kEuclidean ? norm2(v) : std::sqrt(std::max(0.0, dot(v, level_->mass * v)));
  }
  double state(std::span<const double> v) const {
    return kind_ == ResidualNorm::kEuclidean ? norm2(v) : std::sqrt(std::max(0.0, dot(v, level_->mass_ss * v)));
  }
  double control_dual(std::span<const double> r) const { return dual(r, level_->lumped_mass); }
  double state_dual(std::span<const double> r) const { return dual(r, state_lumped_); }

 private:
  double dual(std::span<const double> r, std::span<const double> w) const {
    if (kind_ == ResidualNorm::kEuclidean) return norm2(r);
    double sq = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) sq += r[i] * r[i] / w[i];
    return std::sqrt(sq);
  }

  const AssembledLevel* level_;
  ResidualNorm kind_;
  Vector state_lumped_;
};

}  // namespace detail

/// η₁–η₅ for the state's (u, z, λ, y, p), plus the complexity residual
///   R = ‖∇Ĵ_h(u) + λ_prev‖² + dist²(0, −λ_prev + ∂δ_[a,b](z)) + ‖u − z‖²
/// in L²; the distance term is integrated with the lumped mass.
inline ResidualReport kkt_residuals(const AssembledLevel& level, const IterateState& s, std::span<const double> lambda_prev,
                                    ResidualNorm norm = ResidualNorm::kEuclidean) {
  const std::size_t nc = level.num_control();
  if (s.u.size() != nc || s.z.size() != nc || s.lambda.size() != nc || lambda_prev.size() != nc ||
      s.y.size() != level.num_state() || s.p.size() != level.num_state()) {
    throw Error(ErrorCode::kDimensionMismatch, "iterate does not match level");
  }
  const detail::ResidualNorms nrm(level, norm);
  ResidualReport r;
  Vector src = s.u;
  axpy(1.0, level.source_offset, src);
  Vector t = level.stiffness * s.y;
  axpy(-1.0, level.mass_sc * src, t);
  r.eta1 = nrm.state_dual(t) / (1.0 + nrm.state_dual(level.mass_sc * level.source_offset));

  const Vector u_minus_z = s.u - s.z;
  const Vector m_umz = level.mass * u_minus_z;
  r.eta2 = nrm.control_dual(m_umz) / (1.0 + nrm.control(s.u));

  t = level.mass_ss * (s.y - level.desired_state);
  axpy(1.0, level.stiffness * s.p, t);
  r.eta3 = nrm.state_dual(t) / (1.0 + nrm.state_dual(level.mass_ss * level.desired_state));

  const Vector grad = gradient_from_adjoint(level, s.u, s.p);
  const Vector m_lambda = level.mass * s.lambda;
  r.eta4 = nrm.control_dual(grad + m_lambda) / (1.0 + nrm.control(s.u));

  Vector d(nc), dp(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    d[i] = s.z[i] - std::clamp(s.z[i] + m_lambda[i], level.lower, level.upper);
    dp[i] = s.z[i] - std::clamp(s.z[i] + s.lambda[i], level.lower, level.upper);
  }
  r.eta5 = nrm.control(d) / (1.0 + nrm.control(s.z));
  r.eta5_plain = nrm.control(dp) / (1.0 + nrm.control(s.z));
  r.eta = std::max({r.eta1, r.eta2, r.eta3, r.eta4, r.eta5});
  r.eta_plain = std::max({r.eta1, r.eta2, r.eta3, r.eta4, r.eta5_plain});

  Vector v = grad;
  axpy(1.0, level.mass * lambda_prev, v);
  const double grad_term = dot(v, solve_mass(level, v));
  double dist_term = 0.0;
  for (std::size_t i = 0; i < nc; ++i) {
    double d;
    if (s.z[i] <= level.lower) {
      d = std::max(lambda_prev[i], 0.0);
    } else if (s.z[i] >= level.upper) {
      d = std::max(-lambda_prev[i], 0.0);
    } else {
      d = std::abs(lambda_prev[i]);
    }
    dist_term += level.lumped_mass[i] * d * d;
  }
  r.R = grad_term + dist_term + dot(u_minus_z, m_umz);
  return r;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

namespace detail {

struct DriverPlan {
  Algorithm algorithm;
  std::size_t target_level;
  std::size_t start_level;
  std::function<std::size_t(std::size_t)> schedule;
  std::function<double(std::size_t)> xi;
  double tau;
};

inline RunRecord run_driver(const Discretization& disc, const SolverConfig& config, const DriverPlan& plan) {
  config.validate();
  if (plan.target_level > disc.finest()) {
    throw Error(ErrorCode::kHierarchyMismatch, "target level " + std::to_string(plan.target_level) + " not in hierarchy");
  }
  using Clock = std::chrono::steady_clock;
  const auto run_start = Clock::now();
  const double sigma = config.resolved_sigma(disc.problem.alpha);

  RunRecord rec;
  rec.problem = disc.problem.name;
  rec.algorithm = plan.algorithm;
  rec.target_level = plan.target_level;
  rec.sigma = sigma;
  rec.tau = plan.tau;
  rec.eta_tol = config.eta_tol;
  rec.max_iter = config.max_iter;
  rec.xi_scale = config.xi.scale;
  rec.xi_power = config.xi.power;
  rec.start_level = plan.start_level;

  IterateState st;
  st.level = plan.schedule(0);
  if (st.level > plan.target_level) throw Error(ErrorCode::kInvalidArgument, "level schedule exceeds the target level");
  {
    const AssembledLevel& lvl = disc.level(st.level);
    st.u.assign(lvl.num_control(), 0.0);
    st.lambda.assign(lvl.num_control(), 0.0);
    st.z = lvl.clamp(st.u);
    st.y.assign(lvl.num_state(), 0.0);
    st.p.assign(lvl.num_state(), 0.0);
  }
  std::optional<BlockSystem> system;
  system.emplace(disc.level(st.level), sigma);

  for (std::size_t k = 0; k < config.max_iter; ++k) {
    const auto it_start = Clock::now();
    const std::size_t next = plan.schedule(k);
    if (next < st.level || next > plan.target_level) {
      throw Error(ErrorCode::kInvalidArgument, "level schedule must be nondecreasing and capped at the target");
    }
    if (next > st.level) {
      st.z = disc.prolong_control(st.z, st.level, next);
      st.lambda = disc.prolong_control(st.lambda, st.level, next);
      st.u = disc.prolong_control(st.u, st.level, next);
      st.y = disc.prolong_state(st.y, st.level, next);
      st.p = disc.prolong_state(st.p, st.level, next);
      st.level = next;
      system.emplace(disc.level(st.level), sigma);
    }
    const AssembledLevel& lvl = disc.level(st.level);
    const double xi = plan.xi(k);
    const Vector lambda_prev = st.lambda;

    SubproblemResult sub;
    try {
      sub = solve_u_subproblem(*system, st.z, st.lambda, xi, st.y, st.p);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSubproblemFailure) throw;
      rec.termination = Termination::kFailure;
      rec.failure = e.what();
      break;
    }
    rec.krylov_method = sub.block_report.method;
    const Vector delta = stationarity_residual(lvl, sub.u, sub.p, st.z, lambda_prev, sigma);
    st.u = std::move(sub.u);
    st.y = std::move(sub.y);
    st.p = std::move(sub.p);
    st.delta_norm = sub.delta_norm;

    st.z = z_update(st.u, lambda_prev, sigma, lvl.lower, lvl.upper);
    st.lambda = lambda_update(lambda_prev, st.u, st.z, plan.tau, sigma);

    IterationRow row;
    row.k = k + 1;
    row.level = st.level;
    row.state_dofs = lvl.num_state();
    row.control_dofs = lvl.num_control();
    row.xi = xi;
    row.delta_norm = sub.delta_norm;
    row.delta_l2 = std::sqrt(std::max(0.0, dot(delta, solve_mass(lvl, delta))));
    row.inner_iterations = sub.krylov_iterations;
    row.inner_iterations += refresh_state_adjoint(lvl, st.u, st.y, st.p, 0.1 * config.eta_tol);
    row.res = kkt_residuals(lvl, st, lambda_prev, config.residual_norm);
    row.eta_used = config.eta5_variant == Eta5Variant::kMassWeighted ? row.res.eta : row.res.eta_plain;
    row.wall_time = std::chrono::duration<double>(Clock::now() - it_start).count();
    rec.rows.push_back(row);

    if (row.eta_used < config.eta_tol && st.level == plan.target_level) {
      rec.termination = Termination::kTolerance;
      break;
    }
  }
  rec.final_state = std::move(st);
  rec.wall_time = std::chrono::duration<double>(Clock::now() - run_start).count();
  return rec;
}

}  // namespace detail

/// Fixed level, u-subproblem solved to ‖δ‖₂ ≤ classical_tol, unit step.
inline RunRecord run_classical(const Discretization& disc, std::size_t level, const SolverConfig& config) {
  const double tol = config.classical_tol;
  return detail::run_driver(disc, config,
                            {Algorithm::kClassical, level, level, [level](std::size_t) { return level; },
                             [tol](std::size_t) { return tol; }, config.classical_tau});
}

/// Fixed level, u-subproblem solved to ‖δ‖₂ ≤ ξ_{k+1}.
inline RunRecord run_inexact(const Discretization& disc, std::size_t level, const SolverConfig& config) {
  const XiSchedule xi = config.xi;
  return detail::run_driver(disc, config,
                            {Algorithm::kInexact, level, level, [level](std::size_t) { return level; },
                             [xi](std::size_t k) { return xi(k); }, config.tau});
}

/// Multi-level inexact ADMM: the active level follows the level schedule and
/// z, λ are carried to finer levels by nodal interpolation.
inline RunRecord run_madmm(const Discretization& disc, std::size_t target_level, const SolverConfig& config) {
  const std::size_t start = config.start_level.value_or(target_level >= 3 ? target_level - 3 : 0);
  if (start > target_level) throw Error(ErrorCode::kInvalidArgument, "start level above target level");
  std::function<std::size_t(std::size_t)> schedule = config.level_schedule;
  if (!schedule) schedule = [start, target_level](std::size_t k) { return default_level_schedule(k, start, target_level); };
  const XiSchedule xi = config.xi;
  return detail::run_driver(disc, config,
                            {Algorithm::kMadmm, target_level, start, std::move(schedule),
                             [xi](std::size_t k) { return xi(k); }, config.tau});
}

inline RunRecord run_algorithm(const Discretization& disc, std::size_t target_level, const SolverConfig& config) {
  switch (config.algorithm) {
    case Algorithm::kClassical: return run_classical(disc, target_level, config);
    case Algorithm::kInexact: return run_inexact(disc, target_level, config);
    case Algorithm::kMadmm: return run_madmm(disc, target_level, config);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown algorithm");
}

}  // namespace madmm
