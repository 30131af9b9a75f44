// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "madmm/admm.hpp"
#include "madmm/error.hpp"
#include "madmm/fem.hpp"
#include "madmm/mesh.hpp"
#include "madmm/pdeop.hpp"
#include "madmm/problem_spec.hpp"
#include "madmm/solvers.hpp"

namespace madmm {

/// Unit disk, y_d = (1 − |x|²) x₁, α = 0.1, [a, b] = [−0.2, 0.2]. No closed-form
/// solution.
inline ProblemSpec example1() {
  ProblemSpec p;
  p.name = "example1";
  p.domain = DomainKind::kUnitDisk;
  p.alpha = 0.1;
  p.lower = -0.2;
  p.upper = 0.2;
  p.desired_state = [](const Point& x) { return (1.0 - (x[0] * x[0] + x[1] * x[1])) * x[0]; };
  return p;
}

/// Continuous P1 function sampled on the (n+1)² lattice of unit_square_mesh(n),
/// evaluated with the same diagonal split.
class LatticeFunction {
 public:
  LatticeFunction(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    if (values_.size() != (n_ + 1) * (n_ + 1)) throw Error(ErrorCode::kDimensionMismatch, "lattice value count");
  }

  double operator()(const Point& x) const {
    const double nd = static_cast<double>(n_);
    const double gx = std::clamp(x[0], 0.0, 1.0) * nd;
    const double gy = std::clamp(x[1], 0.0, 1.0) * nd;
    const std::size_t i = std::min(static_cast<std::size_t>(gx), n_ - 1);
    const std::size_t j = std::min(static_cast<std::size_t>(gy), n_ - 1);
    const double s = gx - static_cast<double>(i);
    const double t = gy - static_cast<double>(j);
    const double v00 = at(i, j), v10 = at(i + 1, j), v11 = at(i + 1, j + 1), v01 = at(i, j + 1);
    if (s >= t) return v00 + s * (v10 - v00) + t * (v11 - v10);
    return v00 + s * (v11 - v01) + t * (v01 - v00);
  }

  std::size_t subdivisions() const noexcept { return n_; }

 private:
  double at(std::size_t i, std::size_t j) const { return values_[j * (n_ + 1) + i]; }

  std::size_t n_;
  std::vector<double> values_;
};

inline double example2_exact_control(const Point& x) {
  const double s = std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[1]);
  return std::min(1.0, std::max(0.3, 2.0 * s));
}

/// Discrete S r on unit_square_mesh(2^reference_level): K s = ∫ r φ_i.
inline LatticeFunction solve_on_square_lattice(const ScalarField& source, std::size_t reference_level) {
  ProblemSpec poisson;
  const MeshHierarchy h = square_hierarchy(reference_level);
  const Discretization disc = discretize(poisson, h);
  const AssembledLevel& lvl = disc.level(reference_level);
  const Vector load = lvl.dofs.restrict_to_state(load_vector(source, *lvl.mesh));
  auto [s, rep] = solve_spd(lvl.stiffness, load, 1e-12, kMaxKrylovIterations, lvl.stiffness_preconditioner());
  if (!rep.converged && rep.final_residual > 1e-10 * norm2(load)) {
    throw Error(ErrorCode::kSubproblemFailure, "reference Poisson solve did not converge: " + rep.diagnostic);
  }
  // Refined node order is not lattice order; map through coordinates.
  const std::size_t n = std::size_t{1} << reference_level;
  std::vector<double> values((n + 1) * (n + 1), 0.0);
  const Vector full = lvl.dofs.extend_state(s);
  for (std::size_t k = 0; k < full.size(); ++k) {
    const Point& x = lvl.mesh->nodes()[k];
    const auto i = static_cast<std::size_t>(std::lround(x[0] * static_cast<double>(n)));
    const auto j = static_cast<std::size_t>(std::lround(x[1] * static_cast<double>(n)));
    values[j * (n + 1) + i] = full[k];
  }
  return LatticeFunction(n, std::move(values));
}

inline constexpr std::size_t kExample2MinReferenceLevel = 3;

/// Unit square, α = 10⁻³, [a, b] = [0.3, 1], exact control
/// r = min(1, max(0.3, 2 sin πx₁ sin πx₂)) and y_d = 4π²α sin πx₁ sin πx₂ + S r,
/// with S r computed on unit_square_mesh(2^reference_level). Then y = S r and
/// p = S*(y_d − y) = 2α sin πx₁ sin πx₂, so r = Π_[a,b](p/α) is optimal.
inline ProblemSpec example2(std::size_t reference_level) {
  if (reference_level < kExample2MinReferenceLevel) {
    throw Error(ErrorCode::kInvalidArgument, "example2 reference level must be at least " +
                                                 std::to_string(kExample2MinReferenceLevel));
  }
  ProblemSpec p;
  p.name = "example2";
  p.domain = DomainKind::kUnitSquare;
  p.alpha = 1e-3;
  p.lower = 0.3;
  p.upper = 1.0;
  p.exact_control = example2_exact_control;
  auto sr = std::make_shared<const LatticeFunction>(solve_on_square_lattice(example2_exact_control, reference_level));
  const double alpha = p.alpha;
  p.desired_state = [sr, alpha](const Point& x) {
    const double s = std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[1]);
    return 4.0 * std::numbers::pi * std::numbers::pi * alpha * s + (*sr)(x);
  };
  return p;
}

/// Mesh hierarchy matching the problem's domain, up to `finest`.
inline MeshHierarchy hierarchy_for(const ProblemSpec& problem, std::size_t finest) {
  switch (problem.domain) {
    case DomainKind::kUnitSquare: return square_hierarchy(finest);
    case DomainKind::kUnitDisk: return disk_hierarchy(finest);
    case DomainKind::kOther: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "no built-in mesh generator for this domain");
}

/// Finest disk level used for reference solutions (h ≈ 2⁻⁸).
inline constexpr std::size_t kDiskReferenceLevel = 8;
inline constexpr double kReferenceEtaTol = 1e-9;

/// Raised when a reference solve does not reach its tolerance; carries the run.
class ReferenceError : public Error {
 public:
  ReferenceError(const std::string& what, RunRecord record)
      : Error(ErrorCode::kSubproblemFailure, what), record_(std::move(record)) {}
  const RunRecord& record() const noexcept { return record_; }

 private:
  RunRecord record_;
};

/// Tightly converged (η < 1e-9 or tighter) control on `fine_level`, for
/// measuring E(h) when no exact control is known. Returns the projected
/// iterate z, which is box-feasible; u differs from it by O(η).
inline Vector reference_solution(const Discretization& disc, std::size_t fine_level, SolverConfig config) {
  config.eta_tol = std::min(config.eta_tol, kReferenceEtaTol);
  config.max_iter = std::max<std::size_t>(config.max_iter, 500);
  RunRecord rec = run_madmm(disc, fine_level, config);
  if (!rec.converged()) {
    const std::string what = "reference solve on level " + std::to_string(fine_level) + " stopped by " +
                             to_string(rec.termination) + " at eta " + std::to_string(rec.final_eta());
    throw ReferenceError(what, std::move(rec));
  }
  return std::move(rec.final_state.z);
}

inline Vector reference_solution(const ProblemSpec& problem, std::size_t fine_level, const SolverConfig& config) {
  const Discretization disc = discretize(problem, hierarchy_for(problem, fine_level));
  return reference_solution(disc, fine_level, config);
}

/// ‖I u − u_ref‖ in L² on the reference level, u living on `level`.
inline double error_against_reference(const Discretization& disc, std::span<const double> u, std::size_t level,
                                      std::span<const double> reference, std::size_t reference_level) {
  if (reference_level < level) throw Error(ErrorCode::kInvalidArgument, "reference level must not be coarser");
  Vector d = disc.prolong_control(u, level, reference_level);
  if (d.size() != reference.size()) throw Error(ErrorCode::kDimensionMismatch, "reference size");
  axpy(-1.0, reference, d);
  return std::sqrt(std::max(0.0, dot(d, disc.level(reference_level).mass * d)));
}

/// Computes each (problem, level) reference once; concurrent callers for the
/// same key wait for the first.
class ReferenceCache {
 public:
  std::shared_ptr<const Vector> get(const Discretization& disc, std::size_t level, const SolverConfig& config) {
    std::shared_ptr<Slot> slot;
    {
      const std::lock_guard lock(mutex_);
      auto& entry = slots_[{disc.problem.name, level}];
      if (!entry) entry = std::make_shared<Slot>();
      slot = entry;
    }
    std::call_once(slot->once, [&] { slot->value = std::make_shared<const Vector>(reference_solution(disc, level, config)); });
    return slot->value;
  }

 private:
  struct Slot {
    std::once_flag once;
    std::shared_ptr<const Vector> value;
  };
  std::mutex mutex_;
  std::map<std::pair<std::string, std::size_t>, std::shared_ptr<Slot>> slots_;
};

}  // namespace madmm
