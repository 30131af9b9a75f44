// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "madmm/error.hpp"
#include "madmm/mesh.hpp"
#include "madmm/multigrid.hpp"
#include "madmm/problem_spec.hpp"
#include "madmm/solvers.hpp"
#include "madmm/sparse.hpp"

namespace madmm {

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadraturePoint {
  std::array<double, 3> barycentric;
  double weight;  // fraction of the triangle area
};

/// Symmetric six-point rule, exact for polynomials of degree 4.
inline constexpr std::array<QuadraturePoint, 6> kTriangleRule6 = {{
    {{0.445948490915965, 0.445948490915965, 0.108103018168070}, 0.223381589678011},
    {{0.445948490915965, 0.108103018168070, 0.445948490915965}, 0.223381589678011},
    {{0.108103018168070, 0.445948490915965, 0.445948490915965}, 0.223381589678011},
    {{0.091576213509771, 0.091576213509771, 0.816847572980459}, 0.109951743655322},
    {{0.091576213509771, 0.816847572980459, 0.091576213509771}, 0.109951743655322},
    {{0.816847572980459, 0.091576213509771, 0.091576213509771}, 0.109951743655322},
}};

inline Point map_to_triangle(const TriangleMesh& mesh, std::size_t t, const std::array<double, 3>& bary) {
  const auto& tri = mesh.triangles()[t];
  Point x{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    x[0] += bary[i] * mesh.nodes()[tri[i]][0];
    x[1] += bary[i] * mesh.nodes()[tri[i]][1];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Nodal interpolation, norms
// ---------------------------------------------------------------------------

/// f(x_i) over all mesh nodes.
inline Vector interpolate_nodal(const ScalarField& f, const TriangleMesh& mesh) {
  Vector v(mesh.num_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = f(mesh.nodes()[i]);
    if (!std::isfinite(v[i])) throw Error(ErrorCode::kInvalidFunction, "non-finite sample at node " + std::to_string(i));
  }
  return v;
}

/// √∫_{Ω_h} (u_h − exact)², u_h given by nodal coefficients on all nodes.
inline double l2_error(std::span<const double> coeffs, const ScalarField& exact, const TriangleMesh& mesh) {
  if (coeffs.size() != mesh.num_nodes()) throw Error(ErrorCode::kDimensionMismatch, "l2_error: one coefficient per node expected");
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = mesh.signed_area(t);
    double local = 0.0;
    for (const auto& q : kTriangleRule6) {
      const double uh = q.barycentric[0] * coeffs[tri[0]] + q.barycentric[1] * coeffs[tri[1]] + q.barycentric[2] * coeffs[tri[2]];
      const double d = uh - exact(map_to_triangle(mesh, t, q.barycentric));
      local += q.weight * d * d;
    }
    sum += area * local;
  }
  return std::sqrt(sum);
}

/// uᵀ M v
inline double l2_inner(const SparseMatrix& m, std::span<const double> u, std::span<const double> v) {
  if (u.size() != m.rows() || v.size() != m.cols()) throw Error(ErrorCode::kDimensionMismatch, "l2_inner: sizes do not match M");
  return dot(u, m * v);
}

// ---------------------------------------------------------------------------
// Element matrices and global assembly (all nodes, no boundary handling)
// ---------------------------------------------------------------------------

namespace detail {

struct ElementGeometry {
  double area;
  std::array<std::array<double, 2>, 3> grad;  // gradients of the barycentric basis
};

inline ElementGeometry element_geometry(const TriangleMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles()[t];
  const double area = mesh.signed_area(t);
  if (!(area > 0.0)) throw Error(ErrorCode::kInvalidMesh, "degenerate or inverted triangle " + std::to_string(t));
  ElementGeometry g{area, {}};
  for (int i = 0; i < 3; ++i) {
    const Point& pj = mesh.nodes()[tri[(i + 1) % 3]];
    const Point& pk = mesh.nodes()[tri[(i + 2) % 3]];
    g.grad[i] = {(pj[1] - pk[1]) / (2.0 * area), (pk[0] - pj[0]) / (2.0 * area)};
  }
  return g;
}

}  // namespace detail

inline SparseMatrix assemble_mass(const TriangleMesh& mesh) {
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = detail::element_geometry(mesh, t).area;
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trips.push_back({tri[i], tri[j], area * (i == j ? 2.0 : 1.0) / 12.0});
    }
  }
  return SparseMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), std::move(trips));
}

/// a(φ_i, φ_j) = ∫ (A∇φ_j)·∇φ_i + c₀ φ_i φ_j over all nodes.
inline SparseMatrix assemble_stiffness(const TriangleMesh& mesh, const std::array<double, 4>& diffusion = {1.0, 0.0, 0.0, 1.0},
                                       double reaction = 0.0) {
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto g = detail::element_geometry(mesh, t);
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double ax = diffusion[0] * g.grad[j][0] + diffusion[1] * g.grad[j][1];
        const double ay = diffusion[2] * g.grad[j][0] + diffusion[3] * g.grad[j][1];
        double v = g.area * (g.grad[i][0] * ax + g.grad[i][1] * ay);
        if (reaction != 0.0) v += reaction * g.area * (i == j ? 2.0 : 1.0) / 12.0;
        trips.push_back({tri[i], tri[j], v});
      }
    }
  }
  return SparseMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), std::move(trips));
}

/// ∫ f φ_i by the six-point rule.
inline Vector load_vector(const ScalarField& f, const TriangleMesh& mesh) {
  Vector b(mesh.num_nodes(), 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = mesh.signed_area(t);
    for (const auto& q : kTriangleRule6) {
      const double fv = f(map_to_triangle(mesh, t, q.barycentric)) * q.weight * area;
      for (int i = 0; i < 3; ++i) b[tri[i]] += fv * q.barycentric[i];
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Degrees of freedom
// ---------------------------------------------------------------------------

/// State unknowns are interior nodes (homogeneous Dirichlet eliminated);
/// control unknowns are all nodes in mesh order.
struct DofMap {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::vector<std::size_t> state_dofs;     // node index of each state unknown
  std::vector<std::size_t> node_to_state;  // kNone on boundary nodes
  std::vector<std::size_t> boundary_nodes;
  std::size_t num_nodes = 0;

  DofMap() = default;
  explicit DofMap(const TriangleMesh& mesh) : node_to_state(mesh.num_nodes(), kNone), num_nodes(mesh.num_nodes()) {
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
      if (mesh.is_boundary(i)) {
        boundary_nodes.push_back(i);
      } else {
        node_to_state[i] = state_dofs.size();
        state_dofs.push_back(i);
      }
    }
  }

  std::size_t num_state() const noexcept { return state_dofs.size(); }
  std::size_t num_control() const noexcept { return num_nodes; }

  Vector restrict_to_state(std::span<const double> full) const {
    Vector s(state_dofs.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = full[state_dofs[k]];
    return s;
  }

  Vector extend_state(std::span<const double> state) const {
    Vector full(num_nodes, 0.0);
    for (std::size_t k = 0; k < state.size(); ++k) full[state_dofs[k]] = state[k];
    return full;
  }
};

/// Everything one mesh level contributes to the discrete problem.
struct AssembledLevel {
  MeshPtr mesh;
  DofMap dofs;
  std::size_t level_index = 0;
  SparseMatrix stiffness;      // K, state × state
  SparseMatrix mass;           // M_cc, control × control
  SparseMatrix mass_ss;        // M_ss, state × state
  SparseMatrix mass_sc;        // M_sc, state × control
  Vector lumped_mass;          // row sums of M_cc
  Vector desired_state;        // y_d on state dofs
  Vector source_offset;        // y_r on control dofs
  double alpha = 1.0;
  double lower = 0.0;
  double upper = 1.0;
  // Interior-dof transfers from the coarsest level up to this one (empty
  // when assembled standalone) and the V-cycle built on them.
  std::vector<SparseMatrix> interior_chain;
  std::shared_ptr<const Multigrid> stiffness_mg;

  std::size_t num_state() const noexcept { return dofs.num_state(); }
  std::size_t num_control() const noexcept { return dofs.num_control(); }

  /// V-cycle when a hierarchy is available, Jacobi otherwise.
  Preconditioner stiffness_preconditioner() const {
    if (stiffness_mg) return stiffness_mg->as_preconditioner(stiffness_mg);
    return jacobi_preconditioner(stiffness);
  }

  Vector clamp(std::span<const double> v) const {
    Vector r(v.begin(), v.end());
    for (double& x : r) x = std::min(upper, std::max(lower, x));
    return r;
  }
};

/// P1 assembly of one level. y_d and y_r are sampled by nodal interpolation;
/// y_d enters on state dofs, y_r on control dofs.
inline AssembledLevel assemble(const MeshPtr& mesh, const ProblemSpec& problem) {
  problem.validate();
  AssembledLevel lvl;
  lvl.mesh = mesh;
  lvl.dofs = DofMap(*mesh);
  const DofMap& d = lvl.dofs;
  std::vector<std::size_t> all(mesh->num_nodes());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  const SparseMatrix k_full = assemble_stiffness(*mesh, problem.diffusion, problem.reaction);
  lvl.mass = assemble_mass(*mesh);
  lvl.stiffness = k_full.select(d.state_dofs, d.state_dofs);
  lvl.mass_ss = lvl.mass.select(d.state_dofs, d.state_dofs);
  lvl.mass_sc = lvl.mass.select(d.state_dofs, all);
  lvl.lumped_mass = lvl.mass.row_sums();
  lvl.desired_state = d.restrict_to_state(interpolate_nodal(problem.desired_state, *mesh));
  lvl.source_offset = interpolate_nodal(problem.source_offset, *mesh);
  lvl.alpha = problem.alpha;
  lvl.lower = problem.lower;
  lvl.upper = problem.upper;
  return lvl;
}

/// A problem assembled on every level of a nested hierarchy, with multigrid
/// for the stiffness matrix on each level.
struct Discretization {
  ProblemSpec problem;
  MeshHierarchy hierarchy;
  std::vector<std::shared_ptr<const AssembledLevel>> levels;

  std::size_t finest() const { return levels.size() - 1; }
  const AssembledLevel& level(std::size_t l) const {
    if (l >= levels.size()) throw Error(ErrorCode::kHierarchyMismatch, "level " + std::to_string(l) + " not assembled");
    return *levels[l];
  }

  /// Interpolates a control-dof vector from level `from` to level `to`.
  Vector prolong_control(std::span<const double> v, std::size_t from, std::size_t to) const {
    return hierarchy.prolong(v, from, to);
  }

  /// Interpolates a state-dof vector (zero boundary values) between levels.
  Vector prolong_state(std::span<const double> v, std::size_t from, std::size_t to) const {
    const Vector full = level(from).dofs.extend_state(v);
    return level(to).dofs.restrict_to_state(hierarchy.prolong(full, from, to));
  }
};

inline Discretization discretize(const ProblemSpec& problem, MeshHierarchy hierarchy) {
  Discretization disc{problem, std::move(hierarchy), {}};
  const auto& meshes = disc.hierarchy.levels;
  std::vector<SparseMatrix> chain;
  for (std::size_t l = 0; l < meshes.size(); ++l) {
    auto lvl = std::make_shared<AssembledLevel>(assemble(meshes[l], problem));
    lvl->level_index = l;
    if (l > 0) {
      const DofMap& coarse = disc.levels[l - 1]->dofs;
      chain.push_back(disc.hierarchy.prolongations[l - 1].select(lvl->dofs.state_dofs, coarse.state_dofs));
    }
    lvl->interior_chain = chain;
    if (lvl->num_state() > 0) {
      lvl->stiffness_mg = std::make_shared<const Multigrid>(lvl->stiffness, lvl->interior_chain);
    }
    disc.levels.push_back(std::move(lvl));
  }
  return disc;
}

}  // namespace madmm
