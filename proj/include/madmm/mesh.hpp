// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madmm/error.hpp"
#include "madmm/sparse.hpp"

namespace madmm {

using Point = std::array<double, 2>;
using TriangleIndices = std::array<std::size_t, 3>;

/// Which analytic domain a mesh approximates; decides boundary snapping.
enum class DomainKind { kUnitSquare, kUnitDisk, kOther };

/// Provenance of a node of a refined mesh. A copied coarse node has
/// first == second; an edge midpoint stores both endpoints.
struct NodeOrigin {
  std::size_t first = 0;
  std::size_t second = 0;
  bool is_copy() const noexcept { return first == second; }
};

/// Conforming P1 triangulation. Immutable once built; refinement returns a new
/// mesh that keeps its parent alive through a shared pointer.
class TriangleMesh {
 public:
  TriangleMesh(std::vector<Point> nodes, std::vector<TriangleIndices> triangles, DomainKind domain = DomainKind::kOther,
               std::size_t level = 0, std::shared_ptr<const TriangleMesh> parent = nullptr,
               std::vector<NodeOrigin> origins = {})
      : nodes_(std::move(nodes)),
        triangles_(std::move(triangles)),
        domain_(domain),
        level_(level),
        parent_(std::move(parent)),
        origins_(std::move(origins)) {
    build_topology();
  }

  std::span<const Point> nodes() const noexcept { return nodes_; }
  std::span<const TriangleIndices> triangles() const noexcept { return triangles_; }
  std::span<const std::uint8_t> boundary_mask() const noexcept { return boundary_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_boundary_nodes() const noexcept {
    return static_cast<std::size_t>(std::count(boundary_.begin(), boundary_.end(), std::uint8_t{1}));
  }
  std::size_t num_interior_nodes() const noexcept { return num_nodes() - num_boundary_nodes(); }
  bool is_boundary(std::size_t node) const { return boundary_[node] != 0; }
  DomainKind domain() const noexcept { return domain_; }
  std::size_t level() const noexcept { return level_; }
  const std::shared_ptr<const TriangleMesh>& parent() const noexcept { return parent_; }
  std::span<const NodeOrigin> origins() const noexcept { return origins_; }

  /// Undirected edges as (lo, hi) node pairs, in first-visit order.
  std::span<const std::array<std::size_t, 2>> edges() const noexcept { return edges_; }
  /// Number of triangles sharing each edge (1 on the boundary, 2 inside).
  std::span<const std::uint8_t> edge_valence() const noexcept { return edge_valence_; }
  /// Edge indices of the three sides (v0v1, v1v2, v2v0) of every triangle.
  std::span<const std::array<std::size_t, 3>> triangle_edges() const noexcept { return triangle_edges_; }

  double signed_area(std::size_t t) const {
    const auto& [a, b, c] = triangles_[t];
    const Point& p = nodes_[a];
    const Point& q = nodes_[b];
    const Point& r = nodes_[c];
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]));
  }

  double total_area() const {
    double s = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) s += signed_area(t);
    return s;
  }

  /// rho_T: longest side.
  double diameter(std::size_t t) const {
    const auto& tri = triangles_[t];
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = std::max(d, distance(nodes_[tri[i]], nodes_[tri[(i + 1) % 3]]));
    return d;
  }

  /// sigma_T: diameter of the inscribed circle.
  double inscribed_diameter(std::size_t t) const {
    const auto& tri = triangles_[t];
    double perimeter = 0.0;
    for (int i = 0; i < 3; ++i) perimeter += distance(nodes_[tri[i]], nodes_[tri[(i + 1) % 3]]);
    return 4.0 * signed_area(t) / perimeter;
  }

  /// h := max_T rho_T
  double mesh_size() const {
    double h = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) h = std::max(h, diameter(t));
    return h;
  }

  /// max_T rho_T / sigma_T
  double quality() const {
    double q = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) q = std::max(q, diameter(t) / inscribed_diameter(t));
    return q;
  }

  /// Throws invalid-mesh unless every triangle is positively oriented, every
  /// edge has at most two neighbours and no node hangs on a boundary edge.
  void check_conforming() const {
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      if (!(signed_area(t) > 0.0)) {
        throw Error(ErrorCode::kInvalidMesh, "triangle " + std::to_string(t) + " has non-positive area");
      }
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edge_valence_[e] > 2) throw Error(ErrorCode::kInvalidMesh, "edge shared by more than two triangles");
    }
    // A hanging node sits on a valence-1 edge and is itself a boundary node,
    // so checking boundary nodes against boundary edges is sufficient.
    std::vector<std::size_t> bnodes;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (boundary_[i]) bnodes.push_back(i);
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edge_valence_[e] != 1) continue;
      const Point& p = nodes_[edges_[e][0]];
      const Point& q = nodes_[edges_[e][1]];
      const double len2 = (q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]);
      for (std::size_t i : bnodes) {
        if (i == edges_[e][0] || i == edges_[e][1]) continue;
        const Point& x = nodes_[i];
        const double cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
        const double proj = (q[0] - p[0]) * (x[0] - p[0]) + (q[1] - p[1]) * (x[1] - p[1]);
        if (std::abs(cross) <= 1e-12 * len2 && proj > 0.0 && proj < len2) {
          throw Error(ErrorCode::kInvalidMesh, "hanging node " + std::to_string(i) + " on a boundary edge");
        }
      }
    }
  }

 private:
  static double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

  void build_topology() {
    if (!origins_.empty() && origins_.size() != nodes_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "node origin list does not match node count");
    }
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
    triangle_edges_.resize(triangles_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (int i = 0; i < 3; ++i) {
        const std::size_t a = triangles_[t][i];
        const std::size_t b = triangles_[t][(i + 1) % 3];
        if (a >= nodes_.size() || b >= nodes_.size() || a == b) {
          throw Error(ErrorCode::kInvalidMesh, "triangle " + std::to_string(t) + " has invalid node indices");
        }
        const auto key = std::minmax(a, b);
        auto [it, inserted] = index.try_emplace(key, edges_.size());
        if (inserted) {
          edges_.push_back({key.first, key.second});
          edge_valence_.push_back(0);
        }
        ++edge_valence_[it->second];
        triangle_edges_[t][static_cast<std::size_t>(i)] = it->second;
      }
    }
    boundary_.assign(nodes_.size(), 0);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edge_valence_[e] == 1) {
        boundary_[edges_[e][0]] = 1;
        boundary_[edges_[e][1]] = 1;
      }
    }
  }

  std::vector<Point> nodes_;
  std::vector<TriangleIndices> triangles_;
  DomainKind domain_;
  std::size_t level_;
  std::shared_ptr<const TriangleMesh> parent_;
  std::vector<NodeOrigin> origins_;
  std::vector<std::array<std::size_t, 2>> edges_;
  std::vector<std::uint8_t> edge_valence_;
  std::vector<std::array<std::size_t, 3>> triangle_edges_;
  std::vector<std::uint8_t> boundary_;
};

using MeshPtr = std::shared_ptr<const TriangleMesh>;

/// (n+1)² grid nodes on [0,1]², each cell split along its (0,0)-(1,1) diagonal.
inline MeshPtr unit_square_mesh(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "unit_square_mesh needs n >= 1");
  std::vector<Point> nodes;
  nodes.reserve((n + 1) * (n + 1));
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      nodes.push_back({static_cast<double>(i) / static_cast<double>(n), static_cast<double>(j) / static_cast<double>(n)});
    }
  }
  std::vector<TriangleIndices> tris;
  tris.reserve(2 * n * n);
  const auto id = [n](std::size_t i, std::size_t j) { return j * (n + 1) + i; };
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return std::make_shared<const TriangleMesh>(std::move(nodes), std::move(tris), DomainKind::kUnitSquare);
}

/// Seed mesh for the unit disk: the origin plus the vertices of a regular
/// octagon on the unit circle (vertex k at angle kπ/4), joined as a fan of
/// eight triangles.
inline MeshPtr unit_disk_seed() {
  constexpr std::size_t kSides = 8;
  std::vector<Point> nodes{{0.0, 0.0}};
  for (std::size_t k = 0; k < kSides; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(kSides);
    nodes.push_back({std::cos(t), std::sin(t)});
  }
  std::vector<TriangleIndices> tris;
  for (std::size_t k = 0; k < kSides; ++k) tris.push_back({0, 1 + k, 1 + (k + 1) % kSides});
  return std::make_shared<const TriangleMesh>(std::move(nodes), std::move(tris), DomainKind::kUnitDisk);
}

/// Splits each triangle into four through its edge midpoints. Boundary
/// midpoints of disk meshes are projected radially onto the unit circle.
inline MeshPtr refine_uniform(const MeshPtr& mesh) {
  mesh->check_conforming();
  const auto coarse_nodes = mesh->nodes();
  const auto edges = mesh->edges();
  const auto valence = mesh->edge_valence();
  const std::size_t nv = coarse_nodes.size();

  std::vector<Point> nodes(coarse_nodes.begin(), coarse_nodes.end());
  std::vector<NodeOrigin> origins(nv);
  for (std::size_t i = 0; i < nv; ++i) origins[i] = {i, i};
  nodes.reserve(nv + edges.size());
  origins.reserve(nv + edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Point& a = coarse_nodes[edges[e][0]];
    const Point& b = coarse_nodes[edges[e][1]];
    Point m{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    if (mesh->domain() == DomainKind::kUnitDisk && valence[e] == 1) {
      const double r = std::hypot(m[0], m[1]);
      m = {m[0] / r, m[1] / r};
    }
    nodes.push_back(m);
    origins.push_back({edges[e][0], edges[e][1]});
  }

  std::vector<TriangleIndices> tris;
  tris.reserve(4 * mesh->num_triangles());
  const auto tri_edges = mesh->triangle_edges();
  for (std::size_t t = 0; t < mesh->num_triangles(); ++t) {
    const auto& [a, b, c] = mesh->triangles()[t];
    const std::size_t ab = nv + tri_edges[t][0];
    const std::size_t bc = nv + tri_edges[t][1];
    const std::size_t ca = nv + tri_edges[t][2];
    tris.push_back({a, ab, ca});
    tris.push_back({ab, b, bc});
    tris.push_back({ca, bc, c});
    tris.push_back({ab, bc, ca});
  }
  return std::make_shared<const TriangleMesh>(std::move(nodes), std::move(tris), mesh->domain(), mesh->level() + 1,
                                              mesh, std::move(origins));
}

/// Seed octagon refined `level` times.
inline MeshPtr unit_disk_mesh(std::size_t level) {
  MeshPtr m = unit_disk_seed();
  for (std::size_t l = 0; l < level; ++l) m = refine_uniform(m);
  return m;
}

/// Nodal interpolation of coarse P1 functions at the nodes of the uniform
/// refinement `fine` of `coarse`: unit rows for copied nodes, two 0.5 entries
/// for edge midpoints.
inline SparseMatrix prolongation(const TriangleMesh& coarse, const TriangleMesh& fine) {
  if (fine.parent().get() != &coarse || fine.origins().size() != fine.num_nodes()) {
    throw Error(ErrorCode::kHierarchyMismatch, "fine mesh is not the refinement of the given coarse mesh");
  }
  std::vector<Triplet> trips;
  trips.reserve(fine.num_nodes() * 2);
  const auto origins = fine.origins();
  for (std::size_t i = 0; i < origins.size(); ++i) {
    if (origins[i].first >= coarse.num_nodes() || origins[i].second >= coarse.num_nodes()) {
      throw Error(ErrorCode::kHierarchyMismatch, "node provenance outside the coarse mesh");
    }
    if (origins[i].is_copy()) {
      trips.push_back({i, origins[i].first, 1.0});
    } else {
      trips.push_back({i, origins[i].first, 0.5});
      trips.push_back({i, origins[i].second, 0.5});
    }
  }
  return SparseMatrix::from_triplets(fine.num_nodes(), coarse.num_nodes(), std::move(trips));
}

/// Nested meshes from coarsest to finest with the interpolation operators
/// between consecutive levels.
struct MeshHierarchy {
  std::vector<MeshPtr> levels;
  std::vector<SparseMatrix> prolongations;  // prolongations[i] : levels[i] -> levels[i+1]

  std::size_t finest_level() const { return levels.size() - 1; }

  /// Refines the current finest mesh until `level` exists.
  void extend_to(std::size_t level) {
    while (levels.size() <= level) {
      MeshPtr fine = refine_uniform(levels.back());
      prolongations.push_back(prolongation(*levels.back(), *fine));
      levels.push_back(std::move(fine));
    }
  }

  /// Applies the chain of prolongations from level `from` up to level `to`.
  Vector prolong(std::span<const double> values, std::size_t from, std::size_t to) const {
    if (from > to || to >= levels.size() || values.size() != levels[from]->num_nodes()) {
      throw Error(ErrorCode::kHierarchyMismatch, "prolongation request outside the hierarchy");
    }
    Vector v(values.begin(), values.end());
    for (std::size_t l = from; l < to; ++l) v = prolongations[l] * v;
    return v;
  }
};

inline MeshHierarchy make_hierarchy(MeshPtr root, std::size_t finest) {
  MeshHierarchy h;
  h.levels.push_back(std::move(root));
  h.extend_to(finest);
  return h;
}

/// Level l is unit_square_mesh(2^l).
inline MeshHierarchy square_hierarchy(std::size_t finest) { return make_hierarchy(unit_square_mesh(1), finest); }

inline MeshHierarchy disk_hierarchy(std::size_t finest) { return make_hierarchy(unit_disk_seed(), finest); }

/// Plain-text dump: a header line, node count, one "x y boundary" line per
/// node, triangle count, one "i j k" line per triangle.
inline void write_mesh(std::ostream& os, const TriangleMesh& mesh) {
  os << "madmm-mesh 1\n" << mesh.num_nodes() << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    os << mesh.nodes()[i][0] << ' ' << mesh.nodes()[i][1] << ' ' << int{mesh.boundary_mask()[i]} << '\n';
  }
  os << mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace madmm
