#pragma once

#include "pdelmi/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pdelmi::mesh {

using Point = DenseVector;

struct Interval {
  double a = 0.0, b = 1.0;
};
struct Box {
  Point lower, upper;
};
/// Open unit ball in R^3.
struct UnitBall3 {};
/// Region between two parallel hyperplanes `width` apart.
struct Slab {
  std::size_t m = 1;
  double width = 1.0;
};
/// Any other bounded domain; analyses need a user-supplied Poincaré constant.
struct OtherDomain {
  std::size_t m = 1;
};

using DomainDescriptor = std::variant<Interval, Box, UnitBall3, Slab, OtherDomain>;

std::size_t spatial_dim(const DomainDescriptor& d);
/// Largest distance between two points of the closure.
double diameter(const DomainDescriptor& d);

class InvalidGeometry : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Cell {
  std::size_t id = 0;  // 1-based
  Point center;
  std::vector<Point> sample_points;  // always contains `center`
  double volume_hint = 0.0;
};

struct Partition {
  std::size_t m = 0;
  std::vector<Cell> cells;
  DomainDescriptor domain;
};

/// N equal cells of [a, b]; samples_per_cell uniformly spaced points per
/// cell including both endpoints, plus the midpoint.
Partition uniform_interval_partition(double a, double b, std::size_t n_cells, std::size_t samples_per_cell);

/// Tensor grid of equal boxes; samples_per_axis points per axis per cell.
Partition uniform_box_partition(const Point& lower, const Point& upper, std::size_t splits_per_axis,
                                std::size_t samples_per_axis);

/// Splits r ∈ [0,1), θ ∈ [0,π], φ ∈ [0,2π) into n_splits pieces each and maps
/// cell centers and samples to Cartesian coordinates. Cells are ordered with
/// φ fastest, then θ, then r.
Partition spherical_ball_partition(std::size_t n_splits, std::size_t samples_per_axis);

Point spherical_to_cartesian(double r, double theta, double phi);

struct Simplex {
  std::vector<std::size_t> vertex_ids;  // m + 1 indices into SimplicialMesh::vertices
  std::vector<Point> gradients;         // v_0..v_m, with v_0 = -(v_1 + ... + v_m)
};

struct SimplicialMesh {
  std::size_t m = 0;
  std::vector<Point> vertices;
  std::vector<Simplex> simplices;
  DomainDescriptor domain;
  bool structured = false;  // produced by a face-to-face generator

  std::vector<Point> simplex_vertices(std::size_t k) const;
};

/// 1-simplices [a + (k-1)h, a + kh]; gradients are ∓N/(b-a) exactly.
SimplicialMesh interval_mesh(double a, double b, std::size_t n_cells);

/// Kuhn triangulation of a uniformly split box (m = 2 or 3): every grid cell
/// is split into m! simplices sharing the main diagonal.
SimplicialMesh box_mesh(const Point& lower, const Point& upper, std::size_t splits_per_axis);

/// Builds a mesh from explicit simplex vertex lists, merging vertices closer
/// than `dedup_tol`·diameter and computing gradients.
SimplicialMesh mesh_from_simplices(std::size_t m, const std::vector<std::vector<Point>>& simplices,
                                   const DomainDescriptor& domain, double dedup_tol = 1e-9);

class DegenerateSimplex : public std::runtime_error {
 public:
  DegenerateSimplex(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// Gradients of the barycentric coordinates: v_ℓ = D^{-T} e_ℓ for ℓ ≥ 1 with
/// D = [ξ_1 − ξ_0, …, ξ_m − ξ_0], and v_0 = −Σ v_ℓ.
std::vector<Point> simplex_gradients(std::span<const Point> vertices);

/// α with Σ α = 1 and Σ α_ℓ ξ_ℓ = x.
DenseVector barycentric(std::span<const Point> vertices, const Point& x);

/// Barycentric lattice with `per_edge` points along each edge (vertices included).
std::vector<Point> simplex_sample_points(std::span<const Point> vertices, std::size_t per_edge);

struct MeshViolation {
  enum class Kind { DuplicateVertex, Degenerate, GradientMismatch, FaceIntersection };
  Kind kind;
  std::string message;
};

std::vector<MeshViolation> validate_mesh(const SimplicialMesh& mesh, unsigned seed = 7);

/// `count` points drawn uniformly from the closure of an interval, box or
/// unit ball with a seeded generator; other domains throw InvalidGeometry.
std::vector<Point> sample_domain(const DomainDescriptor& domain, std::size_t count, std::uint64_t seed);

/// Index of a simplex containing x (barycentric coordinates ≥ −tol), if any.
std::optional<std::size_t> locate(const SimplicialMesh& mesh, const Point& x, double tol = 1e-12);

}  // namespace pdelmi::mesh
