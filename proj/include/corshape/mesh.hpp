#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corshape/sparse.hpp"

namespace corshape {

using Index = std::uint32_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 1.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
};

enum class BoundaryTag : std::uint8_t { kDirichlet, kNeumann, kFree };

std::string to_string(BoundaryTag tag);

/// Geometric predicate used to select boundary edges: an axis-aligned
/// rectangle inflated by `tol`. A segment is a rectangle of zero width or
/// height.
struct Region {
  Box rect;
  double tol = 1e-9;

  bool contains(Point p) const {
    return p.x >= rect.xmin - tol && p.x <= rect.xmax + tol && p.y >= rect.ymin - tol &&
           p.y <= rect.ymax + tol;
  }
};

struct BoundaryEdge {
  std::array<Index, 2> v{};  // counter-clockwise w.r.t. the box
  BoundaryTag tag = BoundaryTag::kFree;
  Index triangle = 0;
};

/// Structured triangulation of a rectangle. Each grid cell is split along
/// its lower-left to upper-right diagonal. Vertices are numbered row by row:
/// vertex (i, j) has index j * (nx + 1) + i.
class Mesh {
 public:
  Mesh() = default;

  std::span<const Point> vertices() const { return vertices_; }
  std::span<const std::array<Index, 3>> triangles() const { return triangles_; }
  std::span<const BoundaryEdge> boundary_edges() const { return edges_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t triangle_count() const { return triangles_.size(); }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Box& box() const { return box_; }
  double hx() const { return box_.width() / nx_; }
  double hy() const { return box_.height() / ny_; }
  double h_min() const;

  Index vertex_index(int i, int j) const { return static_cast<Index>(j * (nx_ + 1) + i); }

  double area(std::size_t t) const { return areas_[t]; }
  std::span<const double> areas() const { return areas_; }
  /// Gradients of the three barycentric (P1) basis functions on triangle t.
  const std::array<Point, 3>& basis_gradients(std::size_t t) const { return gradients_[t]; }
  Point centroid(std::size_t t) const;

  double edge_length(std::size_t e) const;
  Point edge_midpoint(std::size_t e) const;
  /// Unit normal of boundary edge e pointing out of the box.
  Point edge_normal(std::size_t e) const;

  bool has_tag(BoundaryTag tag) const;
  /// Sorted list of vertices touched by edges carrying `tag`.
  std::vector<Index> tagged_nodes(BoundaryTag tag) const;

 private:
  friend Mesh generate_structured_mesh(int nx, int ny, const Box& box);
  friend Mesh tag_boundary(const Mesh& mesh, const Region& region, BoundaryTag tag);

  std::vector<Point> vertices_;
  std::vector<std::array<Index, 3>> triangles_;
  std::vector<BoundaryEdge> edges_;
  std::vector<double> areas_;
  std::vector<std::array<Point, 3>> gradients_;
  int nx_ = 0;
  int ny_ = 0;
  Box box_;
};

Mesh generate_structured_mesh(int nx, int ny, const Box& box);

/// Returns a copy of `mesh` where every boundary edge whose midpoint lies in
/// `region` carries `tag`. Throws InvalidInput when no edge matches.
Mesh tag_boundary(const Mesh& mesh, const Region& region, BoundaryTag tag);

/// P1 edge mass matrix summed over the edges carrying `tag`, sized to all
/// mesh vertices.
CsrMatrix boundary_mass_matrix(const Mesh& mesh, BoundaryTag tag);

/// Sum over triangles of density(T) * area(T).
double volume(const Mesh& mesh, std::span<const double> density);

/// Checks the structural invariants; throws InvalidInput describing the first
/// violation.
void validate(const Mesh& mesh);

}  // namespace corshape
