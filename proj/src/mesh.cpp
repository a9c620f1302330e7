#include "corshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "corshape/error.hpp"

namespace corshape {

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::kDirichlet:
      return "DIRICHLET";
    case BoundaryTag::kNeumann:
      return "NEUMANN";
    case BoundaryTag::kFree:
      return "FREE";
  }
  return "UNKNOWN";
}

double Mesh::h_min() const { return std::min(hx(), hy()); }

Point Mesh::centroid(std::size_t t) const {
  const auto& tri = triangles_[t];
  const Point& a = vertices_[tri[0]];
  const Point& b = vertices_[tri[1]];
  const Point& c = vertices_[tri[2]];
  return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

double Mesh::edge_length(std::size_t e) const {
  const Point& a = vertices_[edges_[e].v[0]];
  const Point& b = vertices_[edges_[e].v[1]];
  return std::hypot(b.x - a.x, b.y - a.y);
}

Point Mesh::edge_midpoint(std::size_t e) const {
  const Point& a = vertices_[edges_[e].v[0]];
  const Point& b = vertices_[edges_[e].v[1]];
  return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
}

Point Mesh::edge_normal(std::size_t e) const {
  // Edges run counter-clockwise around the box, so the outward normal is the
  // tangent rotated by -90 degrees.
  const Point& a = vertices_[edges_[e].v[0]];
  const Point& b = vertices_[edges_[e].v[1]];
  const double len = edge_length(e);
  return {(b.y - a.y) / len, -(b.x - a.x) / len};
}

bool Mesh::has_tag(BoundaryTag tag) const {
  return std::any_of(edges_.begin(), edges_.end(), [tag](const BoundaryEdge& e) { return e.tag == tag; });
}

std::vector<Index> Mesh::tagged_nodes(BoundaryTag tag) const {
  std::vector<Index> nodes;
  for (const auto& e : edges_) {
    if (e.tag != tag) continue;
    nodes.push_back(e.v[0]);
    nodes.push_back(e.v[1]);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

Mesh generate_structured_mesh(int nx, int ny, const Box& box) {
  if (nx < 1 || ny < 1) {
    throw InvalidInput("generate_structured_mesh: subdivision counts must be >= 1 (got " +
                       std::to_string(nx) + ", " + std::to_string(ny) + ")");
  }
  if (!(box.width() > 0.0) || !(box.height() > 0.0)) {
    throw InvalidInput("generate_structured_mesh: box must have positive width and height");
  }

  Mesh m;
  m.nx_ = nx;
  m.ny_ = ny;
  m.box_ = box;
  const double hx = box.width() / nx;
  const double hy = box.height() / ny;

  m.vertices_.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    // Last row/column pinned to the box so the outer boundary is exact.
    const double y = (j == ny) ? box.ymax : box.ymin + j * hy;
    for (int i = 0; i <= nx; ++i) {
      const double x = (i == nx) ? box.xmax : box.xmin + i * hx;
      m.vertices_.push_back({x, y});
    }
  }

  m.triangles_.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Index v00 = m.vertex_index(i, j);
      const Index v10 = m.vertex_index(i + 1, j);
      const Index v01 = m.vertex_index(i, j + 1);
      const Index v11 = m.vertex_index(i + 1, j + 1);
      m.triangles_.push_back({v00, v10, v11});
      m.triangles_.push_back({v00, v11, v01});
    }
  }

  auto cell_triangle = [nx](int i, int j, int which) {
    return static_cast<Index>(2 * (j * nx + i) + which);
  };
  for (int i = 0; i < nx; ++i) {
    m.edges_.push_back({{m.vertex_index(i, 0), m.vertex_index(i + 1, 0)}, BoundaryTag::kFree, cell_triangle(i, 0, 0)});
  }
  for (int j = 0; j < ny; ++j) {
    m.edges_.push_back({{m.vertex_index(nx, j), m.vertex_index(nx, j + 1)}, BoundaryTag::kFree, cell_triangle(nx - 1, j, 0)});
  }
  for (int i = nx - 1; i >= 0; --i) {
    m.edges_.push_back({{m.vertex_index(i + 1, ny), m.vertex_index(i, ny)}, BoundaryTag::kFree, cell_triangle(i, ny - 1, 1)});
  }
  for (int j = ny - 1; j >= 0; --j) {
    m.edges_.push_back({{m.vertex_index(0, j + 1), m.vertex_index(0, j)}, BoundaryTag::kFree, cell_triangle(0, j, 1)});
  }

  m.areas_.resize(m.triangles_.size());
  m.gradients_.resize(m.triangles_.size());
  for (std::size_t t = 0; t < m.triangles_.size(); ++t) {
    const auto& tri = m.triangles_[t];
    const Point& a = m.vertices_[tri[0]];
    const Point& b = m.vertices_[tri[1]];
    const Point& c = m.vertices_[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    m.areas_[t] = 0.5 * det;
    // grad(lambda_a) = rot90(c - b) / det, cyclically.
    m.gradients_[t][0] = {(b.y - c.y) / det, (c.x - b.x) / det};
    m.gradients_[t][1] = {(c.y - a.y) / det, (a.x - c.x) / det};
    m.gradients_[t][2] = {(a.y - b.y) / det, (b.x - a.x) / det};
  }
  return m;
}

Mesh tag_boundary(const Mesh& mesh, const Region& region, BoundaryTag tag) {
  Mesh out = mesh;
  std::size_t matched = 0;
  for (std::size_t e = 0; e < out.edges_.size(); ++e) {
    if (region.contains(out.edge_midpoint(e))) {
      out.edges_[e].tag = tag;
      ++matched;
    }
  }
  if (matched == 0) {
    throw InvalidInput("tag_boundary: region [" + std::to_string(region.rect.xmin) + "," +
                       std::to_string(region.rect.xmax) + "]x[" + std::to_string(region.rect.ymin) +
                       "," + std::to_string(region.rect.ymax) + "] matches no boundary edge (tag " +
                       to_string(tag) + ")");
  }
  return out;
}

CsrMatrix boundary_mass_matrix(const Mesh& mesh, BoundaryTag tag) {
  if (!mesh.has_tag(tag)) {
    throw InvalidInput("boundary_mass_matrix: no boundary edge carries tag " + to_string(tag));
  }
  TripletBuilder builder(mesh.vertex_count());
  const auto edges = mesh.boundary_edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].tag != tag) continue;
    const double h = mesh.edge_length(e);
    const auto [a, b] = edges[e].v;
    builder.add(a, a, h / 3.0);
    builder.add(a, b, h / 6.0);
    builder.add(b, a, h / 6.0);
    builder.add(b, b, h / 3.0);
  }
  return builder.build(true);
}

double volume(const Mesh& mesh, std::span<const double> density) {
  if (density.size() != mesh.triangle_count()) {
    throw InvalidInput("volume: density has " + std::to_string(density.size()) +
                       " entries, mesh has " + std::to_string(mesh.triangle_count()) + " triangles");
  }
  double v = 0.0;
  for (std::size_t t = 0; t < density.size(); ++t) v += density[t] * mesh.area(t);
  return v;
}

void validate(const Mesh& mesh) {
  const auto n = mesh.vertex_count();
  std::map<std::pair<Index, Index>, int> edge_count;
  const auto tris = mesh.triangles();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (Index v : tris[t]) {
      if (v >= n) throw InvalidInput("mesh: triangle " + std::to_string(t) + " has out-of-range vertex");
    }
    if (!(mesh.area(t) > 0.0)) {
      throw InvalidInput("mesh: triangle " + std::to_string(t) + " has non-positive signed area");
    }
    for (int k = 0; k < 3; ++k) {
      Index a = tris[t][k];
      Index b = tris[t][(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  }
  std::size_t boundary_in_triangulation = 0;
  for (const auto& [key, count] : edge_count) {
    if (count == 1) ++boundary_in_triangulation;
  }
  const auto edges = mesh.boundary_edges();
  if (edges.size() != boundary_in_triangulation) {
    throw InvalidInput("mesh: boundary edge list does not match the triangulation boundary");
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    Index a = edges[e].v[0];
    Index b = edges[e].v[1];
    if (a >= n || b >= n) throw InvalidInput("mesh: boundary edge with out-of-range vertex");
    if (a > b) std::swap(a, b);
    const auto it = edge_count.find({a, b});
    if (it == edge_count.end() || it->second != 1) {
      throw InvalidInput("mesh: boundary edge " + std::to_string(e) + " is not on exactly one triangle");
    }
    const auto& tri = tris[edges[e].triangle];
    const bool owns = std::count(tri.begin(), tri.end(), edges[e].v[0]) == 1 &&
                      std::count(tri.begin(), tri.end(), edges[e].v[1]) == 1;
    if (!owns) throw InvalidInput("mesh: boundary edge " + std::to_string(e) + " has wrong owner triangle");
  }
}

}  // namespace corshape
