#include <doctest.h>

#include <cmath>

#include "corshape/error.hpp"
#include "corshape/mesh.hpp"

using namespace corshape;

TEST_CASE("structured mesh counts") {
  const Mesh a = generate_structured_mesh(2, 1, {0, 0, 2, 1});
  CHECK(a.vertex_count() == 6);
  CHECK(a.triangle_count() == 4);
  const Mesh b = generate_structured_mesh(1, 1, {0, 0, 1, 1});
  CHECK(b.vertex_count() == 4);
  CHECK(b.triangle_count() == 2);
  CHECK(b.boundary_edges().size() == 4);
  const Mesh c = generate_structured_mesh(100, 50, {0, 0, 2, 1});
  double area = 0.0;
  for (double x : c.areas()) area += x;
  CHECK(std::abs(area - 2.0) <= 1e-12);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("invalid subdivisions and boxes are rejected") {
  CHECK_THROWS_AS(generate_structured_mesh(0, 3, {0, 0, 1, 1}), InvalidInput);
  CHECK_THROWS_AS(generate_structured_mesh(3, -1, {0, 0, 1, 1}), InvalidInput);
  CHECK_THROWS_AS(generate_structured_mesh(3, 3, {0, 0, 0, 1}), InvalidInput);
}

TEST_CASE("triangles are positively oriented and boundary normals point outward") {
  const Mesh m = generate_structured_mesh(4, 3, {-1, 2, 3, 5});
  for (std::size_t t = 0; t < m.triangle_count(); ++t) CHECK(m.area(t) > 0.0);
  for (std::size_t e = 0; e < m.boundary_edges().size(); ++e) {
    const Point mid = m.edge_midpoint(e);
    const Point n = m.edge_normal(e);
    const Point c = m.centroid(m.boundary_edges()[e].triangle);
    CHECK((mid.x - c.x) * n.x + (mid.y - c.y) * n.y > 0.0);
    CHECK(std::abs(std::hypot(n.x, n.y) - 1.0) < 1e-14);
  }
}

TEST_CASE("tag_boundary selects edges by midpoint") {
  const Mesh m = generate_structured_mesh(10, 10, {0, 0, 1, 1});
  const Mesh bottom = tag_boundary(m, Region{{0, 0, 1, 0}}, BoundaryTag::kDirichlet);
  int tagged = 0;
  for (const auto& e : bottom.boundary_edges()) {
    if (e.tag == BoundaryTag::kDirichlet) ++tagged;
  }
  CHECK(tagged == 10);
  const Mesh top = tag_boundary(m, Region{{0.4, 1, 0.6, 1}}, BoundaryTag::kNeumann);
  tagged = 0;
  for (const auto& e : top.boundary_edges()) {
    if (e.tag == BoundaryTag::kNeumann) ++tagged;
  }
  CHECK(tagged == 2);
  CHECK(top.tagged_nodes(BoundaryTag::kNeumann).size() == 3);
  CHECK_THROWS_AS(tag_boundary(m, Region{{0.3, 0.3, 0.6, 0.6}}, BoundaryTag::kNeumann), InvalidInput);
}

TEST_CASE("boundary mass matrix") {
  const Mesh m = generate_structured_mesh(1, 1, {0, 0, 1, 1});
  const Mesh tagged = tag_boundary(m, Region{{0, 0, 1, 0}}, BoundaryTag::kNeumann);
  const CsrMatrix g = boundary_mass_matrix(tagged, BoundaryTag::kNeumann);
  CHECK(g.at(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(g.at(0, 1) == doctest::Approx(1.0 / 6.0));
  CHECK(g.at(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(g.at(2, 2) == 0.0);
  CHECK(g.is_symmetric());

  const double h = 0.25;
  const Mesh line = tag_boundary(generate_structured_mesh(4, 1, {0, 0, 1, 1}), Region{{0, 0, 0.5, 0}}, BoundaryTag::kNeumann);
  const CsrMatrix g2 = boundary_mass_matrix(line, BoundaryTag::kNeumann);
  CHECK(g2.at(1, 1) == doctest::Approx(2.0 * h / 3.0));
  double total = 0.0;
  for (double v : g2.values()) total += v;
  CHECK(total == doctest::Approx(0.5));
  CHECK_THROWS_AS(boundary_mass_matrix(m, BoundaryTag::kNeumann), InvalidInput);
}

TEST_CASE("volume") {
  const Mesh m = generate_structured_mesh(8, 4, {0, 0, 2, 1});
  CHECK(volume(m, std::vector<double>(m.triangle_count(), 1.0)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(volume(m, std::vector<double>(m.triangle_count(), 0.0)) == 0.0);
  const Mesh unit = generate_structured_mesh(5, 5, {0, 0, 1, 1});
  CHECK(volume(unit, std::vector<double>(unit.triangle_count(), 0.35)) == doctest::Approx(0.35).epsilon(1e-14));
  CHECK_THROWS_AS(volume(m, std::vector<double>(3, 1.0)), InvalidInput);
}
