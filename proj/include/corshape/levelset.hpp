#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "corshape/mesh.hpp"

namespace corshape {

/// Nodal level-set function: phi < 0 inside the material domain D.
struct LevelSet {
  std::vector<double> phi;
  double time = 0.0;
  int steps = 0;
};

struct CircleHole {
  Point center;
  double radius = 0.0;
};

struct RectHole {
  Box rect;
};

using Hole = std::variant<CircleHole, RectHole>;

/// Signed distance to the union of the holes, positive inside a hole. With
/// no holes the whole box is material. Holes must lie inside the box and be
/// pairwise disjoint.
LevelSet initialize_levelset(const Mesh& mesh, std::span<const Hole> holes);

/// Largest admissible substep for velocity V: dt * max|V| * (1/hx + 1/hy) <= cfl.
double max_stable_substep(const Mesh& mesh, std::span<const double> velocity, double cfl = 0.9);

/// Solves phi_t + V |grad phi| = 0 over total time dt with `substeps` explicit
/// Rouy-Tourin upwind steps on the vertex grid. V > 0 grows the domain.
LevelSet advect(const Mesh& mesh, const LevelSet& ls, std::span<const double> velocity, double dt, int substeps,
                double cfl = 0.9);

/// Replaces phi by the signed distance to its piecewise-linear zero level
/// set: exact near the interface, fast marching elsewhere. Signs of all
/// nodal values are kept. A band clamps |phi| to that width.
LevelSet redistance(const Mesh& mesh, const LevelSet& ls, std::optional<double> band = std::nullopt);

/// Area fraction of {phi < 0} in each triangle under linear interpolation.
std::vector<double> material_fraction(const Mesh& mesh, std::span<const double> phi);

/// Ersatz stiffness scale fraction + (1 - fraction) * eps.
std::vector<double> density_from_levelset(const Mesh& mesh, const LevelSet& ls, double eps_ersatz);

/// Conductivity 1 / (fraction + (1 - fraction) * eps): material keeps unit
/// conductivity, void becomes a near-perfect conductor.
std::vector<double> conductivity_from_levelset(const Mesh& mesh, const LevelSet& ls, double eps_ersatz);

/// Triangles whose vertices carry both strictly negative and strictly
/// positive values.
std::vector<unsigned char> interface_triangles(const Mesh& mesh, std::span<const double> phi);

/// grad phi / |grad phi| on triangle t; throws NumericalError when
/// |grad phi| < 1e-10.
Point interface_normal(const Mesh& mesh, std::size_t t, std::span<const double> phi);

struct Segment {
  Point a;
  Point b;
  double length() const;
};

/// Zero segment of the linear interpolant on an interface triangle.
std::optional<Segment> interface_segment(const Mesh& mesh, std::size_t t, std::span<const double> phi);

/// sum_T cell_values[T] * int_{zero set in T} weight ds (two-point Gauss per segment).
double interface_integral(const Mesh& mesh, std::span<const double> phi, std::span<const double> cell_values,
                          const std::function<double(Point)>& weight);

/// Extends per-triangle values living on interface triangles to a nodal
/// field by solving (mu K + M_G) V = b, with K the Neumann Laplacian, M_G the
/// lumped mass of the zero level set (line integrals of the hat functions)
/// and b the matching load; the extension of -g is then a descent direction
/// for int_G g V ds. mu = 0 reduces to length-weighted nodal averaging (zero away from the
/// interface).
std::vector<double> extend_velocity(const Mesh& mesh, const LevelSet& ls, std::span<const double> cell_values,
                                    double mu);

}  // namespace corshape
