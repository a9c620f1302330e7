#pragma once

#include <memory>
#include <string>
#include <vector>

#include "corshape/config.hpp"
#include "corshape/correlation.hpp"
#include "corshape/optimizer.hpp"

namespace corshape {

/// One pivoted-Cholesky run made while building a scenario.
struct FactorizationReport {
  std::string name;
  int component = 1;
  LowRankFactorization factorization;
  std::shared_ptr<const CorrelationMatrix> matrix;
};

struct Scenario {
  Problem problem;
  std::vector<FactorizationReport> factorizations;
};

/// Structured mesh with the Dirichlet and Neumann regions tagged.
Mesh build_mesh(const ScenarioSpec& spec);

/// Nodal vector field equal to (gx, gy) on the Neumann vertices inside
/// `region` and zero elsewhere.
Field patch_load(const Mesh& mesh, const Box& region, double gx, double gy);

/// phi = |x - c| - r: a material disc surrounded by void.
LevelSet disc_levelset(const Mesh& mesh, Point center, double radius);

/// Vertices of the triangles that touch Gamma_N, plus Gamma_D for
/// elasticity.
std::vector<Index> non_design_nodes(const Mesh& mesh, FunctionalKind functional);

/// Resolves a scenario: mesh, loads (exact finite-rank terms or truncated
/// pivoted-Cholesky factors mapped back to nodal loads), initial shape.
Scenario build_scenario(const ScenarioSpec& spec);

}  // namespace corshape
