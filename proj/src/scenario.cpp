#include "corshape/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "corshape/error.hpp"

namespace corshape {
namespace {

void add_closed_form(Scenario& sc, const ScenarioSpec& spec, ProfileFamily family, int component, int index,
                     double amplitude) {
  const Mesh& mesh = sc.problem.mesh;
  ClosedFormKernel k;
  k.component = component;
  k.amplitude = amplitude;
  k.family = family;
  k.profile_index = index;
  k.length = spec.length;
  k.profile_axis = spec.profile_axis;
  k.decay_axis = spec.decay_axis;
  const auto support = CorrelationSupport::boundary(BoundaryTag::kNeumann);
  std::shared_ptr<const CorrelationMatrix> c = assemble_correlation_matrix(k, mesh, support);
  FactorizationReport report;
  report.name = std::string(family == ProfileFamily::kH ? "h" : "k") + std::to_string(index);
  report.component = component;
  report.factorization =
      pivoted_cholesky_truncated(*c, spec.cholesky_epsilon, static_cast<std::size_t>(spec.max_rank));
  report.matrix = c;
  if (report.factorization.rank() > 0) {
    const auto loads = factors_to_loads(report.factorization, support_mass_matrix(mesh, support, 1));
    for (auto& f : scatter_to_fields(loads, *c, mesh.vertex_count(), 2, component)) {
      sc.problem.loads.push_back(std::move(f));
    }
  }
  sc.factorizations.push_back(std::move(report));
}

}  // namespace

Mesh build_mesh(const ScenarioSpec& spec) {
  Mesh mesh = generate_structured_mesh(spec.nx, spec.ny, spec.box);
  const double tol = 1e-9 * std::max(spec.box.width(), spec.box.height());
  for (const auto& r : spec.dirichlet) mesh = tag_boundary(mesh, Region{r, tol}, BoundaryTag::kDirichlet);
  for (const auto& r : spec.neumann) mesh = tag_boundary(mesh, Region{r, tol}, BoundaryTag::kNeumann);
  return mesh;
}

Field patch_load(const Mesh& mesh, const Box& region, double gx, double gy) {
  Field f = Field::vector2(mesh.vertex_count());
  const Region r{region, 1e-9 * std::max(mesh.box().width(), mesh.box().height())};
  bool any = false;
  for (Index v : mesh.tagged_nodes(BoundaryTag::kNeumann)) {
    if (!r.contains(mesh.vertices()[v])) continue;
    f.values[2 * v] = gx;
    f.values[2 * v + 1] = gy;
    any = true;
  }
  if (!any) throw InvalidInput("patch_load: no Neumann vertex inside the load region");
  return f;
}

LevelSet disc_levelset(const Mesh& mesh, Point center, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("disc_levelset: radius must be positive");
  LevelSet ls;
  ls.phi.reserve(mesh.vertex_count());
  for (const auto& p : mesh.vertices()) ls.phi.push_back(std::hypot(p.x - center.x, p.y - center.y) - radius);
  return ls;
}

std::vector<Index> non_design_nodes(const Mesh& mesh, FunctionalKind functional) {
  std::vector<Index> out;
  for (const auto& e : mesh.boundary_edges()) {
    const bool fixed = e.tag == BoundaryTag::kNeumann ||
                       (e.tag == BoundaryTag::kDirichlet && functional == FunctionalKind::kCompliance);
    if (!fixed) continue;
    for (Index v : mesh.triangles()[e.triangle]) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Scenario build_scenario(const ScenarioSpec& spec) {
  Scenario sc;
  Problem& p = sc.problem;
  p.mesh = build_mesh(spec);
  p.functional = spec.functional;
  p.law = HookeLaw::from_young_poisson(spec.young, spec.poisson);
  p.eps_ersatz = spec.eps_ersatz;
  const Mesh& mesh = p.mesh;
  const std::size_t nv = mesh.vertex_count();

  if (spec.functional == FunctionalKind::kCompliance) {
    p.load = {LoadKind::kSurface, BoundaryTag::kNeumann};
    if (spec.preset == Preset::kBridgeCorrelated) {
      const Field ga = patch_load(mesh, spec.neumann.at(0), 1.0, -1.0);
      const Field gb = patch_load(mesh, spec.neumann.at(1), -1.0, 1.0);
      LoadTerms terms = to_load_terms(finite_rank_correlated_pair(ga, gb, spec.alpha));
      p.loads = std::move(terms.fields);
      p.weights = std::move(terms.weights);
    } else {
      const int hi = spec.preset == Preset::kBridgeKernel ? spec.kernel_index : spec.h_index;
      const int ki = spec.preset == Preset::kBridgeKernel ? spec.kernel_index : spec.k_index;
      if (hi > 0) add_closed_form(sc, spec, ProfileFamily::kH, 1, hi, spec.amplitude_h);
      if (ki > 0) add_closed_form(sc, spec, ProfileFamily::kK, 2, ki, spec.amplitude_k);
      if (p.loads.empty()) p.loads.push_back(Field::vector2(nv));
    }
  } else {
    p.load = {LoadKind::kBody, BoundaryTag::kNeumann};
    Field one = Field::scalar(nv, 1.0);
    Field linear = Field::scalar(nv);
    const Box& b = mesh.box();
    for (std::size_t v = 0; v < nv; ++v) {
      linear.values[v] = spec.load_variation * (2.0 * (mesh.vertices()[v].x - b.xmin) / b.width() - 1.0);
    }
    FiniteRankKernel kernel;
    kernel.terms.push_back({one, one, 1.0});
    if (spec.load_variation > 0.0) kernel.terms.push_back({linear, linear, 1.0});
    LoadTerms terms = to_load_terms(kernel);
    p.loads = std::move(terms.fields);
    p.weights = std::move(terms.weights);
    if (spec.functional == FunctionalKind::kTracking) {
      p.mean_load = one;
      p.tracking = make_tracking_data(mesh, Field::scalar(nv, spec.target_value), spec.observation);
    }
  }

  p.frozen = non_design_nodes(mesh, spec.functional);
  p.initial = spec.disc_initial ? disc_levelset(mesh, spec.disc_center, spec.disc_radius)
                                : initialize_levelset(mesh, spec.holes);
  return sc;
}

}  // namespace corshape
