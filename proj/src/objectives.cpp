#include "corshape/objectives.hpp"

#include <cmath>
#include <string>

#include "corshape/error.hpp"
#include "corshape/simd/kernels.hpp"

namespace corshape {
namespace {

void require_states(const StateEnsemble& ens, const char* who) {
  if (ens.states.empty() || !ens.stiffness) throw InvalidInput(std::string(who) + ": empty ensemble");
}

void require_kind(const StateEnsemble& ens, OperatorKind kind, const char* who) {
  if (ens.op.kind != kind) {
    throw InvalidInput(std::string(who) + (kind == OperatorKind::kPoisson ? ": needs a Poisson ensemble"
                                                                           : ": needs an elasticity ensemble"));
  }
}

// sum_ij W_ij a_i^T M b_j
double weighted_form(const StateEnsemble& ens, const CsrMatrix& m, const std::vector<Field>& a,
                     const std::vector<Field>& b) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> mb;
  mb.reserve(n);
  for (const auto& f : b) mb.push_back(m.multiply(f.values));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = ens.weight(i, j);
      if (w != 0.0) total += w * simd::dot(a[i].values, mb[j]);
    }
  }
  return total;
}

CsrMatrix region_mass(const Mesh& mesh, const TrackingData& data) {
  if (data.region.size() != mesh.triangle_count()) throw InvalidInput("tracking: region size does not match the mesh");
  if (data.u0.kind != FieldKind::kScalar || data.u0.size() != mesh.vertex_count()) {
    throw InvalidInput("tracking: u0 must be a scalar nodal field");
  }
  std::vector<double> w(data.region.begin(), data.region.end());
  return assemble_mass(mesh, w);
}

double grad_dot(const Mesh& mesh, std::size_t t, const Field& u, const Field& v) {
  const Point a = triangle_gradient(mesh, t, u.values);
  const Point b = triangle_gradient(mesh, t, v.values);
  return a.x * b.x + a.y * b.y;
}

bool source_moves(const StateEnsemble& ens) {
  return ens.load.kind == LoadKind::kBody && !ens.op.source_weight.empty();
}

// (1 / |T|) w^T dF/dfraction_T for a body load f: the consistent element
// mass matrix applied to f, paired with w.
double source_pairing(const Mesh& mesh, std::size_t t, const Field& w, const Field& f) {
  const auto& tri = mesh.triangles()[t];
  const int nc = f.components();
  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    const double sum = f.values[nc * tri[0] + c] + f.values[nc * tri[1] + c] + f.values[nc * tri[2] + c];
    for (int a = 0; a < 3; ++a) total += w.values[nc * tri[a] + c] * (f.values[nc * tri[a] + c] + sum);
  }
  return total / 12.0;
}

GradientDensity empty_density(FunctionalKind kind, const Mesh& mesh, const LevelSet& ls) {
  GradientDensity gd;
  gd.kind = kind;
  gd.values.assign(mesh.triangle_count(), 0.0);
  gd.on_interface = interface_triangles(mesh, ls.phi);
  return gd;
}

void check_finite(const GradientDensity& gd) {
  for (std::size_t t = 0; t < gd.values.size(); ++t) {
    if (!std::isfinite(gd.values[t])) {
      throw NumericalError("gradient density is not finite on triangle " + std::to_string(t));
    }
  }
}

}  // namespace

std::string to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::kDirichletEnergy:
      return "DIRICHLET_ENERGY";
    case FunctionalKind::kTracking:
      return "TRACKING";
    case FunctionalKind::kCompliance:
      return "COMPLIANCE";
  }
  return "UNKNOWN";
}

TrackingData make_tracking_data(const Mesh& mesh, Field u0, const Box& b) {
  TrackingData data{std::move(u0), std::vector<unsigned char>(mesh.triangle_count(), 0)};
  const Region region{b, 1e-12};
  bool any = false;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    data.region[t] = region.contains(mesh.centroid(t));
    any = any || data.region[t];
  }
  if (!any) throw InvalidInput("make_tracking_data: observation region B contains no triangle");
  return data;
}

double dirichlet_energy_mean(const StateEnsemble& ens) {
  require_states(ens, "dirichlet_energy_mean");
  require_kind(ens, OperatorKind::kPoisson, "dirichlet_energy_mean");
  return -0.5 * weighted_form(ens, *ens.stiffness, ens.states, ens.states);
}

GradientDensity dirichlet_energy_gradient(const StateEnsemble& ens, const Mesh& mesh, const LevelSet& ls) {
  require_states(ens, "dirichlet_energy_gradient");
  require_kind(ens, OperatorKind::kPoisson, "dirichlet_energy_gradient");
  auto gd = empty_density(FunctionalKind::kDirichletEnergy, mesh, ls);
  const std::size_t m = ens.size();
  const bool source = source_moves(ens);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (!gd.on_interface[t]) continue;
    (void)interface_normal(mesh, t, ls.phi);
    const double slope = ens.op.density_slope(t);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double w = ens.weight(i, j);
        if (w == 0.0) continue;
        s += w * 0.5 * slope * grad_dot(mesh, t, ens.states[i], ens.states[j]);
        if (source) s -= w * source_pairing(mesh, t, ens.states[i], ens.loads[j]);
      }
    }
    gd.values[t] = s;
  }
  check_finite(gd);
  return gd;
}

void attach_mean_state(StateEnsemble& ens, const Mesh& mesh, const Field& mean_load, const LoadSpec& load,
                       const SolverOptions& options) {
  require_states(ens, "attach_mean_state");
  try {
    ens.mean_state = solve_with_operator(ens, assemble_load(mesh, ens.op, mean_load, load), options);
    ens.mean_load = mean_load;
  } catch (const SolverError& e) {
    throw SolverError(std::string("mean state: ") + e.what(), e.residual(), e.iterations());
  }
}

double tracking_mean(const StateEnsemble& ens, const Mesh& mesh, const TrackingData& data) {
  require_states(ens, "tracking_mean");
  if (!ens.mean_state) throw InvalidInput("tracking_mean: mean state is missing");
  const CsrMatrix mb = region_mass(mesh, data);
  const double second = weighted_form(ens, mb, ens.states, ens.states);
  const auto mu0 = mb.multiply(data.u0.values);
  return 0.5 * (second - 2.0 * simd::dot(mu0, ens.mean_state->values) + simd::dot(mu0, data.u0.values));
}

StateEnsemble tracking_adjoints(StateEnsemble ens, const Mesh& mesh, const TrackingData& data,
                                const SolverOptions& options) {
  require_states(ens, "tracking_adjoints");
  require_kind(ens, OperatorKind::kPoisson, "tracking_adjoints");
  const CsrMatrix mb = region_mass(mesh, data);
  ens.adjoints.clear();
  for (std::size_t k = 0; k < ens.size(); ++k) {
    Field rhs{FieldKind::kScalar, mb.multiply(ens.states[k].values)};
    for (double& v : rhs.values) v = -v;
    try {
      ens.adjoints.push_back(solve_with_operator(ens, std::move(rhs), options));
    } catch (const SolverError& e) {
      throw SolverError("adjoint " + std::to_string(k) + ": " + e.what(), e.residual(), e.iterations());
    }
  }
  try {
    ens.mean_adjoint = solve_with_operator(ens, Field{FieldKind::kScalar, mb.multiply(data.u0.values)}, options);
  } catch (const SolverError& e) {
    throw SolverError(std::string("mean adjoint: ") + e.what(), e.residual(), e.iterations());
  }
  return ens;
}

GradientDensity tracking_gradient(const StateEnsemble& ens, const Mesh& mesh, const LevelSet& ls) {
  require_states(ens, "tracking_gradient");
  if (ens.adjoints.size() != ens.size()) throw InvalidInput("tracking_gradient: adjoints are missing");
  auto gd = empty_density(FunctionalKind::kTracking, mesh, ls);
  const std::size_t m = ens.size();
  const bool source = source_moves(ens);
  const bool mean = ens.mean_state && ens.mean_adjoint;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (!gd.on_interface[t]) continue;
    (void)interface_normal(mesh, t, ls.phi);
    const double slope = ens.op.density_slope(t);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double w = ens.weight(i, j);
        if (w == 0.0) continue;
        s += w * slope * grad_dot(mesh, t, ens.adjoints[i], ens.states[j]);
        if (source) s -= w * source_pairing(mesh, t, ens.adjoints[i], ens.loads[j]);
      }
    }
    if (mean) {
      s += slope * grad_dot(mesh, t, *ens.mean_adjoint, *ens.mean_state);
      if (source && ens.mean_load) s -= source_pairing(mesh, t, *ens.mean_adjoint, *ens.mean_load);
    }
    gd.values[t] = s;
  }
  check_finite(gd);
  return gd;
}

double compliance_mean(const StateEnsemble& ens) {
  require_states(ens, "compliance_mean");
  require_kind(ens, OperatorKind::kElasticity, "compliance_mean");
  return weighted_form(ens, *ens.stiffness, ens.states, ens.states);
}

double load_work(const StateEnsemble& ens) {
  require_states(ens, "load_work");
  double total = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    for (std::size_t j = 0; j < ens.size(); ++j) {
      const double w = ens.weight(i, j);
      if (w != 0.0) total += w * simd::dot(ens.rhs[i].values, ens.states[j].values);
    }
  }
  return total;
}

GradientDensity compliance_gradient(const StateEnsemble& ens, const Mesh& mesh, const LevelSet& ls) {
  require_states(ens, "compliance_gradient");
  require_kind(ens, OperatorKind::kElasticity, "compliance_gradient");
  auto gd = empty_density(FunctionalKind::kCompliance, mesh, ls);
  const std::size_t m = ens.size();
  const bool source = source_moves(ens);
  std::vector<std::array<double, 3>> e(m);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (!gd.on_interface[t]) continue;
    (void)interface_normal(mesh, t, ls.phi);
    const double slope = ens.op.density_slope(t);
    for (std::size_t k = 0; k < m; ++k) e[k] = triangle_strain(mesh, t, ens.states[k].values);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double w = ens.weight(i, j);
        if (w == 0.0) continue;
        s -= w * slope * strain_energy_density(ens.op.law, e[i], e[j]);
        if (source) s += 2.0 * w * source_pairing(mesh, t, ens.states[i], ens.loads[j]);
      }
    }
    gd.values[t] = s;
  }
  check_finite(gd);
  return gd;
}

}  // namespace corshape
