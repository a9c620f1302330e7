#include "corshape/fem.hpp"

#include <cmath>
#include <string>

#include "corshape/error.hpp"
#include "corshape/simd/kernels.hpp"

namespace corshape {
namespace {

void check_density(const Mesh& mesh, std::span<const double> density, const char* who) {
  if (density.size() != mesh.triangle_count()) {
    throw InvalidInput(std::string(who) + ": density has " + std::to_string(density.size()) +
                       " entries, expected " + std::to_string(mesh.triangle_count()));
  }
  for (std::size_t t = 0; t < density.size(); ++t) {
    if (!(density[t] > 0.0) || !std::isfinite(density[t])) {
      throw InvalidInput(std::string(who) + ": density must be strictly positive and finite (triangle " +
                         std::to_string(t) + ")");
    }
  }
}

// Applies a scalar nodal operator to each component of a field.
Field apply_componentwise(const CsrMatrix& m, const Field& f) {
  const int nc = f.components();
  if (nc == 1) return {f.kind, m.multiply(f.values)};
  const std::size_t n = f.node_count();
  Field out{f.kind, std::vector<double>(f.values.size(), 0.0)};
  std::vector<double> comp(n), res(n);
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = f.values[nc * i + c];
    m.multiply(comp, res);
    for (std::size_t i = 0; i < n; ++i) out.values[nc * i + c] = res[i];
  }
  return out;
}

double norm2(std::span<const double> x) { return std::sqrt(simd::dot(x, x)); }

}  // namespace

void HookeLaw::validate() const {
  if (!(mu > 0.0) || !(lambda + mu > 0.0) || !std::isfinite(lambda) || !std::isfinite(mu)) {
    throw InvalidInput("HookeLaw: need mu > 0 and lambda + 2 mu / d > 0 (got lambda=" + std::to_string(lambda) +
                       ", mu=" + std::to_string(mu) + ")");
  }
}

HookeLaw HookeLaw::from_young_poisson(double young, double poisson) {
  HookeLaw law{young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)), young / (2.0 * (1.0 + poisson))};
  law.validate();
  return law;
}

CsrMatrix assemble_poisson(const Mesh& mesh, std::span<const double> density) {
  check_density(mesh, density, "assemble_poisson");
  TripletBuilder builder(mesh.vertex_count());
  builder.reserve(9 * mesh.triangle_count());
  const auto tris = mesh.triangles();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& g = mesh.basis_gradients(t);
    const double w = density[t] * mesh.area(t);
    double ke[3][3];
    for (int a = 0; a < 3; ++a) {
      for (int b = a; b < 3; ++b) {
        ke[a][b] = w * (g[a].x * g[b].x + g[a].y * g[b].y);
        ke[b][a] = ke[a][b];
      }
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) builder.add(tris[t][a], tris[t][b], ke[a][b]);
    }
  }
  return builder.build(true);
}

CsrMatrix assemble_elasticity(const Mesh& mesh, const HookeLaw& law, std::span<const double> density) {
  law.validate();
  check_density(mesh, density, "assemble_elasticity");
  const double c11 = law.lambda + 2.0 * law.mu;
  const double c12 = law.lambda;
  const double c33 = law.mu;
  TripletBuilder builder(2 * mesh.vertex_count());
  builder.reserve(36 * mesh.triangle_count());
  const auto tris = mesh.triangles();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& g = mesh.basis_gradients(t);
    // Voigt strain rows (e11, e22, 2 e12) for the six local dofs.
    double bm[3][6] = {};
    for (int a = 0; a < 3; ++a) {
      bm[0][2 * a] = g[a].x;
      bm[1][2 * a + 1] = g[a].y;
      bm[2][2 * a] = g[a].y;
      bm[2][2 * a + 1] = g[a].x;
    }
    const double w = density[t] * mesh.area(t);
    double ke[6][6];
    for (int p = 0; p < 6; ++p) {
      const double d0 = c11 * bm[0][p] + c12 * bm[1][p];
      const double d1 = c12 * bm[0][p] + c11 * bm[1][p];
      const double d2 = c33 * bm[2][p];
      for (int q = p; q < 6; ++q) {
        ke[p][q] = w * (d0 * bm[0][q] + d1 * bm[1][q] + d2 * bm[2][q]);
        ke[q][p] = ke[p][q];
      }
    }
    for (int p = 0; p < 6; ++p) {
      const std::size_t gp = 2 * tris[t][p / 2] + p % 2;
      for (int q = 0; q < 6; ++q) builder.add(gp, 2 * tris[t][q / 2] + q % 2, ke[p][q]);
    }
  }
  return builder.build(true);
}

CsrMatrix assemble_mass(const Mesh& mesh, std::span<const double> weight) {
  if (!weight.empty() && weight.size() != mesh.triangle_count()) {
    throw InvalidInput("assemble_mass: weight size mismatch");
  }
  TripletBuilder builder(mesh.vertex_count());
  builder.reserve(9 * mesh.triangle_count());
  const auto tris = mesh.triangles();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const double w = (weight.empty() ? 1.0 : weight[t]) * mesh.area(t) / 12.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) builder.add(tris[t][a], tris[t][b], a == b ? 2.0 * w : w);
    }
  }
  return builder.build(true);
}

ConstrainedSystem apply_dirichlet(const CsrMatrix& matrix, const Field& rhs, const Mesh& mesh, BoundaryTag tag) {
  if (!mesh.has_tag(tag)) {
    throw InvalidInput("apply_dirichlet: no boundary edge carries tag " + to_string(tag));
  }
  if (rhs.size() != matrix.size()) throw InvalidInput("apply_dirichlet: rhs/matrix size mismatch");
  const int nc = rhs.components();
  if (matrix.size() != mesh.vertex_count() * static_cast<std::size_t>(nc)) {
    throw InvalidInput("apply_dirichlet: matrix does not match mesh and field kind");
  }
  std::vector<unsigned char> fixed(matrix.size(), 0);
  for (Index v : mesh.tagged_nodes(tag)) {
    for (int c = 0; c < nc; ++c) fixed[nc * v + c] = 1;
  }

  TripletBuilder builder(matrix.size());
  builder.reserve(matrix.nonzeros());
  const auto rp = matrix.row_ptr();
  const auto col = matrix.col();
  const auto val = matrix.values();
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (fixed[i]) {
      builder.add(i, i, 1.0);
      continue;
    }
    for (std::uint32_t k = rp[i]; k < rp[i + 1]; ++k) {
      if (!fixed[col[k]]) builder.add(i, col[k], val[k]);
    }
  }
  ConstrainedSystem out{builder.build(matrix.symmetric()), rhs, std::move(fixed)};
  for (std::size_t i = 0; i < out.rhs.size(); ++i) {
    if (out.constrained[i]) out.rhs.values[i] = 0.0;
  }
  return out;
}

Field solve_spd(const CsrMatrix& matrix, const Field& rhs, const SolverOptions& options, SolveStats* stats) {
  const std::size_t n = matrix.size();
  if (rhs.size() != n) throw InvalidInput("solve_spd: rhs/matrix size mismatch");
  if (!(options.tol > 0.0 && options.tol < 1.0)) throw InvalidInput("solve_spd: tol must lie in (0,1)");
  const int max_iter = options.max_iter > 0 ? options.max_iter : static_cast<int>(10 * n + 100);

  Field x{rhs.kind, std::vector<double>(n, 0.0)};
  const std::span<const double> b = rhs.values;
  const double bnorm = norm2(b);
  if (stats) *stats = {};
  if (bnorm == 0.0) return x;

  std::vector<double> inv_diag = matrix.diagonal();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0.0)) {
      throw SolverError("solve_spd: non-positive diagonal entry at row " + std::to_string(i), 1.0, 0);
    }
    inv_diag[i] = 1.0 / inv_diag[i];
  }

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z(n), p(n), q(n);
  const double target = options.tol * bnorm;
  int it = 0;
  double rnorm = bnorm;
  // Outer loop restarts from the true residual whenever the recursive one
  // claims convergence but the recomputed one does not.
  while (true) {
    simd::hadamard(inv_diag, r, z);
    std::copy(z.begin(), z.end(), p.begin());
    double rz = simd::dot(r, z);
    while (it < max_iter && rnorm > target) {
      matrix.multiply(p, q);
      const double pq = simd::dot(p, q);
      if (!(pq > 0.0)) {
        throw SolverError("solve_spd: matrix is not positive definite (p.Ap <= 0)", rnorm / bnorm, it);
      }
      const double alpha = rz / pq;
      simd::axpy(alpha, p, x.values);
      simd::axpy(-alpha, q, r);
      rnorm = norm2(r);
      ++it;
      simd::hadamard(inv_diag, r, z);
      const double rz_new = simd::dot(r, z);
      simd::xpby(z, rz_new / rz, p);
      rz = rz_new;
    }
    matrix.multiply(x.values, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    rnorm = norm2(r);
    if (rnorm <= target) break;
    if (it >= max_iter) {
      throw SolverError("solve_spd: no convergence after " + std::to_string(it) +
                            " iterations (relative residual " + std::to_string(rnorm / bnorm) + ")",
                        rnorm / bnorm, it);
    }
  }
  if (stats) *stats = {it, rnorm / bnorm};
  return x;
}

Field assemble_load(const Mesh& mesh, const OperatorSpec& op, const Field& load, const LoadSpec& spec) {
  if (load.kind != op.field_kind()) throw InvalidInput("assemble_load: load kind does not match the operator");
  if (load.node_count() != mesh.vertex_count() || load.size() % load.components() != 0) {
    throw InvalidInput("assemble_load: load size does not match the mesh");
  }
  if (spec.kind == LoadKind::kBody) {
    return apply_componentwise(assemble_mass(mesh, op.source_weight), load);
  }
  return apply_componentwise(boundary_mass_matrix(mesh, spec.tag), load);
}

StateEnsemble solve_state_ensemble(const Mesh& mesh, const OperatorSpec& op, std::span<const Field> loads,
                                   const LoadSpec& load, const SolverOptions& options,
                                   std::span<const double> weights) {
  if (loads.empty()) throw InvalidInput("solve_state_ensemble: no loads");
  if (!weights.empty() && weights.size() != loads.size() * loads.size()) {
    throw InvalidInput("solve_state_ensemble: weight matrix must be m x m");
  }
  CsrMatrix k = op.kind == OperatorKind::kPoisson ? assemble_poisson(mesh, op.density)
                                                  : assemble_elasticity(mesh, op.law, op.density);
  const CsrMatrix load_matrix = load.kind == LoadKind::kBody ? assemble_mass(mesh, op.source_weight)
                                                             : boundary_mass_matrix(mesh, load.tag);

  StateEnsemble ens;
  ens.op = op;
  ens.load = load;
  ens.loads.assign(loads.begin(), loads.end());
  ens.weights.assign(weights.begin(), weights.end());
  Field zero{op.field_kind(), std::vector<double>(k.size(), 0.0)};
  auto constrained = apply_dirichlet(k, zero, mesh, op.dirichlet_tag);
  ens.constrained = std::move(constrained.constrained);
  ens.stiffness = std::make_shared<const CsrMatrix>(std::move(constrained.matrix));

  for (std::size_t idx = 0; idx < loads.size(); ++idx) {
    const Field& f = loads[idx];
    if (f.kind != op.field_kind() || f.node_count() != mesh.vertex_count()) {
      throw InvalidInput("solve_state_ensemble: load " + std::to_string(idx) + " does not match the operator");
    }
    Field rhs = apply_componentwise(load_matrix, f);
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      if (ens.constrained[i]) rhs.values[i] = 0.0;
    }
    try {
      ens.states.push_back(solve_spd(*ens.stiffness, rhs, options));
    } catch (const SolverError& e) {
      throw SolverError("load " + std::to_string(idx) + ": " + e.what(), e.residual(), e.iterations());
    }
    ens.rhs.push_back(std::move(rhs));
  }
  return ens;
}

Field solve_with_operator(const StateEnsemble& ens, Field rhs, const SolverOptions& options) {
  if (!ens.stiffness || rhs.size() != ens.stiffness->size()) {
    throw InvalidInput("solve_with_operator: rhs does not match the ensemble operator");
  }
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (ens.constrained[i]) rhs.values[i] = 0.0;
  }
  return solve_spd(*ens.stiffness, rhs, options);
}

Point triangle_gradient(const Mesh& mesh, std::size_t t, std::span<const double> u) {
  const auto& tri = mesh.triangles()[t];
  const auto& g = mesh.basis_gradients(t);
  Point out;
  for (int a = 0; a < 3; ++a) {
    out.x += u[tri[a]] * g[a].x;
    out.y += u[tri[a]] * g[a].y;
  }
  return out;
}

std::array<double, 3> triangle_strain(const Mesh& mesh, std::size_t t, std::span<const double> u) {
  const auto& tri = mesh.triangles()[t];
  const auto& g = mesh.basis_gradients(t);
  double dux_dx = 0.0, dux_dy = 0.0, duy_dx = 0.0, duy_dy = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double ux = u[2 * tri[a]];
    const double uy = u[2 * tri[a] + 1];
    dux_dx += ux * g[a].x;
    dux_dy += ux * g[a].y;
    duy_dx += uy * g[a].x;
    duy_dy += uy * g[a].y;
  }
  return {dux_dx, duy_dy, 0.5 * (dux_dy + duy_dx)};
}

double strain_energy_density(const HookeLaw& law, const std::array<double, 3>& eu, const std::array<double, 3>& ev) {
  const double tr_u = eu[0] + eu[1];
  const double tr_v = ev[0] + ev[1];
  return 2.0 * law.mu * (eu[0] * ev[0] + eu[1] * ev[1] + 2.0 * eu[2] * ev[2]) + law.lambda * tr_u * tr_v;
}

}  // namespace corshape
