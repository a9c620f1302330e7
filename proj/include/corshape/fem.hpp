#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "corshape/mesh.hpp"
#include "corshape/sparse.hpp"

namespace corshape {

enum class FieldKind { kScalar, kVector2 };

/// Nodal P1 field. Vector fields interleave components: (u_x, u_y) of node i
/// live at 2i and 2i+1.
struct Field {
  FieldKind kind = FieldKind::kScalar;
  std::vector<double> values;

  static Field scalar(std::size_t nodes, double value = 0.0) {
    return {FieldKind::kScalar, std::vector<double>(nodes, value)};
  }
  static Field vector2(std::size_t nodes) { return {FieldKind::kVector2, std::vector<double>(2 * nodes, 0.0)}; }

  int components() const { return kind == FieldKind::kScalar ? 1 : 2; }
  std::size_t node_count() const { return values.size() / static_cast<std::size_t>(components()); }
  std::size_t size() const { return values.size(); }
};

/// Isotropic Hooke's law A e = 2 mu e + lambda tr(e) I in two dimensions.
struct HookeLaw {
  double lambda = 0.0;
  double mu = 1.0;

  /// Throws InvalidInput unless mu > 0 and lambda + mu > 0.
  void validate() const;
  static HookeLaw from_young_poisson(double young, double poisson);
};

// Stiffness of sum_T density(T) * int_T grad(phi_i) . grad(phi_j).
CsrMatrix assemble_poisson(const Mesh& mesh, std::span<const double> density);

/// Stiffness of sum_T density(T) * int_T A e(u) : e(v) with interleaved dofs.
CsrMatrix assemble_elasticity(const Mesh& mesh, const HookeLaw& law, std::span<const double> density);

/// P1 consistent mass matrix, optionally weighted per triangle.
CsrMatrix assemble_mass(const Mesh& mesh, std::span<const double> weight = {});

struct ConstrainedSystem {
  CsrMatrix matrix;
  Field rhs;
  std::vector<unsigned char> constrained;  // per dof
};

/// Homogeneous Dirichlet condition on the vertices of edges carrying `tag`:
/// the matching rows and columns are removed symmetrically, the diagonal is
/// set to one and the right-hand side entry to zero.
ConstrainedSystem apply_dirichlet(const CsrMatrix& matrix, const Field& rhs, const Mesh& mesh, BoundaryTag tag);

struct SolverOptions {
  double tol = 1e-10;  // relative residual ||K x - b|| <= tol ||b||
  int max_iter = 0;    // 0 selects 10 n + 100
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. Throws SolverError carrying the
/// final residual if the tolerance is not met within max_iter iterations.
Field solve_spd(const CsrMatrix& matrix, const Field& rhs, const SolverOptions& options = {},
                SolveStats* stats = nullptr);

enum class OperatorKind { kPoisson, kElasticity };

/// Which boundary-value problem to solve and with which coefficients.
struct OperatorSpec {
  OperatorKind kind = OperatorKind::kPoisson;
  /// Per-triangle coefficient: conductivity for Poisson, Ersatz stiffness
  /// scale for elasticity. Must be strictly positive.
  std::vector<double> density;
  HookeLaw law;
  BoundaryTag dirichlet_tag = BoundaryTag::kDirichlet;
  /// Per-triangle weight applied to body loads (empty means 1).
  std::vector<double> source_weight;
  /// d density / d material fraction per triangle. Empty means 1 for
  /// elasticity and -density^2 for Poisson.
  std::vector<double> density_derivative;

  double density_slope(std::size_t t) const {
    if (!density_derivative.empty()) return density_derivative[t];
    return kind == OperatorKind::kPoisson ? -density[t] * density[t] : 1.0;
  }

  FieldKind field_kind() const { return kind == OperatorKind::kPoisson ? FieldKind::kScalar : FieldKind::kVector2; }
};

enum class LoadKind { kBody, kSurface };

struct LoadSpec {
  LoadKind kind = LoadKind::kBody;
  BoundaryTag tag = BoundaryTag::kNeumann;  // surface loads only
};

/// Deterministic solutions u_k, one per load term of a low-rank correlation
/// Cor(f) = sum_ij W_ij f_i (x) f_j. With W empty (identity) this is the
/// plain sum of pure tensors.
struct StateEnsemble {
  OperatorSpec op;
  std::shared_ptr<const CsrMatrix> stiffness;  // Dirichlet-constrained operator
  std::vector<unsigned char> constrained;
  std::vector<Field> loads;   // nodal load data f_k
  LoadSpec load;
  std::vector<Field> rhs;     // assembled right-hand sides
  std::vector<Field> states;  // u_k
  std::vector<double> weights;  // m x m row-major, empty = identity
  std::vector<Field> adjoints;  // p_k, optional
  std::optional<Field> mean_load;
  std::optional<Field> mean_state;
  std::optional<Field> mean_adjoint;

  std::size_t size() const { return states.size(); }
  /// W_ij with the identity default.
  double weight(std::size_t i, std::size_t j) const {
    if (weights.empty()) return i == j ? 1.0 : 0.0;
    return weights[i * states.size() + j];
  }
};

/// Assembles the operator once and back-substitutes every load. Loads of
/// kind SURFACE enter through the boundary mass matrix of `load.tag`.
StateEnsemble solve_state_ensemble(const Mesh& mesh, const OperatorSpec& op, std::span<const Field> loads,
                                   const LoadSpec& load, const SolverOptions& options = {},
                                   std::span<const double> weights = {});

/// Discretizes a load on the mesh (mass-matrix application).
Field assemble_load(const Mesh& mesh, const OperatorSpec& op, const Field& load, const LoadSpec& spec);

/// Solves an extra system with the ensemble's constrained operator; `rhs` is
/// an already assembled right-hand side (constrained entries are zeroed).
Field solve_with_operator(const StateEnsemble& ens, Field rhs, const SolverOptions& options = {});

/// Per-triangle P1 gradient of a scalar field.
Point triangle_gradient(const Mesh& mesh, std::size_t t, std::span<const double> u);

/// Per-triangle symmetric strain (e11, e22, e12) of a vector field.
std::array<double, 3> triangle_strain(const Mesh& mesh, std::size_t t, std::span<const double> u);

/// A e(u) : e(v) for constant strains.
double strain_energy_density(const HookeLaw& law, const std::array<double, 3>& eu, const std::array<double, 3>& ev);

}  // namespace corshape
