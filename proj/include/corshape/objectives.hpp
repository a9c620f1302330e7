#pragma once

#include <span>
#include <string>
#include <vector>

#include "corshape/fem.hpp"
#include "corshape/levelset.hpp"
#include "corshape/mesh.hpp"

namespace corshape {

enum class FunctionalKind { kDirichletEnergy, kTracking, kCompliance };

std::string to_string(FunctionalKind kind);

/// Per-triangle shape-gradient density. Values are zero off the interface;
/// the shape derivative in direction theta is approximately
/// int_Gamma values * theta.n ds. Each value is the derivative of the
/// discrete functional with respect to the material fraction of its
/// triangle, per unit area: the stiffness part uses the full P1 gradients
/// (on Gamma they are normal) and body loads weighted by the fraction add a
/// source part that vanishes with the mesh size.
struct GradientDensity {
  FunctionalKind kind = FunctionalKind::kCompliance;
  std::vector<double> values;
  std::vector<unsigned char> on_interface;
};

/// Target u0 and observation region B (per-triangle indicator).
struct TrackingData {
  Field u0;
  std::vector<unsigned char> region;
};

/// Marks the triangles whose centroid lies in `b`; throws if none does.
TrackingData make_tracking_data(const Mesh& mesh, Field u0, const Box& b);

/// -1/2 sum_ij W_ij u_i^T K u_j; never positive.
double dirichlet_energy_mean(const StateEnsemble& ens);

/// sum_ij W_ij [1/2 kappa' grad u_i . grad u_j - u_i . f_j] on interface
/// triangles, kappa' = d kappa / d fraction. For the superconducting void
/// kappa' = -(1 - eps) kappa^2, giving -1/2 |kappa grad u|^2 = -1/2 (du/dn)^2.
GradientDensity dirichlet_energy_gradient(const StateEnsemble& ens, const Mesh& mesh, const LevelSet& ls);

/// Solves for E(u) from the mean load and stores it in ens.mean_state.
void attach_mean_state(StateEnsemble& ens, const Mesh& mesh, const Field& mean_load, const LoadSpec& load,
                       const SolverOptions& options = {});

/// 1/2 int_B [Cor(u)(x,x) - 2 u0 E(u) + u0^2] with exact P1 quadrature.
double tracking_mean(const StateEnsemble& ens, const Mesh& mesh, const TrackingData& data);

/// Adjoints K p_k = -M_B u_k, plus the mean adjoint K q = M_B u0 that carries
/// the coupling with the target.
StateEnsemble tracking_adjoints(StateEnsemble ens, const Mesh& mesh, const TrackingData& data,
                                const SolverOptions& options = {});

/// sum_ij W_ij kappa' grad p_i . grad u_j + kappa' grad q . grad E(u), plus
/// the matching source part; equals -sum (du_i/dn)(dp_j/dn) - (dE/dn)(dq/dn) on Gamma.
GradientDensity tracking_gradient(const StateEnsemble& ens, const Mesh& mesh, const LevelSet& ls);

/// sum_ij W_ij u_i^T K u_j; never negative.
double compliance_mean(const StateEnsemble& ens);

/// Boundary-work form sum_ij W_ij F_i^T u_j of the same mean.
double load_work(const StateEnsemble& ens);

/// -sum_ij W_ij rho' A e(u_i) : e(u_j) on interface triangles (full
/// material law), rho' = 1 - eps.
GradientDensity compliance_gradient(const StateEnsemble& ens, const Mesh& mesh, const LevelSet& ls);

}  // namespace corshape
