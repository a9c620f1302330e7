#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corshape/fem.hpp"
#include "corshape/levelset.hpp"
#include "corshape/mesh.hpp"
#include "corshape/objectives.hpp"

namespace corshape {

/// Everything the optimization loop needs once the correlation has been
/// factorized: the mesh, the operator, and the fixed load ensemble.
struct Problem {
  Mesh mesh;
  FunctionalKind functional = FunctionalKind::kCompliance;
  HookeLaw law;
  double eps_ersatz = 1e-3;
  LoadSpec load;
  std::vector<Field> loads;
  std::vector<double> weights;  // m x m coupling, empty = identity
  std::optional<Field> mean_load;
  std::optional<TrackingData> tracking;
  /// Vertices that must stay inside the material (phi clamped to <= -h/2).
  std::vector<Index> frozen;
  LevelSet initial;

  OperatorKind operator_kind() const {
    return functional == FunctionalKind::kCompliance ? OperatorKind::kElasticity : OperatorKind::kPoisson;
  }
};

/// Coefficients of the state operator for the shape described by `ls`.
OperatorSpec operator_for(const Problem& problem, const LevelSet& ls);

struct Evaluation {
  double objective = 0.0;
  double volume = 0.0;
  GradientDensity gradient;
};

/// Ensemble solve, mean objective, material volume and gradient density.
Evaluation evaluate(const Problem& problem, const LevelSet& ls, const SolverOptions& options = {});

struct OptimizationConfig {
  double volume_target = 0.35;
  int iterations = 100;
  double lambda0 = 0.0;
  double penalty0 = 0.0;  // 0 selects 10 |M(D0)| / area
  double penalty_growth = 1.2;
  int penalty_interval = 5;
  double penalty_max_factor = 1e3;
  double cfl = 0.5;
  int redistance_every = 5;
  double smoothing = -1.0;  // < 0 selects (2 h)^2
  double solver_tol = 1e-10;
  int snapshot_every = 0;  // 0 disables VTK snapshots
  std::string output_dir;  // empty disables all file output
  int rank = 0;            // reported in the history

  void validate(double box_area) const;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double volume = 0.0;
  double lambda = 0.0;
  double penalty = 0.0;
  double dt = 0.0;
  int rank = 0;
};

struct OptimizationHistory {
  std::vector<IterationRecord> records;
  LevelSet final_shape;
  std::string stop_reason;
};

/// L = M + lambda (vol - target) + (b / 2) (vol - target)^2.
double augmented_lagrangian_value(double objective, double volume, double target, double lambda, double penalty);

struct Multipliers {
  double lambda = 0.0;
  double penalty = 0.0;
};

/// lambda' = lambda + b (vol - target); b' = min(growth b, b_max) when
/// `grow` is set.
Multipliers multiplier_update(double lambda, double penalty, double volume, double target, double growth,
                              double penalty_max, bool grow);

/// Step-size rule: halve after an increase of the Lagrangian (never below
/// `dt_min`), grow by 1.2 after 5 consecutive decreases (never above the
/// CFL bound).
class StepControl {
 public:
  StepControl(double dt, double dt_min, double dt_max);

  /// Reports whether the last step decreased the Lagrangian; returns the
  /// next dt.
  double update(bool decreased);
  double dt() const { return dt_; }
  /// True once a halving would have gone below dt_min.
  bool collapsed() const { return collapsed_; }

 private:
  double dt_;
  double dt_min_;
  double dt_max_;
  int decreases_ = 0;
  bool collapsed_ = false;
};

/// Level-set descent on the augmented Lagrangian. Writes history.csv and
/// shape_%04d.vtk snapshots when an output directory is configured; on a
/// stage failure the partial history is flushed and the error rethrown with
/// the iteration and stage.
OptimizationHistory run_optimization(const Problem& problem, const OptimizationConfig& cfg);

}  // namespace corshape
