#include "corshape/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "corshape/error.hpp"
#include "corshape/io.hpp"

namespace corshape {
namespace {

// Rethrows the active exception with "iteration k, stage s: " prepended,
// keeping its category.
[[noreturn]] void rethrow_with_context(int iter, const char* stage) {
  const std::string prefix = "iteration " + std::to_string(iter) + ", stage " + stage + ": ";
  try {
    throw;
  } catch (const SolverError& e) {
    throw SolverError(prefix + e.what(), e.residual(), e.iterations());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

void clamp_frozen(const Problem& problem, LevelSet& ls) {
  const double cap = -0.5 * problem.mesh.h_min();
  for (Index v : problem.frozen) ls.phi[v] = std::min(ls.phi[v], cap);
}

std::string output_path(const OptimizationConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

}  // namespace

OperatorSpec operator_for(const Problem& problem, const LevelSet& ls) {
  OperatorSpec op;
  op.kind = problem.operator_kind();
  op.law = problem.law;
  op.dirichlet_tag = BoundaryTag::kDirichlet;
  if (op.kind == OperatorKind::kElasticity) {
    op.density = density_from_levelset(problem.mesh, ls, problem.eps_ersatz);
    op.density_derivative.assign(op.density.size(), 1.0 - problem.eps_ersatz);
  } else {
    op.density = conductivity_from_levelset(problem.mesh, ls, problem.eps_ersatz);
    op.source_weight = material_fraction(problem.mesh, ls.phi);
    op.density_derivative.resize(op.density.size());
    for (std::size_t t = 0; t < op.density.size(); ++t) {
      op.density_derivative[t] = -(1.0 - problem.eps_ersatz) * op.density[t] * op.density[t];
    }
  }
  return op;
}

Evaluation evaluate(const Problem& problem, const LevelSet& ls, const SolverOptions& options) {
  const Mesh& mesh = problem.mesh;
  const OperatorSpec op = operator_for(problem, ls);
  StateEnsemble ens = solve_state_ensemble(mesh, op, problem.loads, problem.load, options, problem.weights);
  Evaluation ev;
  ev.volume = volume(mesh, material_fraction(mesh, ls.phi));
  switch (problem.functional) {
    case FunctionalKind::kCompliance:
      ev.objective = compliance_mean(ens);
      ev.gradient = compliance_gradient(ens, mesh, ls);
      break;
    case FunctionalKind::kDirichletEnergy:
      ev.objective = dirichlet_energy_mean(ens);
      ev.gradient = dirichlet_energy_gradient(ens, mesh, ls);
      break;
    case FunctionalKind::kTracking: {
      if (!problem.tracking || !problem.mean_load) throw InvalidInput("tracking problem needs u0, B and a mean load");
      attach_mean_state(ens, mesh, *problem.mean_load, problem.load, options);
      ens = tracking_adjoints(std::move(ens), mesh, *problem.tracking, options);
      ev.objective = tracking_mean(ens, mesh, *problem.tracking);
      ev.gradient = tracking_gradient(ens, mesh, ls);
      break;
    }
  }
  return ev;
}

void OptimizationConfig::validate(double box_area) const {
  auto fail = [](const std::string& key, const std::string& why) { throw InvalidInput(key + ": " + why); };
  if (!(volume_target > 0.0 && volume_target < box_area)) fail("volume_target", "must lie in (0, box area)");
  if (iterations < 0) fail("iterations", "must be >= 0");
  if (!(penalty0 >= 0.0)) fail("penalty0", "must be >= 0");
  if (!(penalty_growth >= 1.0)) fail("penalty_growth", "must be >= 1");
  if (penalty_interval < 1) fail("penalty_interval", "must be >= 1");
  if (!(penalty_max_factor >= 1.0)) fail("penalty_max_factor", "must be >= 1");
  if (!(cfl > 0.0 && cfl <= 0.9)) fail("cfl", "must lie in (0, 0.9]");
  if (redistance_every < 0) fail("redistance_every", "must be >= 0");
  if (!(solver_tol > 0.0 && solver_tol < 1.0)) fail("solver_tol", "must lie in (0, 1)");
  if (snapshot_every < 0) fail("snapshot_every", "must be >= 0");
}

double augmented_lagrangian_value(double objective, double volume, double target, double lambda, double penalty) {
  const double c = volume - target;
  return objective + lambda * c + 0.5 * penalty * c * c;
}

Multipliers multiplier_update(double lambda, double penalty, double volume, double target, double growth,
                              double penalty_max, bool grow) {
  Multipliers out{lambda + penalty * (volume - target), penalty};
  if (grow) out.penalty = std::min(growth * penalty, penalty_max);
  return out;
}

StepControl::StepControl(double dt, double dt_min, double dt_max)
    : dt_(std::min(dt, dt_max)), dt_min_(dt_min), dt_max_(dt_max) {
  if (!(dt_min > 0.0 && dt_min <= dt_max)) throw InvalidInput("StepControl: need 0 < dt_min <= dt_max");
}

double StepControl::update(bool decreased) {
  if (decreased) {
    if (++decreases_ >= 5) {
      dt_ = std::min(1.2 * dt_, dt_max_);
      decreases_ = 0;
    }
  } else {
    decreases_ = 0;
    if (0.5 * dt_ < dt_min_) {
      collapsed_ = true;
      dt_ = dt_min_;
    } else {
      dt_ *= 0.5;
    }
  }
  return dt_;
}

OptimizationHistory run_optimization(const Problem& problem, const OptimizationConfig& cfg) {
  const Mesh& mesh = problem.mesh;
  cfg.validate(mesh.box().area());
  const bool files = !cfg.output_dir.empty();
  const SolverOptions solver{cfg.solver_tol, 0};
  const double mu = cfg.smoothing >= 0.0 ? cfg.smoothing : std::pow(2.0 * mesh.h_min(), 2);

  OptimizationHistory history;
  LevelSet ls = problem.initial;
  clamp_frozen(problem, ls);
  int iter = 0;
  const char* stage = "evaluate";

  auto snapshot = [&](int it, const LevelSet& shape, const Evaluation& ev) {
    if (!files || cfg.snapshot_every == 0 || it % cfg.snapshot_every != 0) return;
    char name[32];
    std::snprintf(name, sizeof name, "shape_%04d.vtk", it);
    write_vtk(mesh, shape.phi, material_fraction(mesh, shape.phi), ev.gradient.values, output_path(cfg, name));
  };
  auto flush = [&] {
    if (!files) return;
    try {
      write_history(history, output_path(cfg, "history.csv"));
    } catch (const Error&) {
    }
  };

  try {
    Evaluation ev = evaluate(problem, ls, solver);
    const double area = mesh.box().area();
    double penalty = cfg.penalty0 > 0.0 ? cfg.penalty0 : 10.0 * std::abs(ev.objective) / area;
    if (!(penalty > 0.0)) penalty = 1.0 / area;
    const double penalty_max = cfg.penalty_max_factor * penalty;
    double lambda = cfg.lambda0;

    const double dt_max = cfg.cfl / (1.0 / mesh.hx() + 1.0 / mesh.hy());
    StepControl step(dt_max, 1e-6 * mesh.h_min(), dt_max);
    history.records.push_back({0, ev.objective, ev.volume, lambda, penalty, 0.0, cfg.rank});
    snapshot(0, ls, ev);
    history.stop_reason = "iteration budget";

    int accepted = 0;
    for (iter = 1; iter <= cfg.iterations; ++iter) {
      stage = "velocity";
      const double shift = lambda + penalty * (ev.volume - cfg.volume_target);
      std::vector<double> cell(mesh.triangle_count(), 0.0);
      for (std::size_t t = 0; t < cell.size(); ++t) {
        if (ev.gradient.on_interface[t]) cell[t] = -(ev.gradient.values[t] + shift);
      }
      std::vector<double> v = extend_velocity(mesh, ls, cell, mu);
      double vmax = 0.0;
      for (double x : v) vmax = std::max(vmax, std::abs(x));
      if (vmax == 0.0) {
        history.stop_reason = "stationary";
        break;
      }
      for (double& x : v) x /= vmax;

      stage = "advect";
      const double dt = step.dt();
      LevelSet trial = advect(mesh, ls, v, dt, 1, cfg.cfl);
      if (cfg.redistance_every > 0 && iter % cfg.redistance_every == 0) {
        stage = "redistance";
        trial = redistance(mesh, trial);
      }
      clamp_frozen(problem, trial);

      stage = "evaluate";
      Evaluation next = evaluate(problem, trial, solver);

      stage = "step control";
      const double before = augmented_lagrangian_value(ev.objective, ev.volume, cfg.volume_target, lambda, penalty);
      const double after = augmented_lagrangian_value(next.objective, next.volume, cfg.volume_target, lambda, penalty);
      const bool decreased = after <= before + 1e-12 * std::abs(before);
      step.update(decreased);
      if (!decreased) {
        if (step.collapsed()) {
          history.stop_reason = "step collapse";
          break;
        }
        continue;
      }
      ls = std::move(trial);
      ev = std::move(next);
      ++accepted;
      const auto m = multiplier_update(lambda, penalty, ev.volume, cfg.volume_target, cfg.penalty_growth,
                                       penalty_max, accepted % cfg.penalty_interval == 0);
      lambda = m.lambda;
      penalty = m.penalty;
      history.records.push_back({iter, ev.objective, ev.volume, lambda, penalty, dt, cfg.rank});
      stage = "output";
      snapshot(iter, ls, ev);
    }
    history.final_shape = ls;
  } catch (const Error&) {
    flush();
    rethrow_with_context(iter, stage);
  }
  if (files) write_history(history, output_path(cfg, "history.csv"));
  return history;
}

}  // namespace corshape
