#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "corshape/error.hpp"
#include "corshape/io.hpp"
#include "corshape/optimizer.hpp"

using namespace corshape;

namespace {

const LoadSpec kBody{LoadKind::kBody, BoundaryTag::kNeumann};

LevelSet disc(const Mesh& m, Point c, double r) {
  LevelSet ls;
  for (const Point p : m.vertices()) ls.phi.push_back(std::hypot(p.x - c.x, p.y - c.y) - r);
  return ls;
}

// Grounded unit square, Dirichlet energy, a disc of void in the middle.
Problem square_problem(int n, double load_value) {
  Problem p;
  p.mesh = tag_boundary(generate_structured_mesh(n, n, {0, 0, 1, 1}), Region{{0, 0, 1, 1}}, BoundaryTag::kDirichlet);
  p.functional = FunctionalKind::kDirichletEnergy;
  p.load = kBody;
  p.loads = {Field::scalar(p.mesh.vertex_count(), load_value)};
  // negative phi is material, so flip the disc to make it a hole
  LevelSet ls = disc(p.mesh, {0.5, 0.5}, 0.3);
  for (double& v : ls.phi) v = -v;
  p.initial = ls;
  return p;
}

std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("corshape_opt_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("augmented Lagrangian value") {
  CHECK(augmented_lagrangian_value(1.5, 0.35, 0.35, 7.0, 100.0) == 1.5);
  CHECK(augmented_lagrangian_value(1.5, 0.9, 0.35, 0.0, 0.0) == 1.5);
  CHECK(augmented_lagrangian_value(1.0, 0.5, 0.3, 2.0, 10.0) == doctest::Approx(1.0 + 0.4 + 0.2));
  // the quadratic term is even in the violation
  const double up = augmented_lagrangian_value(0.0, 0.4, 0.3, 0.0, 3.0);
  const double down = augmented_lagrangian_value(0.0, 0.2, 0.3, 0.0, 3.0);
  CHECK(up == doctest::Approx(down));
}

TEST_CASE("multiplier update") {
  SUBCASE("constraint met leaves lambda alone") {
    const auto m = multiplier_update(0.7, 5.0, 0.35, 0.35, 1.2, 100.0, false);
    CHECK(m.lambda == 0.7);
    CHECK(m.penalty == 5.0);
  }
  SUBCASE("unit growth keeps the penalty") {
    const auto m = multiplier_update(0.0, 5.0, 0.45, 0.35, 1.0, 100.0, true);
    CHECK(m.penalty == 5.0);
    CHECK(m.lambda == doctest::Approx(0.5));
  }
  SUBCASE("two updates in a row") {
    auto m = multiplier_update(0.0, 2.0, 0.5, 0.3, 1.5, 100.0, true);
    CHECK(m.lambda == doctest::Approx(0.4));
    CHECK(m.penalty == doctest::Approx(3.0));
    m = multiplier_update(m.lambda, m.penalty, 0.4, 0.3, 1.5, 100.0, true);
    CHECK(m.lambda == doctest::Approx(0.7));
    CHECK(m.penalty == doctest::Approx(4.5));
  }
  SUBCASE("penalty cap") {
    const auto m = multiplier_update(0.0, 90.0, 0.3, 0.3, 2.0, 100.0, true);
    CHECK(m.penalty == 100.0);
  }
}

TEST_CASE("step control") {
  SUBCASE("steady decrease grows up to the cap") {
    StepControl s(0.1, 1e-6, 0.2);
    for (int i = 0; i < 4; ++i) CHECK(s.update(true) == 0.1);
    CHECK(s.update(true) == doctest::Approx(0.12));
    for (int i = 0; i < 100; ++i) CHECK(s.update(true) <= 0.2);
    CHECK(s.dt() == 0.2);
  }
  SUBCASE("increase halves") {
    StepControl s(0.1, 1e-6, 0.1);
    CHECK(s.update(false) == doctest::Approx(0.05));
    CHECK(s.update(false) == doctest::Approx(0.025));
    CHECK_FALSE(s.collapsed());
  }
  SUBCASE("an increase resets the decrease count") {
    StepControl s(0.1, 1e-6, 1.0);
    for (int i = 0; i < 4; ++i) s.update(true);
    s.update(false);
    for (int i = 0; i < 4; ++i) CHECK(s.update(true) == doctest::Approx(0.05));
  }
  SUBCASE("collapse") {
    StepControl s(1e-3, 4e-4, 1e-3);
    s.update(false);
    CHECK_FALSE(s.collapsed());
    s.update(false);
    CHECK(s.collapsed());
    CHECK(s.dt() >= 4e-4);
  }
  SUBCASE("initial dt is capped") {
    StepControl s(5.0, 1e-6, 0.5);
    CHECK(s.dt() == 0.5);
  }
  CHECK_THROWS_AS(StepControl(0.1, 0.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(StepControl(0.1, 0.2, 0.1), InvalidInput);
}

TEST_CASE("config validation names the key") {
  auto message = [](OptimizationConfig cfg) {
    try {
      cfg.validate(1.0);
    } catch (const InvalidInput& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  OptimizationConfig cfg;
  CHECK(message(cfg).empty());
  cfg.volume_target = 1.5;
  CHECK(message(cfg).rfind("volume_target", 0) == 0);
  cfg = {};
  cfg.cfl = 0.0;
  CHECK(message(cfg).rfind("cfl", 0) == 0);
  cfg = {};
  cfg.iterations = -1;
  CHECK(message(cfg).rfind("iterations", 0) == 0);
  cfg = {};
  cfg.penalty_growth = 0.5;
  CHECK(message(cfg).rfind("penalty_growth", 0) == 0);
  cfg = {};
  cfg.solver_tol = 0.0;
  CHECK(message(cfg).rfind("solver_tol", 0) == 0);
}

TEST_CASE("zero iterations records the initial shape only") {
  const Problem p = square_problem(16, 1.0);
  OptimizationConfig cfg;
  cfg.iterations = 0;
  const auto h = run_optimization(p, cfg);
  REQUIRE(h.records.size() == 1);
  CHECK(h.records[0].iter == 0);
  CHECK(h.records[0].dt == 0.0);
  CHECK(h.final_shape.phi == p.initial.phi);
  const Evaluation ev = evaluate(p, p.initial, {cfg.solver_tol, 0});
  CHECK(h.records[0].objective == doctest::Approx(ev.objective));
  CHECK(h.records[0].volume == doctest::Approx(ev.volume));
}

TEST_CASE("zero loads drive the volume to the target") {
  const Problem p = square_problem(24, 0.0);
  OptimizationConfig cfg;
  cfg.volume_target = 0.5;
  cfg.iterations = 100;
  const auto h = run_optimization(p, cfg);
  REQUIRE(h.records.size() > 1);
  for (const auto& r : h.records) CHECK(r.objective == 0.0);
  CHECK(std::abs(h.records.back().volume - 0.5) <= 0.02 * 0.5);
}

TEST_CASE("a shape at the target with zero loads is stationary") {
  Problem p = square_problem(16, 0.0);
  const Evaluation ev = evaluate(p, p.initial);
  OptimizationConfig cfg;
  cfg.volume_target = ev.volume;
  cfg.iterations = 20;
  const auto h = run_optimization(p, cfg);
  CHECK(h.stop_reason == "stationary");
  CHECK(h.records.size() == 1);
  CHECK(h.final_shape.phi == p.initial.phi);
}

TEST_CASE("runs are bitwise reproducible") {
  const Problem p = square_problem(16, 1.0);
  OptimizationConfig cfg;
  cfg.iterations = 12;
  const auto a = run_optimization(p, cfg);
  const auto b = run_optimization(p, cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].objective == b.records[i].objective);
    CHECK(a.records[i].volume == b.records[i].volume);
    CHECK(a.records[i].lambda == b.records[i].lambda);
    CHECK(a.records[i].dt == b.records[i].dt);
  }
  CHECK(a.final_shape.phi == b.final_shape.phi);
}

TEST_CASE("history is monotone in the iteration index and respects the step cap") {
  const Problem p = square_problem(16, 1.0);
  OptimizationConfig cfg;
  cfg.iterations = 15;
  const auto h = run_optimization(p, cfg);
  const double dt_max = cfg.cfl / (1.0 / p.mesh.hx() + 1.0 / p.mesh.hy());
  for (std::size_t i = 1; i < h.records.size(); ++i) {
    CHECK(h.records[i].iter > h.records[i - 1].iter);
    CHECK(h.records[i].dt <= dt_max);
    CHECK(h.records[i].penalty >= h.records[i - 1].penalty);
  }
}

TEST_CASE("frozen vertices stay in the material") {
  Problem p = square_problem(16, 1.0);
  for (Index v = 0; v < p.mesh.vertex_count(); ++v) {
    const Point q = p.mesh.vertices()[v];
    if (std::hypot(q.x - 0.5, q.y - 0.5) < 0.1) p.frozen.push_back(v);
  }
  REQUIRE_FALSE(p.frozen.empty());
  OptimizationConfig cfg;
  cfg.iterations = 10;
  const auto h = run_optimization(p, cfg);
  for (Index v : p.frozen) CHECK(h.final_shape.phi[v] <= -0.5 * p.mesh.h_min());
}

TEST_CASE("output files") {
  const Problem p = square_problem(12, 1.0);
  OptimizationConfig cfg;
  cfg.iterations = 4;
  cfg.snapshot_every = 2;
  cfg.output_dir = scratch_dir("files");
  const auto h = run_optimization(p, cfg);
  const auto back = read_history(cfg.output_dir + "/history.csv");
  REQUIRE(back.size() == h.records.size());
  CHECK(back.back().objective == h.records.back().objective);
  CHECK(std::filesystem::exists(cfg.output_dir + "/shape_0000.vtk"));
}

TEST_CASE("a failing stage is reported with the iteration and flushes history") {
  const Problem p = square_problem(12, 1.0);
  OptimizationConfig cfg;
  cfg.iterations = 3;
  cfg.solver_tol = 1e-300;
  cfg.output_dir = scratch_dir("fail");
  std::string what;
  try {
    run_optimization(p, cfg);
  } catch (const SolverError& e) {
    what = e.what();
  }
  CHECK(what.rfind("iteration 0, stage evaluate: ", 0) == 0);
  CHECK(std::filesystem::exists(cfg.output_dir + "/history.csv"));
}

TEST_CASE("operator coefficients follow the level set") {
  Problem p = square_problem(8, 1.0);
  p.eps_ersatz = 1e-2;
  const OperatorSpec op = operator_for(p, p.initial);
  REQUIRE(op.density.size() == static_cast<std::size_t>(p.mesh.triangle_count()));
  for (std::size_t t = 0; t < op.density.size(); ++t) {
    CHECK(op.density[t] >= 1.0 - 1e-12);
    CHECK(op.density[t] <= 1.0 / p.eps_ersatz + 1e-9);
    CHECK(op.density_slope(t) < 0.0);
  }
  p.functional = FunctionalKind::kCompliance;
  const OperatorSpec el = operator_for(p, p.initial);
  for (std::size_t t = 0; t < el.density.size(); ++t) {
    CHECK(el.density[t] >= p.eps_ersatz - 1e-12);
    CHECK(el.density[t] <= 1.0 + 1e-12);
    CHECK(el.density_slope(t) == doctest::Approx(1.0 - p.eps_ersatz));
  }
}
