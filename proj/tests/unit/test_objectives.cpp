#include <doctest.h>

#include <cmath>
#include <random>

#include "corshape/correlation.hpp"
#include "corshape/error.hpp"
#include "corshape/objectives.hpp"
#include "corshape/optimizer.hpp"

using namespace corshape;

namespace {

const SolverOptions kTight{1e-12, 0};
const LoadSpec kBody{LoadKind::kBody, BoundaryTag::kNeumann};
const LoadSpec kSurface{LoadKind::kSurface, BoundaryTag::kNeumann};

Mesh grounded_square(int n) {
  return tag_boundary(generate_structured_mesh(n, n, {0, 0, 1, 1}), Region{{0, 0, 1, 1}}, BoundaryTag::kDirichlet);
}

LevelSet disc(const Mesh& m, Point c, double r) {
  LevelSet ls;
  for (const Point p : m.vertices()) ls.phi.push_back(std::hypot(p.x - c.x, p.y - c.y) - r);
  return ls;
}

OperatorSpec poisson_on(const Mesh& m, const LevelSet& ls, double eps) {
  OperatorSpec op;
  op.density = conductivity_from_levelset(m, ls, eps);
  op.source_weight = material_fraction(m, ls.phi);
  op.density_derivative.resize(op.density.size());
  for (std::size_t t = 0; t < op.density.size(); ++t) {
    op.density_derivative[t] = -(1.0 - eps) * op.density[t] * op.density[t];
  }
  return op;
}

Field scaled(Field f, double c) {
  for (double& v : f.values) v *= c;
  return f;
}

double quad(const CsrMatrix& k, const Field& a, const Field& b) {
  const auto kb = k.multiply(b.values);
  double s = 0.0;
  for (std::size_t i = 0; i < kb.size(); ++i) s += a.values[i] * kb[i];
  return s;
}

struct Cantilever {
  Mesh mesh;
  OperatorSpec op;
  LevelSet ls;
  Field ga, gb;

  Cantilever() {
    mesh = generate_structured_mesh(24, 12, {0, 0, 2, 1});
    mesh = tag_boundary(mesh, Region{{0, 0, 0, 1}}, BoundaryTag::kDirichlet);
    mesh = tag_boundary(mesh, Region{{2, 0.25, 2, 0.75}}, BoundaryTag::kNeumann);
    ls = disc(mesh, {1.0, 0.5}, 0.2);
    for (double& p : ls.phi) p = -p;
    op.kind = OperatorKind::kElasticity;
    op.law = HookeLaw{0.6, 0.4};
    op.density = density_from_levelset(mesh, ls, 1e-3);
    ga = Field::vector2(mesh.vertex_count());
    gb = Field::vector2(mesh.vertex_count());
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
      ga.values[2 * v + 1] = -1.0;
      gb.values[2 * v] = 0.5;
      gb.values[2 * v + 1] = mesh.vertices()[v].y;
    }
  }

  double mean_for_alpha(double alpha) const {
    const auto terms = to_load_terms(finite_rank_correlated_pair(ga, gb, alpha));
    return compliance_mean(solve_state_ensemble(mesh, op, terms.fields, kSurface, kTight, terms.weights));
  }
};

}  // namespace

TEST_CASE("Dirichlet energy mean") {
  const Mesh m = grounded_square(12);
  const LevelSet ls = disc(m, {0.5, 0.5}, 0.3);
  const OperatorSpec op = poisson_on(m, ls, 1e-3);
  const Field f = Field::scalar(m.vertex_count(), 1.0);

  const auto zero = solve_state_ensemble(m, op, std::vector<Field>{Field::scalar(m.vertex_count())}, kBody, kTight);
  CHECK(dirichlet_energy_mean(zero) == 0.0);
  const auto gz = dirichlet_energy_gradient(zero, m, ls);
  for (double v : gz.values) CHECK(v == 0.0);

  const auto one = solve_state_ensemble(m, op, std::vector<Field>{f}, kBody, kTight);
  const double j1 = dirichlet_energy_mean(one);
  CHECK(j1 < 0.0);
  CHECK(j1 == doctest::Approx(-0.5 * quad(*one.stiffness, one.states[0], one.states[0])).epsilon(1e-14));
  double work = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) work += one.rhs[0].values[i] * one.states[0].values[i];
  CHECK(j1 == doctest::Approx(-0.5 * work).epsilon(1e-9));

  const auto two = solve_state_ensemble(m, op, std::vector<Field>{f, f}, kBody, kTight);
  CHECK(dirichlet_energy_mean(two) == doctest::Approx(2.0 * j1).epsilon(1e-14));

  const auto gd = dirichlet_energy_gradient(one, m, ls);
  bool any = false;
  for (std::size_t t = 0; t < gd.values.size(); ++t) {
    CHECK(gd.values[t] <= 0.0);
    if (!gd.on_interface[t]) CHECK(gd.values[t] == 0.0);
    any = any || gd.values[t] < 0.0;
  }
  CHECK(any);

  OperatorSpec elastic;
  elastic.kind = OperatorKind::kElasticity;
  elastic.density.assign(m.triangle_count(), 1.0);
  const auto e = solve_state_ensemble(m, elastic, std::vector<Field>{Field::vector2(m.vertex_count())}, kBody);
  CHECK_THROWS_AS(dirichlet_energy_mean(e), InvalidInput);
  CHECK_THROWS_AS(dirichlet_energy_mean(StateEnsemble{}), InvalidInput);
}

TEST_CASE("Dirichlet energy density on a thin strip") {
  // Material slab |x - 1/2| < a, grounded void on both sides: u = (a^2 - (x - 1/2)^2) / 2
  // and |u'| = a on the interface. Per-position values carry the sub-cell
  // modulation of the Ersatz functional, so they are averaged over one cell.
  Mesh m = generate_structured_mesh(200, 4, {0, 0, 1, 0.02});
  m = tag_boundary(m, Region{{0, 0, 0, 0.02}}, BoundaryTag::kDirichlet);
  m = tag_boundary(m, Region{{1, 0, 1, 0.02}}, BoundaryTag::kDirichlet);
  const int offsets = 10;
  double sum = 0.0;
  for (int k = 0; k < offsets; ++k) {
    const double a = 0.3 + 0.005 * (k + 0.5) / offsets;
    LevelSet ls;
    for (const Point p : m.vertices()) ls.phi.push_back(std::abs(p.x - 0.5) - a);
    const OperatorSpec op = poisson_on(m, ls, 1e-4);
    const auto ens =
        solve_state_ensemble(m, op, std::vector<Field>{Field::scalar(m.vertex_count(), 1.0)}, kBody, {1e-11, 0});
    const auto gd = dirichlet_energy_gradient(ens, m, ls);
    int count = 0;
    for (std::size_t t = 0; t < gd.values.size(); ++t) count += gd.on_interface[t];
    CHECK(count == 16);
    sum += interface_integral(m, ls.phi, gd.values, [](Point) { return 1.0; }) / (2 * 0.02);
  }
  const double expect = -0.5 * 0.3025 * 0.3025;
  CHECK(std::abs(sum / offsets - expect) <= 0.05 * std::abs(expect));
}

TEST_CASE("tracking functional") {
  const Mesh m = grounded_square(16);
  const LevelSet ls = disc(m, {0.5, 0.5}, 0.32);
  const OperatorSpec op = poisson_on(m, ls, 1e-3);
  const Box b{0.25, 0.25, 0.75, 0.75};
  const Field f0 = Field::scalar(m.vertex_count(), 1.0);
  Field f1 = Field::scalar(m.vertex_count()), f2 = f1;
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    f1.values[v] = 0.5 * (2.0 * m.vertices()[v].x - 1.0);
    f2.values[v] = 0.3 * std::sin(3.0 * m.vertices()[v].y);
  }

  SUBCASE("zero loads") {
    auto ens = solve_state_ensemble(m, op, std::vector<Field>{Field::scalar(m.vertex_count())}, kBody, kTight);
    attach_mean_state(ens, m, Field::scalar(m.vertex_count()), kBody, kTight);
    CHECK(tracking_mean(ens, m, make_tracking_data(m, Field::scalar(m.vertex_count()), b)) == 0.0);
    const double u0 = 0.3;
    CHECK(tracking_mean(ens, m, make_tracking_data(m, Field::scalar(m.vertex_count(), u0), b)) ==
          doctest::Approx(0.5 * u0 * u0 * 0.25).epsilon(1e-13));
  }

  SUBCASE("deterministic load hitting the target") {
    auto ens = solve_state_ensemble(m, op, std::vector<Field>{f0}, kBody, kTight);
    attach_mean_state(ens, m, f0, kBody, kTight);
    const TrackingData data = make_tracking_data(m, ens.states[0], b);
    CHECK(std::abs(tracking_mean(ens, m, data)) <= 1e-14);
    ens = tracking_adjoints(std::move(ens), m, data, kTight);
    const auto gd = tracking_gradient(ens, m, ls);
    double scale = 0.0;
    for (double v : dirichlet_energy_gradient(ens, m, ls).values) scale = std::max(scale, std::abs(v));
    for (double v : gd.values) CHECK(std::abs(v) <= 1e-8 * scale);
  }

  SUBCASE("adjoints for a zero target") {
    auto ens = solve_state_ensemble(m, op, std::vector<Field>{f0, f1}, kBody, kTight);
    attach_mean_state(ens, m, f0, kBody, kTight);
    const TrackingData data = make_tracking_data(m, Field::scalar(m.vertex_count()), b);
    ens = tracking_adjoints(std::move(ens), m, data, kTight);
    REQUIRE(ens.adjoints.size() == 2);
    for (double v : ens.mean_adjoint->values) CHECK(v == 0.0);
    const CsrMatrix mb = assemble_mass(m, std::vector<double>(data.region.begin(), data.region.end()));
    for (std::size_t k = 0; k < 2; ++k) {
      auto kp = ens.stiffness->multiply(ens.adjoints[k].values);
      const auto mu = mb.multiply(ens.states[k].values);
      double res = 0.0, ref = 0.0;
      for (std::size_t i = 0; i < kp.size(); ++i) {
        if (ens.constrained[i]) continue;
        res += (kp[i] + mu[i]) * (kp[i] + mu[i]);
        ref += mu[i] * mu[i];
      }
      CHECK(std::sqrt(res) <= 1e-10 * std::sqrt(ref));
    }

    auto flipped = solve_state_ensemble(m, op, std::vector<Field>{scaled(f0, -1), scaled(f1, -1)}, kBody, kTight);
    attach_mean_state(flipped, m, scaled(f0, -1), kBody, kTight);
    flipped = tracking_adjoints(std::move(flipped), m, data, kTight);
    const auto g1 = tracking_gradient(ens, m, ls);
    const auto g2 = tracking_gradient(flipped, m, ls);
    for (std::size_t t = 0; t < g1.values.size(); ++t) {
      CHECK(g2.values[t] == doctest::Approx(g1.values[t]).epsilon(1e-9).scale(1e-12));
    }
  }

  SUBCASE("missing pieces") {
    auto ens = solve_state_ensemble(m, op, std::vector<Field>{f0}, kBody, kTight);
    const TrackingData data = make_tracking_data(m, Field::scalar(m.vertex_count()), b);
    CHECK_THROWS_AS(tracking_mean(ens, m, data), InvalidInput);
    CHECK_THROWS_AS(tracking_gradient(ens, m, ls), InvalidInput);
    CHECK_THROWS_AS(make_tracking_data(m, Field::scalar(m.vertex_count()), {2, 2, 3, 3}), InvalidInput);
  }

  SUBCASE("rank-two mean against Monte Carlo") {
    // f = f0 + xi1 f1 + xi2 f2 with independent standard normals: the second
    // moment is f0 (x) f0 + f1 (x) f1 + f2 (x) f2 and the mean is f0.
    auto ens = solve_state_ensemble(m, op, std::vector<Field>{f0, f1, f2}, kBody, kTight);
    attach_mean_state(ens, m, f0, kBody, kTight);
    Field target = Field::scalar(m.vertex_count());
    for (std::size_t v = 0; v < m.vertex_count(); ++v) target.values[v] = 0.01 + 0.02 * m.vertices()[v].x;
    const TrackingData data = make_tracking_data(m, target, b);
    const double formula = tracking_mean(ens, m, data);

    const CsrMatrix mb = assemble_mass(m, std::vector<double>(data.region.begin(), data.region.end()));
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    Field u = Field::scalar(m.vertex_count());
    double mean = 0.0, m2 = 0.0;
    const int samples = 100000;
    std::vector<Field> diff(4, Field::scalar(m.vertex_count()));
    for (std::size_t i = 0; i < u.size(); ++i) diff[0].values[i] = ens.states[0].values[i] - target.values[i];
    diff[1] = ens.states[1];
    diff[2] = ens.states[2];
    // J(xi) = 1/2 (d0 + xi1 u1 + xi2 u2)^T M_B (same): expand into a 3x3 Gram matrix.
    double g[3][3];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) g[i][j] = quad(mb, diff[i], diff[j]);
    }
    for (int s = 1; s <= samples; ++s) {
      const double c[3] = {1.0, nd(rng), nd(rng)};
      double j = 0.0;
      for (int a = 0; a < 3; ++a) {
        for (int bb = 0; bb < 3; ++bb) j += 0.5 * c[a] * c[bb] * g[a][bb];
      }
      const double delta = j - mean;
      mean += delta / s;
      m2 += delta * (j - mean);
    }
    const double stderr_ = std::sqrt(m2 / (samples - 1) / samples);
    CHECK(std::abs(formula - mean) <= 3.0 * stderr_);
  }
}

TEST_CASE("compliance mean and gradient") {
  const Cantilever c;

  SUBCASE("zero loads") {
    const auto ens = solve_state_ensemble(c.mesh, c.op, std::vector<Field>{Field::vector2(c.mesh.vertex_count())},
                                          kSurface, kTight);
    CHECK(compliance_mean(ens) == 0.0);
    for (double v : compliance_gradient(ens, c.mesh, c.ls).values) CHECK(v == 0.0);
  }

  SUBCASE("energy and boundary work agree") {
    const auto ens = solve_state_ensemble(c.mesh, c.op, std::vector<Field>{c.ga}, kSurface, kTight);
    const double mean = compliance_mean(ens);
    CHECK(mean > 0.0);
    CHECK(std::abs(mean - load_work(ens)) <= 1e-9 * mean);
  }

  SUBCASE("affine in alpha and rank collapse") {
    const double mp = c.mean_for_alpha(1.0);
    const double mm = c.mean_for_alpha(-1.0);
    const double m0 = c.mean_for_alpha(0.0);
    CHECK(std::abs(mp + mm - 2.0 * m0) <= 1e-8 * m0);
    const double mh = c.mean_for_alpha(0.5);
    CHECK(std::abs(mh - (m0 + 0.5 * (mp - m0))) <= 1e-8 * m0);

    Field sum = c.ga, dif = c.ga;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum.values[i] += c.gb.values[i];
      dif.values[i] -= c.gb.values[i];
    }
    const double det_p = load_work(solve_state_ensemble(c.mesh, c.op, std::vector<Field>{sum}, kSurface, kTight));
    const double det_m = load_work(solve_state_ensemble(c.mesh, c.op, std::vector<Field>{dif}, kSurface, kTight));
    CHECK(std::abs(mp - det_p) <= 1e-10 * det_p);
    CHECK(std::abs(mm - det_m) <= 1e-10 * det_m);
  }

  SUBCASE("additivity and kernel affinity") {
    const double a = compliance_mean(solve_state_ensemble(c.mesh, c.op, std::vector<Field>{c.ga}, kSurface, kTight));
    const double b = compliance_mean(solve_state_ensemble(c.mesh, c.op, std::vector<Field>{c.gb}, kSurface, kTight));
    const double w1 = 0.3, w2 = 2.5;
    const auto mix = solve_state_ensemble(c.mesh, c.op,
                                          std::vector<Field>{scaled(c.ga, std::sqrt(w1)), scaled(c.gb, std::sqrt(w2))},
                                          kSurface, kTight);
    CHECK(std::abs(compliance_mean(mix) - (w1 * a + w2 * b)) <= 1e-10 * (w1 * a + w2 * b));
  }

  SUBCASE("density sign and quadratic scaling") {
    const auto e1 = solve_state_ensemble(c.mesh, c.op, std::vector<Field>{c.ga, c.gb}, kSurface, kTight);
    const auto e3 = solve_state_ensemble(c.mesh, c.op, std::vector<Field>{scaled(c.ga, 3), scaled(c.gb, 3)},
                                         kSurface, kTight);
    const auto g1 = compliance_gradient(e1, c.mesh, c.ls);
    const auto g3 = compliance_gradient(e3, c.mesh, c.ls);
    int n = 0;
    for (std::size_t t = 0; t < g1.values.size(); ++t) {
      CHECK(g1.values[t] <= 0.0);
      CHECK(g3.values[t] == doctest::Approx(9.0 * g1.values[t]).epsilon(1e-9).scale(1e-14));
      n += g1.on_interface[t];
    }
    CHECK(n > 0);
  }
}

TEST_CASE("assembled shape derivatives follow finite differences") {
  const Mesh m = grounded_square(32);
  auto theta = [](Point p) {
    const double a = std::atan2(p.y - 0.5, p.x - 0.5);
    return 1.0 + 0.5 * std::cos(2.0 * a);
  };
  Problem problem;
  problem.mesh = m;
  problem.load = kBody;
  problem.loads = {Field::scalar(m.vertex_count(), 1.0)};
  const LevelSet ls = disc(m, {0.5, 0.5}, 0.3);
  const SolverOptions opts{1e-11, 0};
  const double t = 1e-3;
  LevelSet plus = ls, minus = ls;
  for (std::size_t v = 0; v < ls.phi.size(); ++v) {
    plus.phi[v] -= t * theta(m.vertices()[v]);
    minus.phi[v] += t * theta(m.vertices()[v]);
  }
  for (FunctionalKind kind : {FunctionalKind::kDirichletEnergy, FunctionalKind::kTracking}) {
    CAPTURE(to_string(kind));
    problem.functional = kind;
    if (kind == FunctionalKind::kTracking) {
      problem.mean_load = problem.loads[0];
      problem.tracking = make_tracking_data(m, Field::scalar(m.vertex_count(), 0.02), {0.35, 0.35, 0.65, 0.65});
    }
    const Evaluation ev = evaluate(problem, ls, opts);
    const double fd = (evaluate(problem, plus, opts).objective - evaluate(problem, minus, opts).objective) / (2 * t);
    const double assembled = interface_integral(m, ls.phi, ev.gradient.values, theta);
    CHECK(std::abs(assembled - fd) <= 0.03 * std::abs(fd));
  }
}
