#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "corshape/correlation.hpp"
#include "corshape/error.hpp"

using namespace corshape;

namespace {

Eigen::MatrixXd to_eigen(const std::vector<double>& dense, std::size_t n) {
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = dense[i * n + j];
  }
  return m;
}

Eigen::MatrixXd reconstruct(const LowRankFactorization& fac, std::size_t n, std::size_t upto) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < upto; ++k) {
    const Eigen::Map<const Eigen::VectorXd> l(fac.factors[k].data(), static_cast<Eigen::Index>(n));
    r += l * l.transpose();
  }
  return r;
}

DenseCorrelation exp_kernel_points(std::size_t n, double length) {
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double xi = static_cast<double>(i) / static_cast<double>(n - 1);
      const double xj = static_cast<double>(j) / static_cast<double>(n - 1);
      v[i * n + j] = std::exp(-std::abs(xi - xj) / length);
    }
  }
  return DenseCorrelation(n, std::move(v));
}

// Smallest m whose spectral tail sum_{k>m} lambda_k is within eps * trace.
std::size_t spectral_rank(const Eigen::MatrixXd& c, double eps) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  const Eigen::VectorXd ev = es.eigenvalues().reverse().cwiseMax(0.0);
  const double trace = c.trace();
  double tail = ev.sum();
  std::size_t m = 0;
  while (tail > eps * trace && m < static_cast<std::size_t>(ev.size())) tail -= ev(static_cast<Eigen::Index>(m++));
  return m;
}

double spectral_tail(const Eigen::MatrixXd& c, std::size_t m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  const Eigen::VectorXd ev = es.eigenvalues().reverse().cwiseMax(0.0);
  return ev.tail(ev.size() - static_cast<Eigen::Index>(m)).sum();
}

Mesh top_edge_mesh(int nx, int ny) {
  return tag_boundary(generate_structured_mesh(nx, ny, {0, 0, 1, 1}), Region{{0, 1, 1, 1}}, BoundaryTag::kNeumann);
}

Field smooth_field(const Mesh& m, double a, double b) {
  Field f = Field::scalar(m.vertex_count());
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    const Point p = m.vertices()[v];
    f.values[v] = std::sin(a * p.x + 0.3) + b * p.x * p.y;
  }
  return f;
}

}  // namespace

TEST_CASE("load profiles") {
  CHECK(profile_h(1, 0.5) == 1.0);
  CHECK(profile_k(1, 0.25) == 0.0);
  CHECK(profile_k(1, 0.0) == 1.0);
  for (double t : {0.0, 0.13, 0.5, 0.9, 1.0}) CHECK(profile_h(3, t) == 1.0);
  CHECK(profile_h(2, 0.0) == 0.5);
  CHECK(profile_k(2, 0.25) == 0.0);
  CHECK(profile_k(3, 5.0 / 6.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(profile_k(1, 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(profile_h(0, 0.5), InvalidInput);
  CHECK_THROWS_AS(profile_k(4, 0.5), InvalidInput);

  ClosedFormKernel k;
  k.family = ProfileFamily::kK;
  k.profile_index = 2;
  k.amplitude = 10.0;
  // k_2 is negative between 1/4 and 1/3: the positive part clips it.
  CHECK(k({0.0, 0.29}, {0.0, 0.29}) == 0.0);
  CHECK(k({0.0, 0.0}, {0.0, 0.0}) == doctest::Approx(10.0 * 24.0 * 0.25 / 3.0));
  k.length = 0.0;
  CHECK_THROWS_AS(k.validate(), InvalidInput);
}

TEST_CASE("pivoted Cholesky on small explicit matrices") {
  SUBCASE("identity") {
    const DenseCorrelation c(3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const auto fac = pivoted_cholesky(c, 1e-14, 10);
    CHECK(fac.rank() == 3);
    CHECK(fac.trace_error == 0.0);
    CHECK(fac.pivots == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("rank one") {
    const std::vector<double> v{0.5, -2.0, 1.0};
    std::vector<double> c(9);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) c[3 * i + j] = v[i] * v[j];
    }
    const auto fac = pivoted_cholesky(DenseCorrelation(3, c), 1e-12, 10);
    REQUIRE(fac.rank() == 1);
    CHECK(fac.trace_error == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(fac.pivots[0] == 1);
    for (int i = 0; i < 3; ++i) CHECK(fac.factors[0][i] == doctest::Approx(-v[i]).epsilon(1e-14));
  }
  SUBCASE("indefinite") {
    CHECK_THROWS_AS(pivoted_cholesky(DenseCorrelation(2, {1, 2, 2, 1}), 1e-8, 5), NotPsdError);
    CHECK_THROWS_AS(pivoted_cholesky(DenseCorrelation(2, {1, 0, 0, -1}), 1e-8, 5), NotPsdError);
  }
  SUBCASE("bad epsilon") {
    CHECK_THROWS_AS(pivoted_cholesky(DenseCorrelation(1, {1}), 0.0, 5), InvalidInput);
  }
}

TEST_CASE("exponential kernel rank against the eigen oracle") {
  const auto c = exp_kernel_points(100, 0.1);
  const Eigen::MatrixXd dense = to_eigen(c.dense(), 100);
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const auto greedy = pivoted_cholesky(c, eps, 100);
    const auto fac = pivoted_cholesky_compressed(c, eps, 100);
    const std::size_t ref = spectral_rank(dense, eps);
    CAPTURE(eps);
    CHECK(greedy.trace_error <= eps * greedy.trace);
    CHECK(greedy.rank() >= ref);
    CHECK(fac.trace_error <= eps * fac.trace);
    CHECK(fac.rank() >= ref);
    CHECK(fac.rank() <= ref + 2);
    const Eigen::MatrixXd residual = dense - reconstruct(fac, 100, fac.rank());
    CHECK(std::abs(residual.trace() - fac.trace_error) <= 1e-10 * fac.trace);
  }
}

TEST_CASE("trace bookkeeping and monotonicity") {
  const auto c = exp_kernel_points(60, 0.2);
  const Eigen::MatrixXd dense = to_eigen(c.dense(), 60);
  const auto fac = pivoted_cholesky(c, 1e-8, 60);
  REQUIRE(fac.trace_history.size() == fac.rank() + 1);
  CHECK(fac.trace_history.back() == fac.trace_error);
  for (std::size_t k = 0; k <= fac.rank(); ++k) {
    const Eigen::MatrixXd residual = dense - reconstruct(fac, 60, k);
    CHECK(std::abs(residual.trace() - fac.trace_history[k]) <= 1e-12 * fac.trace);
    CHECK(residual.diagonal().minCoeff() >= -1e-12 * fac.trace);
    if (k > 0) CHECK(fac.trace_history[k] <= fac.trace_history[k - 1]);
    CHECK(fac.trace_history[k] >= spectral_tail(dense, k) - 1e-12 * fac.trace);
  }
}

TEST_CASE("compressed factors are orthogonal and sorted") {
  const auto c = exp_kernel_points(80, 0.3);
  const auto fac = pivoted_cholesky_compressed(c, 1e-3, 80);
  REQUIRE(fac.rank() > 2);
  REQUIRE(fac.trace_history.size() == fac.rank() + 1);
  for (std::size_t k = 1; k < fac.rank(); ++k) {
    const Eigen::Map<const Eigen::VectorXd> a(fac.factors[k - 1].data(), 80), b(fac.factors[k].data(), 80);
    CHECK(std::abs(a.dot(b)) <= 1e-10 * a.squaredNorm());
    CHECK(b.squaredNorm() <= a.squaredNorm() * (1 + 1e-12));
    CHECK(fac.trace_history[k] <= fac.trace_history[k - 1]);
  }
  CHECK_THROWS_AS(pivoted_cholesky_compressed(c, 1e-3, 2), RankLimitError);
  CHECK_THROWS_AS(pivoted_cholesky_compressed(c, 1e-3, 80, 0.0), InvalidInput);
}

TEST_CASE("rank limit") {
  const auto c = exp_kernel_points(50, 0.1);
  try {
    pivoted_cholesky(c, 1e-8, 3);
    FAIL("expected RankLimitError");
  } catch (const RankLimitError& e) {
    CHECK(e.partial().rank() == 3);
    CHECK(e.partial().trace_error > 1e-8 * e.partial().trace);
    const auto trunc = pivoted_cholesky_truncated(c, 1e-8, 3);
    CHECK(trunc.pivots == e.partial().pivots);
    CHECK(trunc.trace_error == e.partial().trace_error);
  }
}

TEST_CASE("finite-rank kernels on a boundary") {
  const Mesh m = top_edge_mesh(12, 4);
  const Field a = smooth_field(m, 3.0, 0.0);
  const Field b = smooth_field(m, -1.0, 2.0);
  const auto support = CorrelationSupport::boundary(BoundaryTag::kNeumann);
  const CsrMatrix g = support_mass_matrix(m, support);
  const auto nodes = m.tagged_nodes(BoundaryTag::kNeumann);
  REQUIRE(g.size() == nodes.size());

  auto restrict_g = [&](const Field& f) {
    const CsrMatrix full = boundary_mass_matrix(m, BoundaryTag::kNeumann);
    const auto gf = full.multiply(f.values);
    Eigen::VectorXd out(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t r = 0; r < nodes.size(); ++r) out(static_cast<Eigen::Index>(r)) = gf[nodes[r]];
    return out;
  };

  SUBCASE("single pure term") {
    const auto c = assemble_correlation_matrix(FiniteRankKernel{{{a, a, 1.0}}}, m, support);
    const Eigen::MatrixXd dense = to_eigen(c->dense(), c->size());
    const Eigen::VectorXd ga = restrict_g(a);
    CHECK((dense - ga * ga.transpose()).norm() <= 1e-14 * dense.norm());
    CHECK(dense == dense.transpose());
    const auto fac = pivoted_cholesky(*c, 1e-10, 20);
    CHECK(fac.rank() == 1);

    const auto loads = factors_to_loads(fac, g);
    const auto fields = scatter_to_fields(loads, *c, m.vertex_count());
    double sign = 0.0;
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      const double got = fields[0].values[nodes[r]];
      if (sign == 0.0 && std::abs(a.values[nodes[r]]) > 0.1) sign = got / a.values[nodes[r]] > 0 ? 1.0 : -1.0;
    }
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      CHECK(std::abs(fields[0].values[nodes[r]] - sign * a.values[nodes[r]]) <= 1e-8);
    }
    double energy = 0.0;
    for (const auto& l : loads) {
      const auto gl = g.multiply(l);
      for (double x : gl) energy += x * x;
    }
    CHECK(energy == doctest::Approx(fac.trace - fac.trace_error).epsilon(1e-8));
  }

  SUBCASE("correlated pair") {
    for (double alpha : {-1.0, -0.4, 0.0, 0.7, 1.0}) {
      CAPTURE(alpha);
      const auto kern = finite_rank_correlated_pair(a, b, alpha);
      const auto c = assemble_correlation_matrix(kern, m, support);
      const Eigen::MatrixXd dense = to_eigen(c->dense(), c->size());
      const Eigen::VectorXd ga = restrict_g(a);
      const Eigen::VectorXd gb = restrict_g(b);
      const Eigen::MatrixXd expect =
          ga * ga.transpose() + gb * gb.transpose() + alpha * (ga * gb.transpose() + gb * ga.transpose());
      CHECK((dense - expect).norm() <= 1e-13 * expect.norm());
      const auto fac = pivoted_cholesky(*c, 1e-12, 20);
      CHECK(fac.rank() == (std::abs(alpha) == 1.0 ? 1u : 2u));
    }
  }

  SUBCASE("exact rank recovery") {
    const Field c3 = smooth_field(m, 7.0, -1.0);
    const auto c = assemble_correlation_matrix(FiniteRankKernel{{{a, a, 1.0}, {b, b, 2.0}, {c3, c3, 0.5}}}, m, support);
    CHECK(pivoted_cholesky(*c, 1e-12, 20).rank() == 3);
  }

  SUBCASE("mismatched terms") {
    const Field small = Field::scalar(3, 1.0);
    CHECK_THROWS_AS(assemble_correlation_matrix(FiniteRankKernel{{{small, small, 1.0}}}, m, support), InvalidInput);
    CHECK_THROWS_AS(assemble_correlation_matrix(FiniteRankKernel{}, m, support), InvalidInput);
    CHECK_THROWS_AS(assemble_correlation_matrix(FiniteRankKernel{{{a, a, 1.0}}}, m,
                                                CorrelationSupport::boundary(BoundaryTag::kDirichlet)),
                    InvalidInput);
  }
}

TEST_CASE("correlated pair terms") {
  const Mesh m = top_edge_mesh(4, 2);
  const Field a = smooth_field(m, 1.0, 0.0);
  const Field b = smooth_field(m, 2.0, 1.0);
  const auto k0 = finite_rank_correlated_pair(a, b, 0.0);
  CHECK(k0.terms.size() == 2);
  const auto t0 = to_load_terms(k0);
  CHECK(t0.fields.size() == 2);
  CHECK(t0.weights == std::vector<double>{1, 0, 0, 1});

  const auto kp = finite_rank_correlated_pair(a, b, 1.0);
  REQUIRE(kp.terms.size() == 1);
  const auto km = finite_rank_correlated_pair(a, b, -1.0);
  REQUIRE(km.terms.size() == 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(kp.terms[0].a.values[i] == a.values[i] + b.values[i]);
    CHECK(km.terms[0].a.values[i] == a.values[i] - b.values[i]);
  }

  const auto th = to_load_terms(finite_rank_correlated_pair(a, b, 0.5));
  CHECK(th.fields.size() == 2);
  CHECK(th.weights == std::vector<double>{1, 0.5, 0.5, 1});
  CHECK_THROWS_AS(finite_rank_correlated_pair(a, b, 1.5), InvalidInput);
  CHECK_THROWS_AS(finite_rank_correlated_pair(a, Field::scalar(2), 0.0), InvalidInput);
}

TEST_CASE("closed-form kernel with infinite correlation length is rank one") {
  const Mesh m = top_edge_mesh(20, 3);
  ClosedFormKernel k;
  k.profile_index = 3;
  k.amplitude = 4.0;
  k.length = 1e12;
  k.profile_axis = 1;
  k.decay_axis = 0;
  const auto support = CorrelationSupport::boundary(BoundaryTag::kNeumann);
  const auto c = assemble_correlation_matrix(k, m, support);
  const Eigen::MatrixXd dense = to_eigen(c->dense(), c->size());
  CHECK(dense == dense.transpose());
  const CsrMatrix g = support_mass_matrix(m, support);
  const std::vector<double> ones(g.size(), 1.0);
  const auto g1 = g.multiply(ones);
  const Eigen::Map<const Eigen::VectorXd> gv(g1.data(), static_cast<Eigen::Index>(g1.size()));
  const Eigen::MatrixXd expect = k.amplitude * gv * gv.transpose();
  CHECK((dense - expect).norm() <= 1e-10 * expect.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  const auto ev = es.eigenvalues();
  CHECK(ev(ev.size() - 2) <= 1e-10 * ev(ev.size() - 1));
  CHECK(pivoted_cholesky(*c, 1e-9, 10).rank() == 1);
}

TEST_CASE("closed-form kernel on a domain support and vector scatter") {
  const Mesh m = generate_structured_mesh(6, 6, {0, 0, 1, 1});
  ClosedFormKernel k;
  k.profile_index = 3;
  k.decay_axis = 1;
  const auto c = assemble_correlation_matrix(k, m, CorrelationSupport::domain());
  CHECK(c->size() == m.vertex_count());
  const auto d = c->diagonal();
  const auto dense = c->dense();
  for (std::size_t i = 0; i < c->size(); ++i) CHECK(d[i] == doctest::Approx(dense[i * c->size() + i]).epsilon(1e-13));
  const auto fac = pivoted_cholesky_truncated(*c, 1e-6, 5);
  CHECK(fac.rank() == 5);
  const auto fields = scatter_to_fields(fac.factors, *c, m.vertex_count(), 2, 2);
  for (const auto& f : fields) {
    REQUIRE(f.kind == FieldKind::kVector2);
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
      CHECK(f.values[2 * v] == 0.0);
      CHECK(f.values[2 * v + 1] == fac.factors[&f - fields.data()][v]);
    }
  }
}

TEST_CASE("factors_to_loads with an identity mass matrix") {
  TripletBuilder b(4);
  for (std::size_t i = 0; i < 4; ++i) b.add(i, i, 1.0);
  const CsrMatrix id = b.build(true);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  LowRankFactorization fac;
  for (int k = 0; k < 2; ++k) {
    std::vector<double> f(4);
    for (double& x : f) x = nd(rng);
    fac.factors.push_back(f);
  }
  const auto loads = factors_to_loads(fac, id);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < 4; ++i) CHECK(loads[k][i] == doctest::Approx(fac.factors[k][i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(factors_to_loads(fac, CsrMatrix(0)), InvalidInput);
}
