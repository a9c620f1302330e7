#include "corshape/kron_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corshape/error.hpp"

namespace corshape::oracle {
namespace {

Eigen::PartialPivLU<Matrix> factor(const DesignSystem& sys, double h) {
  sys.validate();
  Eigen::PartialPivLU<Matrix> lu(sys.at(h));
  if (!(lu.rcond() > 1e-14)) {
    throw NumericalError("A(h) is singular to working precision at h = " + std::to_string(h));
  }
  return lu;
}

void check_square(const Matrix& m, Eigen::Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) throw InvalidInput(std::string(what) + " must be " + std::to_string(n) + " x " + std::to_string(n));
}

double coefficient(AdjointConvention c) { return c == AdjointConvention::kDoubled ? 2.0 : 1.0; }

// Chan et al. pairwise merge of (count, mean, M2) accumulators.
struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
};

}  // namespace

void DesignSystem::validate() const {
  const Eigen::Index n = a0.rows();
  if (n == 0) throw InvalidInput("DesignSystem: empty");
  check_square(a0, n, "A0");
  check_square(a1, n, "A1");
  check_square(b, n, "B");
  if ((b - b.transpose()).norm() > 1e-12 * std::max(1.0, b.norm())) {
    throw InvalidInput("DesignSystem: B must be symmetric");
  }
}

Matrix RandomLoadModel::correlation() const {
  return mean * mean.transpose() + factors * xi_cov * factors.transpose();
}

Matrix solve_correlation_dense(const DesignSystem& sys, double h, const Matrix& cor_f) {
  const auto lu = factor(sys, h);
  check_square(cor_f, sys.dim(), "Cor(f)");
  // X = A^{-1} CorF, then Cor(u) = X A^{-T} = (A^{-1} X^T)^T.
  const Matrix x = lu.solve(cor_f);
  const Matrix cor_u = lu.solve(x.transpose()).transpose();
  return 0.5 * (cor_u + cor_u.transpose());
}

Matrix solve_cross_correlation_dense(const DesignSystem& sys, double h, const Matrix& cor_u,
                                     AdjointConvention convention) {
  const auto lu = factor(sys, h);
  check_square(cor_u, sys.dim(), "Cor(u)");
  // E[u p^T] with p = -c A^{-T} B u:  -c Cor(u) B A^{-1} = -c (A^{-T} B Cor(u))^T.
  const Matrix y = lu.transpose().solve(sys.b * cor_u);
  return -coefficient(convention) * y.transpose();
}

double objective_dense(const DesignSystem& sys, double h, const Matrix& cor_f) {
  return (sys.b.cwiseProduct(solve_correlation_dense(sys, h, cor_f))).sum();
}

double gradient_dense(const DesignSystem& sys, double h, const Matrix& cor_f, AdjointConvention convention) {
  const Matrix cor_up = solve_cross_correlation_dense(sys, h, solve_correlation_dense(sys, h, cor_f), convention);
  return (sys.a1 * cor_up).trace();
}

double objective_per_factor(const DesignSystem& sys, double h, const Matrix& factors) {
  const auto lu = factor(sys, h);
  double total = 0.0;
  for (Eigen::Index k = 0; k < factors.cols(); ++k) {
    const Vector u = lu.solve(factors.col(k));
    total += u.dot(sys.b * u);
  }
  return total;
}

Matrix cross_correlation_per_factor(const DesignSystem& sys, double h, const Matrix& factors) {
  const auto lu = factor(sys, h);
  Matrix out = Matrix::Zero(sys.dim(), sys.dim());
  for (Eigen::Index k = 0; k < factors.cols(); ++k) {
    const Vector u = lu.solve(factors.col(k));
    const Vector p = lu.transpose().solve(-2.0 * (sys.b * u));
    out += u * p.transpose();
  }
  return out;
}

McEstimate mc_estimate(const DesignSystem& sys, double h, const RandomLoadModel& model, long samples,
                       std::uint64_t seed) {
  if (samples < 100) throw InvalidInput("mc_estimate: at least 100 samples are required");
  const Eigen::Index n = sys.dim();
  const Eigen::Index m = model.factors.cols();
  if (model.mean.size() != n || model.factors.rows() != n) throw InvalidInput("mc_estimate: model does not match the system");
  check_square(model.xi_cov, m, "xi covariance");

  // Symmetric square root of the coefficient covariance.
  Matrix root = Matrix::Zero(m, m);
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (model.xi_cov + model.xi_cov.transpose()));
    const double scale = std::max(1.0, std::abs(model.xi_cov.trace()));
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw NumericalError("mc_estimate: coefficient covariance is not positive semi-definite");
    }
    const Vector sq = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    root = eig.eigenvectors() * sq.asDiagonal();
  }
  const auto lu = factor(sys, h);
  const Vector u_mean = lu.solve(model.mean);
  const Matrix g = m > 0 ? Matrix(lu.solve(model.factors * root)) : Matrix(n, 0);

  constexpr long kChunk = 4096;
  const long chunks = (samples + kChunk - 1) / kChunk;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::vector<std::uint64_t> chunk_seeds(static_cast<std::size_t>(2 * chunks));
  {
    std::vector<std::uint32_t> raw(chunk_seeds.size());
    seq.generate(raw.begin(), raw.end());
    for (std::size_t i = 0; i < raw.size(); ++i) chunk_seeds[i] = raw[i];
  }
  Moments total;
  Vector z(m), u(n);
  for (long c = 0; c < chunks; ++c) {
    std::mt19937_64 rng((chunk_seeds[2 * c] << 32) | chunk_seeds[2 * c + 1]);
    std::normal_distribution<double> normal;
    Moments local;
    const long count = std::min(kChunk, samples - c * kChunk);
    for (long s = 0; s < count; ++s) {
      for (Eigen::Index i = 0; i < m; ++i) z[i] = normal(rng);
      u = u_mean + g * z;
      local.push(u.dot(sys.b * u));
    }
    total.merge(local);
  }
  McEstimate out;
  out.samples = samples;
  out.mean = total.mean;
  out.stderr_ = std::sqrt(total.m2 / (total.n - 1.0) / total.n);
  return out;
}

double discrete_commutation_check(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols() || u.rows() == 0) {
    throw InvalidInput("discrete_commutation_check: sample arrays must have the same non-empty shape");
  }
  const double w = 1.0 / static_cast<double>(u.rows());
  // Path 1: the full correlation matrix, then its diagonal (trace operator).
  const Matrix cor = w * (u.transpose() * v);
  // Path 2: pointwise products first, then the expectation.
  const Vector pointwise = w * u.cwiseProduct(v).colwise().sum().transpose();
  return (cor.diagonal() - pointwise).cwiseAbs().maxCoeff();
}

DesignSystem random_design_system(int n, std::mt19937_64& rng) {
  if (n < 1) throw InvalidInput("random_design_system: n must be positive");
  std::normal_distribution<double> normal;
  auto random = [&](int r, int c) {
    Matrix m(r, c);
    for (int j = 0; j < c; ++j) {
      for (int i = 0; i < r; ++i) m(i, j) = normal(rng);
    }
    return m;
  };
  DesignSystem sys;
  sys.a0 = static_cast<double>(n) * Matrix::Identity(n, n) + random(n, n);
  sys.a1 = random(n, n);
  const Matrix b = random(n, n);
  sys.b = 0.5 * (b + b.transpose());
  return sys;
}

Matrix random_psd(int n, int rank, std::mt19937_64& rng, Matrix* factors) {
  std::normal_distribution<double> normal;
  Matrix f(n, rank);
  for (int j = 0; j < rank; ++j) {
    for (int i = 0; i < n; ++i) f(i, j) = normal(rng);
  }
  if (factors) *factors = f;
  return f * f.transpose();
}

ReportRow compare(std::string quantity, double formula, double oracle, double tol, double floor) {
  const double scale = std::max({std::abs(formula), std::abs(oracle), floor});
  const double err = std::abs(formula - oracle);
  return {std::move(quantity), formula, oracle, tol, err <= tol * scale};
}

namespace {

struct Instance {
  DesignSystem sys;
  Matrix factors;
  Matrix cor_f;
  double h = 0.0;
};

Instance draw_instance(const SuiteOptions& opts, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(std::min(2, opts.dim), opts.dim);
  Instance in;
  const int n = size(rng);
  std::uniform_int_distribution<int> rank(1, std::min(opts.rank, n));
  in.sys = random_design_system(n, rng);
  in.cor_f = random_psd(n, rank(rng), rng, &in.factors);
  in.h = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return in;
}

}  // namespace

std::vector<ReportRow> equivalence_suite(const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::vector<ReportRow> rows;
  for (int i = 0; i < opts.instances; ++i) {
    const Instance in = draw_instance(opts, rng);
    rows.push_back(compare("objective[" + std::to_string(i) + "]", objective_dense(in.sys, in.h, in.cor_f),
                           objective_per_factor(in.sys, in.h, in.factors), 1e-10));
  }
  return rows;
}

std::vector<ReportRow> gradient_suite(const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::vector<ReportRow> rows;
  constexpr double step = 1e-5;
  for (int i = 0; i < opts.instances; ++i) {
    const Instance in = draw_instance(opts, rng);
    const double fd = (objective_dense(in.sys, in.h + step, in.cor_f) - objective_dense(in.sys, in.h - step, in.cor_f)) /
                      (2.0 * step);
    rows.push_back(compare("gradient[" + std::to_string(i) + "]", gradient_dense(in.sys, in.h, in.cor_f), fd, 1e-6));
  }
  return rows;
}

std::vector<ReportRow> monte_carlo_suite(const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<ReportRow> rows;
  for (int i = 0; i < opts.mc_instances; ++i) {
    const Instance in = draw_instance(opts, rng);
    const Eigen::Index n = in.sys.dim();
    const Eigen::Index m = in.factors.cols();
    // Correlated coefficients with unit variances and a random mean.
    RandomLoadModel model;
    model.mean = Vector::NullaryExpr(n, [&] { return std::normal_distribution<double>(0.0, 0.5)(rng); });
    model.factors = in.factors;
    const Matrix g = Matrix::NullaryExpr(m, m, [&] { return std::normal_distribution<double>()(rng); });
    Matrix cov = g * g.transpose() + Matrix::Identity(m, m);
    const Vector s = cov.diagonal().cwiseSqrt().cwiseInverse();
    model.xi_cov = s.asDiagonal() * cov * s.asDiagonal();
    const McEstimate mc = mc_estimate(in.sys, in.h, model, opts.samples, opts.seed + static_cast<std::uint64_t>(i));
    const double exact = objective_dense(in.sys, in.h, model.correlation());
    const double tol = 3.0 * mc.stderr_;
    rows.push_back({"mc_objective[" + std::to_string(i) + "]", exact, mc.mean, tol, std::abs(exact - mc.mean) <= tol});
  }
  return rows;
}

std::vector<ReportRow> commutation_suite(const SuiteOptions& opts, int pairs) {
  std::mt19937_64 rng(opts.seed + 7);
  std::normal_distribution<double> normal;
  std::vector<ReportRow> rows;
  for (int i = 0; i < pairs; ++i) {
    const int samples = 16 + static_cast<int>(rng() % 112);
    const int points = 4 + static_cast<int>(rng() % 60);
    const Matrix u = Matrix::NullaryExpr(samples, points, [&] { return normal(rng); });
    const Matrix v = 0.5 * u + Matrix::NullaryExpr(samples, points, [&] { return normal(rng); });
    const double dev = discrete_commutation_check(u, v);
    rows.push_back({"commutation[" + std::to_string(i) + "]", dev, 0.0, 1e-12, dev <= 1e-12});
  }
  return rows;
}

}  // namespace corshape::oracle
