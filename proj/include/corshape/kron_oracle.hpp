#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace corshape::oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Affine design family A(h) = A0 + h A1 with a symmetric cost matrix B;
/// the cost of a state u is u^T B u.
struct DesignSystem {
  Matrix a0;
  Matrix a1;
  Matrix b;

  Eigen::Index dim() const { return a0.rows(); }
  Matrix at(double h) const { return a0 + h * a1; }
  void validate() const;
};

/// f = mean + sum_i xi_i f_i with xi ~ N(0, xi_cov). The columns of
/// `factors` are the f_i.
struct RandomLoadModel {
  Vector mean;
  Matrix factors;
  Matrix xi_cov;

  /// Two-point correlation E[f f^T] = mean mean^T + F xi_cov F^T.
  Matrix correlation() const;
};

/// Cor(u) = A^{-1} CorF A^{-T}, i.e. the solution of (A (x) A) Cor(u) = Cor(f).
Matrix solve_correlation_dense(const DesignSystem& sys, double h, const Matrix& cor_f);

/// Adjoint scaling. kDoubled is A^T p = -2 B u, the adjoint of the cost
/// u^T B u; kHalved is A^T p = -B u and underestimates the derivative by a
/// factor of two.
enum class AdjointConvention { kDoubled, kHalved };

/// Cor(u, p) = E[u p^T] = -c Cor(u) B A^{-1} with c = 2 (kDoubled) or 1.
Matrix solve_cross_correlation_dense(const DesignSystem& sys, double h, const Matrix& cor_u,
                                     AdjointConvention convention = AdjointConvention::kDoubled);

/// M(h) = B : Cor(u).
double objective_dense(const DesignSystem& sys, double h, const Matrix& cor_f);

/// dM/dh = trace(A1 Cor(u, p)).
double gradient_dense(const DesignSystem& sys, double h, const Matrix& cor_f,
                      AdjointConvention convention = AdjointConvention::kDoubled);

/// Per-factor paths for CorF = sum_k f_k f_k^T (columns of `factors`).
double objective_per_factor(const DesignSystem& sys, double h, const Matrix& factors);
Matrix cross_correlation_per_factor(const DesignSystem& sys, double h, const Matrix& factors);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  long samples = 0;
};

/// Sample mean and standard error of u^T B u over Gaussian draws. Samples
/// are drawn in fixed-size chunks, each with its own generator seeded from
/// `seed`, so results do not depend on scheduling.
McEstimate mc_estimate(const DesignSystem& sys, double h, const RandomLoadModel& model, long samples,
                       std::uint64_t seed);

/// Rows of u and v are joint samples of two discrete fields (equal weights).
/// Returns the largest |diag(E[u v^T]) - E[u .* v]| over the grid.
double discrete_commutation_check(const Matrix& u, const Matrix& v);

/// Random test instances.
DesignSystem random_design_system(int n, std::mt19937_64& rng);
/// Random PSD matrix of the given rank; `factors` receives an n x rank factor.
Matrix random_psd(int n, int rank, std::mt19937_64& rng, Matrix* factors = nullptr);

struct ReportRow {
  std::string quantity;
  double formula_value = 0.0;
  double oracle_value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Relative comparison |a - b| <= tol * max(|a|, |b|, floor).
ReportRow compare(std::string quantity, double formula, double oracle, double tol, double floor = 0.0);

/// Randomized comparison suites shared by the CLI and the acceptance run.
struct SuiteOptions {
  int instances = 100;
  int dim = 20;   // instance sizes are drawn from [2, dim]
  int rank = 5;   // correlation ranks are drawn from [1, rank]
  int mc_instances = 10;
  long samples = 100000;
  std::uint64_t seed = 20240601;
};

/// objective_dense vs the per-factor sum, relative tolerance 1e-10.
std::vector<ReportRow> equivalence_suite(const SuiteOptions& opts);
/// gradient_dense vs central differences with step 1e-5, relative 1e-6.
std::vector<ReportRow> gradient_suite(const SuiteOptions& opts);
/// objective_dense vs mc_estimate; the tolerance column holds 3 standard errors.
std::vector<ReportRow> monte_carlo_suite(const SuiteOptions& opts);
/// Commutation deviation on random sample pairs, absolute tolerance 1e-12.
std::vector<ReportRow> commutation_suite(const SuiteOptions& opts, int pairs = 50);

}  // namespace corshape::oracle
