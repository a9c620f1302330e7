#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "corshape/error.hpp"
#include "corshape/fem.hpp"
#include "corshape/mesh.hpp"
#include "corshape/sparse.hpp"

namespace corshape {

// Load-intensity profiles of the exponential-decay surface load kernels.
// Both are total functions of t; callers apply the positive part.
double profile_h(int i, double t);
double profile_k(int i, double t);

enum class ProfileFamily { kH, kK };

/// One symmetric term (w / 2) (a (x) b + b (x) a); for a == b this is w a (x) a.
struct FiniteRankTerm {
  Field a;
  Field b;
  double weight = 1.0;
};

struct FiniteRankKernel {
  std::vector<FiniteRankTerm> terms;
};

/// amplitude * profile((x_p + y_p) / 2)^+ * exp(-|x_d - y_d| / length), with
/// p = profile_axis and d = decay_axis (0 for x, 1 for y). Describes one
/// scalar component of a (possibly vector valued) load.
struct ClosedFormKernel {
  int component = 1;
  double amplitude = 1.0;
  ProfileFamily family = ProfileFamily::kH;
  int profile_index = 3;
  double length = 0.1;
  int profile_axis = 1;
  int decay_axis = 0;

  double operator()(Point x, Point y) const;
  void validate() const;
};

using CorrelationKernel = std::variant<FiniteRankKernel, ClosedFormKernel>;

/// Correlated pair g_a (x) g_a + g_b (x) g_b + alpha (g_a (x) g_b + g_b (x) g_a).
/// Collapses to a single pure term for |alpha| = 1.
FiniteRankKernel finite_rank_correlated_pair(const Field& g_a, const Field& g_b, double alpha);

/// Where a correlation kernel lives: on the edges of one boundary tag or on
/// the whole mesh.
struct CorrelationSupport {
  std::optional<BoundaryTag> tag;  // nullopt = DOMAIN

  static CorrelationSupport boundary(BoundaryTag t) { return {t}; }
  static CorrelationSupport domain() { return {std::nullopt}; }
};

/// Lazy access to a symmetric discrete correlation matrix, restricted to the
/// degrees of freedom of its support. Row r corresponds to mesh vertex
/// nodes()[r / components()] and component r % components().
class CorrelationMatrix {
 public:
  virtual ~CorrelationMatrix() = default;

  virtual std::size_t size() const = 0;
  virtual std::vector<double> diagonal() const = 0;
  virtual void column(std::size_t j, std::span<double> out) const = 0;

  std::span<const Index> nodes() const { return nodes_; }
  int components() const { return components_; }

  /// Materializes the whole matrix (row-major); test and oracle use only.
  std::vector<double> dense() const;

 protected:
  std::vector<Index> nodes_;
  int components_ = 1;
};

/// Explicit symmetric matrix wrapped as an accessor.
class DenseCorrelation final : public CorrelationMatrix {
 public:
  DenseCorrelation(std::size_t n, std::vector<double> values);
  std::size_t size() const override { return n_; }
  std::vector<double> diagonal() const override;
  void column(std::size_t j, std::span<double> out) const override;

 private:
  std::size_t n_;
  std::vector<double> values_;
};

std::unique_ptr<CorrelationMatrix> assemble_correlation_matrix(const CorrelationKernel& kernel, const Mesh& mesh,
                                                               const CorrelationSupport& support);

/// Mass matrix of the support restricted to its own degrees of freedom (the
/// matrix G used to map correlation factors back to nodal loads).
CsrMatrix support_mass_matrix(const Mesh& mesh, const CorrelationSupport& support, int components = 1);

struct LowRankFactorization {
  std::vector<std::vector<double>> factors;  // l~_k
  std::vector<std::size_t> pivots;
  /// Trace of the residual C - C_k after k terms, k = 0..rank.
  std::vector<double> trace_history;
  double trace = 0.0;        // trace(C)
  double trace_error = 0.0;  // trace(C - C_m)
  double tolerance = 0.0;    // relative tolerance requested

  std::size_t rank() const { return factors.size(); }
};

class NotPsdError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Thrown when max_rank is reached before the tolerance; carries the
/// truncated factorization.
class RankLimitError : public NumericalError {
 public:
  RankLimitError(const std::string& what, LowRankFactorization partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const LowRankFactorization& partial() const noexcept { return partial_; }

 private:
  LowRankFactorization partial_;
};

/// Greedy pivoted Cholesky: stops once trace(C - C_m) <= epsilon * trace(C).
/// Ties in the pivot search go to the smallest index.
LowRankFactorization pivoted_cholesky(const CorrelationMatrix& c, double epsilon, std::size_t max_rank);

/// Same as pivoted_cholesky but returns the truncated factorization instead
/// of throwing when max_rank is hit.
LowRankFactorization pivoted_cholesky_truncated(const CorrelationMatrix& c, double epsilon, std::size_t max_rank);

/// Greedy pivoting to epsilon * oversampling, then an eigen-rotation of the
/// m greedy factors keeping the fewest directions with trace(C - C_m') <=
/// epsilon * trace(C). Factors come out mutually orthogonal and ordered by
/// decreasing norm; pivots and the first entries of trace_history describe
/// the greedy stage, the history is then rewritten for the rotated factors.
LowRankFactorization pivoted_cholesky_compressed(const CorrelationMatrix& c, double epsilon, std::size_t max_rank,
                                                 double oversampling = 0.1);

/// l_k = G^{-1} l~_k, solved with conjugate gradients at tol 1e-12.
std::vector<std::vector<double>> factors_to_loads(const LowRankFactorization& fac, const CsrMatrix& g);

/// Scatters support-restricted vectors into nodal Fields. With
/// `target_components` = 2 and a scalar support, values land in component
/// `component` (1 or 2) and the other component stays zero.
std::vector<Field> scatter_to_fields(std::span<const std::vector<double>> vectors, const CorrelationMatrix& c,
                                     std::size_t vertex_count, int target_components = 1, int component = 1);

/// Loads and symmetric coupling matrix W such that Cor = sum_ij W_ij f_i (x) f_j.
struct LoadTerms {
  std::vector<Field> fields;
  std::vector<double> weights;  // m x m row-major
};

LoadTerms to_load_terms(const FiniteRankKernel& kernel);

}  // namespace corshape
