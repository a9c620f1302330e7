#include "corshape/correlation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "corshape/simd/kernels.hpp"

namespace corshape {
namespace {

void check_profile_index(int i) {
  if (i < 1 || i > 3) throw InvalidInput("profile index must be 1, 2 or 3 (got " + std::to_string(i) + ")");
}

double coordinate(Point p, int axis) { return axis == 0 ? p.x : p.y; }

// Mass matrix of the support over all mesh vertices (scalar).
CsrMatrix full_support_mass(const Mesh& mesh, const CorrelationSupport& support) {
  return support.tag ? boundary_mass_matrix(mesh, *support.tag) : assemble_mass(mesh);
}

std::vector<Index> support_nodes(const Mesh& mesh, const CorrelationSupport& support) {
  if (support.tag) {
    auto nodes = mesh.tagged_nodes(*support.tag);
    if (nodes.empty()) throw InvalidInput("correlation support: no boundary edge carries tag " + to_string(*support.tag));
    return nodes;
  }
  std::vector<Index> nodes(mesh.vertex_count());
  std::iota(nodes.begin(), nodes.end(), Index{0});
  return nodes;
}

// Restricts (G applied component-wise to a nodal field) to the support dofs.
std::vector<double> restricted_product(const CsrMatrix& g, const Field& f, std::span<const Index> nodes) {
  const int nc = f.components();
  const std::size_t n = f.node_count();
  std::vector<double> out(nodes.size() * nc);
  std::vector<double> comp(n), res(n);
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = f.values[nc * i + c];
    g.multiply(comp, res);
    for (std::size_t r = 0; r < nodes.size(); ++r) out[nc * r + c] = res[nodes[r]];
  }
  return out;
}

class FiniteRankCorrelation final : public CorrelationMatrix {
 public:
  FiniteRankCorrelation(const FiniteRankKernel& kernel, const Mesh& mesh, const CorrelationSupport& support) {
    if (kernel.terms.empty()) throw InvalidInput("finite-rank kernel has no terms");
    const FieldKind kind = kernel.terms.front().a.kind;
    for (const auto& t : kernel.terms) {
      if (t.a.kind != kind || t.b.kind != kind || t.a.node_count() != mesh.vertex_count() ||
          t.b.node_count() != mesh.vertex_count() || t.a.size() != t.b.size()) {
        throw InvalidInput("finite-rank kernel term does not match the mesh");
      }
    }
    nodes_ = support_nodes(mesh, support);
    components_ = kernel.terms.front().a.components();
    const CsrMatrix g = full_support_mass(mesh, support);
    for (const auto& t : kernel.terms) {
      ga_.push_back(restricted_product(g, t.a, nodes_));
      gb_.push_back(restricted_product(g, t.b, nodes_));
      w_.push_back(t.weight);
    }
  }

  std::size_t size() const override { return nodes_.size() * components_; }

  std::vector<double> diagonal() const override {
    std::vector<double> d(size(), 0.0);
    for (std::size_t t = 0; t < w_.size(); ++t) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += w_[t] * ga_[t][i] * gb_[t][i];
    }
    return d;
  }

  void column(std::size_t j, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t t = 0; t < w_.size(); ++t) {
      const double half = 0.5 * w_[t];
      simd::axpy(half * gb_[t][j], ga_[t], out);
      simd::axpy(half * ga_[t][j], gb_[t], out);
    }
  }

 private:
  std::vector<std::vector<double>> ga_, gb_;
  std::vector<double> w_;
};

// Midpoint (boundary) or centroid (domain) quadrature of
// C_ij = int int k(x, y) phi_i(x) phi_j(y).
class ClosedFormCorrelation final : public CorrelationMatrix {
 public:
  ClosedFormCorrelation(const ClosedFormKernel& kernel, const Mesh& mesh, const CorrelationSupport& support)
      : kernel_(kernel) {
    kernel.validate();
    nodes_ = support_nodes(mesh, support);
    components_ = 1;
    std::vector<std::size_t> row_of(mesh.vertex_count(), npos);
    for (std::size_t r = 0; r < nodes_.size(); ++r) row_of[nodes_[r]] = r;
    node_cells_.resize(nodes_.size());
    auto add_cell = [&](Point q, double weight, std::span<const Index> verts) {
      const std::size_t cell = points_.size();
      points_.push_back(q);
      weights_.push_back(weight);
      for (Index v : verts) {
        if (row_of[v] == npos) continue;
        node_cells_[row_of[v]].push_back(cell);
      }
    };
    if (support.tag) {
      const auto edges = mesh.boundary_edges();
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].tag != *support.tag) continue;
        // phi_i(midpoint) = 1/2
        add_cell(mesh.edge_midpoint(e), 0.5 * mesh.edge_length(e), edges[e].v);
      }
    } else {
      for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        add_cell(mesh.centroid(t), mesh.area(t) / 3.0, mesh.triangles()[t]);
      }
    }
  }

  std::size_t size() const override { return nodes_.size(); }

  std::vector<double> diagonal() const override {
    std::vector<double> d(size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = entry(i, i);
    return d;
  }

  void column(std::size_t j, std::span<double> out) const override {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = entry(i, j);
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  ClosedFormKernel kernel_;
  std::vector<Point> points_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> node_cells_;

  // Cell pairs are visited in one canonical order for (i, j) and (j, i).
  double entry(std::size_t i, std::size_t j) const {
    const auto& ci = node_cells_[std::min(i, j)];
    const auto& cj = node_cells_[std::max(i, j)];
    double sum = 0.0;
    for (std::size_t a : ci) {
      for (std::size_t b : cj) {
        const std::size_t lo = std::min(a, b), hi = std::max(a, b);
        sum += weights_[lo] * weights_[hi] * kernel_(points_[lo], points_[hi]);
      }
    }
    return sum;
  }
};

LowRankFactorization factorize(const CorrelationMatrix& c, double epsilon, std::size_t max_rank, bool throw_on_limit) {
  if (!(epsilon > 0.0)) throw InvalidInput("pivoted_cholesky: epsilon must be positive");
  const std::size_t n = c.size();
  LowRankFactorization fac;
  fac.tolerance = epsilon;
  std::vector<double> d = c.diagonal();
  fac.trace = std::accumulate(d.begin(), d.end(), 0.0);
  const double scale = std::max(std::abs(fac.trace), std::numeric_limits<double>::min());
  const double negative_floor = -1e-10 * scale;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] < negative_floor) {
      throw NotPsdError("pivoted_cholesky: matrix not PSD (diagonal entry " + std::to_string(i) + " = " +
                        std::to_string(d[i]) + ")");
    }
    d[i] = std::max(d[i], 0.0);
  }
  double err = std::accumulate(d.begin(), d.end(), 0.0);
  fac.trace_history.push_back(err);
  std::vector<double> col(n);

  while (err > epsilon * fac.trace) {
    if (fac.rank() >= std::min(max_rank, n)) {
      fac.trace_error = err;
      const std::string msg = "pivoted_cholesky: max_rank " + std::to_string(max_rank) +
                              " reached with relative trace error " + std::to_string(err / fac.trace) +
                              " > " + std::to_string(epsilon);
      if (throw_on_limit) throw RankLimitError(msg, std::move(fac));
      return fac;
    }
    const std::size_t pivot = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    const double pivot_value = d[pivot];
    if (!(pivot_value > 0.0)) break;

    c.column(pivot, col);
    for (const auto& l : fac.factors) simd::axpy(-l[pivot], l, col);
    const double root = std::sqrt(pivot_value);
    for (double& v : col) v /= root;
    col[pivot] = root;

    simd::downdate_diagonal(d, col);
    d[pivot] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] < negative_floor) {
        throw NotPsdError("pivoted_cholesky: matrix not PSD (negative pivot " + std::to_string(d[i]) + " at " +
                          std::to_string(i) + ")");
      }
      if (d[i] < 0.0) d[i] = 0.0;
    }
    err = simd::sum(d);
    fac.factors.push_back(col);
    fac.pivots.push_back(pivot);
    fac.trace_history.push_back(err);
  }
  fac.trace_error = err;
  return fac;
}

}  // namespace

double profile_h(int i, double t) {
  check_profile_index(i);
  switch (i) {
    case 1:
      return 1.0 - 4.0 * (t - 0.5) * (t - 0.5);
    case 2:
      return 2.0 * t * (1.0 - t) + 0.5;
    default:
      return 1.0;
  }
}

double profile_k(int i, double t) {
  check_profile_index(i);
  const bool lower = t <= 0.5;
  switch (i) {
    case 1:
      return lower ? 16.0 * (t - 0.25) * (t - 0.25) : 16.0 * (t - 0.75) * (t - 0.75);
    case 2:
      return lower ? 24.0 * (t - 0.25) * (t - 1.0 / 3.0) : 24.0 * (t - 0.75) * (t - 2.0 / 3.0);
    default:
      return lower ? 24.0 * (t - 0.25) * (t - 1.0 / 6.0) : 24.0 * (t - 0.75) * (t - 5.0 / 6.0);
  }
}

double ClosedFormKernel::operator()(Point x, Point y) const {
  const double t = 0.5 * (coordinate(x, profile_axis) + coordinate(y, profile_axis));
  const double p = family == ProfileFamily::kH ? profile_h(profile_index, t) : profile_k(profile_index, t);
  const double decay = std::abs(coordinate(x, decay_axis) - coordinate(y, decay_axis)) / length;
  return amplitude * std::max(p, 0.0) * std::exp(-decay);
}

void ClosedFormKernel::validate() const {
  check_profile_index(profile_index);
  if (component != 1 && component != 2) throw InvalidInput("closed-form kernel: component must be 1 or 2");
  if (!(length > 0.0)) throw InvalidInput("closed-form kernel: correlation length must be positive");
  if (!(amplitude >= 0.0)) throw InvalidInput("closed-form kernel: amplitude must be non-negative");
  if ((profile_axis != 0 && profile_axis != 1) || (decay_axis != 0 && decay_axis != 1)) {
    throw InvalidInput("closed-form kernel: axes must be 0 (x) or 1 (y)");
  }
}

FiniteRankKernel finite_rank_correlated_pair(const Field& g_a, const Field& g_b, double alpha) {
  if (!(std::abs(alpha) <= 1.0)) {
    throw InvalidInput("finite_rank_correlated_pair: |alpha| must not exceed 1 (got " + std::to_string(alpha) + ")");
  }
  if (g_a.kind != g_b.kind || g_a.size() != g_b.size()) {
    throw InvalidInput("finite_rank_correlated_pair: g_a and g_b must have the same shape");
  }
  FiniteRankKernel k;
  if (alpha == 1.0 || alpha == -1.0) {
    Field g = g_a;
    for (std::size_t i = 0; i < g.size(); ++i) g.values[i] += alpha * g_b.values[i];
    k.terms.push_back({g, g, 1.0});
    return k;
  }
  k.terms.push_back({g_a, g_a, 1.0});
  k.terms.push_back({g_b, g_b, 1.0});
  if (alpha != 0.0) k.terms.push_back({g_a, g_b, 2.0 * alpha});
  return k;
}

std::vector<double> CorrelationMatrix::dense() const {
  const std::size_t n = size();
  std::vector<double> out(n * n);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    column(j, col);
    for (std::size_t i = 0; i < n; ++i) out[i * n + j] = col[i];
  }
  return out;
}

DenseCorrelation::DenseCorrelation(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
  if (values_.size() != n * n) throw InvalidInput("DenseCorrelation: expected n*n values");
  nodes_.resize(n);
  std::iota(nodes_.begin(), nodes_.end(), Index{0});
}

std::vector<double> DenseCorrelation::diagonal() const {
  std::vector<double> d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = values_[i * n_ + i];
  return d;
}

void DenseCorrelation::column(std::size_t j, std::span<double> out) const {
  for (std::size_t i = 0; i < n_; ++i) out[i] = values_[i * n_ + j];
}

std::unique_ptr<CorrelationMatrix> assemble_correlation_matrix(const CorrelationKernel& kernel, const Mesh& mesh,
                                                               const CorrelationSupport& support) {
  if (const auto* fr = std::get_if<FiniteRankKernel>(&kernel)) {
    return std::make_unique<FiniteRankCorrelation>(*fr, mesh, support);
  }
  return std::make_unique<ClosedFormCorrelation>(std::get<ClosedFormKernel>(kernel), mesh, support);
}

CsrMatrix support_mass_matrix(const Mesh& mesh, const CorrelationSupport& support, int components) {
  const CsrMatrix g = full_support_mass(mesh, support);
  const auto nodes = support_nodes(mesh, support);
  std::vector<std::size_t> row_of(mesh.vertex_count(), static_cast<std::size_t>(-1));
  for (std::size_t r = 0; r < nodes.size(); ++r) row_of[nodes[r]] = r;
  TripletBuilder builder(nodes.size() * components);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const Index v = nodes[r];
    for (std::uint32_t k = g.row_ptr()[v]; k < g.row_ptr()[v + 1]; ++k) {
      const std::size_t c = row_of[g.col()[k]];
      if (c == static_cast<std::size_t>(-1)) continue;
      for (int comp = 0; comp < components; ++comp) {
        builder.add(components * r + comp, components * c + comp, g.values()[k]);
      }
    }
  }
  return builder.build(true);
}

LowRankFactorization pivoted_cholesky(const CorrelationMatrix& c, double epsilon, std::size_t max_rank) {
  return factorize(c, epsilon, max_rank, true);
}

LowRankFactorization pivoted_cholesky_truncated(const CorrelationMatrix& c, double epsilon, std::size_t max_rank) {
  return factorize(c, epsilon, max_rank, false);
}

LowRankFactorization pivoted_cholesky_compressed(const CorrelationMatrix& c, double epsilon, std::size_t max_rank,
                                                 double oversampling) {
  if (!(oversampling > 0.0 && oversampling <= 1.0)) {
    throw InvalidInput("pivoted_cholesky_compressed: oversampling must lie in (0, 1]");
  }
  LowRankFactorization greedy = factorize(c, epsilon * oversampling, c.size(), false);
  const std::size_t n = c.size();
  const auto m = static_cast<Eigen::Index>(greedy.rank());
  Eigen::MatrixXd l(static_cast<Eigen::Index>(n), m);
  for (Eigen::Index k = 0; k < m; ++k) {
    l.col(k) = Eigen::Map<const Eigen::VectorXd>(greedy.factors[k].data(), static_cast<Eigen::Index>(n));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l.transpose() * l);
  const Eigen::VectorXd sigma = es.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd rotated = l * es.eigenvectors().rowwise().reverse();

  LowRankFactorization out;
  out.tolerance = epsilon;
  out.trace = greedy.trace;
  out.pivots = greedy.pivots;
  double err = greedy.trace_error + sigma.sum();
  out.trace_history.push_back(err);
  Eigen::Index k = 0;
  while (err > epsilon * out.trace && k < m) {
    if (out.rank() >= max_rank) {
      out.trace_error = err;
      throw RankLimitError("pivoted_cholesky_compressed: max_rank " + std::to_string(max_rank) +
                               " reached with relative trace error " + std::to_string(err / out.trace),
                           std::move(out));
    }
    out.factors.emplace_back(rotated.col(k).data(), rotated.col(k).data() + n);
    err = greedy.trace_error + sigma.tail(m - k - 1).sum();
    out.trace_history.push_back(err);
    ++k;
  }
  out.trace_error = err;
  return out;
}

std::vector<std::vector<double>> factors_to_loads(const LowRankFactorization& fac, const CsrMatrix& g) {
  if (g.size() == 0) throw InvalidInput("factors_to_loads: mass matrix is empty (no tagged nodes)");
  std::vector<std::vector<double>> loads;
  loads.reserve(fac.rank());
  SolverOptions opts;
  opts.tol = 1e-12;
  for (const auto& f : fac.factors) {
    if (f.size() != g.size()) throw InvalidInput("factors_to_loads: factor size does not match the mass matrix");
    loads.push_back(solve_spd(g, Field{FieldKind::kScalar, f}, opts).values);
  }
  return loads;
}

std::vector<Field> scatter_to_fields(std::span<const std::vector<double>> vectors, const CorrelationMatrix& c,
                                     std::size_t vertex_count, int target_components, int component) {
  const int nc = c.components();
  if (target_components != 1 && target_components != 2) throw InvalidInput("scatter_to_fields: bad component count");
  if (nc != 1 && nc != target_components) throw InvalidInput("scatter_to_fields: incompatible components");
  const auto nodes = c.nodes();
  std::vector<Field> out;
  for (const auto& v : vectors) {
    if (v.size() != c.size()) throw InvalidInput("scatter_to_fields: vector size mismatch");
    Field f = target_components == 1 ? Field::scalar(vertex_count) : Field::vector2(vertex_count);
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      if (nc == target_components) {
        for (int k = 0; k < nc; ++k) f.values[nc * nodes[r] + k] = v[nc * r + k];
      } else {
        f.values[target_components * nodes[r] + (component - 1)] = v[r];
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

LoadTerms to_load_terms(const FiniteRankKernel& kernel) {
  LoadTerms out;
  auto index_of = [&](const Field& f) {
    for (std::size_t i = 0; i < out.fields.size(); ++i) {
      if (out.fields[i].kind == f.kind && out.fields[i].values == f.values) return i;
    }
    out.fields.push_back(f);
    return out.fields.size() - 1;
  };
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  for (const auto& t : kernel.terms) entries.emplace_back(index_of(t.a), index_of(t.b), t.weight);
  const std::size_t m = out.fields.size();
  out.weights.assign(m * m, 0.0);
  for (const auto& [i, j, w] : entries) {
    if (i == j) {
      out.weights[i * m + i] += w;
    } else {
      out.weights[i * m + j] += 0.5 * w;
      out.weights[j * m + i] += 0.5 * w;
    }
  }
  return out;
}

}  // namespace corshape
