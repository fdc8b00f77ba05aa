#include "qknn/tv_prox.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qknn/error.hpp"

namespace qknn {

namespace {

constexpr int kResidualCheckInterval = 10;
constexpr Index kDenseSolveLimit = 500;
constexpr double kLaplacianTol = 1e-10;

double clip(double x, double bound) { return std::clamp(x, -bound, bound); }

// Rigorous bound lambda_max(L) <= max over edges of deg(i) + deg(j).
double degree_bound(const KnnGraph& graph) {
  double best = 0.0;
  for (const Edge& e : graph.edges()) {
    best = std::max(best, static_cast<double>(graph.degree(e.tail) + graph.degree(e.head)));
  }
  return best;
}

double step_lipschitz(const KnnGraph& graph, const ProxOptions& opts) {
  if (opts.lipschitz) return *opts.lipschitz;
  // Power iteration approaches from below; pad slightly and stay under the
  // degree bound, which is always valid.
  return std::min(1.02 * incidence_norm_squared(graph), degree_bound(graph));
}

using SparseMatrix = Eigen::SparseMatrix<double>;

SparseMatrix assemble_system(const KnnGraph& graph, const Vector& vertex_weights,
                             const Vector& edge_weights, double lambda) {
  const int n = graph.num_vertices();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) + 4 * graph.edges().size());
  for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, vertex_weights[i]);
  const auto& edges = graph.edges();
  for (std::size_t p = 0; p < edges.size(); ++p) {
    const double w = lambda * edge_weights[static_cast<Index>(p)] * edge_weights[static_cast<Index>(p)];
    if (w == 0.0) continue;
    const int i = edges[p].tail;
    const int j = edges[p].head;
    triplets.emplace_back(i, i, w);
    triplets.emplace_back(j, j, w);
    triplets.emplace_back(i, j, -w);
    triplets.emplace_back(j, i, -w);
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  return A;
}

// Normwise backward error ||b - Ax||_inf / (|| |A| |x| ||_inf + ||b||_inf),
// accumulated in extended precision. Also returns the residual vector.
double backward_error(const SparseMatrix& A, const Vector& x, const Vector& b, Vector& r) {
  const Index n = A.rows();
  std::vector<long double> acc(static_cast<std::size_t>(n));
  std::vector<long double> scale(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) acc[i] = b[i];
  for (Index col = 0; col < A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
      const long double term = static_cast<long double>(it.value()) * x[col];
      acc[it.row()] -= term;
      scale[it.row()] += std::abs(term);
    }
  }
  r.resize(n);
  long double worst = 0.0L;
  long double denom = 0.0L;
  for (Index i = 0; i < n; ++i) {
    r[i] = static_cast<double>(acc[i]);
    worst = std::max(worst, std::abs(acc[i]));
    denom = std::max(denom, scale[i]);
  }
  denom += b.cwiseAbs().maxCoeff();
  return denom > 0.0L ? static_cast<double>(worst / denom) : static_cast<double>(worst);
}

}  // namespace

double incidence_norm_squared(const KnnGraph& graph, double rel_tol, int max_iter) {
  if (graph.num_edges() == 0) return 0.0;
  const int n = graph.num_vertices();
  // Deterministic, non-constant start vector (constants lie in the null space).
  Vector x(n);
  std::uint64_t state = 0x9E3779B97F4A7C15ULL;
  for (int i = 0; i < n; ++i) {
    state ^= state >> 33;
    state *= 0xFF51AFD7ED558CCDULL;
    state ^= state >> 29;
    x[i] = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
  }
  x.normalize();
  Vector grad;
  Vector lx;
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    incidence_apply(graph, x, grad);
    incidence_transpose_apply(graph, grad, lx);
    const double next = lx.norm();
    if (next == 0.0) return 0.0;
    x = lx / next;
    if (it > 0 && std::abs(next - estimate) <= rel_tol * next) return next;
    estimate = next;
  }
  return estimate;
}

double prox_kkt_residual(const KnnGraph& graph, const Vector& z, const Vector& dual, double gamma) {
  const Vector grad = incidence_apply(graph, z);
  double worst = 0.0;
  for (Index p = 0; p < grad.size(); ++p) {
    worst = std::max(worst, std::abs(dual[p] - clip(dual[p] + grad[p], gamma)));
  }
  // Feasibility of the dual itself.
  for (Index p = 0; p < dual.size(); ++p) worst = std::max(worst, std::abs(dual[p]) - gamma);
  return worst;
}

ProxResult solve_fused_lasso_prox(const KnnGraph& graph, const Vector& v, double gamma,
                                  const ProxOptions& opts) {
  const int n = graph.num_vertices();
  const int m = graph.num_edges();
  if (v.size() != n) throw DimensionError("fused_lasso_prox: input length != vertex count");
  if (!(gamma >= 0.0)) throw ParameterError("fused_lasso_prox: gamma must be >= 0");
  if (!(opts.tol > 0.0) || opts.max_iter < 1) {
    throw ParameterError("fused_lasso_prox: need tol > 0 and max_iter >= 1");
  }

  ProxResult result;
  if (gamma == 0.0 || m == 0) {
    result.z = v;
    result.dual = Vector::Zero(m);
    result.converged = true;
    return result;
  }

  Vector w = Vector::Zero(m);
  if (opts.warm_start) {
    if (opts.warm_start->size() != m) throw DimensionError("fused_lasso_prox: warm start length != edge count");
    w = opts.warm_start->unaryExpr([gamma](double x) { return clip(x, gamma); });
  }

  const double step = 1.0 / step_lipschitz(graph, opts);
  Vector xi = w;
  Vector w_next(m);
  Vector z(n);
  Vector grad(m);
  Vector back(n);
  double t = 1.0;

  auto residual_at = [&](const Vector& dual) {
    incidence_transpose_apply(graph, dual, back);
    z = v - back;
    incidence_apply(graph, z, grad);
    double worst = 0.0;
    for (Index p = 0; p < m; ++p) worst = std::max(worst, std::abs(dual[p] - clip(dual[p] + grad[p], gamma)));
    return worst;
  };

  double residual = residual_at(w);
  int it = 0;
  while (residual > opts.tol && it < opts.max_iter) {
    ++it;
    incidence_transpose_apply(graph, xi, back);
    z = v - back;
    incidence_apply(graph, z, grad);
    double restart_test = 0.0;
    for (Index p = 0; p < m; ++p) {
      w_next[p] = clip(xi[p] + step * grad[p], gamma);
      restart_test += (xi[p] - w_next[p]) * (w_next[p] - w[p]);
    }
    if (restart_test > 0.0) {
      t = 1.0;
      xi = w_next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      xi = w_next + ((t - 1.0) / t_next) * (w_next - w);
      t = t_next;
    }
    w.swap(w_next);
    if (it % kResidualCheckInterval == 0 || it == opts.max_iter) residual = residual_at(w);
  }
  if (it % kResidualCheckInterval != 0 && it != opts.max_iter) residual = residual_at(w);

  // residual_at leaves z consistent with w.
  result.z = z;
  result.dual = std::move(w);
  result.iterations = it;
  result.kkt_residual = residual;
  result.converged = residual <= opts.tol;
  return result;
}

ProxResult fused_lasso_prox(const KnnGraph& graph, const Vector& v, double gamma, const ProxOptions& opts) {
  ProxResult result = solve_fused_lasso_prox(graph, v, gamma, opts);
  if (!result.converged) {
    throw ConvergenceError("fused_lasso_prox: KKT residual " + std::to_string(result.kkt_residual) +
                               " above tolerance after " + std::to_string(result.iterations) + " iterations",
                           result.kkt_residual, result.iterations);
  }
  return result;
}

Vector weighted_laplacian_solve(const KnnGraph& graph, const Vector& vertex_weights, const Vector& edge_weights,
                                double lambda, const Vector& y, LaplacianBackend backend) {
  const int n = graph.num_vertices();
  if (vertex_weights.size() != n || y.size() != n) {
    throw DimensionError("weighted_laplacian_solve: vertex weights / rhs length != vertex count");
  }
  if (edge_weights.size() != graph.num_edges()) {
    throw DimensionError("weighted_laplacian_solve: edge weight length != edge count");
  }
  if (!(lambda >= 0.0)) throw ParameterError("weighted_laplacian_solve: lambda must be >= 0");
  if (!(vertex_weights.array() > 0.0).all() || !(edge_weights.array() > 0.0).all()) {
    throw ParameterError("weighted_laplacian_solve: weights must be positive");
  }

  const Vector rhs = vertex_weights.cwiseProduct(y);
  if (lambda == 0.0 || graph.num_edges() == 0) return y;

  const SparseMatrix A = assemble_system(graph, vertex_weights, edge_weights, lambda);
  if (backend == LaplacianBackend::kAuto) {
    backend = n <= kDenseSolveLimit ? LaplacianBackend::kDense : LaplacianBackend::kSparseCholesky;
  }

  Vector x;
  Vector r;
  Eigen::SimplicialLDLT<SparseMatrix> sparse_factor;
  Eigen::LDLT<Eigen::MatrixXd> dense_factor;
  const bool dense = backend == LaplacianBackend::kDense;
  bool factored = false;
  auto factor_sparse = [&] {
    sparse_factor.compute(A);
    if (sparse_factor.info() != Eigen::Success) throw InternalError("weighted_laplacian_solve: sparse LDLT failed");
    factored = true;
  };
  if (dense) {
    dense_factor.compute(Eigen::MatrixXd(A));
    if (dense_factor.info() != Eigen::Success) throw InternalError("weighted_laplacian_solve: dense LDLT failed");
    x = dense_factor.solve(rhs);
  } else if (backend == LaplacianBackend::kConjugateGradient) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(kLaplacianTol);
    cg.setMaxIterations(std::max(200, n));
    cg.compute(A);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success || backward_error(A, x, rhs, r) > kLaplacianTol) {
      factor_sparse();
      x = sparse_factor.solve(rhs);
    }
  } else {
    factor_sparse();
    x = sparse_factor.solve(rhs);
  }

  // Iterative refinement with an extended-precision residual absorbs
  // round-off when the weights span many orders of magnitude.
  double error = backward_error(A, x, rhs, r);
  for (int pass = 0; pass < 3 && error > kLaplacianTol; ++pass) {
    if (!dense && !factored) factor_sparse();
    x += dense ? Vector(dense_factor.solve(r)) : Vector(sparse_factor.solve(r));
    error = backward_error(A, x, rhs, r);
  }
  if (!(error <= kLaplacianTol)) {
    throw InternalError("weighted_laplacian_solve: backward error " + std::to_string(error) + " above 1e-10");
  }
  return x;
}

}  // namespace qknn
