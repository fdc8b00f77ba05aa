#pragma once

#include <optional>

#include "qknn/graph.hpp"
#include "qknn/types.hpp"

namespace qknn {

struct ProxOptions {
  double tol = 1e-8;     // absolute KKT residual
  int max_iter = 10000;
  std::optional<Vector> warm_start;  // dual vector, one entry per edge
  // Upper bound on ||grad_G||_2^2; estimated by power iteration when absent.
  std::optional<double> lipschitz;
};

struct ProxResult {
  Vector z;
  Vector dual;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

// Largest eigenvalue of grad_G^T grad_G (the graph Laplacian), by power
// iteration to `rel_tol` relative change.
double incidence_norm_squared(const KnnGraph& graph, double rel_tol = 1e-6, int max_iter = 10000);

// KKT residual of a primal/dual pair for the graph fused-lasso prox:
// max_p |w_p - clip(w_p + (grad z)_p, gamma)|, assuming z = v - grad^T w.
double prox_kkt_residual(const KnnGraph& graph, const Vector& z, const Vector& dual, double gamma);

// Minimises 1/2 ||v - z||^2 + gamma ||grad_G z||_1 by accelerated projected
// gradient on the box-constrained dual, with adaptive restart. Never throws on
// non-convergence; inspect `converged`.
ProxResult solve_fused_lasso_prox(const KnnGraph& graph, const Vector& v, double gamma,
                                  const ProxOptions& opts = {});

// As solve_fused_lasso_prox, but throws ConvergenceError (carrying the final
// KKT residual) if the tolerance is not met within opts.max_iter.
ProxResult fused_lasso_prox(const KnnGraph& graph, const Vector& v, double gamma,
                            const ProxOptions& opts = {});

enum class LaplacianBackend {
  kAuto,  // dense LDLT for n <= 500, otherwise sparse Cholesky
  kDense,
  kConjugateGradient,  // falls back to sparse Cholesky when CG stalls
  kSparseCholesky,
};

// Solves (diag(W) + lambda grad^T diag(W_edge)^2 grad) theta = diag(W) y.
// All weights must be positive. The normwise backward error
// ||b - A x||_inf / (|| |A| |x| ||_inf + ||b||_inf) is at most 1e-10.
Vector weighted_laplacian_solve(const KnnGraph& graph, const Vector& vertex_weights,
                                const Vector& edge_weights, double lambda, const Vector& y,
                                LaplacianBackend backend = LaplacianBackend::kAuto);

}  // namespace qknn
