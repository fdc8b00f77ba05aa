#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qknn/graph.hpp"
#include "qknn/objective.hpp"
#include "qknn/tv_prox.hpp"
#include "qknn/types.hpp"

namespace qknn {

struct FitConfig {
  double tau = 0.5;
  double lambda = 0.0;
  double step = 0.5;  // ADMM augmented-Lagrangian parameter R
  double tol = 1e-4;
  // Solver default when unset: 2000 for ADMM and the l2 baseline, 100 for MM.
  std::optional<int> max_iter;
  // MM denominator perturbation; defaults to 1e-8 * (1 + max|y|).
  std::optional<double> mm_epsilon;
  double prox_tol = 1e-8;
  int prox_max_iter = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Iterate state that can seed a subsequent fit (e.g. the next lambda on a path).
struct SolverState {
  Vector theta;
  Vector z;
  Vector u;
  Vector prox_dual;
};

struct FitResult {
  Vector theta;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
  std::vector<double> primal_residual_trace;
  // Inner prox KKT residual at the last iteration (ADMM-type solvers only).
  double final_prox_residual = 0.0;
  SolverState state;
};

// Exact minimiser of rho_tau(y - theta) + (R/2) (theta - z + u)^2 over theta.
double admm_primal_update(double y, double z, double u, double tau, double step);

// ADMM for the penalised quantile problem. Returns z, the split variable that
// carries the total-variation penalty, as the estimate.
FitResult fit_admm(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg,
                   const SolverState* warm = nullptr);

// Majorize-minimize (iteratively reweighted least squares) for tau = 0.5.
FitResult fit_mm(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg,
                 const SolverState* warm = nullptr,
                 LaplacianBackend backend = LaplacianBackend::kAuto);

// Squared-loss graph fused lasso, 1/2 ||y - theta||^2 + lambda ||grad theta||_1,
// by ADMM with the same stopping rule. cfg.tau is ignored.
FitResult fit_l2_baseline(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg,
                          const SolverState* warm = nullptr);

enum class SolverId { kAdmm, kMm, kL2 };

FitResult fit(SolverId solver, const Dataset& data, const KnnGraph& graph, const FitConfig& cfg,
              const SolverState* warm = nullptr);

struct OptimalityReport {
  bool is_optimal = false;
  double objective = 0.0;
  // Largest objective decrease found by any probe (>= 0).
  double best_gap = 0.0;
  double relative_gap = 0.0;  // best_gap / (1 + |objective|)
};

struct OptimalityOptions {
  int probes = 64;
  double radius = 1e-2;
  std::uint64_t seed = 0;
  double rel_tol = 1e-8;
};

// Convexity-based optimality oracle: tries random sphere perturbations at
// three radii, one exact coordinate-descent pass, and one exact pass of
// shifting each fused block. No improvement beyond rel_tol * (1 + |obj|)
// means the point passes.
OptimalityReport check_optimality(const Vector& y, const KnnGraph& graph, double tau, double lambda,
                                  const Vector& theta, const OptimalityOptions& opts = {});

// Sample median; even n averages the two middle order statistics.
double median(const Vector& values);

}  // namespace qknn
