#include "qknn/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qknn/error.hpp"
#include "qknn/rng.hpp"

namespace qknn {

namespace {

constexpr int kAdmmDefaultMaxIter = 2000;
constexpr int kMmDefaultMaxIter = 100;
constexpr double kConsensusFactor = 10.0;
// Inner prox tolerance tracks the outer residual: factor * previous residual,
// clamped to [cfg.prox_tol, kInexactCap].
constexpr double kInexactFactor = 1e-3;
constexpr double kInexactCap = 1e-5;

void check_problem(const Dataset& data, const KnnGraph& graph) {
  if (data.y.size() != graph.num_vertices() || data.X.rows() != data.y.size()) {
    throw DimensionError("fit: dataset size " + std::to_string(data.y.size()) + " does not match graph with " +
                         std::to_string(graph.num_vertices()) + " vertices");
  }
}

bool usable(const Vector& v, Index n) { return v.size() == n; }

ProxOptions prox_options(const FitConfig& cfg, double lipschitz) {
  ProxOptions opts;
  opts.tol = cfg.prox_tol;
  opts.max_iter = cfg.prox_max_iter;
  opts.lipschitz = lipschitz;
  return opts;
}

double lipschitz_for(const KnnGraph& graph) {
  if (graph.num_edges() == 0) return 1.0;
  double bound = 0.0;
  for (const Edge& e : graph.edges()) {
    bound = std::max(bound, static_cast<double>(graph.degree(e.tail) + graph.degree(e.head)));
  }
  return std::min(1.02 * incidence_norm_squared(graph), bound);
}

// Shared ADMM loop; `primal` maps (i, z_i, u_i) to the new theta_i.
template <typename PrimalUpdate>
FitResult run_admm(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg, const SolverState* warm,
                   PrimalUpdate primal, auto objective) {
  const Index n = data.y.size();
  const int max_iter = cfg.max_iter.value_or(kAdmmDefaultMaxIter);

  Vector theta = data.y;
  Vector z = data.y;
  Vector u = Vector::Zero(n);
  ProxOptions popts = prox_options(cfg, lipschitz_for(graph));
  if (warm != nullptr) {
    if (usable(warm->theta, n)) theta = warm->theta;
    if (usable(warm->z, n)) z = warm->z;
    if (usable(warm->u, n)) u = warm->u;
    if (warm->prox_dual.size() == graph.num_edges()) popts.warm_start = warm->prox_dual;
  }

  const double gamma = cfg.lambda / cfg.step;
  FitResult result;
  Vector theta_prev(n);
  Vector dual = popts.warm_start.value_or(Vector::Zero(graph.num_edges()));
  double outer_residual = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= max_iter; ++k) {
    theta_prev = theta;
    for (Index i = 0; i < n; ++i) theta[i] = primal(i, z[i], u[i]);

    popts.warm_start = dual;
    popts.tol = std::max(cfg.prox_tol, std::min(kInexactCap, kInexactFactor * outer_residual));
    ProxResult prox = solve_fused_lasso_prox(graph, theta + u, gamma, popts);
    result.final_prox_residual = prox.kkt_residual;
    z = std::move(prox.z);
    dual = std::move(prox.dual);
    u += theta - z;

    const double primal_change = (theta - theta_prev).norm();
    const double consensus = (theta - z).norm();
    outer_residual = std::max(primal_change, consensus);
    result.iterations = k;
    result.primal_residual_trace.push_back(primal_change);
    result.objective_trace.push_back(objective(z));
    if (primal_change <= cfg.tol && consensus <= kConsensusFactor * cfg.tol) {
      result.converged = true;
      break;
    }
  }
  result.theta = z;
  result.state = SolverState{theta, z, u, dual};
  return result;
}

}  // namespace

void FitConfig::validate() const {
  (void)QuantileLevel{tau};
  if (!(lambda >= 0.0)) throw ParameterError("fit: lambda must be >= 0");
  if (!(step > 0.0)) throw ParameterError("fit: ADMM step R must be > 0");
  if (!(tol > 0.0)) throw ParameterError("fit: tol must be > 0");
  if (max_iter && *max_iter < 1) throw ParameterError("fit: max_iter must be >= 1");
  if (mm_epsilon && !(*mm_epsilon > 0.0)) throw ParameterError("fit: MM epsilon must be > 0");
  if (!(prox_tol > 0.0) || prox_max_iter < 1) throw ParameterError("fit: bad prox tolerance or iteration cap");
}

double admm_primal_update(double y, double z, double u, double tau, double step) {
  const double gap = y - z + u;
  if (gap > tau / step) return z - u + tau / step;
  if (gap < (tau - 1.0) / step) return z - u + (tau - 1.0) / step;
  return y;
}

FitResult fit_admm(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg, const SolverState* warm) {
  cfg.validate();
  check_problem(data, graph);
  const QuantileLevel tau{cfg.tau};
  const Vector& y = data.y;
  return run_admm(
      data, graph, cfg, warm,
      [&](Index i, double zi, double ui) { return admm_primal_update(y[i], zi, ui, cfg.tau, cfg.step); },
      [&](const Vector& theta) { return quantile_objective(y, theta, tau, cfg.lambda, graph); });
}

FitResult fit_l2_baseline(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg,
                          const SolverState* warm) {
  FitConfig checked = cfg;
  checked.tau = 0.5;
  checked.validate();
  check_problem(data, graph);
  const Vector& y = data.y;
  const double R = cfg.step;
  return run_admm(
      data, graph, checked, warm, [&](Index i, double zi, double ui) { return (y[i] + R * (zi - ui)) / (1.0 + R); },
      [&](const Vector& theta) {
        CompensatedSum acc;
        for (Index i = 0; i < y.size(); ++i) acc.add(0.5 * (y[i] - theta[i]) * (y[i] - theta[i]));
        return acc.value() + cfg.lambda * total_variation(graph, theta);
      });
}

double median(const Vector& values) {
  if (values.size() == 0) throw InputError("median of empty vector");
  std::vector<double> sorted(values.begin(), values.end());
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  const double upper = sorted[mid];
  if (sorted.size() % 2 == 1) return upper;
  const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

FitResult fit_mm(const Dataset& data, const KnnGraph& graph, const FitConfig& cfg, const SolverState* warm,
                 LaplacianBackend backend) {
  cfg.validate();
  check_problem(data, graph);
  if (cfg.tau != 0.5) {
    throw UnsupportedParameterError("fit_mm: majorize-minimize only supports median regression (tau = 0.5)");
  }
  const QuantileLevel tau{cfg.tau};
  const Vector& y = data.y;
  const Index n = y.size();
  const int max_iter = cfg.max_iter.value_or(kMmDefaultMaxIter);
  const double eps = cfg.mm_epsilon.value_or(1e-8 * (1.0 + y.cwiseAbs().maxCoeff()));

  Vector theta = (warm != nullptr && usable(warm->theta, n)) ? warm->theta : Vector::Constant(n, median(y));
  Vector vertex_w(n);
  Vector edge_w(graph.num_edges());
  Vector diffs;
  FitResult result;
  // sum |y - theta| + 2 lambda ||grad theta||_1 is twice the tau = 0.5 objective,
  // so its majorizer has edge weight 2 lambda / (|theta_i - theta_j| + eps).
  const double penalty = 2.0 * cfg.lambda;
  for (int k = 1; k <= max_iter; ++k) {
    for (Index i = 0; i < n; ++i) vertex_w[i] = 1.0 / (std::abs(y[i] - theta[i]) + eps);
    incidence_apply(graph, theta, diffs);
    // The solver squares edge weights.
    for (Index p = 0; p < diffs.size(); ++p) edge_w[p] = std::sqrt(1.0 / (std::abs(diffs[p]) + eps));

    Vector next = weighted_laplacian_solve(graph, vertex_w, edge_w, penalty, y, backend);
    const double change = (next - theta).norm();
    theta = std::move(next);
    result.iterations = k;
    result.primal_residual_trace.push_back(change);
    result.objective_trace.push_back(quantile_objective(y, theta, tau, cfg.lambda, graph));
    if (change <= cfg.tol) {
      result.converged = true;
      break;
    }
  }
  result.theta = theta;
  result.state.theta = theta;
  result.state.z = theta;
  return result;
}

FitResult fit(SolverId solver, const Dataset& data, const KnnGraph& graph, const FitConfig& cfg,
              const SolverState* warm) {
  switch (solver) {
    case SolverId::kAdmm:
      return fit_admm(data, graph, cfg, warm);
    case SolverId::kMm:
      return fit_mm(data, graph, cfg, warm);
    case SolverId::kL2:
      return fit_l2_baseline(data, graph, cfg, warm);
  }
  throw ParameterError("fit: unknown solver");
}

namespace {

// Exact minimisation of a convex piecewise-linear function of one shift
// variable, given its candidate breakpoints.
template <typename Fn>
std::pair<double, double> best_breakpoint(const std::vector<double>& candidates, Fn&& value_at) {
  double best_shift = 0.0;
  double best_value = value_at(0.0);
  for (double s : candidates) {
    const double v = value_at(s);
    if (v < best_value) {
      best_value = v;
      best_shift = s;
    }
  }
  return {best_shift, best_value};
}

}  // namespace

OptimalityReport check_optimality(const Vector& y, const KnnGraph& graph, double tau_value, double lambda,
                                  const Vector& theta, const OptimalityOptions& opts) {
  if (opts.probes < 1) throw ParameterError("check_optimality: probes must be >= 1");
  const QuantileLevel tau{tau_value};
  const Index n = theta.size();
  auto objective = [&](const Vector& t) { return quantile_objective(y, t, tau, lambda, graph); };

  OptimalityReport report;
  report.objective = objective(theta);
  double best = report.objective;

  CounterRng rng(opts.seed, 0x0DDBA11);
  Vector direction(n);
  for (int probe = 0; probe < opts.probes; ++probe) {
    for (Index i = 0; i < n; ++i) direction[i] = rng.normal();
    direction.normalize();
    for (double r : {opts.radius, opts.radius / 10.0, opts.radius / 100.0}) {
      best = std::min(best, objective(theta + r * direction));
    }
  }

  const auto& edges = graph.edges();
  auto other_end = [&](int p, int v) { return edges[p].tail == v ? edges[p].head : edges[p].tail; };

  // One Gauss-Seidel pass of exact coordinate minimisation.
  Vector work = theta;
  std::vector<double> candidates;
  for (Index i = 0; i < n; ++i) {
    const int vi = static_cast<int>(i);
    candidates.clear();
    candidates.push_back(y[i] - work[i]);
    for (int p : graph.incident_edges(vi)) candidates.push_back(work[other_end(p, vi)] - work[i]);
    auto local = [&](double s) {
      const double t = work[i] + s;
      double value = pinball(y[i] - t, tau);
      for (int p : graph.incident_edges(vi)) value += lambda * std::abs(t - work[other_end(p, vi)]);
      return value;
    };
    work[i] += best_breakpoint(candidates, local).first;
  }
  best = std::min(best, objective(work));

  // One pass of exact block shifts over the fused pieces of theta.
  if (lambda > 0.0 && graph.num_edges() > 0) {
    work = theta;
    const double fuse_tol = 1e-7 * (1.0 + theta.cwiseAbs().maxCoeff());
    std::vector<bool> fused(edges.size());
    for (std::size_t p = 0; p < edges.size(); ++p) {
      fused[p] = std::abs(theta[edges[p].tail] - theta[edges[p].head]) <= fuse_tol;
    }
    const Components pieces = connected_components(graph, fused);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) members[pieces.labels[v]].push_back(v);
    for (const auto& block : members) {
      if (block.size() < 2) continue;
      const int label = pieces.labels[block.front()];
      std::vector<std::pair<int, int>> boundary;  // (inside, outside)
      candidates.clear();
      for (int v : block) {
        candidates.push_back(y[v] - work[v]);
        for (int p : graph.incident_edges(v)) {
          const int w = other_end(p, v);
          if (pieces.labels[w] != label) {
            boundary.emplace_back(v, w);
            candidates.push_back(work[w] - work[v]);
          }
        }
      }
      auto local = [&](double s) {
        CompensatedSum acc;
        for (int v : block) acc.add(pinball(y[v] - work[v] - s, tau));
        for (auto [v, w] : boundary) acc.add(lambda * std::abs(work[v] + s - work[w]));
        return acc.value();
      };
      const double shift = best_breakpoint(candidates, local).first;
      for (int v : block) work[v] += shift;
    }
    best = std::min(best, objective(work));
  }

  report.best_gap = std::max(0.0, report.objective - best);
  report.relative_gap = report.best_gap / (1.0 + std::abs(report.objective));
  report.is_optimal = report.relative_gap <= opts.rel_tol;
  return report;
}

}  // namespace qknn
