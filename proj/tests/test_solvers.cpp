#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "qknn/error.hpp"
#include "qknn/rng.hpp"
#include "qknn/solvers.hpp"

namespace qknn {
namespace {

Dataset random_dataset(int n, std::uint64_t seed, double noise = 1.0) {
  CounterRng rng(seed, 9);
  Dataset data;
  data.X.resize(n, 2);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    data.X(i, 0) = rng.uniform();
    data.X(i, 1) = rng.uniform();
    data.y[i] = (data.X(i, 0) > 0.5 ? 1.0 : 0.0) + noise * rng.normal();
  }
  return data;
}

FitConfig config(double tau, double lambda) {
  FitConfig cfg;
  cfg.tau = tau;
  cfg.lambda = lambda;
  return cfg;
}

TEST(PrimalUpdate, Examples) {
  EXPECT_DOUBLE_EQ(admm_primal_update(3.0, 0.0, 0.0, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(admm_primal_update(0.5, 0.0, 0.0, 0.5, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(admm_primal_update(-4.0, 0.0, 0.0, 0.5, 0.5), -1.0);
}

TEST(PrimalUpdate, MatchesScalarMinimisation) {
  CounterRng rng(1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const double y = 3.0 * rng.normal();
    const double z = 3.0 * rng.normal();
    const double u = rng.normal();
    const double tau = 0.05 + 0.9 * rng.uniform();
    const double R = 0.1 + 3.0 * rng.uniform();
    const auto f = [&](double t) { return oracle::check_loss(y - t, tau) + 0.5 * R * (t - z + u) * (t - z + u); };
    const double expected = oracle::golden_min(f, -30.0, 30.0);
    const double got = admm_primal_update(y, z, u, tau, R);
    EXPECT_NEAR(got, expected, 1e-4);
    EXPECT_LE(f(got), f(expected) + 1e-12);
  }
}

TEST(Median, OddAndEven) {
  EXPECT_DOUBLE_EQ(median((Vector(3) << 5.0, 1.0, 3.0).finished()), 3.0);
  EXPECT_DOUBLE_EQ(median((Vector(4) << 4.0, 1.0, 3.0, 2.0).finished()), 2.5);
  EXPECT_THROW(median(Vector(0)), InputError);
}

TEST(Admm, ConstantResponse) {
  Dataset data = random_dataset(40, 2);
  data.y.setConstant(1.7);
  const KnnGraph g = build_knn_graph(data.X, 5);
  for (double lambda : {0.0, 0.5, 10.0}) {
    const FitResult r = fit_admm(data, g, config(0.3, lambda));
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 2);
    EXPECT_LE((r.theta.array() - 1.7).abs().maxCoeff(), 1e-12);
  }
}

TEST(Admm, LambdaZeroInterpolates) {
  const Dataset data = random_dataset(50, 3);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult r = fit_admm(data, g, config(0.7, 0.0));
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.theta - data.y).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Admm, TracesHaveIterationLength) {
  const Dataset data = random_dataset(60, 4);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult r = fit_admm(data, g, config(0.5, 0.3));
  EXPECT_EQ(static_cast<int>(r.objective_trace.size()), r.iterations);
  EXPECT_EQ(static_cast<int>(r.primal_residual_trace.size()), r.iterations);
  EXPECT_TRUE(r.theta.allFinite());
}

TEST(Admm, OptimalOnSmallInstances) {
  for (int trial = 0; trial < 6; ++trial) {
    const Dataset data = random_dataset(20, 10 + trial);
    const KnnGraph g = build_knn_graph(data.X, 5);
    const double tau = trial % 2 == 0 ? 0.3 : 0.8;
    const FitResult r = fit_admm(data, g, config(tau, 0.7));
    EXPECT_TRUE(r.converged);
    OptimalityOptions opts;
    opts.rel_tol = 1e-3;
    const OptimalityReport report = check_optimality(data.y, g, tau, 0.7, r.theta, opts);
    EXPECT_TRUE(report.is_optimal) << "trial " << trial << " gap " << report.relative_gap;
  }
}

TEST(Admm, MatchesLatticeOptimumOnTinyInstance) {
  const Dataset data = random_dataset(4, 20);
  const KnnGraph g = build_knn_graph(data.X, 2);
  const auto edges = oracle::edge_pairs(g);
  FitConfig cfg = config(0.3, 0.4);
  cfg.tol = 1e-8;
  const FitResult r = fit_admm(data, g, cfg);
  const auto f = [&](const Vector& t) { return oracle::objective(data.y, t, 0.3, 0.4, edges); };
  const auto best = oracle::lattice_minimize(f, 4, data.y.minCoeff(), data.y.maxCoeff(), 9).second;
  EXPECT_LE(f(r.theta), best + 1e-4);
}

TEST(Admm, LargeLambdaCollapsesToSampleQuantile) {
  const Dataset data = random_dataset(41, 5);
  const KnnGraph g = build_knn_graph(data.X, 5);
  for (double tau : {0.25, 0.5, 0.9}) {
    const double lambda = std::max(tau, 1.0 - tau) * data.y.cwiseAbs().sum();
    FitConfig cfg = config(tau, lambda);
    cfg.tol = 1e-6;
    const FitResult r = fit_admm(data, g, cfg);
    EXPECT_LE(r.theta.maxCoeff() - r.theta.minCoeff(), 1e-4);
    const double c = r.theta.mean();
    // c minimises sum rho_tau(y - c): at most ceil(n (1 - tau)) residuals are
    // positive and at most ceil(n tau) negative.
    const int n = 41;
    const int above = static_cast<int>((data.y.array() > c + 1e-4).count());
    const int below = static_cast<int>((data.y.array() < c - 1e-4).count());
    EXPECT_LE(above, static_cast<int>(std::ceil(n * (1.0 - tau))));
    EXPECT_LE(below, static_cast<int>(std::ceil(n * tau)));
  }
}

TEST(Admm, QuantilePropertyAtLambdaZero) {
  const Dataset data = random_dataset(33, 12);
  const KnnGraph g = build_knn_graph(data.X, 5);
  for (double tau : {0.2, 0.5, 0.8}) {
    const Vector r = data.y - fit_admm(data, g, config(tau, 0.0)).theta;
    EXPECT_LE((r.array() > 1e-6).count(), static_cast<Index>(std::ceil(33 * (1.0 - tau))));
    EXPECT_LE((r.array() < -1e-6).count(), static_cast<Index>(std::ceil(33 * tau)));
  }
}

TEST(Admm, PermutationEquivariant) {
  const Dataset data = random_dataset(30, 6);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(6, 1);
  rng.shuffle(perm);
  Dataset moved = data;
  for (int i = 0; i < 30; ++i) {
    moved.X.row(perm[i]) = data.X.row(i);
    moved.y[perm[i]] = data.y[i];
  }
  const FitResult a = fit_admm(data, build_knn_graph(data.X, 4), config(0.4, 0.3));
  const FitResult b = fit_admm(moved, build_knn_graph(moved.X, 4), config(0.4, 0.3));
  for (int i = 0; i < 30; ++i) EXPECT_NEAR(b.theta[perm[i]], a.theta[i], 1e-3);
}

TEST(Admm, WarmStartReachesSameSolution) {
  const Dataset data = random_dataset(80, 7);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult first = fit_admm(data, g, config(0.5, 0.2));
  const FitResult warm = fit_admm(data, g, config(0.5, 0.3), &first.state);
  const FitResult cold = fit_admm(data, g, config(0.5, 0.3));
  const double scale = data.y.maxCoeff() - data.y.minCoeff();
  EXPECT_LE((warm.theta - cold.theta).cwiseAbs().maxCoeff(), 1e-2 * scale);
  EXPECT_NEAR(warm.objective_trace.back(), cold.objective_trace.back(), 1e-4 * cold.objective_trace.back());
}

TEST(Admm, IterationCapReportsNonConvergence) {
  const Dataset data = random_dataset(80, 8);
  const KnnGraph g = build_knn_graph(data.X, 5);
  FitConfig cfg = config(0.5, 0.5);
  cfg.max_iter = 3;
  const FitResult r = fit_admm(data, g, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_TRUE(r.theta.allFinite());
}

TEST(Admm, RejectsBadConfig) {
  const Dataset data = random_dataset(10, 9);
  const KnnGraph g = build_knn_graph(data.X, 3);
  EXPECT_THROW(fit_admm(data, g, config(0.0, 1.0)), ParameterError);
  EXPECT_THROW(fit_admm(data, g, config(0.5, -1.0)), ParameterError);
  FitConfig bad_step = config(0.5, 1.0);
  bad_step.step = 0.0;
  EXPECT_THROW(fit_admm(data, g, bad_step), ParameterError);
  const KnnGraph other = build_knn_graph(random_dataset(11, 9).X, 3);
  EXPECT_THROW(fit_admm(data, other, config(0.5, 1.0)), DimensionError);
}

TEST(Mm, RejectsOtherQuantiles) {
  const Dataset data = random_dataset(10, 1);
  const KnnGraph g = build_knn_graph(data.X, 3);
  EXPECT_THROW(fit_mm(data, g, config(0.3, 1.0)), UnsupportedParameterError);
}

TEST(Mm, ConstantResponse) {
  Dataset data = random_dataset(30, 2);
  data.y.setConstant(-0.4);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult r = fit_mm(data, g, config(0.5, 1.0));
  EXPECT_LE((r.theta.array() + 0.4).abs().maxCoeff(), 1e-9);
  EXPECT_TRUE(r.converged);
}

TEST(Mm, LambdaZeroApproachesData) {
  const Dataset data = random_dataset(40, 3);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult r = fit_mm(data, g, config(0.5, 0.0));
  EXPECT_LE((r.theta - data.y).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Mm, ObjectiveDescends) {
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset data = random_dataset(100, 30 + trial);
    const KnnGraph g = build_knn_graph(data.X, 5);
    const FitResult r = fit_mm(data, g, config(0.5, 0.2 + 0.3 * trial));
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
      EXPECT_LE(r.objective_trace[k], r.objective_trace[k - 1] + 1e-6) << "trial " << trial << " step " << k;
    }
  }
}

TEST(Mm, AgreesWithAdmm) {
  for (int trial = 0; trial < 4; ++trial) {
    const Dataset data = random_dataset(20, 40 + trial);
    const KnnGraph g = build_knn_graph(data.X, 5);
    const FitResult admm = fit_admm(data, g, config(0.5, 0.7));
    const FitResult mm = fit_mm(data, g, config(0.5, 0.7));
    const double a = admm.objective_trace.back();
    EXPECT_LE(mm.objective_trace.back() - a, 1e-2 * (1.0 + std::abs(a)));
    EXPECT_LE((admm.theta - mm.theta).cwiseAbs().maxCoeff(), 1e-2 * (data.y.maxCoeff() - data.y.minCoeff()));
  }
}

TEST(Mm, BackendsAgree) {
  const Dataset data = random_dataset(120, 50);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult dense = fit_mm(data, g, config(0.5, 0.4), nullptr, LaplacianBackend::kDense);
  const FitResult sparse = fit_mm(data, g, config(0.5, 0.4), nullptr, LaplacianBackend::kSparseCholesky);
  EXPECT_LE((dense.theta - sparse.theta).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(L2Baseline, TwoNodeEqualsProx) {
  Dataset data;
  data.X = (Matrix(2, 1) << 0.0, 1.0).finished();
  data.y = (Vector(2) << 0.0, 2.0).finished();
  const KnnGraph g = build_knn_graph(data.X, 1);
  const FitResult r = fit_l2_baseline(data, g, config(0.5, 0.5));
  EXPECT_NEAR(r.theta[0], 0.5, 1e-4);
  EXPECT_NEAR(r.theta[1], 1.5, 1e-4);
}

TEST(L2Baseline, MatchesProxOnKnnGraph) {
  const Dataset data = random_dataset(60, 60);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitResult r = fit_l2_baseline(data, g, config(0.5, 0.3));
  const Vector exact = fused_lasso_prox(g, data.y, 0.3).z;
  EXPECT_LE((r.theta - exact).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(L2Baseline, TrivialCases) {
  Dataset data = random_dataset(30, 61);
  const KnnGraph g = build_knn_graph(data.X, 5);
  EXPECT_LE((fit_l2_baseline(data, g, config(0.5, 0.0)).theta - data.y).cwiseAbs().maxCoeff(), 1e-6);
  data.y.setConstant(3.0);
  const Vector flat = fit_l2_baseline(data, g, config(0.5, 2.0)).theta;
  EXPECT_LE((flat.array() - 3.0).abs().maxCoeff(), 1e-9);
}

TEST(Dispatch, SelectsSolver) {
  const Dataset data = random_dataset(30, 70);
  const KnnGraph g = build_knn_graph(data.X, 5);
  const FitConfig cfg = config(0.5, 0.4);
  EXPECT_EQ(fit(SolverId::kAdmm, data, g, cfg).theta, fit_admm(data, g, cfg).theta);
  EXPECT_EQ(fit(SolverId::kMm, data, g, cfg).theta, fit_mm(data, g, cfg).theta);
  EXPECT_EQ(fit(SolverId::kL2, data, g, cfg).theta, fit_l2_baseline(data, g, cfg).theta);
}

TEST(CheckOptimality, Examples) {
  const Dataset data = random_dataset(15, 80);
  const KnnGraph g = build_knn_graph(data.X, 3);
  const OptimalityReport exact = check_optimality(data.y, g, 0.5, 0.0, data.y);
  EXPECT_TRUE(exact.is_optimal);
  EXPECT_EQ(exact.best_gap, 0.0);
  const OptimalityReport shifted = check_optimality(data.y, g, 0.5, 0.0, data.y + Vector::Ones(15));
  EXPECT_FALSE(shifted.is_optimal);
  EXPECT_GT(shifted.best_gap, 1.0);
}

TEST(CheckOptimality, TwoNodeClosedForm) {
  // y = (0, 2), tau = 0.5: for lambda < 1/2 the optimum is y, above it any
  // common value in [0, 2].
  const KnnGraph g(2, 1, {{0, 1}});
  const Vector y = (Vector(2) << 0.0, 2.0).finished();
  EXPECT_TRUE(check_optimality(y, g, 0.5, 0.3, y).is_optimal);
  EXPECT_FALSE(check_optimality(y, g, 0.5, 0.8, y).is_optimal);
  EXPECT_TRUE(check_optimality(y, g, 0.5, 0.8, Vector::Constant(2, 1.0)).is_optimal);
  EXPECT_FALSE(check_optimality(y, g, 0.5, 0.3, Vector::Constant(2, 1.0)).is_optimal);
}

TEST(CheckOptimality, DetectsFusedBlockOffset) {
  // A fused block sitting off its weighted quantile is only improvable by
  // moving the whole block.
  const KnnGraph g = oracle::complete_graph(4);
  const Vector y = (Vector(4) << 0.0, 1.0, 2.0, 3.0).finished();
  EXPECT_FALSE(check_optimality(y, g, 0.5, 10.0, Vector::Constant(4, 2.9)).is_optimal);
  EXPECT_TRUE(check_optimality(y, g, 0.5, 10.0, Vector::Constant(4, 1.5)).is_optimal);
}

}  // namespace
}  // namespace qknn
