#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qknn/model_selection.hpp"
#include "qknn/simulate.hpp"
#include "qknn/solvers.hpp"

namespace qknn {

struct BenchConfig {
  std::vector<ScenarioCell> cells = benchmark_cells();
  std::vector<int> sizes = {1000};
  std::vector<SolverId> solvers = {SolverId::kAdmm};
  int replicates = 10;
  std::uint64_t seed = 1;
  int k = 5;
  int threads = 1;
  double kappa = 1e-2;
  // Quantile solvers pick lambda per replicate by BIC over this grid.
  std::vector<double> grid = make_grid(0.05, 5.0, 12, true);
  // The l2 baseline picks the single lambda minimising mean MSE across
  // replicates (oracle tuning) over this grid.
  std::vector<double> l2_grid = make_grid(0.01, 1000.0, 16, true);
  FitConfig fit;
  // When false, time columns are written as 0 so output is byte-reproducible.
  bool record_timing = true;
  Scenario2Weights scenario2_weights = Scenario2Weights::kRegionMass;
};

struct BenchRow {
  int scenario = 0;
  int n = 0;
  std::string error;
  double tau = 0.5;
  SolverId solver = SolverId::kAdmm;
  double mse_mean = 0.0;
  double mse_se = 0.0;
  double time_mean_s = 0.0;
  double time_se_s = 0.0;
  double mean_lambda = 0.0;
  int replicates = 0;
  std::uint64_t seed = 0;
  int failures = 0;
  std::string failure_message;
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

// Monte Carlo harness: every (cell, n, solver) combination is run over
// `replicates` samples with seeds seed, seed + 1, ... Rows come out in cell
// order regardless of thread scheduling; failures are recorded per row.
BenchReport run_bench(const BenchConfig& config);

// scenario,n,error,tau,solver,mse_mean,mse_se,time_mean_s,replicates,seed
void write_bench_csv(std::ostream& out, const BenchReport& report);
// scenario,n,error,tau,solver,time_mean_s,time_se_s,replicates
void write_timing_csv(std::ostream& out, const BenchReport& report);

}  // namespace qknn
