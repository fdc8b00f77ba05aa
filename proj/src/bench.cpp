#include "qknn/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>
#include <ostream>

#include "qknn/error.hpp"
#include "qknn/io.hpp"
#include "qknn/objective.hpp"
#include "qknn/parallel.hpp"

namespace qknn {

namespace {

struct ReplicateOutcome {
  double mse = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  double lambda = 0.0;
  std::vector<double> path_mse;  // l2 baseline: MSE per grid point
  std::string failure;
};

struct Task {
  std::size_t row;
  int replicate;
};

std::pair<double, double> mean_and_se(const std::vector<double>& values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  const double mean = acc.value() / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  CompensatedSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  const double var = sq.value() / static_cast<double>(values.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

template <typename Fn>
double timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

BenchReport run_bench(const BenchConfig& config) {
  if (config.replicates < 1) throw ParameterError("bench: replicates must be >= 1");
  if (config.cells.empty() || config.sizes.empty() || config.solvers.empty()) {
    throw ParameterError("bench: need at least one cell, size and solver");
  }

  BenchReport report;
  for (const ScenarioCell& cell : config.cells) {
    for (int n : config.sizes) {
      for (SolverId solver : config.solvers) {
        BenchRow row;
        row.scenario = cell.scenario;
        row.n = n;
        row.error = cell.error.name();
        row.tau = cell.tau;
        row.solver = solver;
        row.replicates = config.replicates;
        row.seed = config.seed;
        report.rows.push_back(row);
      }
    }
  }

  std::vector<Task> tasks;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    for (int rep = 0; rep < config.replicates; ++rep) tasks.push_back({r, rep});
  }
  std::vector<std::vector<ReplicateOutcome>> outcomes(report.rows.size(),
                                                      std::vector<ReplicateOutcome>(config.replicates));

  auto cell_of = [&](std::size_t row) {
    const std::size_t per_cell = config.sizes.size() * config.solvers.size();
    return config.cells[row / per_cell];
  };

  parallel_for(tasks.size(), config.threads, [&](std::size_t t) {
    const Task task = tasks[t];
    const BenchRow& row = report.rows[task.row];
    const ScenarioCell cell = cell_of(task.row);
    ReplicateOutcome& outcome = outcomes[task.row][task.replicate];
    try {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(task.replicate);
      const ScenarioSample sample =
          gen_scenario(cell.scenario, row.n, cell.tau, cell.error, seed, config.scenario2_weights);
      const Dataset data = sample.dataset();
      const KnnGraph graph = build_knn_graph(data.X, config.k);
      FitConfig cfg = config.fit;
      cfg.tau = cell.tau;

      if (row.solver == SolverId::kL2) {
        // Oracle tuning needs the whole path; the timed fit happens once the
        // lambda is known.
        SolverState state;
        for (std::size_t g = 0; g < config.l2_grid.size(); ++g) {
          cfg.lambda = config.l2_grid[g];
          FitResult fitted = fit_l2_baseline(data, graph, cfg, g == 0 ? nullptr : &state);
          outcome.path_mse.push_back(mse(fitted.theta, sample.theta_star));
          state = std::move(fitted.state);
        }
        return;
      }

      SelectionOptions sel;
      sel.criterion = Criterion::kBic;
      sel.solver = row.solver;
      sel.kappa = config.kappa;
      sel.fit = cfg;
      const SelectionReport chosen = select_lambda(data, graph, cell.tau, config.grid, sel);
      cfg.lambda = chosen.chosen_lambda;
      FitResult fitted;
      outcome.seconds = timed([&] { fitted = fit(row.solver, data, graph, cfg); });
      outcome.mse = mse(fitted.theta, sample.theta_star);
      outcome.lambda = cfg.lambda;
    } catch (const std::exception& e) {
      outcome.failure = e.what();
    }
  });

  // l2 baseline: choose the lambda with the smallest mean MSE, then time a
  // cold fit at that lambda on every replicate.
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    if (report.rows[r].solver != SolverId::kL2) continue;
    auto& reps = outcomes[r];
    std::size_t best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < config.l2_grid.size(); ++g) {
      std::vector<double> values;
      for (const auto& o : reps) {
        if (o.failure.empty()) values.push_back(o.path_mse[g]);
      }
      const double mean = mean_and_se(values).first;
      if (mean < best_mean) {
        best_mean = mean;
        best = g;
      }
    }
    const ScenarioCell cell = cell_of(r);
    parallel_for(reps.size(), config.threads, [&](std::size_t rep) {
      ReplicateOutcome& outcome = reps[rep];
      if (!outcome.failure.empty()) return;
      try {
        const ScenarioSample sample = gen_scenario(cell.scenario, report.rows[r].n, cell.tau, cell.error,
                                                   config.seed + rep, config.scenario2_weights);
        const Dataset data = sample.dataset();
        const KnnGraph graph = build_knn_graph(data.X, config.k);
        FitConfig cfg = config.fit;
        cfg.lambda = config.l2_grid[best];
        FitResult fitted;
        outcome.seconds = timed([&] { fitted = fit_l2_baseline(data, graph, cfg); });
        outcome.mse = outcome.path_mse[best];
        outcome.lambda = cfg.lambda;
      } catch (const std::exception& e) {
        outcome.failure = e.what();
      }
    });
  }

  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    BenchRow& row = report.rows[r];
    std::vector<double> errors;
    std::vector<double> seconds;
    std::vector<double> lambdas;
    for (const ReplicateOutcome& o : outcomes[r]) {
      if (!o.failure.empty()) {
        ++row.failures;
        if (row.failure_message.empty()) row.failure_message = o.failure;
        continue;
      }
      errors.push_back(o.mse);
      seconds.push_back(o.seconds);
      lambdas.push_back(o.lambda);
    }
    std::tie(row.mse_mean, row.mse_se) = mean_and_se(errors);
    if (config.record_timing) std::tie(row.time_mean_s, row.time_se_s) = mean_and_se(seconds);
    row.mean_lambda = mean_and_se(lambdas).first;
  }
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "scenario,n,error,tau,solver,mse_mean,mse_se,time_mean_s,replicates,seed\n";
  for (const BenchRow& row : report.rows) {
    out << row.scenario << ',' << row.n << ',' << row.error << ',' << format_number(row.tau) << ','
        << solver_name(row.solver) << ',' << format_number(row.mse_mean) << ',' << format_number(row.mse_se) << ','
        << format_number(row.time_mean_s) << ',' << row.replicates << ',' << row.seed << '\n';
  }
}

void write_timing_csv(std::ostream& out, const BenchReport& report) {
  out << "scenario,n,error,tau,solver,time_mean_s,time_se_s,replicates\n";
  for (const BenchRow& row : report.rows) {
    out << row.scenario << ',' << row.n << ',' << row.error << ',' << format_number(row.tau) << ','
        << solver_name(row.solver) << ',' << format_number(row.time_mean_s) << ',' << format_number(row.time_se_s)
        << ',' << row.replicates << '\n';
  }
}

}  // namespace qknn
