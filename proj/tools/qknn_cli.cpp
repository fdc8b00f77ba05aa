#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qknn/bench.hpp"
#include "qknn/error.hpp"
#include "qknn/graph.hpp"
#include "qknn/io.hpp"
#include "qknn/model_selection.hpp"
#include "qknn/objective.hpp"
#include "qknn/simulate.hpp"
#include "qknn/solvers.hpp"

namespace {

using namespace qknn;

struct GridSpec {
  double lo = 0.05;
  double hi = 5.0;
  int count = 12;
  bool log_spaced = true;
};

struct Options {
  double tau = 0.5;
  double lambda = 0.0;
  int k = 5;
  std::string solver = "admm";
  std::string criterion = "bic";
  double kappa = 1e-2;
  double tol = 1e-4;
  std::optional<int> max_iter;
  std::uint64_t seed = 1;
  int replicates = 10;
  int threads = 1;
  int folds = 5;
  std::string grid = "0.05:5:12:log";
  std::string l2_grid = "0.01:1000:16:log";
  std::string scenario2_weights = "mass";

  // simulate / bench
  std::vector<int> scenarios;
  int n = 1000;
  std::vector<int> sizes;
  std::string error = "gaussian";
  std::vector<std::string> solvers;
  bool no_timing = false;

  std::string data;
  std::string train;
  std::string theta;
  std::string query;
  std::string out;
  std::string timing_out;
  std::string dump_graph;
  std::string metrics;
};

SolverId parse_solver(const std::string& text) {
  if (text == "admm") return SolverId::kAdmm;
  if (text == "mm") return SolverId::kMm;
  if (text == "l2") return SolverId::kL2;
  throw ParameterError("unknown solver '" + text + "' (expected admm, mm or l2)");
}

Criterion parse_criterion(const std::string& text) {
  if (text == "bic") return Criterion::kBic;
  if (text == "sic") return Criterion::kSic;
  if (text == "cv") return Criterion::kCv;
  throw ParameterError("unknown criterion '" + text + "' (expected bic, sic or cv)");
}

Scenario2Weights parse_weights(const std::string& text) {
  if (text == "mass") return Scenario2Weights::kRegionMass;
  if (text == "density") return Scenario2Weights::kRenormalizedDensity;
  throw ParameterError("unknown scenario2 weights '" + text + "' (expected mass or density)");
}

GridSpec parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 3 && parts.size() != 4) {
    throw ParameterError("grid '" + text + "' must be min:max:count[:log|lin]");
  }
  GridSpec spec;
  const auto lo = parse_number(parts[0]);
  const auto hi = parse_number(parts[1]);
  const auto count = parse_number(parts[2]);
  if (!lo || !hi || !count || *count != static_cast<int>(*count)) {
    throw ParameterError("grid '" + text + "' has a non-numeric field");
  }
  spec.lo = *lo;
  spec.hi = *hi;
  spec.count = static_cast<int>(*count);
  if (parts.size() == 4) {
    if (parts[3] == "log") {
      spec.log_spaced = true;
    } else if (parts[3] == "lin") {
      spec.log_spaced = false;
    } else {
      throw ParameterError("grid spacing must be log or lin, got '" + parts[3] + "'");
    }
  }
  if (spec.lo > spec.hi) throw ParameterError("grid minimum exceeds maximum");
  return spec;
}

std::vector<double> grid_values(const std::string& text) {
  const GridSpec spec = parse_grid(text);
  return make_grid(spec.lo, spec.hi, spec.count, spec.log_spaced);
}

FitConfig fit_config(const Options& o) {
  FitConfig cfg;
  cfg.tau = o.tau;
  cfg.lambda = o.lambda;
  cfg.tol = o.tol;
  cfg.max_iter = o.max_iter;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

// Writes to `path`, or stdout when the path is empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  fn(out);
  if (!out) throw InputError(path + ": write failed");
}

void run_simulate(const Options& o) {
  if (o.scenarios.size() != 1) throw ParameterError("simulate needs exactly one --scenario");
  const ScenarioSample sample = gen_scenario(o.scenarios.front(), o.n, o.tau, ErrorDistribution::parse(o.error),
                                             o.seed, parse_weights(o.scenario2_weights));
  with_output(o.out, [&](std::ostream& out) { write_scenario_csv(out, sample); });
}

void run_fit(const Options& o) {
  const LoadedData loaded = load_csv(o.data);
  loaded.data.validate();
  const KnnGraph graph = build_knn_graph(loaded.data.X, o.k);
  const SolverId solver = parse_solver(o.solver);
  const FitConfig cfg = fit_config(o);
  const FitResult result = fit(solver, loaded.data, graph, cfg);
  if (!result.converged) {
    std::cerr << "warning: " << solver_name(solver) << " stopped at the iteration cap (" << result.iterations
              << ") before meeting tol\n";
  }
  with_output(o.out, [&](std::ostream& out) { write_vector_csv(out, "theta", result.theta); });
  if (!o.dump_graph.empty()) {
    with_output(o.dump_graph, [&](std::ostream& out) { write_edge_list(out, graph); });
  }
  if (!o.metrics.empty()) {
    with_output(o.metrics, [&](std::ostream& out) {
      out << "solver,tau,lambda,k,n,edges,iterations,converged,objective,dof";
      if (loaded.theta_star) out << ",mse";
      out << '\n';
      const double objective = solver == SolverId::kL2
                                   ? 0.5 * (loaded.data.y - result.theta).squaredNorm() +
                                         cfg.lambda * total_variation(graph, result.theta)
                                   : quantile_objective(loaded.data.y, result.theta, QuantileLevel(cfg.tau),
                                                        cfg.lambda, graph);
      out << solver_name(solver) << ',' << format_number(cfg.tau) << ',' << format_number(cfg.lambda) << ',' << o.k
          << ',' << graph.num_vertices() << ',' << graph.num_edges() << ',' << result.iterations << ','
          << (result.converged ? 1 : 0) << ',' << format_number(objective) << ','
          << dof(graph, result.theta, o.kappa);
      if (loaded.theta_star) out << ',' << format_number(mse(result.theta, *loaded.theta_star));
      out << '\n';
    });
  }
}

void run_predict(const Options& o) {
  const LoadedData train = load_csv(o.train);
  std::vector<std::string> theta_columns;
  const Matrix theta = load_matrix_csv(o.theta, &theta_columns);
  if (theta.cols() != 1) throw InputError(o.theta + ": expected a single theta column");
  if (theta.rows() != train.data.X.rows()) {
    throw DimensionError(o.theta + ": " + std::to_string(theta.rows()) + " values for " +
                         std::to_string(train.data.X.rows()) + " training rows");
  }
  const Vector fitted = theta.col(0);
  std::vector<std::string> query_columns;
  Matrix query = load_matrix_csv(o.query, &query_columns);
  const Index d = train.data.X.cols();
  // A query file in training layout carries y (and possibly theta_star); keep
  // only its covariate columns.
  if (query.cols() > d && query_columns == train.columns) query = Matrix(query.leftCols(d));
  if (query.cols() != d) {
    throw DimensionError(o.query + ": expected " + std::to_string(d) + " covariate columns, found " +
                         std::to_string(query.cols()));
  }
  const Vector predicted = predict(train.data.X, fitted, query, o.k);
  with_output(o.out, [&](std::ostream& out) { write_vector_csv(out, "prediction", predicted); });
}

void run_select(const Options& o) {
  const LoadedData loaded = load_csv(o.data);
  loaded.data.validate();
  const KnnGraph graph = build_knn_graph(loaded.data.X, o.k);
  SelectionOptions sel;
  sel.criterion = parse_criterion(o.criterion);
  sel.solver = parse_solver(o.solver);
  sel.kappa = o.kappa;
  sel.folds = o.folds;
  sel.seed = o.seed;
  sel.threads = o.threads;
  sel.fit = fit_config(o);
  const SelectionReport report = select_lambda(loaded.data, graph, o.tau, grid_values(o.grid), sel);
  with_output(o.out, [&](std::ostream& out) { write_selection_csv(out, report); });
  std::cerr << "chosen lambda " << format_number(report.chosen_lambda) << " (" << criterion_name(report.criterion)
            << ")\n";
}

void run_bench_command(const Options& o) {
  BenchConfig config;
  if (!o.scenarios.empty()) {
    config.cells.clear();
    for (int s : o.scenarios) config.cells.push_back({s, ErrorDistribution::parse(o.error), o.tau});
  }
  config.sizes = o.sizes.empty() ? std::vector<int>{o.n} : o.sizes;
  if (!o.solvers.empty()) {
    config.solvers.clear();
    for (const std::string& s : o.solvers) config.solvers.push_back(parse_solver(s));
  }
  config.replicates = o.replicates;
  config.seed = o.seed;
  config.k = o.k;
  config.threads = o.threads;
  config.kappa = o.kappa;
  config.grid = grid_values(o.grid);
  config.l2_grid = grid_values(o.l2_grid);
  config.fit = fit_config(o);
  config.record_timing = !o.no_timing;
  config.scenario2_weights = parse_weights(o.scenario2_weights);

  const BenchReport report = run_bench(config);
  with_output(o.out, [&](std::ostream& out) { write_bench_csv(out, report); });
  if (!o.timing_out.empty()) {
    with_output(o.timing_out, [&](std::ostream& out) { write_timing_csv(out, report); });
  }
  for (const BenchRow& row : report.rows) {
    if (row.failures > 0) {
      std::cerr << "warning: scenario " << row.scenario << " n=" << row.n << ' ' << row.error << ' '
                << solver_name(row.solver) << ": " << row.failures << " failed replicates: " << row.failure_message
                << '\n';
    }
  }
}

int report_error(const char* kind, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error: " << kind << ": " << line << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile regression with a K-NN graph fused lasso penalty"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key = value file; command-line flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.option_defaults()->always_capture_default();

  Options o;
  app.add_option("--tau", o.tau, "Quantile level in (0, 1)");
  app.add_option("--lambda", o.lambda, "Penalty weight")->check(CLI::NonNegativeNumber);
  app.add_option("--k", o.k, "Neighbours per point")->check(CLI::PositiveNumber);
  app.add_option("--solver", o.solver, "admm, mm or l2");
  app.add_option("--criterion", o.criterion, "bic, sic or cv");
  app.add_option("--kappa", o.kappa, "Fusion threshold for degrees of freedom")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", o.tol, "Outer solver tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", o.max_iter, "Outer iteration cap (solver default when unset)");
  app.add_option("--seed", o.seed, "Base random seed");
  app.add_option("--replicates", o.replicates, "Monte Carlo replicates per cell")->check(CLI::PositiveNumber);
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
  app.add_option("--grid", o.grid, "Lambda grid min:max:count[:log|lin]");
  app.add_option("--l2-grid", o.l2_grid, "Lambda grid for the l2 baseline in bench");
  app.add_option("--scenario2-weights", o.scenario2_weights, "Scenario 2 covariate weights: mass or density");

  auto* simulate = app.add_subcommand("simulate", "Draw a scenario sample as CSV");
  simulate->add_option("--scenario", o.scenarios, "Scenario 1-4")->required()->expected(1);
  simulate->add_option("--n", o.n, "Sample size")->check(CLI::PositiveNumber);
  simulate->add_option("--error", o.error, "gaussian, cauchy or t<df>");
  simulate->add_option("--out,-o", o.out, "Output CSV (stdout when omitted)");

  auto* fit_cmd = app.add_subcommand("fit", "Fit the quantile fused lasso at one lambda");
  fit_cmd->add_option("--data", o.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out,-o", o.out, "Fitted values CSV (stdout when omitted)");
  fit_cmd->add_option("--dump-graph", o.dump_graph, "Write the K-NN edge list here");
  fit_cmd->add_option("--metrics", o.metrics, "Write a one-row fit summary CSV here");

  auto* predict_cmd = app.add_subcommand("predict", "Predict at new points from a fitted vector");
  predict_cmd->add_option("--train", o.train, "Training CSV used for the fit")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--theta", o.theta, "Fitted values CSV from fit")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--query", o.query, "Query covariates CSV")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out,-o", o.out, "Predictions CSV (stdout when omitted)");

  auto* select = app.add_subcommand("select", "Choose lambda over a grid");
  select->add_option("--data", o.data, "Training CSV")->required()->check(CLI::ExistingFile);
  select->add_option("--out,-o", o.out, "Selection report CSV (stdout when omitted)");

  auto* bench = app.add_subcommand("bench", "Monte Carlo MSE and timing table");
  bench->add_option("--scenario", o.scenarios, "Scenarios to run with --error and --tau (default: the six standard cells)");
  bench->add_option("--error", o.error, "Error law for --scenario cells");
  bench->add_option("--n", o.sizes, "Sample sizes")->check(CLI::PositiveNumber);
  bench->add_option("--solvers", o.solvers, "Solvers to compare");
  bench->add_flag("--no-timing", o.no_timing, "Write zero times so output is byte-reproducible");
  bench->add_option("--out,-o", o.out, "MSE table CSV (stdout when omitted)");
  bench->add_option("--timing-out", o.timing_out, "Timing table CSV");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what()) + 1;
  }

  try {
    if (*simulate) run_simulate(o);
    if (*fit_cmd) run_fit(o);
    if (*predict_cmd) run_predict(o);
    if (*select) run_select(o);
    if (*bench) run_bench_command(o);
  } catch (const qknn::Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
