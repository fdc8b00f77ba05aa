#include "qknn/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "qknn/error.hpp"
#include "qknn/io.hpp"
#include "qknn/objective.hpp"
#include "qknn/parallel.hpp"
#include "qknn/rng.hpp"

namespace qknn {

int dof(const KnnGraph& graph, const Vector& theta, double kappa) {
  if (!(kappa > 0.0)) throw ParameterError("dof: kappa must be > 0");
  const Vector diffs = incidence_apply(graph, theta);
  std::vector<bool> keep(static_cast<std::size_t>(diffs.size()));
  for (Index p = 0; p < diffs.size(); ++p) keep[static_cast<std::size_t>(p)] = std::abs(diffs[p]) <= kappa;
  return connected_components(graph, keep).count;
}

double bic_sigma(double tau) {
  (void)QuantileLevel{tau};
  return (1.0 - std::abs(1.0 - 2.0 * tau)) / 2.0;
}

double bic(const Vector& y, const Vector& theta, double tau, int nu) {
  if (nu < 1) throw ParameterError("bic: degrees of freedom must be >= 1");
  const double fit = pinball_sum(y, theta, QuantileLevel{tau});
  return (2.0 / bic_sigma(tau)) * fit + nu * std::log(static_cast<double>(y.size()));
}

SicValue sic(const Vector& y, const Vector& theta, double tau, int nu) {
  if (nu < 1) throw ParameterError("sic: degrees of freedom must be >= 1");
  const double n = static_cast<double>(y.size());
  const double mean_loss = pinball_sum(y, theta, QuantileLevel{tau}) / n;
  if (mean_loss <= 0.0) return {-std::numeric_limits<double>::infinity(), true};
  return {std::log(mean_loss) + nu * std::log(n) / (2.0 * n), false};
}

std::string_view criterion_name(Criterion criterion) {
  switch (criterion) {
    case Criterion::kBic:
      return "bic";
    case Criterion::kSic:
      return "sic";
    case Criterion::kCv:
      return "cv";
  }
  return "unknown";
}

std::string_view solver_name(SolverId solver) {
  switch (solver) {
    case SolverId::kAdmm:
      return "admm";
    case SolverId::kMm:
      return "mm";
    case SolverId::kL2:
      return "l2";
  }
  return "unknown";
}

std::vector<double> make_grid(double lo, double hi, int count, bool log_spaced) {
  if (count < 1) throw ParameterError("grid: count must be >= 1");
  if (!(lo <= hi) || lo < 0.0) throw ParameterError("grid: need 0 <= min <= max");
  if (log_spaced && !(lo > 0.0)) throw ParameterError("grid: log spacing needs min > 0");
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[i] = log_spaced ? lo * std::pow(hi / lo, frac) : lo + (hi - lo) * frac;
  }
  grid.back() = count == 1 ? lo : hi;
  return grid;
}

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ParameterError("select_lambda: empty lambda grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0)) throw ParameterError("select_lambda: lambda values must be >= 0");
    if (i > 0 && grid[i] < grid[i - 1]) throw ParameterError("select_lambda: lambda grid must be ascending");
  }
}

Dataset subset(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.X.resize(static_cast<Index>(rows.size()), data.X.cols());
  out.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Index>(r)) = data.X.row(rows[r]);
    out.y[static_cast<Index>(r)] = data.y[rows[r]];
  }
  return out;
}

struct FoldPath {
  std::vector<double> loss;  // mean held-out check loss per grid point
  std::vector<bool> converged;
};

FoldPath cv_fold_path(const Dataset& data, const std::vector<int>& train_rows, const std::vector<int>& test_rows,
                      int k, double tau, const std::vector<double>& grid, const SelectionOptions& opts) {
  const Dataset train = subset(data, train_rows);
  const Dataset test = subset(data, test_rows);
  const KnnGraph graph = build_knn_graph(train.X, k);
  const QuantileLevel level{tau};
  FoldPath path;
  SolverState state;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    FitConfig cfg = opts.fit;
    cfg.tau = tau;
    cfg.lambda = grid[g];
    FitResult fitted = fit(opts.solver, train, graph, cfg, g == 0 ? nullptr : &state);
    const Vector predicted = predict(train.X, fitted.theta, test.X, k);
    path.loss.push_back(pinball_sum(test.y, predicted, level) / static_cast<double>(test.y.size()));
    path.converged.push_back(fitted.converged);
    state = std::move(fitted.state);
  }
  return path;
}

}  // namespace

SelectionReport select_lambda(const Dataset& data, const KnnGraph& graph, double tau,
                              const std::vector<double>& grid, const SelectionOptions& opts) {
  check_grid(grid);
  data.validate();
  (void)QuantileLevel{tau};
  const std::size_t count = grid.size();

  SelectionReport report;
  report.grid = grid;
  report.criterion = opts.criterion;
  report.criterion_values.resize(count);
  report.dof_values.resize(count);
  report.converged.resize(count);
  report.excluded.resize(count);
  report.fits.reserve(count);

  SolverState state;
  for (std::size_t g = 0; g < count; ++g) {
    FitConfig cfg = opts.fit;
    cfg.tau = tau;
    cfg.lambda = grid[g];
    FitResult fitted = fit(opts.solver, data, graph, cfg, g == 0 ? nullptr : &state);
    state = fitted.state;
    report.dof_values[g] = dof(graph, fitted.theta, opts.kappa);
    report.converged[g] = fitted.converged;
    if (opts.criterion == Criterion::kBic) {
      report.criterion_values[g] = bic(data.y, fitted.theta, tau, report.dof_values[g]);
    } else if (opts.criterion == Criterion::kSic) {
      const SicValue value = sic(data.y, fitted.theta, tau, report.dof_values[g]);
      report.criterion_values[g] = value.value;
      report.excluded[g] = value.ill_conditioned;
    }
    report.fits.push_back(std::move(fitted));
  }

  if (opts.criterion == Criterion::kCv) {
    const int n = static_cast<int>(data.y.size());
    const int folds = std::min(opts.folds, n);
    if (folds < 2) throw ParameterError("select_lambda: cross-validation needs at least 2 folds");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(opts.seed, 0xF01D5);
    rng.shuffle(order);

    std::vector<FoldPath> paths(static_cast<std::size_t>(folds));
    parallel_for(static_cast<std::size_t>(folds), opts.threads, [&](std::size_t f) {
      std::vector<int> train_rows;
      std::vector<int> test_rows;
      for (int pos = 0; pos < n; ++pos) {
        (pos % folds == static_cast<int>(f) ? test_rows : train_rows).push_back(order[pos]);
      }
      std::sort(train_rows.begin(), train_rows.end());
      std::sort(test_rows.begin(), test_rows.end());
      paths[f] = cv_fold_path(data, train_rows, test_rows, graph.k(), tau, grid, opts);
    });
    for (std::size_t g = 0; g < count; ++g) {
      CompensatedSum acc;
      bool all_converged = report.converged[g];
      for (const FoldPath& path : paths) {
        acc.add(path.loss[g]);
        all_converged = all_converged && path.converged[g];
      }
      report.criterion_values[g] = acc.value() / folds;
      report.converged[g] = all_converged;
    }
  }

  for (std::size_t g = 0; g < count; ++g) {
    report.excluded[g] = report.excluded[g] || !report.converged[g];
  }

  auto argmin = [&](bool respect_exclusions) {
    std::size_t best = count;
    for (std::size_t g = 0; g < count; ++g) {
      if (respect_exclusions && report.excluded[g]) continue;
      if (best == count || report.criterion_values[g] < report.criterion_values[best]) best = g;
    }
    return best;
  };
  std::size_t best = argmin(true);
  if (best == count) {
    report.fallback_to_all = true;
    best = argmin(false);
  }
  report.chosen_index = best;
  report.chosen_lambda = grid[best];
  return report;
}

void write_selection_csv(std::ostream& out, const SelectionReport& report) {
  out << "lambda,criterion,dof,converged\n";
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    out << format_number(report.grid[g]) << ',' << format_number(report.criterion_values[g]) << ','
        << report.dof_values[g] << ',' << (report.converged[g] ? 1 : 0) << '\n';
  }
}

}  // namespace qknn
