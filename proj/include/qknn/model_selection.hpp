#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "qknn/graph.hpp"
#include "qknn/solvers.hpp"
#include "qknn/types.hpp"

namespace qknn {

// Degrees of freedom: components of the graph left after dropping every edge
// whose fitted difference exceeds kappa in absolute value.
int dof(const KnnGraph& graph, const Vector& theta, double kappa = 1e-2);

// sigma = (1 - |1 - 2 tau|) / 2, the scale used by the quantile BIC.
double bic_sigma(double tau);

// (2 / sigma) * sum rho_tau(y - theta) + nu * log(n)
double bic(const Vector& y, const Vector& theta, double tau, int nu);

struct SicValue {
  double value = 0.0;
  // Mean check loss was zero, so the log term diverged and value is -inf.
  bool ill_conditioned = false;
};

// log((1/n) sum rho_tau(y - theta)) + nu * log(n) / (2n)
SicValue sic(const Vector& y, const Vector& theta, double tau, int nu);

enum class Criterion { kBic, kSic, kCv };

std::string_view criterion_name(Criterion criterion);
std::string_view solver_name(SolverId solver);

struct SelectionOptions {
  Criterion criterion = Criterion::kBic;
  SolverId solver = SolverId::kAdmm;
  double kappa = 1e-2;
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  // Template for every fit; its lambda is overwritten per grid point.
  FitConfig fit;
};

struct SelectionReport {
  std::vector<double> grid;
  std::vector<double> criterion_values;
  std::vector<int> dof_values;
  std::vector<bool> converged;
  // Entries left out of the argmin (non-converged fits, ill-conditioned SIC).
  std::vector<bool> excluded;
  Criterion criterion = Criterion::kBic;
  double chosen_lambda = 0.0;
  std::size_t chosen_index = 0;
  // Set when every grid point was excluded and the argmin ran over all of them.
  bool fallback_to_all = false;
  // Full-data fits, one per grid point.
  std::vector<FitResult> fits;
};

// Fits the grid (ascending, nonnegative) in order, warm-starting each fit from
// the previous one, and returns the criterion minimiser (ties to smaller
// lambda). CV scores mean held-out check loss with K-NN prediction using the
// graph's K; folds come from a seeded shuffle.
SelectionReport select_lambda(const Dataset& data, const KnnGraph& graph, double tau,
                              const std::vector<double>& grid, const SelectionOptions& opts = {});

// CSV with columns lambda,criterion,dof,converged.
void write_selection_csv(std::ostream& out, const SelectionReport& report);

// count values from lo to hi, log-spaced when `log_spaced` (requires lo > 0).
std::vector<double> make_grid(double lo, double hi, int count, bool log_spaced);

}  // namespace qknn
