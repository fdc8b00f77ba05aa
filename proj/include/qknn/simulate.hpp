#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qknn/graph.hpp"
#include "qknn/types.hpp"

namespace qknn {

enum class ErrorKind { kGaussian, kCauchy, kStudentT };

struct ErrorDistribution {
  ErrorKind kind = ErrorKind::kGaussian;
  int df = 0;  // degrees of freedom, Student t only

  static ErrorDistribution gaussian() { return {ErrorKind::kGaussian, 0}; }
  static ErrorDistribution cauchy() { return {ErrorKind::kCauchy, 0}; }
  static ErrorDistribution student_t(int df) { return {ErrorKind::kStudentT, df}; }

  // "gaussian", "cauchy", "t3", ...
  std::string name() const;
  static ErrorDistribution parse(const std::string& text);

  void validate() const;
  double cdf(double x) const;
  double quantile(double p) const;

  friend bool operator==(const ErrorDistribution&, const ErrorDistribution&) = default;
};

// Standard normal quantile: rational approximation plus one Halley step.
double normal_quantile(double p);

// How the Scenario 2 covariate density coefficients are read.
enum class Scenario2Weights {
  // 1/5, 4/25, 16/25 are the probability masses of the outer region, the
  // ring and the core; they sum to one.
  kRegionMass,
  // The coefficients are densities; region masses are area * height,
  // rescaled by their total (0.2032).
  kRenormalizedDensity,
};

// Sum of the raw region weights before any rescaling.
double scenario2_normalization(Scenario2Weights weights);

int scenario_dimension(int scenario);
double f0_eval(int scenario, std::span<const double> x);
// Noise scale at x: 1 for Scenarios 1-3, mean(x) (= x^T beta) for Scenario 4.
double noise_scale(int scenario, std::span<const double> x);

Matrix sample_covariates(int scenario, int n, std::uint64_t seed,
                         Scenario2Weights weights = Scenario2Weights::kRegionMass);
Vector sample_errors(const ErrorDistribution& error, int n, std::uint64_t seed);

struct ScenarioSample {
  Matrix X;
  Vector y;
  Vector theta_star;  // true conditional tau-quantiles
  int scenario = 1;
  ErrorDistribution error;
  double tau = 0.5;
  std::uint64_t seed = 0;
  double normalization = 1.0;

  Dataset dataset() const { return Dataset{X, y}; }
};

ScenarioSample gen_scenario(int scenario, int n, double tau, const ErrorDistribution& error, std::uint64_t seed,
                            Scenario2Weights weights = Scenario2Weights::kRegionMass);

struct ScenarioCell {
  int scenario;
  ErrorDistribution error;
  double tau;
};

// Scenario / error / quantile combinations run by default in the benchmark.
std::vector<ScenarioCell> benchmark_cells();

}  // namespace qknn
