#include "qknn/simulate.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "qknn/error.hpp"
#include "qknn/rng.hpp"

namespace qknn {

namespace {

// Independent streams so covariates and errors drawn from one seed are not
// correlated.
constexpr std::uint64_t kCovariateStream = 1;
constexpr std::uint64_t kErrorStream = 2;

constexpr double kTQuantileTol = 1e-10;

void check_scenario(int scenario) {
  if (scenario < 1 || scenario > 4) {
    throw ParameterError("unknown scenario id " + std::to_string(scenario) + " (expected 1-4)");
  }
}

bool inside_box(double x1, double x2, double lo, double hi) { return x1 >= lo && x1 <= hi && x2 >= lo && x2 <= hi; }

}  // namespace

std::string ErrorDistribution::name() const {
  switch (kind) {
    case ErrorKind::kGaussian:
      return "gaussian";
    case ErrorKind::kCauchy:
      return "cauchy";
    case ErrorKind::kStudentT:
      return "t" + std::to_string(df);
  }
  return "unknown";
}

ErrorDistribution ErrorDistribution::parse(const std::string& text) {
  if (text == "gaussian" || text == "normal") return gaussian();
  if (text == "cauchy") return cauchy();
  if (text.size() > 1 && text[0] == 't') {
    std::size_t used = 0;
    int df = 0;
    try {
      df = std::stoi(text.substr(1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == text.size() - 1) {
      ErrorDistribution out = student_t(df);
      out.validate();
      return out;
    }
  }
  throw ParameterError("unknown error distribution '" + text + "' (expected gaussian, cauchy or t<df>)");
}

void ErrorDistribution::validate() const {
  if (kind == ErrorKind::kStudentT && df < 1) {
    throw ParameterError("t distribution needs df >= 1, got " + std::to_string(df));
  }
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double ErrorDistribution::cdf(double x) const {
  validate();
  switch (kind) {
    case ErrorKind::kGaussian:
      return 0.5 * std::erfc(-x / std::numbers::sqrt2);
    case ErrorKind::kCauchy:
      return 0.5 + std::atan(x) / std::numbers::pi;
    case ErrorKind::kStudentT:
      return boost::math::cdf(boost::math::students_t_distribution<double>(df), x);
  }
  throw ParameterError("unknown error distribution");
}

double ErrorDistribution::quantile(double p) const {
  validate();
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("error quantile: p must lie in (0, 1)");
  switch (kind) {
    case ErrorKind::kGaussian:
      return normal_quantile(p);
    case ErrorKind::kCauchy:
      return std::tan(std::numbers::pi * (p - 0.5));
    case ErrorKind::kStudentT: {
      if (p == 0.5) return 0.0;
      double lo = -1.0;
      double hi = 1.0;
      while (cdf(lo) > p) lo *= 2.0;
      while (cdf(hi) < p) hi *= 2.0;
      while (hi - lo > kTQuantileTol * std::max(1.0, std::abs(lo))) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  throw ParameterError("unknown error distribution");
}

double scenario2_normalization(Scenario2Weights weights) {
  if (weights == Scenario2Weights::kRegionMass) return 1.0 / 5.0 + 4.0 / 25.0 + 16.0 / 25.0;
  // area * height: outer 0.96 * 1/5, ring 0.03 * 4/25, core 0.01 * 16/25
  return 0.96 / 5.0 + 0.03 * 4.0 / 25.0 + 0.01 * 16.0 / 25.0;
}

int scenario_dimension(int scenario) {
  check_scenario(scenario);
  return scenario == 4 ? 5 : 2;
}

double f0_eval(int scenario, std::span<const double> x) {
  check_scenario(scenario);
  if (static_cast<int>(x.size()) != scenario_dimension(scenario)) {
    throw DimensionError("f0_eval: scenario " + std::to_string(scenario) + " expects dimension " +
                         std::to_string(scenario_dimension(scenario)));
  }
  switch (scenario) {
    case 1:
      return 1.25 * x[0] + 0.75 * x[1] > 1.0 ? 1.0 : 0.0;
    case 2: {
      const double d1 = x[0] - 0.5;
      const double d2 = x[1] - 0.5;
      return d1 * d1 + d2 * d2 <= 2.0 / 1000.0 ? 1.0 : 0.0;
    }
    case 3:
      return 0.4 * x[0] * x[0] + 0.6 * x[1] * x[1];
    default: {
      double near = 0.0;
      double far = 0.0;
      for (double xi : x) {
        near += (xi - 0.25) * (xi - 0.25);
        far += (xi - 0.75) * (xi - 0.75);
      }
      // Equidistant points fall in the "otherwise" branch.
      return near < far ? 1.0 : -1.0;
    }
  }
}

double noise_scale(int scenario, std::span<const double> x) {
  check_scenario(scenario);
  if (scenario != 4) return 1.0;
  double acc = 0.0;
  for (double xi : x) acc += xi;
  return acc / static_cast<double>(x.size());
}

Matrix sample_covariates(int scenario, int n, std::uint64_t seed, Scenario2Weights weights) {
  check_scenario(scenario);
  if (n < 1) throw ParameterError("sample_covariates: n must be >= 1");
  const int d = scenario_dimension(scenario);
  CounterRng rng(seed, kCovariateStream);
  Matrix X(n, d);
  if (scenario != 2) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c) X(i, c) = rng.uniform();
    }
    return X;
  }

  double outer = 1.0 / 5.0;
  double ring = 4.0 / 25.0;
  if (weights == Scenario2Weights::kRenormalizedDensity) {
    const double total = scenario2_normalization(weights);
    outer = 0.96 / 5.0 / total;
    ring = 0.03 * 4.0 / 25.0 / total;
  }
  for (int i = 0; i < n; ++i) {
    const double pick = rng.uniform();
    double x1;
    double x2;
    if (pick < outer) {
      do {
        x1 = rng.uniform();
        x2 = rng.uniform();
      } while (inside_box(x1, x2, 0.4, 0.6));
    } else if (pick < outer + ring) {
      do {
        x1 = 0.4 + 0.2 * rng.uniform();
        x2 = 0.4 + 0.2 * rng.uniform();
      } while (inside_box(x1, x2, 0.45, 0.55));
    } else {
      x1 = 0.45 + 0.1 * rng.uniform();
      x2 = 0.45 + 0.1 * rng.uniform();
    }
    X(i, 0) = x1;
    X(i, 1) = x2;
  }
  return X;
}

Vector sample_errors(const ErrorDistribution& error, int n, std::uint64_t seed) {
  error.validate();
  if (n < 1) throw ParameterError("sample_errors: n must be >= 1");
  CounterRng rng(seed, kErrorStream);
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    switch (error.kind) {
      case ErrorKind::kGaussian:
        out[i] = rng.normal();
        break;
      case ErrorKind::kCauchy:
        out[i] = std::tan(std::numbers::pi * (rng.uniform_open() - 0.5));
        break;
      case ErrorKind::kStudentT: {
        const double numerator = rng.normal();
        double chi2 = 0.0;
        for (int k = 0; k < error.df; ++k) {
          const double g = rng.normal();
          chi2 += g * g;
        }
        out[i] = numerator / std::sqrt(chi2 / error.df);
        break;
      }
    }
  }
  return out;
}

ScenarioSample gen_scenario(int scenario, int n, double tau, const ErrorDistribution& error, std::uint64_t seed,
                            Scenario2Weights weights) {
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("gen_scenario: tau must lie in (0, 1)");
  ScenarioSample sample;
  sample.scenario = scenario;
  sample.error = error;
  sample.tau = tau;
  sample.seed = seed;
  sample.normalization = scenario == 2 ? scenario2_normalization(weights) : 1.0;
  sample.X = sample_covariates(scenario, n, seed, weights);
  const Vector eps = sample_errors(error, n, seed);
  const double q = error.quantile(tau);
  sample.y.resize(n);
  sample.theta_star.resize(n);
  const auto d = static_cast<std::size_t>(sample.X.cols());
  for (int i = 0; i < n; ++i) {
    const std::span<const double> x(sample.X.row(i).data(), d);
    const double f = f0_eval(scenario, x);
    const double scale = noise_scale(scenario, x);
    sample.y[i] = f + scale * eps[i];
    sample.theta_star[i] = f + scale * q;
  }
  return sample;
}

std::vector<ScenarioCell> benchmark_cells() {
  return {
      {1, ErrorDistribution::gaussian(), 0.5},  {1, ErrorDistribution::cauchy(), 0.5},
      {2, ErrorDistribution::student_t(3), 0.5}, {3, ErrorDistribution::student_t(2), 0.5},
      {4, ErrorDistribution::student_t(3), 0.9}, {4, ErrorDistribution::student_t(3), 0.1},
  };
}

}  // namespace qknn
