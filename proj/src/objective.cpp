#include "qknn/objective.hpp"

#include <cmath>
#include <string>

#include "qknn/error.hpp"

namespace qknn {

QuantileLevel::QuantileLevel(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("quantile level tau=" + std::to_string(tau) + " must lie in (0, 1)");
  }
}

double pinball(double t, QuantileLevel tau) {
  const double indicator = t <= 0.0 ? 1.0 : 0.0;
  return (tau.value() - indicator) * t;
}

double pinball_sum(const Vector& y, const Vector& theta, QuantileLevel tau) {
  if (y.size() != theta.size()) throw DimensionError("pinball_sum: length mismatch");
  CompensatedSum acc;
  for (Index i = 0; i < y.size(); ++i) acc.add(pinball(y[i] - theta[i], tau));
  return acc.value();
}

double total_variation(const KnnGraph& graph, const Vector& theta) {
  if (theta.size() != graph.num_vertices()) throw DimensionError("total_variation: length mismatch");
  CompensatedSum acc;
  for (const Edge& e : graph.edges()) acc.add(std::abs(theta[e.tail] - theta[e.head]));
  return acc.value();
}

double quantile_objective(const Vector& y, const Vector& theta, QuantileLevel tau, double lambda,
                          const KnnGraph& graph) {
  if (lambda < 0.0) throw ParameterError("quantile_objective: lambda must be >= 0");
  if (y.size() != theta.size() || y.size() != graph.num_vertices()) {
    throw DimensionError("quantile_objective: y, theta and graph sizes disagree");
  }
  const double fit = pinball_sum(y, theta, tau);
  return lambda == 0.0 ? fit : fit + lambda * total_variation(graph, theta);
}

double dn2_loss(const Vector& delta, Dn2Scale scale) {
  if (delta.size() == 0) return 0.0;
  CompensatedSum acc;
  for (Index i = 0; i < delta.size(); ++i) {
    const double a = std::abs(delta[i]);
    acc.add(std::min(a, a * a));
  }
  return scale == Dn2Scale::kMean ? acc.value() / static_cast<double>(delta.size()) : acc.value();
}

double mse(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw DimensionError("mse: length mismatch");
  if (estimate.size() == 0) return 0.0;
  CompensatedSum acc;
  for (Index i = 0; i < estimate.size(); ++i) {
    const double diff = estimate[i] - truth[i];
    acc.add(diff * diff);
  }
  return acc.value() / static_cast<double>(estimate.size());
}

}  // namespace qknn
