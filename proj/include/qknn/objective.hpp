#pragma once

#include <cmath>

#include "qknn/graph.hpp"
#include "qknn/types.hpp"

namespace qknn {

// Quantile level tau, strictly inside (0, 1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double tau);
  double value() const { return tau_; }

 private:
  double tau_;
};

// Check loss rho_tau(t) = (tau - 1{t <= 0}) * t.
double pinball(double t, QuantileLevel tau);

// Sum of rho_tau(y_i - theta_i).
double pinball_sum(const Vector& y, const Vector& theta, QuantileLevel tau);

// ||grad_G theta||_1.
double total_variation(const KnnGraph& graph, const Vector& theta);

// sum_i rho_tau(y_i - theta_i) + lambda * ||grad_G theta||_1
double quantile_objective(const Vector& y, const Vector& theta, QuantileLevel tau, double lambda,
                          const KnnGraph& graph);

enum class Dn2Scale {
  kMean,  // (1/n) sum min(|d_i|, d_i^2)
  kSum,   // sum min(|d_i|, d_i^2)
};

// Huber-like discrepancy min(|d|, d^2), averaged (default) or summed.
double dn2_loss(const Vector& delta, Dn2Scale scale = Dn2Scale::kMean);

double mse(const Vector& estimate, const Vector& truth);

// Neumaier-compensated accumulator used by every reduction in the library.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace qknn
