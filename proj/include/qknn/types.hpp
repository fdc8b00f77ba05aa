#pragma once

#include <Eigen/Core>

namespace qknn {

using Vector = Eigen::VectorXd;
// Covariates are stored one observation per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

}  // namespace qknn
