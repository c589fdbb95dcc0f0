#pragma once

#include <Eigen/Dense>

#include "sparseport/returns.hpp"

namespace sparseport {

/// Sample mean vector and covariance matrix of a set of assets.
struct MarketEstimate {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Eigen::Index size() const { return mean.size(); }
};

/// Builds an estimate from given moments after checking symmetry and
/// positive semidefiniteness. Throws Data on violation.
MarketEstimate make_market(Eigen::VectorXd mean, Eigen::MatrixXd cov);

/// Column means and the unbiased (T-1) sample covariance, symmetrized.
MarketEstimate estimate_market(const ReturnsMatrix& returns);

}  // namespace sparseport
