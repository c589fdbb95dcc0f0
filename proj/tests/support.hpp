#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparseport/market.hpp"

namespace testsupport {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                     double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = nd(rng);
    }
    return M;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    return random_matrix(rng, n, 1, scale);
}

// Covariance of `rank` random factors plus a small ridge; exactly symmetric.
inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank,
                                  double ridge = 0.0) {
    const Eigen::MatrixXd F = random_matrix(rng, n, rank);
    Eigen::MatrixXd Q = F * F.transpose() / static_cast<double>(rank);
    Q.diagonal().array() += ridge;
    return 0.5 * (Q + Q.transpose());
}

inline sparseport::MarketEstimate random_market(std::mt19937_64& rng, Eigen::Index n,
                                                double mean_scale = 0.1) {
    return sparseport::make_market(random_vector(rng, n, mean_scale), random_psd(rng, n, n, 0.05));
}

// Brute-force minimum of 1/2 v'Hv + g'v over ||v|| <= r for dim <= 3 by a
// polar grid over the ball followed by local refinement.
double polar_brute_force(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double r);

}  // namespace testsupport
