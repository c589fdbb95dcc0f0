#pragma once

#include <string>

#include <Eigen/Dense>

#include "sparseport/market.hpp"
#include "sparseport/returns.hpp"

namespace sparseport {

struct ToyInstance {
    int id = 0;
    MarketEstimate market;
    double phi = 0.01;
};

/// The four three- and four-asset illustration instances (id 1..4).
ToyInstance toy_instance(int id);

/// A returns matrix whose sample mean and covariance reproduce the instance exactly.
ReturnsMatrix toy_returns(int id);

/// Human-readable table: x*, L, RSC, MCS, re-optimized drop cost, markers,
/// and the best CCPS support for each K.
std::string toy_report(int id);

}  // namespace sparseport
