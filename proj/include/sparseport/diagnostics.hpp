#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparseport/market.hpp"
#include "sparseport/model.hpp"

namespace sparseport {

/// diag((I - ee'/K) Qbar (I - ee'/K)), the variance of each cost-neutral action.
Eigen::VectorXd projected_variances(const Eigen::MatrixXd& Qbar);

/// Per-asset quantities over the support of a long-only weight vector. All
/// vectors are indexed like `support`.
struct SparsityCosts {
    std::vector<Eigen::Index> support;
    Eigen::Index K = 0;
    Eigen::VectorXd weight;
    Eigen::VectorXd L;
    Eigen::VectorXd RSC;
    Eigen::VectorXd MCS;         // NaN when K = 1
    Eigen::VectorXd dir_deriv;   // f'(x; e^i - e^0)
    Eigen::VectorXd eps_star;    // NaN when K = 1
    Eigen::VectorXd rho_bar;     // NaN when a standard deviation is below 1e-12
    Eigen::VectorXd sharpe_bar;  // NaN when sqrt(L_i) is below 1e-12
    Eigen::VectorXd measured_delta_f;  // f(drop_and_rebalance(x, i)) - f(x); NaN when K = 1
    double portfolio_std = 0.0;
};

/// Costs of dropping each held asset from x (entries with |x_i| > threshold)
/// under f(x) = 1/2 x'Qx - phi m'x.
SparsityCosts sparsity_costs(const Eigen::VectorXd& x, const MarketEstimate& market, double phi,
                             double threshold = 1e-6);

struct DropResult {
    Eigen::VectorXd x;
    bool left_simplex = false;  // some rebalanced weight became negative
};

/// x' = x - K x_i/(K-1) (e^i - e^0) over the support of x.
DropResult drop_and_rebalance(const Eigen::VectorXd& x, Eigen::Index i, double threshold = 0.0);

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

struct BoundReport {
    bool applicable = false;
    std::string reason;  // set when not applicable
    std::vector<BoundCheck> checks;

    bool all_pass() const;
};

/// Support-size and entry bounds satisfied by second-order KKT points of the
/// p = 1/2 models, checked with multiplicative slack (1 + 10 eps).
BoundReport theorem_bounds(const GeneralForm& form, const Eigen::VectorXd& x,
                           const ModelSpec& spec, const MarketEstimate& market, double eps,
                           double zero_threshold = 1e-6);

std::string format_costs(const SparsityCosts& costs, const std::vector<std::string>& assets);

}  // namespace sparseport
