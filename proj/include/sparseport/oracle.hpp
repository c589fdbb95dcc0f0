#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparseport/ipm.hpp"
#include "sparseport/market.hpp"

namespace sparseport {

/// min 1/2 x'Qx - c'x  s.t.  A_eq x = b_eq  (and x >= 0 when nonneg).
struct QpProblem {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    bool nonneg = true;
    std::optional<Eigen::VectorXd> start;  // feasible point, skips phase 1
};

/// Stationarity: Qx - c - A'y - z = 0, z >= 0, z'x = 0 (z = 0 without bounds).
struct QpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    double objective = 0.0;
    int iterations = 0;
};

/// Primal active-set method on the bound constraints with null-space
/// equality solves. Q must be PSD on the feasible directions.
QpSolution solve_convex_qp(const QpProblem& problem);

/// min ||Ax - b|| s.t. x >= 0 (Lawson-Hanson).
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

struct CcpsResult {
    std::vector<Eigen::Index> best_support;
    Eigen::VectorXd weights;  // length n
    double objective = 0.0;
    std::vector<double> per_k_frontier;  // entry k-1: best over supports of size <= k
    std::vector<std::vector<Eigen::Index>> per_k_support;
};

/// Exact cardinality-constrained no-short portfolio by support enumeration:
/// min 1/2 x'Qx - phi m'x  s.t.  e'x = 1, x >= 0, ||x||_0 <= K.
CcpsResult solve_ccps(const MarketEstimate& market, double phi, int K, int n_limit = 20);

struct ComparisonRow {
    double lambda = 0.0;
    int lp_sparsity = 0;
    double lp_mean = 0.0;
    double lp_var = 0.0;
    double lp_objective = 0.0;  // unregularized
    bool lp_certified = false;
    int ccps_sparsity = 0;
    double ccps_mean = 0.0;
    double ccps_var = 0.0;
    double ccps_objective = 0.0;
    double objective_gap = 0.0;  // (lp - ccps) / max(|ccps|, 1e-12)
    double variance_gap = 0.0;   // lp_var - ccps_var
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    std::vector<int> k_grid;
    std::vector<double> k_frontier;  // CCPS objective per entry of k_grid
};

/// Solves the no-short lp model for each lambda and pairs it with CCPS at the
/// same cardinality; K_grid adds CCPS frontier points.
ComparisonReport lp_vs_ccps_report(const MarketEstimate& market, double phi,
                                   const std::vector<double>& lambda_grid,
                                   const std::vector<int>& k_grid,
                                   const SolverConfig& config = {}, int n_limit = 20);

std::string format_comparison(const ComparisonReport& report);

}  // namespace sparseport
