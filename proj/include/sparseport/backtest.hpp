#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparseport/ipm.hpp"
#include "sparseport/model.hpp"
#include "sparseport/returns.hpp"

namespace sparseport {

enum class PhiPolicy { Fixed, Calibrate };

struct BacktestConfig {
    int train_window = 0;
    int rebalance_period = 0;
    ModelSpec model;
    PhiPolicy phi_policy = PhiPolicy::Fixed;  // Calibrate uses model.m0 in every window
    std::optional<int> windows_limit;
    bool equal_weight = false;  // 1/N baseline, no optimization
    SolverConfig solver;
};

struct WindowResult {
    int window = 0;
    Eigen::Index start = 0;  // first held row
    Eigen::Index end = 0;    // one past the last held row
    bool skipped = false;
    std::string reason;
    bool certified = true;
    double phi = 0.0;
    Eigen::VectorXd weights;
    int sparsity = 0;
    double leverage = 0.0;
    double is_mean = 0.0;
    double is_var = 0.0;
    std::vector<double> realized;
};

struct BacktestReport {
    std::vector<WindowResult> windows;
    std::vector<double> realized;  // concatenated held-period returns
    int skipped = 0;
    double oos_mean = 0.0;
    double oos_var = 0.0;
    double sharpe = 0.0;  // NaN when the series has no spread
    double avg_sparsity = 0.0;
    double avg_leverage = 0.0;
};

/// Sample mean, sample variance (T-1) and mean/std of a series; NaN where undefined.
struct SeriesStats {
    double mean = 0.0;
    double var = 0.0;
    double sharpe = 0.0;
};
SeriesStats series_stats(const std::vector<double>& r);

/// Non-overlapping rolling windows: estimate on `train_window` rows, hold for
/// the next `rebalance_period` rows (the final hold may be shorter).
BacktestReport run_backtest(const ReturnsMatrix& returns, const BacktestConfig& config);

struct FrontierRow {
    double lambda = 0.0;
    double avg_sparsity = 0.0;
    double oos_mean = 0.0;
    double oos_var = 0.0;
    double sharpe = 0.0;
    double avg_leverage = 0.0;
};

std::vector<FrontierRow> lambda_sweep(const ReturnsMatrix& returns, const BacktestConfig& config,
                                      const std::vector<double>& lambdas);

std::string format_report(const BacktestReport& report);
std::string format_frontier(const std::vector<FrontierRow>& rows);

}  // namespace sparseport
