#include "sparseport/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sparseport/error.hpp"
#include "sparseport/market.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ReturnsMatrix row_slice(const ReturnsMatrix& r, Index begin, Index count) {
    ReturnsMatrix out;
    out.assets = r.assets;
    out.data = r.data.middleRows(begin, count);
    return out;
}

}  // namespace

SeriesStats series_stats(const std::vector<double>& r) {
    SeriesStats s;
    const std::size_t T = r.size();
    if (T == 0) return {kNaN, kNaN, kNaN};
    double sum = 0.0;
    for (double v : r) sum += v;
    s.mean = sum / static_cast<double>(T);
    if (T < 2) {
        s.var = kNaN;
        s.sharpe = kNaN;
        return s;
    }
    double ss = 0.0;
    for (double v : r) ss += (v - s.mean) * (v - s.mean);
    s.var = ss / static_cast<double>(T - 1);
    // Spread at rounding level (a constant series) counts as none.
    double scale = 0.0;
    for (double v : r) scale = std::max(scale, std::abs(v));
    if (std::sqrt(s.var) <= 1e-12 * scale) s.var = 0.0;
    const double sd = std::sqrt(s.var);
    s.sharpe = sd > 0.0 ? s.mean / sd : kNaN;
    return s;
}

BacktestReport run_backtest(const ReturnsMatrix& returns, const BacktestConfig& config) {
    const Index T = returns.periods();
    const Index n = returns.num_assets();
    if (config.train_window < 2) fail(ErrorKind::Config, "training window must be at least 2 rows");
    if (config.rebalance_period < 1) fail(ErrorKind::Config, "rebalance period must be positive");
    if (config.train_window + config.rebalance_period > T) {
        fail(ErrorKind::Config,
             fmt::format("{} rows cannot hold a {}-row training window and a {}-row holding period",
                         T, config.train_window, config.rebalance_period));
    }
    if (config.windows_limit && *config.windows_limit < 1) {
        fail(ErrorKind::Config, "window limit must be positive");
    }
    if (!config.equal_weight) validate(config.model, n);
    if (!config.equal_weight && config.phi_policy == PhiPolicy::Calibrate && !config.model.m0) {
        fail(ErrorKind::Spec, "phi calibration needs a target return");
    }

    BacktestReport rep;
    VectorXd previous = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double sparsity_sum = 0.0, leverage_sum = 0.0;
    int used = 0;
    for (int w = 0;; ++w) {
        if (config.windows_limit && w >= *config.windows_limit) break;
        const Index train_begin = static_cast<Index>(w) * config.rebalance_period;
        const Index start = train_begin + config.train_window;
        if (start >= T) break;
        const Index end = std::min<Index>(start + config.rebalance_period, T);

        WindowResult wr;
        wr.window = w;
        wr.start = start;
        wr.end = end;
        try {
            const MarketEstimate market = estimate_market(row_slice(returns, train_begin, config.train_window));
            if (config.equal_weight) {
                wr.weights = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
            } else {
                ModelSpec spec = config.model;
                if (config.phi_policy == PhiPolicy::Calibrate) {
                    spec.phi = calibrate_phi(market, *spec.m0, spec.variant);
                }
                if (spec.variant == Variant::DynamicLp) spec.anchor = previous;
                wr.phi = spec.phi;
                const SolveResult sr = solve(spec, market, config.solver);
                wr.certified = sr.certified;
                wr.weights = sr.weights;
            }
            wr.is_mean = market.mean.dot(wr.weights);
            wr.is_var = wr.weights.dot(market.cov * wr.weights);
        } catch (const Error& e) {
            wr.skipped = true;
            wr.reason = e.what();
            spdlog::warn("window {} skipped: {}", w, e.what());
        }
        if (!wr.skipped) {
            wr.sparsity = static_cast<int>(support_of(wr.weights, 0.0).size());
            wr.leverage = wr.weights.lpNorm<1>();
            for (Index t = start; t < end; ++t) {
                wr.realized.push_back(returns.data.row(t).dot(wr.weights));
            }
            rep.realized.insert(rep.realized.end(), wr.realized.begin(), wr.realized.end());
            sparsity_sum += wr.sparsity;
            leverage_sum += wr.leverage;
            ++used;
            previous = wr.weights;
        } else {
            ++rep.skipped;
        }
        rep.windows.push_back(std::move(wr));
    }
    const SeriesStats st = series_stats(rep.realized);
    rep.oos_mean = st.mean;
    rep.oos_var = st.var;
    rep.sharpe = st.sharpe;
    rep.avg_sparsity = used > 0 ? sparsity_sum / used : kNaN;
    rep.avg_leverage = used > 0 ? leverage_sum / used : kNaN;
    return rep;
}

std::vector<FrontierRow> lambda_sweep(const ReturnsMatrix& returns, const BacktestConfig& config,
                                      const std::vector<double>& lambdas) {
    std::vector<FrontierRow> rows;
    for (double lambda : lambdas) {
        BacktestConfig c = config;
        c.model.lambda = lambda;
        const BacktestReport rep = run_backtest(returns, c);
        rows.push_back({lambda, rep.avg_sparsity, rep.oos_mean, rep.oos_var, rep.sharpe,
                        rep.avg_leverage});
    }
    return rows;
}

std::string format_report(const BacktestReport& rep) {
    std::ostringstream os;
    os << "window,start,end,sparsity,leverage,is_mean,is_var\n";
    for (const auto& w : rep.windows) {
        if (w.skipped) {
            os << fmt::format("# skipped {},{},{}: {}\n", w.window, w.start, w.end, w.reason);
            continue;
        }
        os << fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g}\n", w.window, w.start, w.end,
                          w.sparsity, w.leverage, w.is_mean, w.is_var);
    }
    os << "# aggregate: oos_mean,oos_var,sharpe,avg_sparsity,avg_leverage\n";
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", rep.oos_mean, rep.oos_var,
                      rep.sharpe, rep.avg_sparsity, rep.avg_leverage);
    return os.str();
}

std::string format_frontier(const std::vector<FrontierRow>& rows) {
    std::ostringstream os;
    os << "lambda,avg_sparsity,oos_mean,oos_var,sharpe,avg_leverage\n";
    for (const auto& r : rows) {
        os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.lambda,
                          r.avg_sparsity, r.oos_mean, r.oos_var, r.sharpe, r.avg_leverage);
    }
    return os.str();
}

}  // namespace sparseport
