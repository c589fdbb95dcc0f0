#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sparseport/backtest.hpp"
#include "sparseport/diagnostics.hpp"
#include "sparseport/error.hpp"
#include "sparseport/ipm.hpp"
#include "sparseport/market.hpp"
#include "sparseport/oracle.hpp"
#include "sparseport/returns.hpp"
#include "sparseport/toy.hpp"

namespace sparseport::cli {
namespace {

using Eigen::Index;
using Eigen::VectorXd;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Spec:
        case ErrorKind::Config:
        case ErrorKind::Size: return kUsage;
        case ErrorKind::Data:
        case ErrorKind::InsufficientData: return kData;
        case ErrorKind::Infeasible:
        case ErrorKind::Unbounded: return kInfeasible;
        default: return kFailure;
    }
}

Variant parse_variant(const std::string& name) {
    static const std::map<std::string, Variant> names = {
        {"markowitz", Variant::MarkowitzNoShort}, {"markowitz-short", Variant::Markowitz},
        {"lp", Variant::LpNoShort},               {"lp-short", Variant::LpShort},
        {"l1lp", Variant::L1BallLp},              {"l2lp", Variant::L2Lp},
        {"dynamic", Variant::DynamicLp},
    };
    const auto it = names.find(name);
    if (it == names.end()) throw UsageError("unknown model: " + name);
    return it->second;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) fail(ErrorKind::Data, "cannot write " + path);
    f << text;
    if (!f) fail(ErrorKind::Data, "failed writing " + path);
}

// `asset,weight` rows keyed by asset identifier.
VectorXd read_portfolio(const std::string& path, const std::vector<std::string>& assets,
                        std::vector<std::string>* warnings) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::Data, "cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) fail(ErrorKind::Data, path + " is empty");
    std::map<std::string, Index> index;
    for (std::size_t i = 0; i < assets.size(); ++i) index[assets[i]] = static_cast<Index>(i);
    VectorXd w = VectorXd::Zero(static_cast<Index>(assets.size()));
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail(ErrorKind::Data, fmt::format("{}:{}: expected asset,weight", path, lineno));
        const std::string name = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        const auto it = index.find(name);
        if (it == index.end()) fail(ErrorKind::Data, fmt::format("{}:{}: unknown asset {}", path, lineno, name));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size() || !std::isfinite(v)) {
            fail(ErrorKind::Data, fmt::format("{}:{}: bad weight '{}'", path, lineno, value));
        }
        w(it->second) = v;
    }
    if (warnings != nullptr) {
        if (std::abs(w.sum() - 1.0) > 1e-9) warnings->push_back(fmt::format("weights sum to {:.6g}", w.sum()));
        if ((w.array() < 0.0).any()) warnings->push_back("portfolio holds short positions");
    }
    return w;
}

std::string portfolio_text(const std::vector<std::string>& assets, const VectorXd& w) {
    std::string s = "asset,weight\n";
    for (Index i = 0; i < w.size(); ++i) s += fmt::format("{},{:.17g}\n", assets[static_cast<std::size_t>(i)], w(i));
    return s;
}

struct ModelFlags {
    std::string model;
    double lambda = 0.0;
    double p = 0.5;
    double phi = 0.0;
    double m0 = 0.0;
    double delta = 0.0;
    double mu = 0.0;
    std::string anchor;
    CLI::Option* phi_opt = nullptr;
    CLI::Option* m0_opt = nullptr;
    CLI::Option* delta_opt = nullptr;
    CLI::Option* mu_opt = nullptr;
    CLI::Option* anchor_opt = nullptr;
};

struct SolverFlags {
    double eps = 1e-4;
    double beta = 0.45;
    int max_iters = 200000;
    double zero_threshold = 1e-6;
};

struct DataFlags {
    std::string returns;
    bool prices = false;
};

void add_data(CLI::App* app, DataFlags& d) {
    app->add_option("--returns", d.returns, "CSV of per-period returns (header of asset ids)")->required();
    app->add_flag("--prices", d.prices, "input holds prices; convert to simple returns");
}

void add_model(CLI::App* app, ModelFlags& m, bool need_model) {
    auto* opt = app->add_option("--model", m.model, "markowitz|markowitz-short|lp|lp-short|l1lp|l2lp|dynamic");
    if (need_model) opt->required();
    app->add_option("--lambda", m.lambda, "penalty weight");
    app->add_option("--p", m.p, "quasi-norm exponent in (0,1)");
    m.phi_opt = app->add_option("--phi", m.phi, "return reward");
    m.m0_opt = app->add_option("--m0", m.m0, "target return; phi is calibrated from it");
    m.phi_opt->excludes(m.m0_opt);
    m.delta_opt = app->add_option("--delta", m.delta, "l1 ball radius (l1lp)");
    m.mu_opt = app->add_option("--mu", m.mu, "l2 weight (l2lp)");
    m.anchor_opt = app->add_option("--anchor", m.anchor, "anchor portfolio file (dynamic)");
}

void add_solver(CLI::App* app, SolverFlags& s) {
    app->add_option("--eps", s.eps, "certificate tolerance");
    app->add_option("--beta", s.beta, "trust-region parameter");
    app->add_option("--max-iters", s.max_iters, "iteration cap");
    app->add_option("--zero-threshold", s.zero_threshold, "weights below this are zeroed");
}

SolverConfig solver_config(const SolverFlags& s) {
    SolverConfig c;
    c.eps = s.eps;
    c.beta = s.beta;
    c.max_iters = s.max_iters;
    c.zero_threshold = s.zero_threshold;
    return c;
}

ReturnsMatrix load(const DataFlags& d) { return read_returns_csv(d.returns, d.prices); }

ModelSpec model_spec(const ModelFlags& m, const ReturnsMatrix& r) {
    ModelSpec spec;
    spec.variant = parse_variant(m.model);
    spec.lambda = m.lambda;
    spec.p = m.p;
    spec.phi = m.phi;
    if (m.m0_opt->count() > 0) spec.m0 = m.m0;
    if (m.delta_opt->count() > 0) spec.delta = m.delta;
    if (m.mu_opt->count() > 0) spec.mu = m.mu;
    if (m.anchor_opt->count() > 0) spec.anchor = read_portfolio(m.anchor, r.assets, nullptr);
    if (spec.variant == Variant::DynamicLp && !spec.anchor) {
        spec.anchor = VectorXd::Constant(r.num_assets(), 1.0 / static_cast<double>(r.num_assets()));
    }
    return spec;
}

std::string g6(double v) { return fmt::format("{:.6g}", v); }

int cmd_solve(const DataFlags& d, const ModelFlags& m, const SolverFlags& s,
              const std::string& out_path, std::ostream& out) {
    const ReturnsMatrix r = load(d);
    ModelSpec spec = model_spec(m, r);
    validate(spec, r.num_assets());
    const MarketEstimate market = estimate_market(r);
    if (spec.m0) spec.phi = calibrate_phi(market, *spec.m0, spec.variant);
    const SolveResult sr = solve(spec, market, solver_config(s));
    const std::string text = portfolio_text(r.assets, sr.weights);
    if (!out_path.empty()) {
        write_file(out_path, text);
    } else {
        out << text;
    }
    out << "K " << sr.support.size() << "\n";
    out << "phi " << g6(spec.phi) << "\n";
    out << "objective " << g6(sr.objective + build_general_form(spec, market).offset) << "\n";
    out << "leverage " << g6(sr.weights.lpNorm<1>()) << "\n";
    out << "kkt1_residual " << g6(sr.kkt1_residual) << "\n";
    out << "kkt2_margin " << g6(sr.kkt2_margin) << "\n";
    out << "iterations " << sr.iterations << "\n";
    out << "termination " << to_string(sr.termination) << "\n";
    out << "certified " << (sr.certified ? "yes" : "no") << "\n";
    return sr.certified ? kOk : kUncertified;
}

int cmd_diagnose(const DataFlags& d, const std::string& portfolio, double phi, double threshold,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
    const ReturnsMatrix r = load(d);
    std::vector<std::string> warnings;
    const VectorXd w = read_portfolio(portfolio, r.assets, &warnings);
    for (const auto& msg : warnings) err << "warning: " << msg << "\n";
    const MarketEstimate market = estimate_market(r);
    const SparsityCosts c = sparsity_costs(w, market, phi, threshold);
    const std::string text = format_costs(c, r.assets);
    if (!out_path.empty()) {
        write_file(out_path, text);
    } else {
        out << text;
    }
    out << "K " << c.K << "\n";
    if (c.K > 0) {
        Index best = 0;
        for (Index a = 1; a < c.K; ++a) {
            if (c.RSC(a) < c.RSC(best)) best = a;
        }
        out << "sum_L " << g6(c.L.sum()) << "\n";
        out << "cheapest " << r.assets[static_cast<std::size_t>(c.support[static_cast<std::size_t>(best)])]
            << " RSC " << g6(c.RSC(best)) << "\n";
    }
    return kOk;
}

BacktestConfig backtest_config(const ModelFlags& m, const SolverFlags& s, const ReturnsMatrix& r,
                               int train, int rebalance, int windows) {
    BacktestConfig c;
    c.train_window = train;
    c.rebalance_period = rebalance;
    if (windows > 0) c.windows_limit = windows;
    c.solver = solver_config(s);
    if (m.model == "equal") {
        c.equal_weight = true;
    } else {
        c.model = model_spec(m, r);
        if (c.model.m0) c.phi_policy = PhiPolicy::Calibrate;
    }
    return c;
}


}  // namespace

std::vector<double> parse_lambdas(const std::string& text) {
    std::vector<double> out;
    const auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (s.empty() || used != s.size() || !std::isfinite(v)) {
            throw UsageError("bad number in lambda list: '" + s + "'");
        }
        return v;
    };
    if (text.rfind("logspace:", 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(text.substr(9));
        std::string part;
        while (std::getline(ss, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw UsageError("expected logspace:a:b:k");
        const double a = number(parts[0]);
        const double b = number(parts[1]);
        const double kd = number(parts[2]);
        const int k = static_cast<int>(kd);
        if (kd != k || k < 1) throw UsageError("logspace count must be a positive integer");
        for (int i = 0; i < k; ++i) {
            const double t = k == 1 ? a : a + (b - a) * i / (k - 1);
            out.push_back(std::pow(10.0, t));
        }
        return out;
    }
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(number(part));
    if (out.empty()) throw UsageError("empty lambda list");
    for (double v : out) {
        if (v < 0.0) throw UsageError("lambda values must be >= 0");
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse mean-variance portfolios with lp regularization"};
    app.require_subcommand(1);

    DataFlags data;
    ModelFlags solve_model, sweep_model, bt_model;
    SolverFlags solver;
    std::string out_path;

    auto* solve_cmd = app.add_subcommand("solve", "solve one model and write asset,weight");
    add_data(solve_cmd, data);
    add_model(solve_cmd, solve_model, true);
    add_solver(solve_cmd, solver);
    solve_cmd->add_option("--out", out_path, "portfolio file");

    std::string portfolio;
    double diag_phi = 0.0;
    double diag_threshold = 1e-6;
    auto* diag_cmd = app.add_subcommand("diagnose", "sparsity costs of a portfolio");
    add_data(diag_cmd, data);
    diag_cmd->add_option("--portfolio", portfolio, "asset,weight file")->required();
    diag_cmd->add_option("--phi", diag_phi, "return reward");
    diag_cmd->add_option("--zero-threshold", diag_threshold, "support cutoff");
    diag_cmd->add_option("--out", out_path, "report file");

    int train = 0, rebalance = 0, windows = 0;
    std::string lambdas_text;
    auto* sweep_cmd = app.add_subcommand("sweep", "backtest over a lambda grid");
    add_data(sweep_cmd, data);
    add_model(sweep_cmd, sweep_model, false);
    add_solver(sweep_cmd, solver);
    sweep_cmd->add_option("--lambdas", lambdas_text, "a,b,c or logspace:a:b:k")->required();
    sweep_cmd->add_option("--train", train, "training rows")->required();
    sweep_cmd->add_option("--rebalance", rebalance, "holding rows")->required();
    sweep_cmd->add_option("--windows", windows, "maximum number of windows");
    sweep_cmd->add_option("--out", out_path, "frontier file");

    auto* bt_cmd = app.add_subcommand("backtest", "rolling-window out-of-sample evaluation");
    add_data(bt_cmd, data);
    add_model(bt_cmd, bt_model, true);
    add_solver(bt_cmd, solver);
    bt_cmd->add_option("--train", train, "training rows")->required();
    bt_cmd->add_option("--rebalance", rebalance, "holding rows")->required();
    bt_cmd->add_option("--windows", windows, "maximum number of windows");
    bt_cmd->add_option("--out", out_path, "report file");

    int k = 0;
    double oracle_phi = 0.0;
    auto* oracle_cmd = app.add_subcommand("oracle", "exact cardinality-constrained portfolios");
    add_data(oracle_cmd, data);
    oracle_cmd->add_option("--phi", oracle_phi, "return reward");
    auto* k_opt = oracle_cmd->add_option("--k", k, "cardinality limit");
    auto* lam_opt = oracle_cmd->add_option("--lambdas", lambdas_text, "compare lp solutions at these lambdas");
    k_opt->excludes(lam_opt);
    add_solver(oracle_cmd, solver);
    oracle_cmd->add_option("--out", out_path, "weights or comparison file");

    int toy_id = 0;
    std::string toy_returns_path;
    auto* toy_cmd = app.add_subcommand("toy", "illustration tables for the built-in instances");
    toy_cmd->add_option("n", toy_id, "instance 1..4")->required();
    toy_cmd->add_option("--returns-out", toy_returns_path, "write a returns file with these moments");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(data, solve_model, solver, out_path, out);
        if (*diag_cmd) return cmd_diagnose(data, portfolio, diag_phi, diag_threshold, out_path, out, err);
        if (*sweep_cmd || *bt_cmd) {
            ModelFlags& model = *sweep_cmd ? sweep_model : bt_model;
            if (model.model.empty()) model.model = "lp";
            std::vector<double> lambdas;
            if (*sweep_cmd) lambdas = parse_lambdas(lambdas_text);
            if (model.model != "equal") parse_variant(model.model);
            const ReturnsMatrix r = load(data);
            const BacktestConfig cfg = backtest_config(model, solver, r, train, rebalance, windows);
            std::string text;
            if (*sweep_cmd) {
                const auto rows = lambda_sweep(r, cfg, lambdas);
                text = format_frontier(rows);
                for (const auto& row : rows) {
                    out << fmt::format("lambda {} sparsity {} sharpe {}\n", g6(row.lambda),
                                       g6(row.avg_sparsity), g6(row.sharpe));
                }
            } else {
                const BacktestReport rep = run_backtest(r, cfg);
                text = format_report(rep);
                out << fmt::format("windows {} skipped {}\n", rep.windows.size(), rep.skipped);
                out << fmt::format("oos_mean {} oos_var {} sharpe {}\n", g6(rep.oos_mean),
                                   g6(rep.oos_var), g6(rep.sharpe));
                out << fmt::format("avg_sparsity {} avg_leverage {}\n", g6(rep.avg_sparsity),
                                   g6(rep.avg_leverage));
            }
            if (!out_path.empty()) {
                write_file(out_path, text);
            } else {
                out << text;
            }
            return kOk;
        }
        if (*oracle_cmd) {
            if (k_opt->count() == 0 && lam_opt->count() == 0) throw UsageError("oracle needs --k or --lambdas");
            const ReturnsMatrix r = load(data);
            const MarketEstimate market = estimate_market(r);
            if (k_opt->count() > 0) {
                const CcpsResult cc = solve_ccps(market, oracle_phi, k);
                std::string names;
                for (Index i : cc.best_support) names += (names.empty() ? "" : ",") + r.assets[static_cast<std::size_t>(i)];
                out << "support " << names << "\n";
                out << "objective " << g6(cc.objective) << "\n";
                const std::string text = portfolio_text(r.assets, cc.weights);
                if (!out_path.empty()) {
                    write_file(out_path, text);
                } else {
                    out << text;
                }
                return kOk;
            }
            const std::vector<double> lambdas = parse_lambdas(lambdas_text);
            const ComparisonReport rep = lp_vs_ccps_report(market, oracle_phi, lambdas, {}, solver_config(solver));
            const std::string text = format_comparison(rep);
            if (!out_path.empty()) {
                write_file(out_path, text);
            } else {
                out << text;
            }
            bool all_certified = true;
            for (const auto& row : rep.rows) {
                all_certified = all_certified && row.lp_certified;
                out << fmt::format("lambda {} K {} gap {}\n", g6(row.lambda), row.lp_sparsity, g6(row.objective_gap));
            }
            return all_certified ? kOk : kUncertified;
        }
        if (*toy_cmd) {
            if (toy_id < 1 || toy_id > 4) throw UsageError("toy instance must be 1..4");
            out << toy_report(toy_id);
            if (!toy_returns_path.empty()) {
                const ReturnsMatrix r = toy_returns(toy_id);
                std::string text;
                for (std::size_t j = 0; j < r.assets.size(); ++j) text += (j ? "," : "") + r.assets[j];
                text += "\n";
                for (Index t = 0; t < r.periods(); ++t) {
                    for (Index j = 0; j < r.num_assets(); ++j) {
                        text += fmt::format("{}{:.17g}", j ? "," : "", r.data(t, j));
                    }
                    text += "\n";
                }
                write_file(toy_returns_path, text);
            }
            return kOk;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    }
    return kUsage;
}

}  // namespace sparseport::cli
