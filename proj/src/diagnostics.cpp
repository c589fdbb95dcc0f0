#include "sparseport/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "sparseport/error.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MatrixXd sub_matrix(const MatrixXd& Q, const std::vector<Index>& idx) {
    const Index k = static_cast<Index>(idx.size());
    MatrixXd out(k, k);
    for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) out(a, b) = Q(idx[a], idx[b]);
    }
    return out;
}

// Checks (K-1) K^power <= scale * 4 sum(L)/lambda and the entry lower bounds.
void support_bounds(BoundReport& rep, const std::string& tag, const VectorXd& xs,
                    const VectorXd& L, double lambda, double scale, double power, double slack) {
    const double K = static_cast<double>(xs.size());
    if (xs.size() == 0) return;
    BoundCheck size;
    size.name = tag + " support size";
    size.lhs = (K - 1.0) * std::pow(K, power);
    size.rhs = scale * 4.0 * L.sum() / lambda * slack;
    size.pass = size.lhs <= size.rhs;
    rep.checks.push_back(size);

    const bool zero_L = (L.array() <= 1e-12).any();
    if (zero_L) {
        BoundCheck single;
        single.name = tag + " zero projected variance forces K = 1";
        single.lhs = K;
        single.rhs = 1.0;
        single.pass = xs.size() == 1;
        rep.checks.push_back(single);
        return;
    }
    for (Index i = 0; i < xs.size(); ++i) {
        BoundCheck entry;
        entry.name = fmt::format("{} entry {} lower bound", tag, i);
        entry.lhs = xs(i) * slack;
        entry.rhs = std::pow(lambda * (K - 1.0) * (K - 1.0) / (4.0 * L(i) * K * K), 2.0 / 3.0);
        entry.pass = entry.lhs >= entry.rhs;
        rep.checks.push_back(entry);
    }
}

}  // namespace

VectorXd projected_variances(const MatrixXd& Qbar) {
    const Index K = Qbar.rows();
    if (Qbar.cols() != K) fail(ErrorKind::Spec, "projected variances need a square matrix");
    if (K == 0) return VectorXd(0);
    const double k = static_cast<double>(K);
    const VectorXd Qe = Qbar.rowwise().sum();
    const double eQe = Qe.sum();
    return (Qbar.diagonal() - (2.0 / k) * Qe).array() + eQe / (k * k);
}

SparsityCosts sparsity_costs(const VectorXd& x, const MarketEstimate& market, double phi,
                             double threshold) {
    const Index n = market.size();
    if (x.size() != n) fail(ErrorKind::Spec, "weights and market differ in size");
    SparsityCosts out;
    out.support = support_of(x, threshold);
    const Index K = static_cast<Index>(out.support.size());
    out.K = K;
    if (K == 0) return out;
    const double k = static_cast<double>(K);

    const MatrixXd Qbar = sub_matrix(market.cov, out.support);
    VectorXd xb(K), mb(K);
    for (Index a = 0; a < K; ++a) {
        xb(a) = x(out.support[static_cast<std::size_t>(a)]);
        mb(a) = market.mean(out.support[static_cast<std::size_t>(a)]);
    }
    out.weight = xb;
    out.L = projected_variances(Qbar);
    const VectorXd Qx = Qbar * xb;
    const VectorXd cov = Qx.array() - Qx.mean();
    const double m_avg = mb.mean();
    out.dir_deriv = cov - phi * (mb.array() - m_avg).matrix();
    out.portfolio_std = std::sqrt(std::max(0.0, xb.dot(Qx)));

    out.RSC.resize(K);
    out.MCS.resize(K);
    out.eps_star.resize(K);
    out.rho_bar.resize(K);
    out.sharpe_bar.resize(K);
    out.measured_delta_f.resize(K);
    const auto f = [&](const VectorXd& w) {
        return 0.5 * w.dot(market.cov * w) - phi * market.mean.dot(w);
    };
    const double f0 = f(x);
    for (Index a = 0; a < K; ++a) {
        const double L = out.L(a);
        const double sL = std::sqrt(std::max(L, 0.0));
        out.RSC(a) = xb(a) * sL;
        const double dd = out.dir_deriv(a);
        if (K >= 2) {
            const double r = k / (k - 1.0);
            out.MCS(a) = -r * xb(a) * dd + r * r * xb(a) * xb(a) * L;
            if (L <= 1e-12) {
                out.eps_star(a) = std::abs(dd) <= 1e-12
                                      ? 0.0
                                      : -std::copysign(std::numeric_limits<double>::infinity(), dd);
            } else {
                out.eps_star(a) = -dd / L;
            }
            out.measured_delta_f(a) =
                f(drop_and_rebalance(x, out.support[static_cast<std::size_t>(a)], threshold).x) - f0;
        } else {
            out.MCS(a) = kNaN;
            out.eps_star(a) = kNaN;
            out.measured_delta_f(a) = kNaN;
        }
        out.rho_bar(a) = (sL > 1e-12 && out.portfolio_std > 1e-12)
                             ? cov(a) / (out.portfolio_std * sL)
                             : kNaN;
        out.sharpe_bar(a) = sL > 1e-12 ? (mb(a) - m_avg) / sL : kNaN;
    }
    return out;
}

DropResult drop_and_rebalance(const VectorXd& x, Index i, double threshold) {
    if (i < 0 || i >= x.size()) fail(ErrorKind::Spec, "asset index out of range");
    const std::vector<Index> support = support_of(x, threshold);
    if (std::find(support.begin(), support.end(), i) == support.end()) {
        fail(ErrorKind::Spec, fmt::format("asset {} is not held", i));
    }
    const Index K = static_cast<Index>(support.size());
    if (K < 2) fail(ErrorKind::Spec, "cannot drop the only held asset");
    DropResult out;
    out.x = x;
    const double share = x(i) / static_cast<double>(K - 1);
    for (Index j : support) {
        if (j != i) out.x(j) += share;
    }
    out.x(i) = 0.0;
    out.left_simplex = (out.x.array() < 0.0).any();
    return out;
}

bool BoundReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
}

BoundReport theorem_bounds(const GeneralForm& form, const VectorXd& x, const ModelSpec& spec,
                           const MarketEstimate& market, double eps, double zero_threshold) {
    BoundReport rep;
    const double lambda = spec.effective_lambda();
    if (lambda <= 0.0) {
        rep.reason = "bounds are vacuous without the penalty";
        return rep;
    }
    if (spec.p != 0.5) {
        rep.reason = "bounds are stated for p = 1/2";
        return rep;
    }
    const Variant v = spec.variant;
    if (v != Variant::LpNoShort && v != Variant::LpShort && v != Variant::L1BallLp &&
        v != Variant::L2Lp) {
        rep.reason = fmt::format("no bounds for variant {}", to_string(v));
        return rep;
    }
    if (x.size() != form.dim()) fail(ErrorKind::Spec, "point does not match the general form");
    rep.applicable = true;
    const double slack = 1.0 + 10.0 * eps;
    const Index n = market.size();
    const BackMap& bm = form.back_map;

    VectorXd plus = x.head(n);
    VectorXd minus = VectorXd::Zero(n);
    for (Index k = 0; k < bm.num_minus(); ++k) {
        minus(bm.minus_assets[static_cast<std::size_t>(k)]) = x(bm.minus_offset() + k);
    }
    std::vector<Index> Pp, Pm;
    for (Index i = 0; i < n; ++i) {
        if (plus(i) > zero_threshold) Pp.push_back(i);
        if (minus(i) > zero_threshold) Pm.push_back(i);
    }

    if (v != Variant::LpNoShort) {
        BoundCheck disj;
        disj.name = "disjoint long and short supports";
        disj.lhs = 0.0;
        for (Index i = 0; i < n; ++i) disj.lhs = std::max(disj.lhs, std::min(plus(i), minus(i)));
        disj.rhs = zero_threshold;
        disj.pass = disj.lhs <= disj.rhs;
        rep.checks.push_back(disj);
    }

    const auto values = [](const VectorXd& src, const std::vector<Index>& idx) {
        VectorXd out(static_cast<Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Index>(a)) = src(idx[a]);
        return out;
    };

    if (v == Variant::LpNoShort) {
        support_bounds(rep, "long", values(plus, Pp), projected_variances(sub_matrix(market.cov, Pp)),
                       lambda, 1.0, 1.5, slack);
    } else if (v == Variant::L1BallLp) {
        const double delta = *spec.delta;
        support_bounds(rep, "long", values(plus, Pp), projected_variances(sub_matrix(market.cov, Pp)),
                       lambda, std::pow((delta + 1.0) / 2.0, 1.5), 1.5, slack);
        support_bounds(rep, "short", values(minus, Pm),
                       projected_variances(sub_matrix(market.cov, Pm)), lambda,
                       std::pow((delta - 1.0) / 2.0, 1.5), 1.5, slack);
    } else if (v == Variant::L2Lp) {
        std::vector<Index> P;
        for (Index i = 0; i < n; ++i) {
            if (plus(i) > zero_threshold || minus(i) > zero_threshold) P.push_back(i);
        }
        const VectorXd L = projected_variances(sub_matrix(market.cov, P)).array() +
                           2.0 * spec.mu.value_or(0.0);
        const VectorXd w = plus - minus;
        const double delta = w.norm();
        support_bounds(rep, "combined", values(plus + minus, P), L, lambda, std::pow(delta, 1.5),
                       0.75, slack);
    }
    return rep;
}

std::string format_costs(const SparsityCosts& c, const std::vector<std::string>& assets) {
    std::ostringstream os;
    os << "asset,weight,L,RSC,MCS,dir_deriv,eps_star,rho_bar,sharpe_bar,measured_delta_f\n";
    for (Index a = 0; a < c.K; ++a) {
        const Index i = c.support[static_cast<std::size_t>(a)];
        const std::string name =
            static_cast<std::size_t>(i) < assets.size() ? assets[static_cast<std::size_t>(i)]
                                                        : std::to_string(i + 1);
        os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                          name, c.weight(a), c.L(a), c.RSC(a), c.MCS(a), c.dir_deriv(a),
                          c.eps_star(a), c.rho_bar(a), c.sharpe_bar(a), c.measured_delta_f(a));
    }
    return os.str();
}

}  // namespace sparseport
