#include "sparseport/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sparseport/error.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Variant v) noexcept {
    switch (v) {
        case Variant::Markowitz: return "markowitz-short";
        case Variant::MarkowitzNoShort: return "markowitz";
        case Variant::LpNoShort: return "lp";
        case Variant::LpShort: return "lp-short";
        case Variant::L1BallLp: return "l1lp";
        case Variant::L2Lp: return "l2lp";
        case Variant::DynamicLp: return "dynamic";
    }
    return "unknown";
}

bool is_regularized(Variant v) noexcept {
    return v != Variant::Markowitz && v != Variant::MarkowitzNoShort;
}

bool allows_short(Variant v) noexcept {
    return v == Variant::Markowitz || v == Variant::LpShort || v == Variant::L1BallLp ||
           v == Variant::L2Lp;
}

bool is_split(Variant v) noexcept { return allows_short(v) || v == Variant::DynamicLp; }

double ModelSpec::effective_lambda() const { return is_regularized(variant) ? lambda : 0.0; }

void validate(const ModelSpec& spec, Index num_assets) {
    if (num_assets < 1) fail(ErrorKind::Spec, "model needs at least one asset");
    if (is_regularized(spec.variant)) {
        if (!std::isfinite(spec.lambda) || spec.lambda < 0.0) {
            fail(ErrorKind::Spec, fmt::format("lambda must be >= 0, got {}", spec.lambda));
        }
        if (!(spec.p > 0.0 && spec.p < 1.0)) {
            fail(ErrorKind::Spec, fmt::format("p must lie in (0,1), got {}", spec.p));
        }
    }
    if (!std::isfinite(spec.phi) || spec.phi < 0.0) {
        fail(ErrorKind::Spec, fmt::format("phi must be >= 0, got {}", spec.phi));
    }
    switch (spec.variant) {
        case Variant::L1BallLp:
            if (!spec.delta) fail(ErrorKind::Spec, "l1-ball model requires delta");
            if (!(*spec.delta > 1.0) || !std::isfinite(*spec.delta)) {
                fail(ErrorKind::Spec, fmt::format("delta must exceed 1, got {}", *spec.delta));
            }
            break;
        case Variant::L2Lp:
            if (!spec.mu) fail(ErrorKind::Spec, "l2 model requires mu");
            if (!(*spec.mu >= 0.0) || !std::isfinite(*spec.mu)) {
                fail(ErrorKind::Spec, fmt::format("mu must be >= 0, got {}", *spec.mu));
            }
            break;
        case Variant::DynamicLp: {
            if (!spec.anchor) fail(ErrorKind::Spec, "dynamic model requires an anchor portfolio");
            const auto& a = *spec.anchor;
            if (a.size() != num_assets) {
                fail(ErrorKind::Spec, fmt::format("anchor has {} entries for {} assets", a.size(),
                                                  num_assets));
            }
            if (!a.allFinite() || (a.array() < 0.0).any()) {
                fail(ErrorKind::Spec, "anchor weights must be finite and nonnegative");
            }
            if (std::abs(a.sum() - 1.0) > 1e-9) {
                fail(ErrorKind::Spec, fmt::format("anchor weights sum to {}, not 1", a.sum()));
            }
            break;
        }
        default: break;
    }
}

namespace {

void check_form(const GeneralForm& form) {
    const Index P = form.A.rows();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(form.A);
    if (qr.rank() < P) {
        fail(ErrorKind::DegenerateConstraints, "constraint matrix is not of full row rank");
    }
    const auto& x0 = form.interior;
    const double resid = (form.A * x0 - form.b).cwiseAbs().maxCoeff();
    if (!((x0.array() > 0.0).all()) || resid > 1e-10 * (1.0 + form.b.cwiseAbs().maxCoeff())) {
        fail(ErrorKind::Infeasible, "feasible region has no strictly interior point");
    }
}

}  // namespace

GeneralForm build_general_form(const ModelSpec& spec, const MarketEstimate& market) {
    const Index n = market.size();
    validate(spec, n);
    const MatrixXd& Q = market.cov;
    const VectorXd c = spec.phi * market.mean;

    GeneralForm form;
    form.variant = spec.variant;
    BackMap& bm = form.back_map;
    bm.num_assets = n;
    bm.base = VectorXd::Zero(n);

    switch (spec.variant) {
        case Variant::MarkowitzNoShort:
        case Variant::LpNoShort: {
            bm.kind = BackMapKind::Direct;
            form.Qhat = Q;
            form.chat = c;
            form.A = MatrixXd::Ones(1, n);
            form.b = VectorXd::Ones(1);
            form.interior = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
            break;
        }
        case Variant::Markowitz:
        case Variant::LpShort:
        case Variant::L2Lp:
        case Variant::L1BallLp: {
            bm.kind = BackMapKind::Split;
            bm.minus_assets.resize(static_cast<std::size_t>(n));
            std::iota(bm.minus_assets.begin(), bm.minus_assets.end(), Index{0});
            const bool ball = spec.variant == Variant::L1BallLp;
            bm.num_slack = ball ? 1 : 0;
            const Index N = 2 * n + bm.num_slack;

            MatrixXd Qs = Q;
            if (spec.variant == Variant::L2Lp) Qs.diagonal().array() += 2.0 * *spec.mu;
            form.Qhat = MatrixXd::Zero(N, N);
            form.Qhat.topLeftCorner(n, n) = Qs;
            form.Qhat.block(0, n, n, n) = -Qs;
            form.Qhat.block(n, 0, n, n) = -Qs;
            form.Qhat.block(n, n, n, n) = Qs;

            form.chat = VectorXd::Zero(N);
            form.chat.head(n) = c;
            form.chat.segment(n, n) = -c;

            form.A = MatrixXd::Zero(ball ? 2 : 1, N);
            form.A.block(0, 0, 1, n).setOnes();
            form.A.block(0, n, 1, n).setConstant(-1.0);
            form.b = VectorXd::Ones(ball ? 2 : 1);

            form.interior = VectorXd::Zero(N);
            const double dn = static_cast<double>(n);
            if (ball) {
                const double delta = *spec.delta;
                form.A.block(1, 0, 1, 2 * n).setOnes();
                form.A(1, 2 * n) = 1.0;
                form.b(1) = delta;
                // gross exposure halfway between 1 and delta, slack takes the rest
                const double gross = 0.5 * (1.0 + delta);
                form.interior.head(n).setConstant(0.5 * (gross + 1.0) / dn);
                form.interior.segment(n, n).setConstant(0.5 * (gross - 1.0) / dn);
                form.interior(2 * n) = delta - gross;
            } else {
                form.interior.head(n).setConstant(1.5 / dn);
                form.interior.segment(n, n).setConstant(0.5 / dn);
            }
            break;
        }
        case Variant::DynamicLp: {
            bm.kind = BackMapKind::Dynamic;
            const VectorXd& a = *spec.anchor;
            bm.base = a;
            // y- is bounded by a, so assets with a_i = 0 cannot be sold and get no y- column.
            for (Index i = 0; i < n; ++i) {
                if (a(i) > 0.0) bm.minus_assets.push_back(i);
            }
            const Index m = bm.num_minus();
            bm.num_slack = m;
            const Index N = n + 2 * m;

            const VectorXd cy = c - Q * a;
            form.Qhat = MatrixXd::Zero(N, N);
            form.Qhat.topLeftCorner(n, n) = Q;
            form.chat = VectorXd::Zero(N);
            form.chat.head(n) = cy;
            for (Index k = 0; k < m; ++k) {
                const Index ik = bm.minus_assets[static_cast<std::size_t>(k)];
                form.Qhat.col(n + k).head(n) = -Q.col(ik);
                form.Qhat.row(n + k).head(n) = -Q.row(ik);
                for (Index l = 0; l < m; ++l) {
                    form.Qhat(n + k, n + l) = Q(ik, bm.minus_assets[static_cast<std::size_t>(l)]);
                }
                form.chat(n + k) = -cy(ik);
            }

            form.A = MatrixXd::Zero(1 + m, N);
            form.b = VectorXd::Zero(1 + m);
            form.A.block(0, 0, 1, n).setOnes();
            form.A.block(0, n, 1, m).setConstant(-1.0);
            form.interior = VectorXd::Zero(N);
            double sold = 0.0;
            for (Index k = 0; k < m; ++k) {
                const double ak = a(bm.minus_assets[static_cast<std::size_t>(k)]);
                form.A(1 + k, n + k) = 1.0;
                form.A(1 + k, n + m + k) = 1.0;
                form.b(1 + k) = ak;
                form.interior(n + k) = 0.5 * ak;
                form.interior(n + m + k) = 0.5 * ak;
                sold += 0.5 * ak;
            }
            form.interior.head(n).setConstant(sold / static_cast<double>(n));
            form.offset = 0.5 * a.dot(Q * a) - c.dot(a);
            break;
        }
    }

    const Index penalized = form.back_map.slack_offset();
    form.reg_set.resize(static_cast<std::size_t>(penalized));
    std::iota(form.reg_set.begin(), form.reg_set.end(), Index{0});
    check_form(form);
    return form;
}

namespace {

void check_dim(const GeneralForm& form, const VectorXd& x) {
    if (x.size() != form.dim()) {
        fail(ErrorKind::Domain, fmt::format("point has {} entries, form has {} variables",
                                            x.size(), form.dim()));
    }
}

inline double pow_p(double v, double p) { return p == 0.5 ? std::sqrt(v) : std::pow(v, p); }

}  // namespace

double objective(const GeneralForm& form, const VectorXd& x, double lambda, double p) {
    check_dim(form, x);
    if ((x.array() < 0.0).any()) fail(ErrorKind::Domain, "objective evaluated at a negative point");
    double value = 0.5 * x.dot(form.Qhat * x) - form.chat.dot(x);
    if (lambda != 0.0) {
        double penalty = 0.0;
        for (Index j : form.reg_set) penalty += pow_p(x(j), p);
        value += lambda * penalty;
    }
    return value;
}

std::pair<VectorXd, MatrixXd> gradient_hessian(const GeneralForm& form, const VectorXd& x,
                                               double lambda, double p) {
    check_dim(form, x);
    if (!(x.array() > 0.0).all()) {
        fail(ErrorKind::Domain, "derivatives require a strictly positive point");
    }
    VectorXd grad = form.Qhat * x - form.chat;
    MatrixXd hess = form.Qhat;
    if (lambda != 0.0) {
        for (Index j : form.reg_set) {
            const double xp = pow_p(x(j), p);
            grad(j) += lambda * p * xp / x(j);
            hess(j, j) += lambda * p * (p - 1.0) * xp / (x(j) * x(j));
        }
    }
    return {std::move(grad), std::move(hess)};
}

VectorXd back_map(const GeneralForm& form, const VectorXd& x) {
    check_dim(form, x);
    const BackMap& bm = form.back_map;
    VectorXd w = bm.base + x.head(bm.num_assets);
    for (Index k = 0; k < bm.num_minus(); ++k) {
        w(bm.minus_assets[static_cast<std::size_t>(k)]) -= x(bm.minus_offset() + k);
    }
    return w;
}

VectorXd truncate_weights(const VectorXd& weights, double threshold) {
    VectorXd w = weights;
    for (Index i = 0; i < w.size(); ++i) {
        if (std::abs(w(i)) < threshold) w(i) = 0.0;
    }
    const double total = w.sum();
    if (total != 0.0 && std::isfinite(total)) w /= total;
    return w;
}

double complementarity_gap(const GeneralForm& form, const VectorXd& x) {
    check_dim(form, x);
    const BackMap& bm = form.back_map;
    double gap = 0.0;
    for (Index k = 0; k < bm.num_minus(); ++k) {
        const Index i = bm.minus_assets[static_cast<std::size_t>(k)];
        gap = std::max(gap, std::min(x(i), x(bm.minus_offset() + k)));
    }
    return gap;
}

std::vector<Index> support_of(const VectorXd& w, double threshold) {
    std::vector<Index> s;
    for (Index i = 0; i < w.size(); ++i) {
        if (std::abs(w(i)) > threshold) s.push_back(i);
    }
    return s;
}

}  // namespace sparseport
