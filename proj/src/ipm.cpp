#include "sparseport/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sparseport/error.hpp"
#include "sparseport/oracle.hpp"
#include "sparseport/trust_region.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Termination t) noexcept {
    switch (t) {
        case Termination::SmallMultiplier: return "small multiplier";
        case Termination::Certificate: return "certificate";
        case Termination::Stationary: return "stationary";
        case Termination::MaxIterations: return "max-iterations";
    }
    return "unknown";
}

double admissible_beta_bound(double lambda) {
    if (lambda <= 0.0) return 0.5;
    return std::min({0.5, std::sqrt(2.0 / lambda), 3.0 / ((18.0 * std::sqrt(2.0) + 2.0) * lambda)});
}

namespace {

inline double pow_p(double v, double p) { return p == 0.5 ? std::sqrt(v) : std::pow(v, p); }

// Affine-scaled quantities at x: ctilde = X grad f, Qtilde = X (Hess f) X,
// written so that they stay finite at x_j = 0.
struct LocalModel {
    VectorXd ctilde;
    MatrixXd Qtilde;
    MatrixXd AX;
    Eigen::ColPivHouseholderQR<MatrixXd> qr;  // of (AX)'
    MatrixXd N;
    MatrixXd QN;
    MatrixXd H;
    VectorXd g;
    bool eig_done = false;
    VectorXd eigenvalues;
    MatrixXd eigenvectors;

    void ensure_eig() {
        if (eig_done) return;
        if (H.rows() > 0) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
            if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "eigendecomposition failed");
            eigenvalues = es.eigenvalues();
            eigenvectors = es.eigenvectors();
        } else {
            eigenvalues.resize(0);
            eigenvectors.resize(0, 0);
        }
        eig_done = true;
    }
};

// Refills `lm` in place so that its buffers are reused across iterations.
void rebuild_local(LocalModel& lm, const GeneralForm& form, const VectorXd& x, double lambda,
                   double p, bool require_full_rank) {
    const Index N = form.dim();
    lm.eig_done = false;
    lm.ctilde = x.cwiseProduct(form.Qhat * x - form.chat);
    lm.Qtilde = form.Qhat.array() * (x * x.transpose()).array();
    if (lambda != 0.0) {
        for (Index j : form.reg_set) {
            const double xp = pow_p(x(j), p);
            lm.ctilde(j) += lambda * p * xp;
            lm.Qtilde(j, j) += lambda * p * (p - 1.0) * xp;
        }
    }
    lm.AX.noalias() = form.A * x.asDiagonal();
    const Index P = lm.AX.rows();
    if (P > 0) {
        lm.qr.compute(lm.AX.transpose());
        const Index r = lm.qr.rank();
        if (r < P && require_full_rank) {
            fail(ErrorKind::DegenerateConstraints, "scaled constraint matrix is rank deficient");
        }
        lm.N = MatrixXd::Identity(N, N).rightCols(N - r);
        lm.N.applyOnTheLeft(lm.qr.householderQ());
    } else {
        lm.N = MatrixXd::Identity(N, N);
    }
    lm.QN.noalias() = lm.Qtilde * lm.N;
    lm.H.noalias() = lm.N.transpose() * lm.QN;
    lm.H = 0.5 * (lm.H + lm.H.transpose()).eval();
    lm.g.noalias() = lm.N.transpose() * lm.ctilde;
}

LocalModel build_local(const GeneralForm& form, const VectorXd& x, double lambda, double p,
                       bool require_full_rank) {
    LocalModel lm;
    rebuild_local(lm, form, x, lambda, p, require_full_rank);
    return lm;
}

// With `lazy`, the eigenvalue part is skipped (margin NaN); see second_order().
KKTCertificate certify_local(LocalModel& lm, const VectorXd* y_given, double eps, bool lazy = false) {
    KKTCertificate cert;
    cert.eps_used = eps;
    const Index P = lm.AX.rows();
    if (y_given != nullptr) {
        cert.y = *y_given;
    } else if (P > 0) {
        cert.y = lm.qr.solve(lm.ctilde);
    } else {
        cert.y = VectorXd(0);
    }
    const VectorXd resid = P > 0 ? (lm.ctilde - lm.AX.transpose() * cert.y).eval() : lm.ctilde;
    cert.first_order_residual = resid.norm();
    if (lazy) {
        cert.second_order_margin = std::numeric_limits<double>::quiet_NaN();
        return cert;
    }
    lm.ensure_eig();
    cert.second_order_margin = lm.eigenvalues.size() > 0
                                   ? lm.eigenvalues(0) + std::sqrt(eps)
                                   : std::numeric_limits<double>::infinity();
    return cert;
}

void second_order(LocalModel& lm, KKTCertificate& cert) {
    lm.ensure_eig();
    cert.second_order_margin = lm.eigenvalues.size() > 0
                                   ? lm.eigenvalues(0) + std::sqrt(cert.eps_used)
                                   : std::numeric_limits<double>::infinity();
}

void check_feasible_point(const GeneralForm& form, const VectorXd& x) {
    if (x.size() != form.dim()) {
        fail(ErrorKind::Config, fmt::format("start point has {} entries, form has {} variables",
                                            x.size(), form.dim()));
    }
    if (!(x.array() > 0.0).all()) fail(ErrorKind::Config, "start point must be strictly positive");
    const double resid = (form.A * x - form.b).cwiseAbs().maxCoeff();
    if (resid > 1e-9 * (1.0 + form.b.cwiseAbs().maxCoeff())) {
        fail(ErrorKind::Config, fmt::format("start point violates Ax = b by {:.3g}", resid));
    }
}

void check_lp_params(double lambda, double p) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        fail(ErrorKind::Spec, fmt::format("lambda must be >= 0, got {}", lambda));
    }
    if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::Spec, fmt::format("p must lie in (0,1), got {}", p));
}

}  // namespace

KKTCertificate certify(const GeneralForm& form, const VectorXd& x, double lambda, double p,
                       double eps) {
    check_lp_params(lambda, p);
    if (x.size() != form.dim() || (x.array() < 0.0).any()) {
        fail(ErrorKind::Domain, "certificate requires a nonnegative point of matching size");
    }
    LocalModel lm = build_local(form, x, lambda, p, false);
    return certify_local(lm, nullptr, eps);
}

KKTCertificate certify(const GeneralForm& form, const VectorXd& x, const VectorXd& y,
                       double lambda, double p, double eps) {
    check_lp_params(lambda, p);
    if (x.size() != form.dim() || (x.array() < 0.0).any()) {
        fail(ErrorKind::Domain, "certificate requires a nonnegative point of matching size");
    }
    if (y.size() != form.rows()) {
        fail(ErrorKind::Domain, fmt::format("dual has {} entries for {} rows", y.size(), form.rows()));
    }
    LocalModel lm = build_local(form, x, lambda, p, false);
    return certify_local(lm, &y, eps);
}

SolveResult solve(const GeneralForm& form, double lambda, double p, const SolverConfig& config) {
    check_lp_params(lambda, p);
    if (!(config.eps > 0.0 && config.eps <= 1.0)) {
        fail(ErrorKind::Config, fmt::format("eps must lie in (0,1], got {}", config.eps));
    }
    if (!(config.beta > 0.0)) fail(ErrorKind::Config, "beta must be positive");
    if (config.max_iters < 0) fail(ErrorKind::Config, "max_iters must be nonnegative");
    if (!(config.zero_threshold >= 0.0)) fail(ErrorKind::Config, "zero threshold must be >= 0");

    double beta = config.beta;
    if (lambda > 0.0) {
        const double bound = admissible_beta_bound(lambda);
        if (beta > bound) {
            spdlog::warn("beta {} exceeds the admissible bound {:.6g} for lambda {}; clamping",
                         beta, bound, lambda);
            beta = bound;
        }
    }
    const double radius0 = beta * std::sqrt(config.eps);
    if (!(radius0 < 1.0)) fail(ErrorKind::Config, "beta^2 * eps must be below 1");

    SolveResult result;
    result.beta_used = beta;
    result.eps = config.eps;

    VectorXd x = config.start ? *config.start : form.interior;
    check_feasible_point(form, x);
    double f = objective(form, x, lambda, p);
    result.initial_objective = f;

    const bool p_half_penalized = lambda > 0.0 && p == 0.5;
    const double collapse_rate = 0.5 / std::sqrt(static_cast<double>(std::max<Index>(form.dim(), 1)));

    LocalModel lm = build_local(form, x, lambda, p, true);
    KKTCertificate cert = certify_local(lm, nullptr, config.eps, true);
    if (cert.first_order_ok()) second_order(lm, cert);
    Termination termination = Termination::MaxIterations;
    bool done = cert.certified();
    if (done) termination = Termination::Certificate;

    double radius = radius0;
    double last_mu = 0.0;
    int iter = 0;
    while (!done && iter < config.max_iters) {
        ++iter;
        ReducedTRSolution step;
        if (!solve_reduced_tr_cholesky(lm.H, lm.g, radius, last_mu, step)) {
            lm.ensure_eig();
            step = solve_reduced_tr(lm.eigenvalues, lm.eigenvectors, lm.g, radius, &lm.N);
        }
        last_mu = step.mu;
        const VectorXd d = lm.N * step.v;
        const double dn = d.norm();
        if (dn <= 1e-12) {
            termination = Termination::Stationary;
            break;
        }
        const VectorXd xn = x.cwiseProduct((VectorXd::Ones(x.size()) + d));
        const double fn = objective(form, xn, lambda, p);

        double max_pen = 0.0;
        for (Index j : form.reg_set) max_pen = std::max(max_pen, x(j));
        const bool small_mu = p_half_penalized && step.mu <= lambda / 6.0 * dn;
        const bool decrease_bound = p_half_penalized && !small_mu && max_pen <= 1.0;
        const bool guaranteed_descent = lambda == 0.0 || decrease_bound;

        if (fn > f + 1e-12 * std::max(1.0, std::abs(f))) {
            if (guaranteed_descent) {
                fail(ErrorKind::InternalConsistency,
                     fmt::format("objective increased from {:.17g} to {:.17g} at iteration {}", f,
                                 fn, iter));
            }
            ++result.rejected_steps;
            radius *= 0.5;
            if (radius < 1e-14 * radius0) {
                termination = Termination::Stationary;
                break;
            }
            continue;
        }

        x = xn;
        f = fn;
        result.trace.push_back(TraceEntry{fn, step.mu, dn, decrease_bound});
        rebuild_local(lm, form, x, lambda, p, true);
        cert = certify_local(lm, nullptr, config.eps, true);

        if (cert.first_order_ok()) {
            // Keep going while a coordinate above the zero threshold is still
            // being driven down at a sizable fraction of the trust radius.
            bool settled = true;
            for (Index j = 0; j < x.size(); ++j) {
                if (x(j) > config.zero_threshold && d(j) < -collapse_rate * radius) {
                    settled = false;
                    break;
                }
            }
            if (small_mu || settled) {
                second_order(lm, cert);
                if (cert.certified()) {
                    termination = small_mu ? Termination::SmallMultiplier : Termination::Certificate;
                    done = true;
                }
            }
        }
        radius = radius0;
    }

    // Without a penalty, paired columns can share an arbitrary common amount;
    // strip it so that x+ and x- are complementary. The objective is unchanged.
    if (lambda == 0.0 && form.back_map.num_minus() > 0) {
        const BackMap& bm = form.back_map;
        const bool ball = form.variant == Variant::L1BallLp;
        for (Index k = 0; k < bm.num_minus(); ++k) {
            const Index i = bm.minus_assets[static_cast<std::size_t>(k)];
            const Index jm = bm.minus_offset() + k;
            const double common = std::min(x(i), x(jm));
            x(i) -= common;
            x(jm) -= common;
            if (ball) x(bm.slack_offset()) += 2.0 * common;
            if (bm.kind == BackMapKind::Dynamic) x(bm.slack_offset() + k) += common;
        }
        lm = build_local(form, x, lambda, p, false);
        cert = certify_local(lm, nullptr, config.eps);
        f = objective(form, x, lambda, p);
    } else if (std::isnan(cert.second_order_margin)) {
        cert = certify_local(lm, nullptr, config.eps);
    }

    result.x = x;
    result.y = cert.y;
    result.kkt1_residual = cert.first_order_residual;
    result.kkt2_margin = cert.second_order_margin;
    result.certified = cert.certified();
    result.iterations = iter;
    result.objective = f;
    result.termination = termination;
    result.weights = truncate_weights(back_map(form, x), config.zero_threshold);
    result.support = support_of(result.weights, 0.0);
    if (!result.certified) {
        spdlog::warn("solver stopped ({}) after {} iterations without certificate "
                     "(residual {:.3g}, margin {:.3g})",
                     to_string(termination), iter, cert.first_order_residual,
                     cert.second_order_margin);
    }
    return result;
}

SolveResult solve(const ModelSpec& spec, const MarketEstimate& market, const SolverConfig& config) {
    const GeneralForm form = build_general_form(spec, market);
    return solve(form, spec.effective_lambda(), spec.p, config);
}

double calibrate_phi(const MarketEstimate& market, double m0, Variant variant) {
    const Index n = market.size();
    const bool nonneg = !allows_short(variant);
    const VectorXd& m = market.mean;
    if (!std::isfinite(m0)) fail(ErrorKind::Spec, "target return must be finite");
    if (nonneg && m0 > m.maxCoeff()) {
        fail(ErrorKind::Infeasible,
             fmt::format("target return {} exceeds the largest mean {}", m0, m.maxCoeff()));
    }

    QpProblem base;
    base.Q = market.cov;
    base.c = VectorXd::Zero(n);
    base.A_eq = MatrixXd::Ones(1, n);
    base.b_eq = VectorXd::Ones(1);
    base.nonneg = nonneg;
    const QpSolution gmv = solve_convex_qp(base);
    if (m.dot(gmv.x) >= m0 - 1e-12 * std::max(1.0, std::abs(m0))) return 0.0;

    // The return constraint binds: solve with it as an equality and read its multiplier.
    if (!nonneg && (m.array() == m(0)).all()) {
        fail(ErrorKind::Infeasible, "target return is unattainable with identical means");
    }
    QpProblem bound = base;
    bound.A_eq = MatrixXd(2, n);
    bound.A_eq.row(0).setOnes();
    bound.A_eq.row(1) = m.transpose();
    bound.b_eq = VectorXd(2);
    bound.b_eq << 1.0, m0;
    const QpSolution sol = solve_convex_qp(bound);
    return std::max(0.0, sol.y(1));
}

}  // namespace sparseport
