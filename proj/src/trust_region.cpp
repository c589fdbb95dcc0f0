#include "sparseport/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparseport/error.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd null_space_basis(const MatrixXd& AX) {
    const Index P = AX.rows();
    const Index N = AX.cols();
    if (P == 0) return MatrixXd::Identity(N, N);
    if (P > N) fail(ErrorKind::DegenerateConstraints, "more constraint rows than variables");
    Eigen::ColPivHouseholderQR<MatrixXd> qr(AX.transpose());
    if (qr.rank() < P) {
        fail(ErrorKind::DegenerateConstraints, "scaled constraint matrix is rank deficient");
    }
    const MatrixXd Qfull = qr.householderQ();
    return Qfull.rightCols(N - P);
}

VectorXd recover_dual(const MatrixXd& AX, const VectorXd& rhs) {
    if (AX.rows() == 0) return VectorXd(0);
    return AX.transpose().colPivHouseholderQr().solve(rhs);
}

double tr_model_value(const MatrixXd& H, const VectorXd& g, const VectorXd& v) {
    return 0.5 * v.dot(H * v) + g.dot(v);
}

namespace {

// Everything below works in the eigenbasis of H, where the model is separable:
// q(w) = sum_j 1/2 lambda_j w_j^2 + gamma_j w_j.
struct Secular {
    const VectorXd& lam;
    const VectorXd& gam;

    double norm_sq(double mu) const {
        double s = 0.0;
        for (Index j = 0; j < lam.size(); ++j) {
            const double den = lam(j) + mu;
            s += gam(j) * gam(j) / (den * den);
        }
        return s;
    }
    double dnorm_sq_term(double mu) const {  // sum gamma^2 / (lambda + mu)^3
        double s = 0.0;
        for (Index j = 0; j < lam.size(); ++j) {
            const double den = lam(j) + mu;
            s += gam(j) * gam(j) / (den * den * den);
        }
        return s;
    }
    VectorXd step(double mu) const {
        return (-gam.array() / (lam.array() + mu)).matrix();
    }
};

double model_value(const VectorXd& lam, const VectorXd& gam, const VectorXd& w) {
    return (0.5 * lam.array() * w.array().square() + gam.array() * w.array()).sum();
}

// Moves w onto the sphere ||w|| = radius along eigen-direction 0 and picks the
// lower-model root; ties are resolved by the sign of the full-space direction.
void push_to_boundary(VectorXd& w, const VectorXd& lam, const VectorXd& gam, double radius,
                      const MatrixXd& V, const MatrixXd* basis) {
    const double wz = w(0);
    const double rest = w.squaredNorm() - wz * wz;
    const double t_abs = std::sqrt(std::max(radius * radius - rest, 0.0));
    VectorXd wp = w, wm = w;
    wp(0) = t_abs;
    wm(0) = -t_abs;
    const double qp = model_value(lam, gam, wp);
    const double qm = model_value(lam, gam, wm);
    const double scale = std::max({std::abs(qp), std::abs(qm), 1e-300});
    if (std::abs(qp - qm) > 1e-13 * scale) {
        w = qp < qm ? wp : wm;
        return;
    }
    VectorXd dir = V.col(0);
    if (basis != nullptr) dir = (*basis * dir).eval();
    Index k = 0;
    dir.cwiseAbs().maxCoeff(&k);
    w = dir(k) >= 0.0 ? wp : wm;
}

}  // namespace

ReducedTRSolution solve_reduced_tr(const VectorXd& lam, const MatrixXd& V, const VectorXd& g,
                                   double radius, const MatrixXd* basis) {
    ReducedTRSolution out;
    const Index k = lam.size();
    if (k == 0) {
        out.v = VectorXd(0);
        return out;
    }
    if (!(radius > 0.0)) fail(ErrorKind::Numerical, "trust radius must be positive");

    const VectorXd gam = V.transpose() * g;
    const double gnorm = gam.norm();
    const double lam_scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    const double tol_eig = 1e-12 * lam_scale;
    const double lam1 = lam(0);
    out.negative_curvature = lam1 < -tol_eig;

    double lead_sq = 0.0;
    Index lead_end = 0;
    while (lead_end < k && lam(lead_end) <= lam1 + tol_eig) {
        lead_sq += gam(lead_end) * gam(lead_end);
        ++lead_end;
    }
    const bool lead_orthogonal = std::sqrt(lead_sq) <= 1e-13 * std::max(gnorm, 1e-300) ||
                                 lead_sq == 0.0;

    // Minimum-norm step over the non-leading eigenspace with the leading
    // eigenvalue shifted to zero.
    auto shifted_step = [&](double shift) {
        VectorXd w = VectorXd::Zero(k);
        for (Index j = lead_end; j < k; ++j) w(j) = -gam(j) / (lam(j) + shift);
        return w;
    };

    // Interior candidates (mu = 0) when H is positive semidefinite.
    if (lam1 > tol_eig) {
        VectorXd w = (-gam.array() / lam.array()).matrix();
        if (w.norm() <= radius) {
            out.v = V * w;
            return out;
        }
    } else if (lam1 >= -tol_eig && lead_orthogonal) {
        VectorXd w = shifted_step(0.0);
        if (w.norm() <= radius) {
            out.v = V * w;
            return out;
        }
    }

    const double lo = std::max(0.0, -lam1);
    if (lead_orthogonal && lam1 <= tol_eig) {
        VectorXd w = shifted_step(-lam1);
        if (w.norm() <= radius) {
            out.hard_case = true;
            out.mu = lo;
            push_to_boundary(w, lam, gam, radius, V, basis);
            out.v = V * w;
            return out;
        }
    }

    // Boundary solution: safeguarded Newton on 1/||w(mu)|| - 1/radius.
    const Secular sec{lam, gam};
    double a = lo;
    double b = std::max(gnorm / radius - lam1, lo + 1e-300);
    while (sec.norm_sq(b) > radius * radius) b = lo + 2.0 * (b - lo);  // guards rounding
    double mu = b;
    const double r2 = radius * radius;
    for (int it = 0; it < 500; ++it) {
        const double ns = sec.norm_sq(mu);
        const double nrm = std::sqrt(ns);
        if (std::abs(nrm - radius) <= 1e-15 * radius) break;
        if (ns > r2) a = mu; else b = mu;
        if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(b, 1e-300)) break;
        const double dpsi = sec.dnorm_sq_term(mu) / (ns * nrm);
        double next = mu - (1.0 / nrm - 1.0 / radius) / dpsi;
        if (!(next > a && next < b) || !std::isfinite(next)) next = 0.5 * (a + b);
        mu = next;
    }
    VectorXd w = sec.step(mu);
    if (std::abs(w.norm() - radius) > 1e-12 * radius) {
        // Nearly-hard case: the secular function is too steep to resolve in
        // floating point; take the inside end and reach the sphere along the
        // leading eigenvector, which costs a residual of order (lambda_1 + mu).
        mu = b;
        w = sec.step(mu);
        if (w.norm() > radius) w *= radius / w.norm();
        push_to_boundary(w, lam, gam, radius, V, basis);
    }
    out.mu = mu;
    out.v = V * w;
    return out;
}

ReducedTRSolution solve_reduced_tr(const MatrixXd& H, const VectorXd& g, double radius,
                                   const MatrixXd* basis) {
    if (H.rows() == 0) return solve_reduced_tr(VectorXd(0), MatrixXd(0, 0), g, radius, basis);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
    if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "eigendecomposition failed");
    return solve_reduced_tr(es.eigenvalues(), es.eigenvectors(), g, radius, basis);
}

bool solve_reduced_tr_cholesky(const MatrixXd& H, const VectorXd& g, double radius, double mu_hint,
                               ReducedTRSolution& out) {
    const Index n = H.rows();
    const double gn = g.norm();
    if (n == 0 || gn == 0.0 || !(radius > 0.0)) return false;
    const double hnorm = H.cwiseAbs().rowwise().sum().maxCoeff();
    Eigen::LLT<MatrixXd> llt;
    VectorXd p;
    const auto accept = [&](double mu) {
        // Backward-stable solve: insist on a small residual before trusting it.
        const VectorXd r = H * p + mu * p + g;
        if (r.norm() > 1e-10 * (gn + (hnorm + mu) * p.norm())) return false;
        out.v = p;
        out.mu = mu;
        out.negative_curvature = false;
        out.hard_case = false;
        return true;
    };

    llt.compute(H);
    const bool pd = llt.info() == Eigen::Success;
    if (pd) {
        p = llt.solve(-g);
        if (p.norm() <= radius) return accept(0.0);
    }
    double lo = 0.0;  // the boundary multiplier lies strictly above lo
    double hi = gn / radius + hnorm;
    double mu = std::clamp(mu_hint, lo, hi);
    if (mu <= lo) mu = pd ? std::min(hi, gn / radius) : std::min(hi, hnorm);
    for (int it = 0; it < 60; ++it) {
        llt.compute(H + mu * MatrixXd::Identity(n, n));
        if (llt.info() != Eigen::Success) {
            lo = mu;
            mu = 0.5 * (lo + hi);
            continue;
        }
        p = llt.solve(-g);
        const double pn = p.norm();
        if (std::abs(pn - radius) <= 1e-12 * radius) return accept(mu);
        if (pn < radius) {
            hi = mu;
        } else {
            lo = mu;
        }
        if (hi - lo <= 1e-15 * std::max(1.0, hi)) return false;
        const VectorXd q = llt.matrixL().solve(p);
        const double qn = q.norm();
        double next = mu + (pn / qn) * (pn / qn) * (pn - radius) / radius;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        mu = next;
    }
    return false;
}

TRSolution solve_tr(const Subproblem& sub) {
    const MatrixXd N = null_space_basis(sub.AX);
    const MatrixXd H = N.transpose() * sub.Qtilde * N;
    const VectorXd g = N.transpose() * sub.ctilde;
    const ReducedTRSolution red = solve_reduced_tr(0.5 * (H + H.transpose()), g, sub.radius, &N);

    TRSolution out;
    out.dtilde = N * red.v;
    out.mu = red.mu;
    out.negative_curvature = red.negative_curvature;
    out.hard_case = red.hard_case;
    const VectorXd rhs = sub.Qtilde * out.dtilde + out.mu * out.dtilde + sub.ctilde;
    out.y = recover_dual(sub.AX, rhs);
    return out;
}

}  // namespace sparseport
