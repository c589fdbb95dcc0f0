#include "sparseport/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "sparseport/error.hpp"
#include "sparseport/model.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd select_cols(const MatrixXd& A, const std::vector<Index>& cols) {
    MatrixXd out(A.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = A.col(cols[k]);
    return out;
}

MatrixXd select_block(const MatrixXd& Q, const std::vector<Index>& idx) {
    const Index k = static_cast<Index>(idx.size());
    MatrixXd out(k, k);
    for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) out(a, b) = Q(idx[a], idx[b]);
    }
    return out;
}

// Orthonormal basis of {p : A p = 0}.
MatrixXd kernel(const MatrixXd& A, Index n) {
    if (A.rows() == 0) return MatrixXd::Identity(n, n);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
    qr.setThreshold(1e-12);
    const Index r = qr.rank();
    const MatrixXd Qf = qr.householderQ();
    return Qf.rightCols(n - r);
}

VectorXd min_norm_ls(const MatrixXd& A, const VectorXd& b) {
    if (A.rows() == 0 || A.cols() == 0) return VectorXd::Zero(A.cols());
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
    cod.setThreshold(1e-12);
    return cod.solve(b);
}

struct EqpStep {
    VectorXd p;
    bool ray = false;  // p is a descent direction of zero curvature
};

// min 1/2 p'Hp + g'p s.t. A p = 0, over a PSD reduced Hessian.
EqpStep eqp_step(const MatrixXd& H, const VectorXd& g, const MatrixXd& A, double scale) {
    const Index n = H.rows();
    EqpStep out;
    out.p = VectorXd::Zero(n);
    const MatrixXd Z = kernel(A, n);
    if (Z.cols() == 0) return out;
    MatrixXd Hr = Z.transpose() * H * Z;
    Hr = 0.5 * (Hr + Hr.transpose()).eval();
    const VectorXd gr = Z.transpose() * g;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Hr);
    if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "eigendecomposition failed in QP");
    const VectorXd& ev = es.eigenvalues();
    const MatrixXd& U = es.eigenvectors();
    const double tol = 1e-11 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    const double gtol = 1e-12 * scale;
    VectorXd v = VectorXd::Zero(Z.cols());
    for (Index k = 0; k < ev.size(); ++k) {
        const double comp = U.col(k).dot(gr);
        if (ev(k) <= tol && std::abs(comp) > gtol) {
            out.ray = true;
            out.p = -(comp > 0 ? 1.0 : -1.0) * (Z * U.col(k));
            return out;
        }
    }
    for (Index k = 0; k < ev.size(); ++k) {
        if (ev(k) > tol) v -= (U.col(k).dot(gr) / ev(k)) * U.col(k);
    }
    out.p = Z * v;
    return out;
}

double qp_objective(const QpProblem& pr, const VectorXd& x) {
    return 0.5 * x.dot(pr.Q * x) - pr.c.dot(x);
}

void check_problem(const QpProblem& pr) {
    const Index n = pr.Q.rows();
    if (pr.Q.cols() != n || pr.c.size() != n) fail(ErrorKind::Spec, "QP dimensions mismatch");
    if (pr.A_eq.rows() != pr.b_eq.size() || (pr.A_eq.rows() > 0 && pr.A_eq.cols() != n)) {
        fail(ErrorKind::Spec, "QP equality rows mismatch");
    }
    if (!pr.Q.allFinite() || !pr.c.allFinite() || !pr.A_eq.allFinite() || !pr.b_eq.allFinite()) {
        fail(ErrorKind::Spec, "QP data must be finite");
    }
}

}  // namespace

VectorXd nnls(const MatrixXd& A, const VectorXd& b) {
    const Index n = A.cols();
    VectorXd x = VectorXd::Zero(n);
    if (n == 0 || A.rows() == 0) return x;
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-13 * std::max(1.0, A.cwiseAbs().maxCoeff()) *
                       std::max(1.0, b.cwiseAbs().maxCoeff()) * static_cast<double>(n);
    const int max_outer = static_cast<int>(3 * n + 10);
    for (int outer = 0; outer < max_outer; ++outer) {
        VectorXd w = A.transpose() * (b - A * x);
        Index j_best = -1;
        double w_best = tol;
        for (Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > w_best) {
                w_best = w(j);
                j_best = j;
            }
        }
        if (j_best < 0) break;
        passive[static_cast<std::size_t>(j_best)] = true;
        for (int inner = 0; inner < 3 * n + 10; ++inner) {
            std::vector<Index> P;
            for (Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)]) P.push_back(j);
            }
            const VectorXd sP = min_norm_ls(select_cols(A, P), b);
            VectorXd s = VectorXd::Zero(n);
            for (std::size_t k = 0; k < P.size(); ++k) s(P[k]) = sP(static_cast<Index>(k));
            bool all_pos = true;
            double alpha = 1.0;
            for (Index j : P) {
                if (s(j) <= 0.0) {
                    all_pos = false;
                    alpha = std::min(alpha, x(j) / (x(j) - s(j)));
                }
            }
            if (all_pos) {
                x = s;
                break;
            }
            x += alpha * (s - x);
            for (Index j : P) {
                if (x(j) <= 1e-15) {
                    x(j) = 0.0;
                    passive[static_cast<std::size_t>(j)] = false;
                }
            }
        }
    }
    return x;
}

QpSolution solve_convex_qp(const QpProblem& pr) {
    check_problem(pr);
    const Index n = pr.Q.rows();
    const Index m = pr.A_eq.rows();
    const double scale = std::max({1.0, pr.Q.cwiseAbs().maxCoeff(), pr.c.cwiseAbs().maxCoeff()});
    const double feas_tol = 1e-9 * (1.0 + (m > 0 ? pr.b_eq.cwiseAbs().maxCoeff() : 0.0));
    const MatrixXd A = m > 0 ? pr.A_eq : MatrixXd(0, n);

    VectorXd x;
    if (pr.start) {
        x = *pr.start;
        if (x.size() != n) fail(ErrorKind::Spec, "QP start has wrong size");
        if (pr.nonneg && (x.array() < 0.0).any()) fail(ErrorKind::Spec, "QP start must be >= 0");
    } else if (pr.nonneg) {
        x = nnls(A, pr.b_eq);
    } else {
        x = min_norm_ls(A, pr.b_eq);
    }
    if (m > 0 && (A * x - pr.b_eq).cwiseAbs().maxCoeff() > feas_tol) {
        fail(ErrorKind::Infeasible, "QP equality constraints have no feasible point");
    }

    QpSolution sol;
    if (!pr.nonneg) {
        const VectorXd g = pr.Q * x - pr.c;
        const EqpStep st = eqp_step(pr.Q, g, A, scale);
        if (st.ray) fail(ErrorKind::Unbounded, "QP objective is unbounded below");
        x += st.p;
        sol.x = x;
        const VectorXd g1 = pr.Q * x - pr.c;
        sol.y = m > 0 ? min_norm_ls(A.transpose(), g1) : VectorXd(0);
        sol.z = VectorXd::Zero(n);
        sol.objective = qp_objective(pr, x);
        sol.iterations = 1;
        return sol;
    }

    std::vector<bool> working(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
        working[static_cast<std::size_t>(j)] = x(j) <= 0.0;
        if (x(j) <= 0.0) x(j) = 0.0;
    }
    const double ztol = 1e-10 * scale;
    const int max_iters = static_cast<int>(50 * (n + m) + 1000);
    int it = 0;
    for (; it < max_iters; ++it) {
        std::vector<Index> F;
        for (Index j = 0; j < n; ++j) {
            if (!working[static_cast<std::size_t>(j)]) F.push_back(j);
        }
        const VectorXd g = pr.Q * x - pr.c;
        VectorXd gF(static_cast<Index>(F.size()));
        for (std::size_t k = 0; k < F.size(); ++k) gF(static_cast<Index>(k)) = g(F[k]);
        const MatrixXd AF = select_cols(A, F);
        const EqpStep st = eqp_step(select_block(pr.Q, F), gF, AF, scale);

        VectorXd p = VectorXd::Zero(n);
        for (std::size_t k = 0; k < F.size(); ++k) p(F[k]) = st.p(static_cast<Index>(k));

        if (!st.ray && p.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
            const VectorXd y = m > 0 ? min_norm_ls(AF.transpose(), gF) : VectorXd(0);
            const VectorXd z = m > 0 ? (g - A.transpose() * y).eval() : g;
            Index release = -1;
            for (Index j = 0; j < n; ++j) {
                if (working[static_cast<std::size_t>(j)] && z(j) < -ztol) {
                    release = j;  // smallest index, for anti-cycling
                    break;
                }
            }
            if (release < 0) {
                sol.x = x;
                sol.y = y;
                sol.z = z;
                sol.objective = qp_objective(pr, x);
                sol.iterations = it + 1;
                return sol;
            }
            working[static_cast<std::size_t>(release)] = false;
            continue;
        }

        double alpha = st.ray ? std::numeric_limits<double>::infinity() : 1.0;
        Index blocking = -1;
        for (Index j : F) {
            if (p(j) < 0.0) {
                const double r = -x(j) / p(j);
                if (r < alpha) {
                    alpha = r;
                    blocking = j;
                }
            }
        }
        if (!std::isfinite(alpha)) fail(ErrorKind::Unbounded, "QP objective is unbounded below");
        x += alpha * p;
        for (Index j : F) {
            if (x(j) < 0.0) x(j) = 0.0;
        }
        if (blocking >= 0) {
            x(blocking) = 0.0;
            working[static_cast<std::size_t>(blocking)] = true;
        }
    }
    fail(ErrorKind::Numerical, fmt::format("active-set QP did not converge in {} iterations", it));
}

CcpsResult solve_ccps(const MarketEstimate& market, double phi, int K, int n_limit) {
    const Index n = market.size();
    if (K < 1) fail(ErrorKind::Spec, fmt::format("cardinality K must be >= 1, got {}", K));
    if (n > n_limit) {
        fail(ErrorKind::Size, fmt::format("{} assets exceed the enumeration limit {}", n, n_limit));
    }
    if (!std::isfinite(phi) || phi < 0.0) fail(ErrorKind::Spec, "phi must be >= 0");
    const int kmax = static_cast<int>(std::min<Index>(K, n));

    CcpsResult res;
    res.objective = std::numeric_limits<double>::infinity();
    const VectorXd c = phi * market.mean;
    for (int k = 1; k <= kmax; ++k) {
        std::vector<Index> S(static_cast<std::size_t>(k));
        for (int a = 0; a < k; ++a) S[static_cast<std::size_t>(a)] = a;
        while (true) {
            QpProblem pr;
            pr.Q = select_block(market.cov, S);
            pr.c = VectorXd(k);
            for (int a = 0; a < k; ++a) pr.c(a) = c(S[static_cast<std::size_t>(a)]);
            pr.A_eq = MatrixXd::Ones(1, k);
            pr.b_eq = VectorXd::Ones(1);
            pr.nonneg = true;
            pr.start = VectorXd::Constant(k, 1.0 / k);
            const QpSolution qs = solve_convex_qp(pr);
            const double tie = 1e-12 * std::max(1.0, std::abs(res.objective));
            if (!std::isfinite(res.objective) || qs.objective < res.objective - tie) {
                res.objective = qs.objective;
                res.weights = VectorXd::Zero(n);
                res.best_support.clear();
                for (int a = 0; a < k; ++a) {
                    const double w = qs.x(a);
                    res.weights(S[static_cast<std::size_t>(a)]) = w;
                    if (w > 0.0) res.best_support.push_back(S[static_cast<std::size_t>(a)]);
                }
            }
            // next combination in lexicographic order
            int a = k - 1;
            while (a >= 0 && S[static_cast<std::size_t>(a)] == n - k + a) --a;
            if (a < 0) break;
            ++S[static_cast<std::size_t>(a)];
            for (int b = a + 1; b < k; ++b) {
                S[static_cast<std::size_t>(b)] = S[static_cast<std::size_t>(b - 1)] + 1;
            }
        }
        res.per_k_frontier.push_back(res.objective);
        res.per_k_support.push_back(res.best_support);
    }
    for (int k = kmax + 1; k <= K; ++k) {
        res.per_k_frontier.push_back(res.objective);
        res.per_k_support.push_back(res.best_support);
    }
    return res;
}

ComparisonReport lp_vs_ccps_report(const MarketEstimate& market, double phi,
                                   const std::vector<double>& lambda_grid,
                                   const std::vector<int>& k_grid, const SolverConfig& config,
                                   int n_limit) {
    const Index n = market.size();
    if (n > n_limit) {
        fail(ErrorKind::Size, fmt::format("{} assets exceed the enumeration limit {}", n, n_limit));
    }
    ComparisonReport rep;
    const auto unreg = [&](const VectorXd& w) {
        return 0.5 * w.dot(market.cov * w) - phi * market.mean.dot(w);
    };
    for (double lambda : lambda_grid) {
        ModelSpec spec;
        spec.variant = Variant::LpNoShort;
        spec.lambda = lambda;
        spec.phi = phi;
        const SolveResult sr = solve(spec, market, config);
        ComparisonRow row;
        row.lambda = lambda;
        row.lp_certified = sr.certified;
        const VectorXd& w = sr.weights;
        row.lp_sparsity = static_cast<int>(sr.support.size());
        row.lp_mean = market.mean.dot(w);
        row.lp_var = w.dot(market.cov * w);
        row.lp_objective = unreg(w);
        const CcpsResult cc = solve_ccps(market, phi, std::max(row.lp_sparsity, 1), n_limit);
        row.ccps_sparsity = static_cast<int>(cc.best_support.size());
        row.ccps_mean = market.mean.dot(cc.weights);
        row.ccps_var = cc.weights.dot(market.cov * cc.weights);
        row.ccps_objective = cc.objective;
        row.objective_gap =
            (row.lp_objective - row.ccps_objective) / std::max(std::abs(row.ccps_objective), 1e-12);
        row.variance_gap = row.lp_var - row.ccps_var;
        rep.rows.push_back(row);
    }
    rep.k_grid = k_grid;
    for (int k : k_grid) rep.k_frontier.push_back(solve_ccps(market, phi, k, n_limit).objective);
    return rep;
}

std::string format_comparison(const ComparisonReport& report) {
    std::ostringstream os;
    os << "lambda,lp_sparsity,lp_mean,lp_var,lp_objective,ccps_sparsity,ccps_mean,ccps_var,"
          "ccps_objective,objective_gap,variance_gap\n";
    for (const auto& r : report.rows) {
        os << fmt::format("{:.17g},{},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                          r.lambda, r.lp_sparsity, r.lp_mean, r.lp_var, r.lp_objective,
                          r.ccps_sparsity, r.ccps_mean, r.ccps_var, r.ccps_objective,
                          r.objective_gap, r.variance_gap);
    }
    if (!report.k_grid.empty()) {
        os << "# ccps_frontier: K,objective\n";
        for (std::size_t i = 0; i < report.k_grid.size(); ++i) {
            os << fmt::format("# {},{:.17g}\n", report.k_grid[i], report.k_frontier[i]);
        }
    }
    return os.str();
}

}  // namespace sparseport
