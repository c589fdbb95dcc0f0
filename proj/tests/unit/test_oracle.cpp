#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "sparseport/error.hpp"
#include "sparseport/oracle.hpp"
#include "sparseport/toy.hpp"
#include "support.hpp"

using namespace sparseport;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

QpProblem simplex_problem(const MatrixXd& Q, const VectorXd& c) {
    QpProblem qp;
    qp.Q = Q;
    qp.c = c;
    qp.A_eq = MatrixXd::Ones(1, Q.rows());
    qp.b_eq = VectorXd::Ones(1);
    return qp;
}

VectorXd project_simplex(const VectorXd& v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double acc = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        acc += u[k];
        const double t = (acc - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0) theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0);
}

// Accelerated projected gradient on the simplex.
VectorXd projected_gradient(const MatrixXd& Q, const VectorXd& c) {
    const Index n = Q.rows();
    const double step = 1.0 / Eigen::SelfAdjointEigenSolver<MatrixXd>(Q).eigenvalues().maxCoeff();
    VectorXd x = VectorXd::Constant(n, 1.0 / static_cast<double>(n)), z = x;
    double t = 1.0;
    for (int k = 0; k < 200000; ++k) {
        const VectorXd xn = project_simplex(z - step * (Q * z - c));
        const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        z = xn + (t - 1) / tn * (xn - x);
        if ((xn - x).norm() < 1e-15) {
            x = xn;
            break;
        }
        x = xn;
        t = tn;
    }
    return x;
}

void check_kkt(const QpProblem& qp, const QpSolution& s) {
    const VectorXd stat = qp.Q * s.x - qp.c - qp.A_eq.transpose() * s.y - s.z;
    CHECK(stat.norm() <= 1e-10 * (1 + qp.c.norm() + qp.Q.norm()));
    CHECK((qp.A_eq * s.x - qp.b_eq).norm() <= 1e-10);
    if (qp.nonneg) {
        CHECK(s.x.minCoeff() >= -1e-12);
        CHECK(s.z.minCoeff() >= -1e-10);
        CHECK(std::abs(s.z.dot(s.x)) <= 1e-10);
    } else {
        CHECK(s.z.norm() == 0.0);
    }
}

}  // namespace

TEST_CASE("convex qp basic cases") {
    const QpProblem sym = simplex_problem(MatrixXd::Identity(4, 4), VectorXd::Zero(4));
    const QpSolution a = solve_convex_qp(sym);
    CHECK((a.x - VectorXd::Constant(4, 0.25)).norm() < 1e-12);
    check_kkt(sym, a);

    const ToyInstance t1 = toy_instance(1);
    const QpProblem p1 = simplex_problem(t1.market.cov, t1.phi * t1.market.mean);
    const QpSolution b = solve_convex_qp(p1);
    CHECK(b.x(0) == doctest::Approx(0.3233).epsilon(1e-3));
    CHECK(b.x(1) == doctest::Approx(0.3333).epsilon(1e-3));
    CHECK(b.x(2) == doctest::Approx(0.3433).epsilon(1e-3));
    check_kkt(p1, b);
}

TEST_CASE("convex qp matches projected gradient") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        const MatrixXd Q = testsupport::random_psd(rng, 5, 5, 0.05);
        const VectorXd c = testsupport::random_vector(rng, 5, 0.5);
        const QpProblem qp = simplex_problem(Q, c);
        const QpSolution s = solve_convex_qp(qp);
        check_kkt(qp, s);
        CHECK((s.x - projected_gradient(Q, c)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("convex qp infeasible and unbounded") {
    QpProblem inf = simplex_problem(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
    inf.b_eq(0) = -1.0;
    try {
        solve_convex_qp(inf);
        FAIL("infeasible problem accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Infeasible);
    }
    QpProblem unb = simplex_problem(MatrixXd::Zero(2, 2), VectorXd::Ones(2));
    unb.c(1) = 0.0;
    unb.nonneg = false;
    try {
        solve_convex_qp(unb);
        FAIL("unbounded problem accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Unbounded);
    }
}

TEST_CASE("nnls optimality") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 10; ++trial) {
        const MatrixXd A = testsupport::random_matrix(rng, 6, 4);
        const VectorXd b = testsupport::random_vector(rng, 6);
        const VectorXd x = nnls(A, b);
        const VectorXd w = A.transpose() * (b - A * x);
        CHECK(x.minCoeff() >= 0.0);
        CHECK(w.maxCoeff() <= 1e-10);
        CHECK(std::abs(w.dot(x)) <= 1e-10);
    }
}

TEST_CASE("cardinality oracle on the fourth toy instance") {
    const ToyInstance t4 = toy_instance(4);
    CHECK(solve_ccps(t4.market, 0.01, 1).best_support == std::vector<Index>{0});
    CHECK(solve_ccps(t4.market, 0.01, 2).best_support == std::vector<Index>{2, 3});
    const CcpsResult k3 = solve_ccps(t4.market, 0.01, 3);
    CHECK(std::find(k3.best_support.begin(), k3.best_support.end(), 0) == k3.best_support.end());
    for (std::size_t k = 1; k < k3.per_k_frontier.size(); ++k)
        CHECK(k3.per_k_frontier[k] <= k3.per_k_frontier[k - 1]);
    CHECK(k3.weights.sum() == doctest::Approx(1.0));
    CHECK(k3.weights.minCoeff() >= 0.0);
}

TEST_CASE("cardinality oracle at K = n is the convex optimum") {
    std::mt19937_64 rng(107);
    const MarketEstimate mk = testsupport::random_market(rng, 6);
    const CcpsResult r = solve_ccps(mk, 0.8, 6);
    const QpSolution q = solve_convex_qp(simplex_problem(mk.cov, 0.8 * mk.mean));
    CHECK(r.objective == doctest::Approx(q.objective).epsilon(1e-12));
}

TEST_CASE("cardinality oracle against a simplex grid") {
    std::mt19937_64 rng(109);
    for (int trial = 0; trial < 3; ++trial) {
        const MarketEstimate mk = testsupport::random_market(rng, 3, 1.0);
        const int steps = 1000;
        double grid1 = 1e300, grid2 = 1e300, grid3 = 1e300;
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; i + j <= steps; ++j) {
                VectorXd x(3);
                x << i, j, steps - i - j;
                x /= steps;
                const double v = 0.5 * x.dot(mk.cov * x) - mk.mean.dot(x);
                const int nnz = (x.array() > 0).count();
                if (nnz <= 1) grid1 = std::min(grid1, v);
                if (nnz <= 2) grid2 = std::min(grid2, v);
                grid3 = std::min(grid3, v);
            }
        }
        const CcpsResult r = solve_ccps(mk, 1.0, 3);
        const double grids[] = {grid1, grid2, grid3};
        for (int k = 0; k < 3; ++k) {
            CHECK(r.per_k_frontier[k] <= grids[k] + 1e-12);
            CHECK(r.per_k_frontier[k] >= grids[k] - 1e-4);
        }
    }
}

TEST_CASE("cardinality oracle argument checks") {
    std::mt19937_64 rng(113);
    const MarketEstimate mk = testsupport::random_market(rng, 5);
    CHECK_THROWS_AS(solve_ccps(mk, 0.1, 0), Error);
    try {
        solve_ccps(mk, 0.1, 2, 4);
        FAIL("size limit ignored");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Size);
    }
}

TEST_CASE("lp versus cardinality comparison") {
    std::mt19937_64 rng(127);
    const MarketEstimate mk = testsupport::random_market(rng, 6);
    SolverConfig cfg;
    cfg.eps = 1e-6;
    const ComparisonReport rep = lp_vs_ccps_report(mk, 1.0, {0.0, 1e-3, 1e-2}, {1, 2}, cfg);
    REQUIRE(rep.rows.size() == 3);
    const QpSolution q = solve_convex_qp(simplex_problem(mk.cov, mk.mean));
    CHECK(rep.rows[0].lp_sparsity == static_cast<int>((q.x.array() > 1e-6).count()));
    CHECK(std::abs(rep.rows[0].objective_gap) < 1e-6);
    for (const ComparisonRow& row : rep.rows) CHECK(row.lp_objective >= row.ccps_objective - 1e-8);
    CHECK(rep.k_frontier.size() == 2);
    const std::string csv = format_comparison(rep);
    CHECK(csv.find("lambda") == 0);
}
