#include "sparseport/toy.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "sparseport/diagnostics.hpp"
#include "sparseport/error.hpp"
#include "sparseport/oracle.hpp"

namespace sparseport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ToyInstance toy_instance(int id) {
    ToyInstance t;
    t.id = id;
    VectorXd m;
    MatrixXd Q;
    switch (id) {
        case 1:
            m = VectorXd(3);
            m << 1, 2, 3;
            Q = MatrixXd(3, 3);
            Q << 2, 1, 1, 1, 2, 1, 1, 1, 2;
            break;
        case 2:
            m = VectorXd::Zero(3);
            Q = MatrixXd(3, 3);
            Q << 2, 0, 0, 0, 2, 1, 0, 1, 2;
            break;
        case 3:
            m = VectorXd(3);
            m << 1, 3, 2;
            Q = MatrixXd(3, 3);
            Q << 3, 1, 2, 1, 7, 4, 2, 4, 3;
            break;
        case 4:
            m = VectorXd::Zero(4);
            Q = MatrixXd(4, 4);
            Q << 8, 7, 6, 6, 7, 26, 6, 0, 6, 6, 96, -68, 6, 0, -68, 73;
            break;
        default:
            fail(ErrorKind::Spec, fmt::format("toy instance must be 1..4, got {}", id));
    }
    t.market = make_market(m, Q);
    return t;
}

ReturnsMatrix toy_returns(int id) {
    const ToyInstance t = toy_instance(id);
    const Index n = t.market.size();
    const Index T = n + 2;
    // Columns orthonormal to each other and to the constant vector.
    MatrixXd B(T, n + 1);
    B.col(0).setOnes();
    for (Index j = 0; j < n; ++j) {
        for (Index r = 0; r < T; ++r) B(r, j + 1) = std::cos(0.7 * static_cast<double>((j + 1) * (r + 1)));
    }
    const MatrixXd Qf = Eigen::HouseholderQR<MatrixXd>(B).householderQ();
    const MatrixXd U = Qf.block(0, 1, T, n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t.market.cov);
    const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const MatrixXd S = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    MatrixXd data = std::sqrt(static_cast<double>(T - 1)) * U * S;
    data.rowwise() += t.market.mean.transpose();
    std::vector<std::string> names;
    for (Index j = 0; j < n; ++j) names.push_back(fmt::format("s{}", j + 1));
    return make_returns(std::move(names), std::move(data));
}

std::string toy_report(int id) {
    const ToyInstance t = toy_instance(id);
    const Index n = t.market.size();
    QpProblem qp;
    qp.Q = t.market.cov;
    qp.c = t.phi * t.market.mean;
    qp.A_eq = MatrixXd::Ones(1, n);
    qp.b_eq = VectorXd::Ones(1);
    qp.nonneg = true;
    qp.start = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const QpSolution opt = solve_convex_qp(qp);
    const SparsityCosts costs = sparsity_costs(opt.x, t.market, t.phi, 1e-12);

    Index cheapest = 0;
    for (Index a = 1; a < costs.K; ++a) {
        if (costs.RSC(a) < costs.RSC(cheapest)) cheapest = a;
    }

    std::ostringstream os;
    os << fmt::format("toy {} (phi = {})\n", id, t.phi);
    os << fmt::format("{:>5} {:>8} {:>10} {:>10} {:>10} {:>11} {:>11}  {}\n", "asset", "mean", "x*",
                      "L", "RSC", "MCS", "drop_cost", "note");
    for (Index a = 0; a < costs.K; ++a) {
        const Index i = costs.support[static_cast<std::size_t>(a)];
        // Cost of removing asset i when the remaining weights are re-optimized.
        double drop_cost = std::nan("");
        if (costs.K >= 2) {
            QpProblem red = qp;
            red.A_eq = MatrixXd::Zero(2, n);
            red.A_eq.row(0).setOnes();
            red.A_eq(1, i) = 1.0;
            red.b_eq = VectorXd(2);
            red.b_eq << 1.0, 0.0;
            red.start.reset();
            drop_cost = solve_convex_qp(red).objective - opt.objective;
        }
        std::string note;
        if (a == cheapest) note = "cheapest";
        if (costs.L(a) <= 1e-9) note += note.empty() ? "droppable" : ",droppable";
        os << fmt::format("{:>5} {:>8.6g} {:>10.6g} {:>10.6g} {:>10.6g} {:>11.6g} {:>11.6g}  {}\n",
                          i + 1, t.market.mean(i), opt.x(i), costs.L(a), costs.RSC(a),
                          costs.MCS(a), drop_cost, note);
    }
    const CcpsResult cc = solve_ccps(t.market, t.phi, static_cast<int>(n));
    os << "best support by cardinality:\n";
    for (std::size_t k = 0; k < cc.per_k_support.size(); ++k) {
        std::string s;
        for (Index i : cc.per_k_support[k]) s += (s.empty() ? "" : ",") + std::to_string(i + 1);
        os << fmt::format("  K={} {{{}}} objective {:.6g}\n", k + 1, s, cc.per_k_frontier[k]);
    }
    return os.str();
}

}  // namespace sparseport
