#include "sparseport/market.hpp"

#include <fmt/format.h>

#include "sparseport/error.hpp"

namespace sparseport {

MarketEstimate make_market(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
        fail(ErrorKind::Data, fmt::format("mean has {} entries but covariance is {}x{}",
                                          mean.size(), cov.rows(), cov.cols()));
    }
    if (mean.size() < 1) fail(ErrorKind::Data, "empty market");
    if (!mean.allFinite() || !cov.allFinite()) fail(ErrorKind::Data, "non-finite moments");

    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300)) {
        fail(ErrorKind::Data, "covariance matrix is not symmetric");
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                               cov, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
    if (min_eig < -1e-10 * cov.norm()) {
        fail(ErrorKind::Data,
             fmt::format("covariance matrix is not positive semidefinite (min eigenvalue {:.3g})",
                         min_eig));
    }
    return MarketEstimate{std::move(mean), std::move(cov)};
}

MarketEstimate estimate_market(const ReturnsMatrix& returns) {
    const auto& R = returns.data;
    if (R.rows() < 2) fail(ErrorKind::InsufficientData, "need at least 2 periods to estimate");
    if (!R.allFinite()) fail(ErrorKind::Data, "returns contain non-finite entries");

    Eigen::VectorXd mean = R.colwise().mean().transpose();
    const Eigen::MatrixXd centered = R.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(R.rows() - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    return MarketEstimate{std::move(mean), std::move(cov)};
}

}  // namespace sparseport
