#pragma once

#include <Eigen/Dense>

namespace sparseport {

/// Orthonormal basis (N x (N-P)) of the null space of a full-row-rank P x N
/// matrix, taken from a Householder factorization of its transpose.
/// Throws DegenerateConstraints when the rows are dependent.
Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& AX);

/// Affine-scaled step problem:
///   min 1/2 d'Qt d + ct'd  s.t.  AX d = 0, ||d|| <= radius.
struct Subproblem {
    Eigen::MatrixXd Qtilde;
    Eigen::VectorXd ctilde;
    Eigen::MatrixXd AX;
    double radius = 0.0;
};

struct TRSolution {
    Eigen::VectorXd dtilde;
    double mu = 0.0;
    Eigen::VectorXd y;
    bool negative_curvature = false;
    bool hard_case = false;
};

/// Global minimizer of 1/2 v'Hv + g'v over ||v|| <= radius.
struct ReducedTRSolution {
    Eigen::VectorXd v;
    double mu = 0.0;
    bool negative_curvature = false;
    bool hard_case = false;
};

/// Eigendecomposition-based solver. When `basis` is given, ties between the
/// two boundary points of the hard case are broken on basis * v so that the
/// full-space step does not depend on column signs of the basis.
ReducedTRSolution solve_reduced_tr(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                   double radius, const Eigen::MatrixXd* basis = nullptr);

/// Same, reusing a precomputed eigendecomposition of H.
ReducedTRSolution solve_reduced_tr(const Eigen::VectorXd& eigenvalues,
                                   const Eigen::MatrixXd& eigenvectors, const Eigen::VectorXd& g,
                                   double radius, const Eigen::MatrixXd* basis = nullptr);

/// Cholesky-based More-Sorensen iteration started from `mu_hint`. Returns
/// false (leaving `out` unspecified) when it cannot certify a solution, e.g.
/// near the hard case or with a zero gradient; callers then fall back to the
/// eigendecomposition solver.
bool solve_reduced_tr_cholesky(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double radius,
                               double mu_hint, ReducedTRSolution& out);

double tr_model_value(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                      const Eigen::VectorXd& v);

TRSolution solve_tr(const Subproblem& sub);

/// Least-squares y for (AX)' y = rhs.
Eigen::VectorXd recover_dual(const Eigen::MatrixXd& AX, const Eigen::VectorXd& rhs);

}  // namespace sparseport
