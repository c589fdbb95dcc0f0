#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sparseport/market.hpp"
#include "sparseport/model.hpp"

namespace sparseport {

struct SolverConfig {
    double eps = 1e-4;
    double beta = 0.45;
    int max_iters = 200000;
    double zero_threshold = 1e-6;
    std::optional<Eigen::VectorXd> start;
};

/// Largest trust parameter covered by the small-multiplier termination rule:
/// min{1/2, sqrt(2/lambda), 3/((18 sqrt 2 + 2) lambda)}; 1/2 when lambda = 0.
double admissible_beta_bound(double lambda);

/// Scaled first- and second-order optimality measures at a feasible point.
struct KKTCertificate {
    double first_order_residual = 0.0;
    double second_order_margin = 0.0;  // +inf when the scaled null space is trivial
    double eps_used = 0.0;
    Eigen::VectorXd y;

    bool first_order_ok() const { return first_order_residual <= eps_used; }
    bool second_order_ok() const { return second_order_margin >= -1e-8; }
    bool certified() const { return first_order_ok() && second_order_ok(); }
};

/// Certificate with the least-squares dual estimate.
KKTCertificate certify(const GeneralForm& form, const Eigen::VectorXd& x, double lambda,
                       double p, double eps);

/// Certificate with a caller-supplied dual estimate.
KKTCertificate certify(const GeneralForm& form, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y, double lambda, double p, double eps);

enum class Termination {
    SmallMultiplier,  // mu_k <= (lambda/6) ||d_k|| with a passing certificate
    Certificate,      // certificate passed and the support has settled
    Stationary,       // step vanished
    MaxIterations,
};

const char* to_string(Termination t) noexcept;

struct TraceEntry {
    double objective = 0.0;  // f(x^{k+1})
    double mu = 0.0;
    double step_norm = 0.0;  // ||d~_k||
    bool decrease_bound = false;  // the (1/8) mu ||d||^2 decrease bound applies
};

struct SolveResult {
    Eigen::VectorXd x;        // general-form iterate
    Eigen::VectorXd weights;  // back-mapped, truncated and renormalized
    Eigen::VectorXd y;
    std::vector<Eigen::Index> support;  // assets with nonzero weight
    double kkt1_residual = 0.0;
    double kkt2_margin = 0.0;
    bool certified = false;
    int iterations = 0;
    int rejected_steps = 0;
    double objective = 0.0;
    double initial_objective = 0.0;
    double beta_used = 0.0;
    double eps = 0.0;
    Termination termination = Termination::MaxIterations;
    std::vector<TraceEntry> trace;
};

/// Affine-scaling trust-region interior-point method for the general form.
SolveResult solve(const GeneralForm& form, double lambda, double p, const SolverConfig& config);

/// Convenience: builds the general form of `spec` and solves it.
SolveResult solve(const ModelSpec& spec, const MarketEstimate& market, const SolverConfig& config);

/// Multiplier of m'x >= m0 in min 1/2 x'Qx s.t. e'x = 1 (and x >= 0 for
/// no-short variants); zero when the return constraint is slack.
double calibrate_phi(const MarketEstimate& market, double m0, Variant variant);

}  // namespace sparseport
