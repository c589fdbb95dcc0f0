#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sparseport/market.hpp"

namespace sparseport {

enum class Variant {
    Markowitz,         // shorting allowed, no penalty
    MarkowitzNoShort,  // x >= 0, no penalty
    LpNoShort,         // x >= 0 with lambda * ||x||_p^p
    LpShort,           // shorting allowed, penalty on x+ and x-
    L1BallLp,          // shorting allowed within ||x||_1 <= delta
    L2Lp,              // penalty plus mu * ||x||_2^2
    DynamicLp,         // sparse adjustment y = x - a of an anchor portfolio a
};

const char* to_string(Variant v) noexcept;
bool is_regularized(Variant v) noexcept;
bool allows_short(Variant v) noexcept;
bool is_split(Variant v) noexcept;

struct ModelSpec {
    Variant variant = Variant::LpNoShort;
    double lambda = 0.0;
    double p = 0.5;
    double phi = 0.0;
    std::optional<double> m0;
    std::optional<double> delta;           // L1BallLp
    std::optional<double> mu;              // L2Lp
    std::optional<Eigen::VectorXd> anchor; // DynamicLp

    /// Penalty weight actually applied (zero for the Markowitz variants).
    double effective_lambda() const;
};

/// Throws Spec when a parameter relevant to the variant is missing or out of range.
void validate(const ModelSpec& spec, Eigen::Index num_assets);

enum class BackMapKind { Direct, Split, Dynamic };

/// Linear map from general-form variables to portfolio weights:
/// w = base + x[0:n] - sum over minus columns, slack columns ignored.
struct BackMap {
    BackMapKind kind = BackMapKind::Direct;
    Eigen::Index num_assets = 0;
    std::vector<Eigen::Index> minus_assets;  // asset of each column n, n+1, ...
    Eigen::Index num_slack = 0;
    Eigen::VectorXd base;                    // anchor for Dynamic, zero otherwise

    Eigen::Index num_minus() const { return static_cast<Eigen::Index>(minus_assets.size()); }
    Eigen::Index minus_offset() const { return num_assets; }
    Eigen::Index slack_offset() const { return num_assets + num_minus(); }
};

/// min 1/2 x'Qx - c'x + lambda * sum_{j in R} x_j^p  s.t.  Ax = b, x >= 0.
struct GeneralForm {
    Variant variant = Variant::LpNoShort;
    Eigen::MatrixXd Qhat;
    Eigen::VectorXd chat;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::vector<Eigen::Index> reg_set;  // sorted, excludes slacks
    BackMap back_map;
    Eigen::VectorXd interior;  // strictly feasible point, also the solver start
    double offset = 0.0;       // original objective = general objective + offset (dynamic)

    Eigen::Index dim() const { return Qhat.rows(); }
    Eigen::Index rows() const { return A.rows(); }
};

GeneralForm build_general_form(const ModelSpec& spec, const MarketEstimate& market);

/// 1/2 x'Qx - c'x + lambda * sum_{j in R} x_j^p. Throws Domain on negative entries.
double objective(const GeneralForm& form, const Eigen::VectorXd& x, double lambda, double p);

/// Gradient and Hessian at a strictly positive point. Throws Domain otherwise.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> gradient_hessian(const GeneralForm& form,
                                                             const Eigen::VectorXd& x,
                                                             double lambda, double p);

/// Portfolio weights (length n) represented by a general-form point.
Eigen::VectorXd back_map(const GeneralForm& form, const Eigen::VectorXd& x);

/// Zeroes entries with |w_i| below the threshold and rescales so the weights sum to one.
Eigen::VectorXd truncate_weights(const Eigen::VectorXd& weights, double threshold = 1e-6);

/// max_j min(x+_j, x-_j) over the paired columns; zero for direct forms.
double complementarity_gap(const GeneralForm& form, const Eigen::VectorXd& x);

/// Indices with |w_i| > threshold.
std::vector<Eigen::Index> support_of(const Eigen::VectorXd& w, double threshold = 1e-6);

}  // namespace sparseport
