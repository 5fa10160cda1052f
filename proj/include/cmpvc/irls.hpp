#pragma once

// Dual-predictor CMP regression
//
//   ln lambda_i = x_i' beta + s_1(.) + offset1_i
//   ln nu_i     = w_i' gamma + s_2(.) + offset2_i
//
// fitted by Fisher scoring on the two linear predictors, with penalized
// B-spline smooths chosen by GCV on the working residuals.

#include "cmpvc/cmp.hpp"
#include "cmpvc/spline.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cmpvc {

using Counts = std::vector<int>;

struct DesignBlock {
    Eigen::MatrixXd matrix;
    std::vector<std::string> column_names;
    Eigen::VectorXd offset;  // empty means zeros

    Eigen::Index rows() const { return matrix.rows(); }
    Eigen::Index cols() const { return matrix.cols(); }
    Eigen::VectorXd offset_or_zero() const;

    static DesignBlock intercept(Eigen::Index n);
};

std::vector<double> default_smoothing_grid();

struct SmoothTerm {
    std::string variable;
    Eigen::VectorXd values;
    int basis_size = 10;
    int penalty_order = 2;
    std::vector<double> smoothing_grid = default_smoothing_grid();
};

enum class UpdateScheme {
    alternating,  // beta half-step, then gamma half-step, moments refreshed between
    joint,        // one Fisher step on (beta, gamma) using the full information matrix
};

struct FitControl {
    int max_iter = 50;
    double tol = 1e-8;
    int min_iter = 1;
    bool estimate_nu = true;
    UpdateScheme scheme = UpdateScheme::joint;
    int max_halvings = 10;
    // GCV is re-run each iteration until the selected grid points repeat,
    // or until this many iterations have passed.
    int smoothing_freeze_iter = 10;
    TruncationPolicy policy{};
};

struct FitStart {
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
};

struct GlmFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
    Eigen::VectorXd se_beta;   // from the inverse joint Fisher information
    Eigen::VectorXd se_gamma;
    std::vector<FittedSmooth> smooths_lambda;
    std::vector<FittedSmooth> smooths_nu;
    Eigen::VectorXd eta1;
    Eigen::VectorXd eta2;
    Eigen::VectorXd mean;         // E[y_i]
    Eigen::VectorXd variance;     // V[y_i]
    Eigen::VectorXd mean_lnfact;  // E[ln y_i!]
    Eigen::VectorXd var_lnfact;   // V[ln y_i!]
    Eigen::MatrixXd scores1;
    Eigen::MatrixXd scores2;
    double neg2loglik = 0.0;
    double penalized_objective = 0.0;
    double edf = 0.0;  // parametric count plus smooth effective degrees of freedom
    bool converged = false;
    int iterations = 0;
    bool nu_clamped = false;
    std::vector<double> trace;  // accepted penalized -2 log-likelihood, one per half-step
    int smoothing_frozen_at = 0;  // trace index from which smoothing parameters were fixed
    std::vector<int> dropped_lambda_columns;
    std::vector<int> dropped_nu_columns;

    Eigen::VectorXd nu() const;
};

// -2 log-likelihood of y under the given linear predictors; +inf when any
// observation falls outside what the truncation policy can evaluate.
double cmp_neg2loglik(const Counts& y, const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                      const TruncationPolicy& policy = {});

GlmFit fit_cmp_glm(const Counts& y, const DesignBlock& x_block, const DesignBlock& w_block,
                   const std::vector<SmoothTerm>& smooths_lambda = {},
                   const std::vector<SmoothTerm>& smooths_nu = {}, const FitControl& control = {},
                   const std::optional<FitStart>& start = std::nullopt);

// As fit_cmp_glm with fixed additive offsets on both predictors (they replace
// any offsets carried by the design blocks).
GlmFit fit_with_offsets(const Counts& y, const DesignBlock& x_block, const DesignBlock& w_block,
                        const Eigen::VectorXd& offset1, const Eigen::VectorXd& offset2,
                        const std::vector<SmoothTerm>& smooths_lambda = {},
                        const std::vector<SmoothTerm>& smooths_nu = {}, const FitControl& control = {},
                        const std::optional<FitStart>& start = std::nullopt);

// Row i: x_i (y_i - E[y_i]) and w_i (E[ln y_i!] - ln y_i!) nu_i.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> score_matrices(const GlmFit& fit, const Counts& y,
                                                           const DesignBlock& x_block,
                                                           const DesignBlock& w_block);

}  // namespace cmpvc
