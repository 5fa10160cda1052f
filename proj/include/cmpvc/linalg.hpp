#pragma once

#include <Eigen/Dense>

namespace cmpvc {

// Solves a symmetric positive (semi)definite system. Throws SingularDesign when
// the ratio of extreme eigenvalues exceeds cond_limit.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          double cond_limit = 1e12);

// Inverse of an SPD matrix under the same conditioning rule.
Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a, double cond_limit = 1e12);

// Symmetric inverse square root; eigenvalues below rel_floor * max are
// treated as zero (pseudo-inverse), so rank-deficient score covariances
// decorrelate without blowing up.
Eigen::MatrixXd inverse_sqrt_psd(const Eigen::MatrixXd& a, double rel_floor = 1e-10);

// X^T diag(w) X.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& x, const Eigen::VectorXd& w);

}  // namespace cmpvc
