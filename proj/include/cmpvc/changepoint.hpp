#pragma once

// Gaussian GLR statistics for a simultaneous mean-and-variance change in each
// score column, scanned along the ordering of a moderator.

#include <Eigen/Dense>

#include <vector>

namespace cmpvc {

constexpr int kMinSegment = 10;
constexpr double kGlrVarianceFloor = 1e-12;

struct GlrStats {
    std::vector<Eigen::Index> order;  // row indices sorted (stably) by the moderator
    // stats(k, j): left segment of size k in sorted order, score column j.
    // Rows outside [min_segment, n - min_segment] hold -inf.
    Eigen::MatrixXd stats;
};

// D_k = n ln s2 - k ln s2_L - (n - k) ln s2_R with ML variances floored at 1e-12.
// Throws DegenerateModerator when the moderator has fewer than two values and
// DomainError when n < 2 min_segment.
GlrStats glr_change_stats(const Eigen::MatrixXd& scores, const Eigen::VectorXd& moderator,
                          int min_segment = kMinSegment);

// The same statistic for scores already in moderator order.
Eigen::VectorXd glr_column(const Eigen::VectorXd& sorted_scores, int min_segment = kMinSegment);

}  // namespace cmpvc
