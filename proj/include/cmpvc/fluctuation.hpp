#pragma once

// Coefficient-constancy tests on per-observation score contributions.

#include <Eigen/Dense>

#include <cstdint>

namespace cmpvc {

enum class ModeratorKind { continuous, ordinal, categorical };

struct FluctuationResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

constexpr std::uint64_t kFluctuationSeed = 20240521;

// Scores are centred and decorrelated by the inverse square root of their
// empirical covariance before testing, so already-decorrelated input passes
// through unchanged. Continuous and ordinal moderators use the supLM statistic
//   max_{t in [0.1, 0.9]} |W(t)|^2 / (t (1 - t))
// over the cumulative score process ordered by the moderator, evaluated where
// the moderator value changes. Categorical moderators (values are level codes)
// use sum over levels |S_l|^2 / n_l, chi-square with k (levels - 1) df.
//
// Throws DegenerateModerator when the moderator has fewer than two values.
FluctuationResult fluctuation_test(const Eigen::MatrixXd& scores, const Eigen::VectorXd& moderator,
                                   ModeratorKind kind, int n_sim = 5000,
                                   std::uint64_t seed = kFluctuationSeed);

// Upper tail of the supLM limit for a k-dimensional Brownian bridge, by
// simulation on a 1000-point grid. Past the last 50 simulated exceedances the
// asymptotic Bessel-process tail approximation takes over.
double suplm_p_value(double statistic, int k, int n_sim = 5000, std::uint64_t seed = kFluctuationSeed);

// Asymptotic tail P(sup > x) for trimming [0.1, 0.9].
double suplm_tail_approx(double x, int k);

// Centred scores times the inverse square root of their covariance.
Eigen::MatrixXd decorrelate(const Eigen::MatrixXd& scores);

}  // namespace cmpvc
