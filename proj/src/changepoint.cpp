#include "cmpvc/changepoint.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cmpvc {

Eigen::VectorXd glr_column(const Eigen::VectorXd& x, int min_segment) {
    const Eigen::Index n = x.size();
    if (min_segment < 1 || n < 2 * static_cast<Eigen::Index>(min_segment)) {
        throw DomainError("GLR scan needs at least two minimum-size segments");
    }
    // Centre first so the prefix variances do not cancel catastrophically.
    const double centre = x.mean();
    Eigen::VectorXd s(n + 1), ss(n + 1);
    s(0) = 0.0;
    ss(0) = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = x(i) - centre;
        s(i + 1) = s(i) + v;
        ss(i + 1) = ss(i) + v * v;
    }
    auto ml_var = [](double sum, double sumsq, double m) {
        const double mean = sum / m;
        return std::max(sumsq / m - mean * mean, kGlrVarianceFloor);
    };
    const double nd = static_cast<double>(n);
    const double pooled = std::log(ml_var(s(n), ss(n), nd));
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n + 1, -std::numeric_limits<double>::infinity());
    for (Eigen::Index k = min_segment; k <= n - min_segment; ++k) {
        const double kd = static_cast<double>(k);
        const double left = ml_var(s(k), ss(k), kd);
        const double right = ml_var(s(n) - s(k), ss(n) - ss(k), nd - kd);
        out(k) = nd * pooled - kd * std::log(left) - (nd - kd) * std::log(right);
    }
    return out;
}

GlrStats glr_change_stats(const Eigen::MatrixXd& scores, const Eigen::VectorXd& moderator, int min_segment) {
    const Eigen::Index n = scores.rows();
    if (moderator.size() != n) {
        throw DomainError("moderator length does not match scores");
    }
    if (n < 2 || moderator.minCoeff() == moderator.maxCoeff()) {
        throw DegenerateModerator("moderator has fewer than two distinct values");
    }
    GlrStats out;
    out.order.resize(static_cast<std::size_t>(n));
    std::iota(out.order.begin(), out.order.end(), 0);
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return moderator(a) < moderator(b); });
    out.stats.resize(n + 1, scores.cols());
    Eigen::VectorXd col(n);
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            col(i) = scores(out.order[static_cast<std::size_t>(i)], j);
        }
        out.stats.col(j) = glr_column(col, min_segment);
    }
    return out;
}

}  // namespace cmpvc
