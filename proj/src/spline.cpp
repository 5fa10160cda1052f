#include "cmpvc/spline.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cmpvc {

namespace {

double quantile_sorted(const std::vector<double>& v, double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

BSplineBasis::BSplineBasis(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 1 || static_cast<int>(knots_.size()) < 2 * degree_ + 2) {
        throw DomainError("B-spline knot vector too short for the requested degree");
    }
    if (!std::is_sorted(knots_.begin(), knots_.end())) {
        throw DomainError("B-spline knots must be non-decreasing");
    }
}

BSplineBasis BSplineBasis::from_quantiles(const Eigen::VectorXd& x, int size, int degree) {
    if (x.size() < 2) {
        throw DomainError("smooth term needs at least two observations");
    }
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (!(hi > lo)) {
        throw DomainError("smooth term covariate is constant");
    }
    const int n_interior = size - degree - 1;
    std::vector<double> interior;
    for (int j = 1; j <= n_interior; ++j) {
        const double q = quantile_sorted(sorted, static_cast<double>(j) / (n_interior + 1));
        if (q > lo && q < hi && (interior.empty() || q > interior.back())) {
            interior.push_back(q);
        }
    }
    std::vector<double> knots(degree + 1, lo);
    knots.insert(knots.end(), interior.begin(), interior.end());
    knots.insert(knots.end(), degree + 1, hi);
    return BSplineBasis(std::move(knots), degree);
}

Eigen::RowVectorXd BSplineBasis::evaluate(double x) const {
    const int k = size();
    const int p = degree_;
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(k);
    x = std::clamp(x, lower(), upper());

    // Knot span: knots_[span] <= x < knots_[span + 1], last non-empty span at the upper end.
    int span = k - 1;
    if (x < upper()) {
        span = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
        span = std::clamp(span, p, k - 1);
    }

    // Cox-de Boor on the p + 1 non-zero functions.
    std::vector<double> n(p + 1, 0.0), left(p + 1), right(p + 1);
    n[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[span + 1 - j];
        right[j] = knots_[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom > 0.0 ? n[r] / denom : 0.0;
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for (int j = 0; j <= p; ++j) {
        out(span - p + j) = n[j];
    }
    return out;
}

Eigen::MatrixXd BSplineBasis::design(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out(x.size(), size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out.row(i) = evaluate(x(i));
    }
    return out;
}

Eigen::MatrixXd difference_penalty(int k, int order) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(k, k);
    for (int o = 0; o < order; ++o) {
        const Eigen::Index rows = d.rows() - 1;
        Eigen::MatrixXd next(rows, k);
        for (Eigen::Index r = 0; r < rows; ++r) {
            next.row(r) = d.row(r + 1) - d.row(r);
        }
        d = std::move(next);
    }
    return d.transpose() * d;
}

Eigen::MatrixXd SmoothBasis::design(const Eigen::VectorXd& x) const {
    return basis.design(x) * constraint;
}

SmoothBasis SmoothBasis::build(const Eigen::VectorXd& x, int basis_size, int penalty_order) {
    if (basis_size < penalty_order + 2) {
        throw DomainError("smooth basis_size must be at least penalty_order + 2");
    }
    SmoothBasis out;
    out.basis = BSplineBasis::from_quantiles(x, basis_size);
    const int k = out.basis.size();
    if (k < penalty_order + 2) {
        throw DomainError("too few distinct covariate values for the smooth basis");
    }
    const Eigen::MatrixXd b = out.basis.design(x);
    const Eigen::VectorXd colsum = b.colwise().sum().transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(colsum);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
    out.constraint = q.rightCols(k - 1);
    out.penalty = out.constraint.transpose() * difference_penalty(k, penalty_order) * out.constraint;
    return out;
}

double FittedSmooth::evaluate(double x) const {
    return (basis.basis.evaluate(x) * basis.constraint * coefficients)(0);
}

Eigen::VectorXd FittedSmooth::evaluate(const Eigen::VectorXd& x) const {
    return basis.design(x) * coefficients;
}

}  // namespace cmpvc
