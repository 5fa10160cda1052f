#include "cmpvc/linalg.hpp"

#include "cmpvc/errors.hpp"

#include <cmath>

namespace cmpvc {

namespace {

void check_condition(const Eigen::VectorXd& evals, double cond_limit) {
    const double hi = evals.maxCoeff();
    const double lo = evals.minCoeff();
    if (!(hi > 0.0) || !std::isfinite(hi) || lo <= hi / cond_limit) {
        throw SingularDesign("weighted cross-product matrix is numerically singular");
    }
}

}  // namespace

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double cond_limit) {
    if (a.rows() == 1) {
        if (!(a(0, 0) > 0.0) || !std::isfinite(a(0, 0))) {
            throw SingularDesign("weighted cross-product matrix is numerically singular");
        }
        return b / a(0, 0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    check_condition(es.eigenvalues(), cond_limit);
    const Eigen::MatrixXd& v = es.eigenvectors();
    return v * (v.transpose() * b).cwiseQuotient(es.eigenvalues());
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a, double cond_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    check_condition(es.eigenvalues(), cond_limit);
    const Eigen::MatrixXd& v = es.eigenvectors();
    return v * es.eigenvalues().cwiseInverse().asDiagonal() * v.transpose();
}

Eigen::MatrixXd inverse_sqrt_psd(const Eigen::MatrixXd& a, double rel_floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double hi = ev.size() > 0 ? ev.maxCoeff() : 0.0;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (hi > 0.0 && ev(i) > rel_floor * hi) {
            d(i) = 1.0 / std::sqrt(ev(i));
        }
    }
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
    return x.transpose() * w.asDiagonal() * x;
}

}  // namespace cmpvc
