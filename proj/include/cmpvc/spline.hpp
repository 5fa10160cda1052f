#pragma once

// Penalized cubic B-spline smooths with a sum-to-zero identifiability
// constraint, used for the global s(.) terms of both linear predictors.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cmpvc {

class BSplineBasis {
public:
    BSplineBasis() = default;
    // Full knot vector (boundary knots repeated degree + 1 times).
    BSplineBasis(std::vector<double> knots, int degree);

    // Cubic basis with `size` functions, interior knots at quantiles of x.
    static BSplineBasis from_quantiles(const Eigen::VectorXd& x, int size, int degree = 3);

    int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    int degree() const { return degree_; }
    double lower() const { return knots_.front(); }
    double upper() const { return knots_.back(); }
    const std::vector<double>& knots() const { return knots_; }

    // Values outside [lower, upper] are clamped to the boundary.
    Eigen::RowVectorXd evaluate(double x) const;
    Eigen::MatrixXd design(const Eigen::VectorXd& x) const;

private:
    std::vector<double> knots_;
    int degree_ = 3;
};

// D^T D for the order-th difference operator on k coefficients.
Eigen::MatrixXd difference_penalty(int k, int order);

// B-spline basis reparameterized onto the null space of the column-sum
// constraint, so the smooth is centred over the training sample.
struct SmoothBasis {
    BSplineBasis basis;
    Eigen::MatrixXd constraint;  // size x (size - 1)
    Eigen::MatrixXd penalty;     // (size - 1) x (size - 1)

    int dim() const { return static_cast<int>(constraint.cols()); }
    Eigen::MatrixXd design(const Eigen::VectorXd& x) const;

    static SmoothBasis build(const Eigen::VectorXd& x, int basis_size, int penalty_order);
};

struct FittedSmooth {
    std::string variable;
    SmoothBasis basis;
    Eigen::VectorXd coefficients;
    double smoothing_parameter = 0.0;
    double edf = 0.0;

    double evaluate(double x) const;
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
};

}  // namespace cmpvc
