#include "cmpvc/irls.hpp"

#include "cmpvc/errors.hpp"
#include "cmpvc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmpvc {

namespace {

constexpr double kLogNuBound = 20.0;
constexpr double kVarianceFloor = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SmoothBlock {
    std::string variable;
    SmoothBasis basis;
    Eigen::Index start = 0;
    Eigen::Index dim = 0;
    std::vector<double> grid;
    int grid_index = 0;
};

// One linear predictor: active parametric columns followed by smooth columns.
struct Predictor {
    Eigen::MatrixXd a;
    std::vector<int> active;
    std::vector<int> dropped;
    Eigen::Index n_columns = 0;  // parametric columns in the caller's block
    std::vector<SmoothBlock> smooths;
    Eigen::VectorXd offset;
    Eigen::VectorXd theta;

    Eigen::Index dim() const { return a.cols(); }
    Eigen::Index n_active() const { return static_cast<Eigen::Index>(active.size()); }

    Eigen::MatrixXd penalty() const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim(), dim());
        for (const auto& s : smooths) {
            p.block(s.start, s.start, s.dim, s.dim) = s.grid[s.grid_index] * s.basis.penalty;
        }
        return p;
    }

    Eigen::VectorXd eta(const Eigen::VectorXd& th) const { return a * th + offset; }

    std::vector<int> grid_indices() const {
        std::vector<int> out;
        for (const auto& s : smooths) {
            out.push_back(s.grid_index);
        }
        return out;
    }
};

Predictor build_predictor(const DesignBlock& block, const std::vector<SmoothTerm>& smooths,
                          const Eigen::VectorXd& offset, Eigen::Index n) {
    if (block.rows() != n) {
        throw DomainError("design block row count does not match response length");
    }
    Predictor p;
    p.n_columns = block.cols();
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
        if (!block.matrix.col(j).allFinite()) {
            throw DomainError("design block contains non-finite values");
        }
        if (block.matrix.col(j).cwiseAbs().maxCoeff() == 0.0) {
            p.dropped.push_back(static_cast<int>(j));
        } else {
            p.active.push_back(static_cast<int>(j));
        }
    }
    Eigen::Index total = p.n_active();
    std::vector<Eigen::MatrixXd> smooth_designs;
    for (const auto& term : smooths) {
        if (term.values.size() != n) {
            throw DomainError("smooth term '" + term.variable + "' has the wrong length");
        }
        if (term.smoothing_grid.empty()) {
            throw DomainError("smooth term '" + term.variable + "' has an empty smoothing grid");
        }
        SmoothBlock sb;
        sb.variable = term.variable;
        sb.basis = SmoothBasis::build(term.values, term.basis_size, term.penalty_order);
        sb.start = total;
        sb.dim = sb.basis.dim();
        sb.grid = term.smoothing_grid;
        sb.grid_index = static_cast<int>(sb.grid.size() / 2);
        smooth_designs.push_back(sb.basis.design(term.values));
        total += sb.dim;
        p.smooths.push_back(std::move(sb));
    }
    p.a.resize(n, total);
    for (Eigen::Index j = 0; j < p.n_active(); ++j) {
        p.a.col(j) = block.matrix.col(p.active[j]);
    }
    for (std::size_t s = 0; s < p.smooths.size(); ++s) {
        p.a.middleCols(p.smooths[s].start, p.smooths[s].dim) = smooth_designs[s];
    }
    p.offset = offset.size() == n ? offset : Eigen::VectorXd::Zero(n);
    if (!p.offset.allFinite()) {
        throw DomainError("offset contains non-finite values");
    }
    p.theta = Eigen::VectorXd::Zero(total);
    return p;
}

struct State {
    Eigen::VectorXd eta1, eta2, nu, mean, var, ml, vl, cov;
    double neg2ll = kInf;
    bool clamped = false;
};

bool evaluate(const Counts& y, const Eigen::VectorXd& lnfy, const Eigen::VectorXd& eta1,
              const Eigen::VectorXd& eta2, const TruncationPolicy& policy, State& st) {
    const Eigen::Index n = eta1.size();
    st.eta1 = eta1;
    st.eta2 = eta2;
    st.nu.resize(n);
    st.mean.resize(n);
    st.var.resize(n);
    st.ml.resize(n);
    st.vl.resize(n);
    st.cov.resize(n);
    st.clamped = false;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double e2 = eta2(i);
        if (!std::isfinite(eta1(i)) || !std::isfinite(e2)) {
            st.neg2ll = kInf;
            return false;
        }
        if (e2 > kLogNuBound || e2 < -kLogNuBound) {
            e2 = std::clamp(e2, -kLogNuBound, kLogNuBound);
            st.clamped = true;
        }
        const double nu = std::exp(e2);
        CmpMoments m;
        try {
            m = moments_log(eta1(i), nu, policy);
        } catch (const Error&) {
            st.neg2ll = kInf;
            return false;
        }
        st.nu(i) = nu;
        st.mean(i) = m.mean;
        st.var(i) = std::max(m.variance, kVarianceFloor);
        st.ml(i) = m.mean_lnfact;
        st.vl(i) = std::max(m.var_lnfact, kVarianceFloor);
        st.cov(i) = m.cov_y_lnfact;
        total += y[i] * eta1(i) - nu * lnfy(i) - m.log_zeta;
    }
    st.neg2ll = -2.0 * total;
    return std::isfinite(st.neg2ll);
}

struct WorkingSystem {
    Eigen::VectorXd weights;
    Eigen::VectorXd response;
};

WorkingSystem working_lambda(const Counts& y, const State& st, const Predictor& p) {
    const Eigen::Index n = st.eta1.size();
    WorkingSystem ws;
    ws.weights = st.var;
    ws.response.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ws.response(i) = st.eta1(i) - p.offset(i) + (y[i] - st.mean(i)) / st.var(i);
    }
    return ws;
}

WorkingSystem working_nu(const Eigen::VectorXd& lnfy, const State& st, const Predictor& p) {
    const Eigen::Index n = st.eta2.size();
    WorkingSystem ws;
    ws.weights.resize(n);
    ws.response.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double nu = st.nu(i);
        ws.weights(i) = st.vl(i) * nu * nu;
        ws.response(i) = st.eta2(i) - p.offset(i) + (st.ml(i) - lnfy(i)) / (st.vl(i) * nu);
    }
    return ws;
}

// Penalized weighted least squares; GCV = n * RSS_w / (n - tr H)^2.
struct PwlsResult {
    Eigen::VectorXd theta;
    double gcv = kInf;
};

PwlsResult pwls(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, const Eigen::MatrixXd& pen,
                const Eigen::MatrixXd& a, const WorkingSystem& ws, bool want_gcv) {
    PwlsResult out;
    const Eigen::MatrixXd g = gram + pen;
    if (!want_gcv) {
        out.theta = solve_spd(g, rhs);
        return out;
    }
    const Eigen::MatrixXd ginv = inverse_spd(g);
    out.theta = ginv * rhs;
    const double trace = (ginv * gram).trace();
    const Eigen::VectorXd resid = ws.response - a * out.theta;
    const double rss = (ws.weights.array() * resid.array().square()).sum();
    const double n = static_cast<double>(a.rows());
    const double denom = n - trace;
    out.gcv = denom > 0.0 ? n * rss / (denom * denom) : kInf;
    return out;
}

// Coordinate-wise GCV choice of each smooth's grid point, then the solve.
Eigen::VectorXd solve_working(Predictor& p, const WorkingSystem& ws, bool select_smoothing) {
    const Eigen::MatrixXd gram = weighted_gram(p.a, ws.weights);
    const Eigen::VectorXd rhs = p.a.transpose() * (ws.weights.array() * ws.response.array()).matrix();
    if (select_smoothing) {
        for (auto& s : p.smooths) {
            int best = s.grid_index;
            double best_gcv = kInf;
            for (int k = 0; k < static_cast<int>(s.grid.size()); ++k) {
                s.grid_index = k;
                PwlsResult r;
                try {
                    r = pwls(gram, rhs, p.penalty(), p.a, ws, true);
                } catch (const SingularDesign&) {
                    continue;
                }
                if (r.gcv < best_gcv) {
                    best_gcv = r.gcv;
                    best = k;
                }
            }
            s.grid_index = best;
        }
    }
    return pwls(gram, rhs, p.penalty(), p.a, ws, false).theta;
}

double penalty_value(const Predictor& p, const Eigen::VectorXd& th) {
    if (p.smooths.empty()) {
        return 0.0;
    }
    return th.dot(p.penalty() * th);
}

double objective(const State& st, const Predictor& p1, const Eigen::VectorXd& th1, const Predictor& p2,
                 const Eigen::VectorXd& th2) {
    return st.neg2ll + penalty_value(p1, th1) + penalty_value(p2, th2);
}

void poisson_start(const Counts& y, Predictor& p) {
    const Eigen::Index n = p.a.rows();
    if (p.dim() == 0) {
        return;
    }
    Eigen::VectorXd mu(n), eta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mu(i) = y[i] + 0.5;
        eta(i) = std::log(mu(i));
    }
    const Eigen::MatrixXd pen = p.penalty();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p.dim());
    for (int it = 0; it < 25; ++it) {
        WorkingSystem ws;
        ws.weights = mu;
        ws.response.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            ws.response(i) = eta(i) - p.offset(i) + (y[i] - mu(i)) / mu(i);
        }
        const Eigen::MatrixXd gram = weighted_gram(p.a, ws.weights);
        const Eigen::VectorXd rhs = p.a.transpose() * (ws.weights.array() * ws.response.array()).matrix();
        Eigen::VectorXd next = solve_spd(gram + pen, rhs);
        const Eigen::VectorXd next_eta = p.eta(next);
        if (!next_eta.allFinite() || next_eta.maxCoeff() > 50.0) {
            break;
        }
        const double change = (next - theta).cwiseAbs().maxCoeff();
        theta = next;
        eta = next_eta;
        mu = eta.array().exp().max(1e-10).matrix();
        if (change < 1e-10) {
            break;
        }
    }
    p.theta = theta;
}

void apply_start(Predictor& p, const Eigen::VectorXd& coef) {
    if (coef.size() != p.n_columns) {
        throw DomainError("start vector has the wrong length");
    }
    for (Eigen::Index j = 0; j < p.n_active(); ++j) {
        p.theta(j) = coef(p.active[j]);
    }
}

Eigen::VectorXd expand_parametric(const Predictor& p) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p.n_columns);
    for (Eigen::Index j = 0; j < p.n_active(); ++j) {
        out(p.active[j]) = p.theta(j);
    }
    return out;
}

std::vector<FittedSmooth> collect_smooths(const Predictor& p, const WorkingSystem& ws, double& edf_total) {
    std::vector<FittedSmooth> out;
    edf_total = static_cast<double>(p.n_active());
    if (p.smooths.empty()) {
        return out;
    }
    const Eigen::MatrixXd gram = weighted_gram(p.a, ws.weights);
    Eigen::MatrixXd influence;
    try {
        influence = inverse_spd(gram + p.penalty()) * gram;
    } catch (const SingularDesign&) {
        influence = Eigen::MatrixXd::Identity(p.dim(), p.dim());
    }
    edf_total = influence.topLeftCorner(p.n_active(), p.n_active()).trace();
    for (const auto& s : p.smooths) {
        FittedSmooth f;
        f.variable = s.variable;
        f.basis = s.basis;
        f.coefficients = p.theta.segment(s.start, s.dim);
        f.smoothing_parameter = s.grid[s.grid_index];
        f.edf = influence.block(s.start, s.start, s.dim, s.dim).trace();
        edf_total += f.edf;
        out.push_back(std::move(f));
    }
    return out;
}

struct JointSystem {
    Eigen::MatrixXd info;
    Eigen::VectorXd score;
};

JointSystem joint_system(const Counts& y, const Eigen::VectorXd& lnfy, const State& st, const Predictor& p1,
                         const Predictor& p2) {
    const Eigen::Index n = st.eta1.size();
    const Eigen::Index d1 = p1.dim();
    const Eigen::Index d2 = p2.dim();
    JointSystem js;
    js.info.resize(d1 + d2, d1 + d2);
    js.score.resize(d1 + d2);
    const Eigen::VectorXd w22 = (st.vl.array() * st.nu.array().square()).matrix();
    const Eigen::VectorXd w12 = -(st.nu.array() * st.cov.array()).matrix();
    const Eigen::MatrixXd pen1 = p1.penalty();
    const Eigen::MatrixXd pen2 = p2.penalty();
    js.info.topLeftCorner(d1, d1) = weighted_gram(p1.a, st.var) + pen1;
    js.info.bottomRightCorner(d2, d2) = weighted_gram(p2.a, w22) + pen2;
    js.info.topRightCorner(d1, d2) = p1.a.transpose() * w12.asDiagonal() * p2.a;
    js.info.bottomLeftCorner(d2, d1) = js.info.topRightCorner(d1, d2).transpose();
    Eigen::VectorXd r1(n), r2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r1(i) = y[i] - st.mean(i);
        r2(i) = st.nu(i) * (st.ml(i) - lnfy(i));
    }
    js.score.head(d1) = p1.a.transpose() * r1 - pen1 * p1.theta;
    js.score.tail(d2) = p2.a.transpose() * r2 - pen2 * p2.theta;
    return js;
}

}  // namespace

Eigen::VectorXd DesignBlock::offset_or_zero() const {
    return offset.size() == matrix.rows() ? offset : Eigen::VectorXd::Zero(matrix.rows());
}

DesignBlock DesignBlock::intercept(Eigen::Index n) {
    DesignBlock b;
    b.matrix = Eigen::MatrixXd::Ones(n, 1);
    b.column_names = {"(Intercept)"};
    return b;
}

std::vector<double> default_smoothing_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 13; ++i) {
        grid.push_back(std::pow(10.0, -4.0 + 8.0 * i / 12.0));
    }
    return grid;
}

Eigen::VectorXd GlmFit::nu() const {
    return eta2.array().max(-kLogNuBound).min(kLogNuBound).exp().matrix();
}

double cmp_neg2loglik(const Counts& y, const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                      const TruncationPolicy& policy) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < eta1.size(); ++i) {
        const double nu = std::exp(std::clamp(eta2(i), -kLogNuBound, kLogNuBound));
        try {
            const double lz = log_zeta({std::exp(eta1(i)), nu}, policy);
            total += y[i] * eta1(i) - nu * log_factorial(static_cast<std::uint64_t>(y[i])) - lz;
        } catch (const Error&) {
            return kInf;
        }
    }
    return -2.0 * total;
}

GlmFit fit_with_offsets(const Counts& y, const DesignBlock& x_block, const DesignBlock& w_block,
                        const Eigen::VectorXd& offset1, const Eigen::VectorXd& offset2,
                        const std::vector<SmoothTerm>& smooths_lambda,
                        const std::vector<SmoothTerm>& smooths_nu, const FitControl& control,
                        const std::optional<FitStart>& start) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (control.max_iter < 1 || control.min_iter < 0 || !(control.tol >= 0.0)) {
        throw DomainError("invalid fit control");
    }
    for (int v : y) {
        if (v < 0) {
            throw DomainError("response must be non-negative counts");
        }
    }
    Predictor p1 = build_predictor(x_block, smooths_lambda, offset1, n);
    Predictor p2 = build_predictor(w_block, smooths_nu, offset2, n);
    if (n <= p1.dim() + (control.estimate_nu ? p2.dim() : 0)) {
        throw DomainError("not enough observations for the number of parameters");
    }

    Eigen::VectorXd lnfy(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lnfy(i) = log_factorial(static_cast<std::uint64_t>(y[i]));
    }

    if (start) {
        apply_start(p1, start->beta);
        apply_start(p2, start->gamma);
    } else {
        poisson_start(y, p1);
    }

    State st;
    if (!evaluate(y, lnfy, p1.eta(p1.theta), p2.eta(p2.theta), control.policy, st)) {
        throw NonConvergent("CMP likelihood cannot be evaluated at the starting values");
    }

    GlmFit fit;
    const bool has_smooths = !p1.smooths.empty() || (!p2.smooths.empty() && control.estimate_nu);
    bool frozen = !has_smooths;
    if (frozen) {
        fit.smoothing_frozen_at = 0;
    }
    double obj = objective(st, p1, p1.theta, p2, p2.theta);
    fit.trace.push_back(obj);

    // Backtracking: accept the first halving that does not raise the objective.
    auto line_search = [&](const Eigen::VectorXd& d1, const Eigen::VectorXd& d2) {
        double t = 1.0;
        for (int h = 0; h <= control.max_halvings; ++h, t *= 0.5) {
            const Eigen::VectorXd th1 = p1.theta + t * d1;
            const Eigen::VectorXd th2 = p2.theta + t * d2;
            State cand;
            if (evaluate(y, lnfy, p1.eta(th1), p2.eta(th2), control.policy, cand)) {
                const double o = objective(cand, p1, th1, p2, th2);
                if (o <= obj) {
                    p1.theta = th1;
                    p2.theta = th2;
                    st = std::move(cand);
                    obj = o;
                    return true;
                }
            }
        }
        return false;
    };

    const Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(p2.dim());
    const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(p1.dim());
    int iter = 0;
    for (iter = 1; iter <= control.max_iter; ++iter) {
        const double obj_before = obj;
        const auto idx1 = p1.grid_indices();
        const auto idx2 = p2.grid_indices();
        const bool select = !frozen;

        if (control.scheme == UpdateScheme::alternating || !control.estimate_nu) {
            const Eigen::VectorXd next1 = solve_working(p1, working_lambda(y, st, p1), select);
            obj = objective(st, p1, p1.theta, p2, p2.theta);
            line_search(next1 - p1.theta, zero2);
            fit.trace.push_back(obj);
            if (control.estimate_nu) {
                const Eigen::VectorXd next2 = solve_working(p2, working_nu(lnfy, st, p2), select);
                obj = objective(st, p1, p1.theta, p2, p2.theta);
                line_search(zero1, next2 - p2.theta);
                fit.trace.push_back(obj);
            }
        } else {
            if (select) {
                solve_working(p1, working_lambda(y, st, p1), true);
                solve_working(p2, working_nu(lnfy, st, p2), true);
                obj = objective(st, p1, p1.theta, p2, p2.theta);
            }
            const JointSystem js = joint_system(y, lnfy, st, p1, p2);
            Eigen::VectorXd step;
            try {
                step = solve_spd(js.info, js.score);
            } catch (const SingularDesign&) {
                // nu drifting to the ln-nu floor leaves no information; keep the best iterate.
                if (iter == 1) throw;
                break;
            }
            line_search(step.head(p1.dim()), step.tail(p2.dim()));
            fit.trace.push_back(obj);
        }

        if (!frozen && (iter >= control.smoothing_freeze_iter ||
                        (iter > 1 && p1.grid_indices() == idx1 && p2.grid_indices() == idx2))) {
            frozen = true;
            fit.smoothing_frozen_at = static_cast<int>(fit.trace.size()) - 1;
        }
        const double rel = std::abs(obj_before - obj) / (std::abs(obj) + 0.1);
        if (frozen && iter >= control.min_iter && rel < control.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.iterations = std::min(iter, control.max_iter);

    fit.beta = expand_parametric(p1);
    fit.gamma = expand_parametric(p2);
    fit.dropped_lambda_columns = p1.dropped;
    fit.dropped_nu_columns = p2.dropped;
    fit.eta1 = st.eta1;
    fit.eta2 = st.eta2;
    fit.mean = st.mean;
    fit.variance = st.var;
    fit.mean_lnfact = st.ml;
    fit.var_lnfact = st.vl;
    fit.neg2loglik = st.neg2ll;
    fit.penalized_objective = obj;
    fit.nu_clamped = st.clamped;
    double edf1 = 0.0, edf2 = 0.0;
    fit.smooths_lambda = collect_smooths(p1, working_lambda(y, st, p1), edf1);
    fit.smooths_nu = collect_smooths(p2, working_nu(lnfy, st, p2), edf2);
    fit.edf = edf1 + (control.estimate_nu ? edf2 : 0.0);

    fit.se_beta = Eigen::VectorXd::Constant(p1.n_columns, std::numeric_limits<double>::quiet_NaN());
    fit.se_gamma = Eigen::VectorXd::Constant(p2.n_columns, std::numeric_limits<double>::quiet_NaN());
    try {
        Eigen::VectorXd var1, var2;
        if (control.estimate_nu) {
            const Eigen::MatrixXd cov = inverse_spd(joint_system(y, lnfy, st, p1, p2).info);
            var1 = cov.diagonal().head(p1.dim());
            var2 = cov.diagonal().tail(p2.dim());
        } else {
            var1 = inverse_spd(weighted_gram(p1.a, st.var) + p1.penalty()).diagonal();
        }
        for (Eigen::Index j = 0; j < p1.n_active(); ++j) {
            fit.se_beta(p1.active[j]) = std::sqrt(var1(j));
        }
        for (Eigen::Index j = 0; j < p2.n_active() && var2.size() > 0; ++j) {
            fit.se_gamma(p2.active[j]) = std::sqrt(var2(j));
        }
    } catch (const SingularDesign&) {
    }

    DesignBlock xb = x_block;
    DesignBlock wb = w_block;
    std::tie(fit.scores1, fit.scores2) = score_matrices(fit, y, xb, wb);
    return fit;
}

GlmFit fit_cmp_glm(const Counts& y, const DesignBlock& x_block, const DesignBlock& w_block,
                   const std::vector<SmoothTerm>& smooths_lambda, const std::vector<SmoothTerm>& smooths_nu,
                   const FitControl& control, const std::optional<FitStart>& start) {
    return fit_with_offsets(y, x_block, w_block, x_block.offset_or_zero(), w_block.offset_or_zero(),
                            smooths_lambda, smooths_nu, control, start);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> score_matrices(const GlmFit& fit, const Counts& y,
                                                           const DesignBlock& x_block,
                                                           const DesignBlock& w_block) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (x_block.rows() != n || w_block.rows() != n || fit.mean.size() != n) {
        throw DomainError("score_matrices: shape mismatch");
    }
    const Eigen::VectorXd nu = fit.nu();
    Eigen::VectorXd r1(n), r2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r1(i) = y[i] - fit.mean(i);
        r2(i) = (fit.mean_lnfact(i) - log_factorial(static_cast<std::uint64_t>(y[i]))) * nu(i);
    }
    return {r1.asDiagonal() * x_block.matrix, r2.asDiagonal() * w_block.matrix};
}

}  // namespace cmpvc
