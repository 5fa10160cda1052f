#include "cmpvc/boost.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace cmpvc {

namespace {

constexpr double kLogNuBound = 20.0;
constexpr double kVarianceFloor = 1e-10;
constexpr double kGainFloor = 1e-12;  // relative to the root's weighted sum of squares

using Rows = std::vector<Eigen::Index>;

// Weighted least squares of t on X from accumulated X'WX, X'Wt and t'Wt.
struct LsFit {
    Eigen::VectorXd coef;
    double sse = 0.0;
};

LsFit solve_ls(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xt, double tt) {
    LsFit out;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const double scale = gram.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-12 * std::max(scale, 1e-300)) {
        out.coef = ldlt.solve(xt);
    } else {
        out.coef = gram.completeOrthogonalDecomposition().solve(xt);
    }
    out.sse = std::max(tt - xt.dot(out.coef), 0.0);
    return out;
}

struct Candidate {
    int variable = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class PartRegGrower {
public:
    PartRegGrower(const Eigen::VectorXd& t, const Eigen::VectorXd& w, const Eigen::MatrixXd& x,
                  const Eigen::MatrixXd& z, const std::vector<ModeratorKind>& kinds, const PartRegControl& c)
        : t_(t), w_(w), x_(x), z_(z), kinds_(kinds), c_(c) {}

    BaseTree run() {
        Rows all(static_cast<std::size_t>(t_.size()));
        std::iota(all.begin(), all.end(), 0);
        root_ss_ = (w_.array() * t_.array().square()).sum();
        tree_.nodes.push_back(make_node(all));

        const double first = t_(0);
        if ((t_.array() == first).all()) {
            tree_.degenerate = true;
            return tree_;
        }

        std::vector<Rows> rows{all};
        std::vector<Candidate> best{best_split(all)};
        std::vector<int> leaves{0};
        while (static_cast<int>(leaves.size()) < c_.max_leaves) {
            int pick = -1;
            for (std::size_t l = 0; l < leaves.size(); ++l) {
                const Candidate& cand = best[static_cast<std::size_t>(leaves[l])];
                if (cand.variable >= 0 && cand.gain > kGainFloor * root_ss_ &&
                    (pick < 0 || cand.gain > best[static_cast<std::size_t>(leaves[static_cast<std::size_t>(pick)])].gain)) {
                    pick = static_cast<int>(l);
                }
            }
            if (pick < 0) {
                break;
            }
            const int id = leaves[static_cast<std::size_t>(pick)];
            const Candidate cand = best[static_cast<std::size_t>(id)];
            Rows left, right;
            for (auto r : rows[static_cast<std::size_t>(id)]) {
                (z_(r, cand.variable) <= cand.threshold ? left : right).push_back(r);
            }
            const int li = static_cast<int>(tree_.nodes.size());
            tree_.nodes.push_back(make_node(left));
            tree_.nodes.push_back(make_node(right));
            BaseTreeNode& parent = tree_.nodes[static_cast<std::size_t>(id)];
            parent.variable = cand.variable;
            parent.threshold = cand.threshold;
            parent.left = li;
            parent.right = li + 1;
            parent.delta_sse = cand.gain;
            if (is_categorical(cand.variable)) {
                std::set<double> seen;
                for (auto r : rows[static_cast<std::size_t>(id)]) seen.insert(z_(r, cand.variable));
                parent.levels.assign(seen.begin(), seen.end());
            }
            best.push_back(best_split(left));
            best.push_back(best_split(right));
            rows.push_back(std::move(left));
            rows.push_back(std::move(right));
            leaves.erase(leaves.begin() + pick);
            leaves.insert(leaves.begin() + pick, {li, li + 1});
        }
        return tree_;
    }

private:
    bool is_categorical(int j) const {
        return !kinds_.empty() && kinds_[static_cast<std::size_t>(j)] == ModeratorKind::categorical;
    }

    BaseTreeNode make_node(const Rows& rows) const {
        const Eigen::Index k = x_.cols();
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
        double tt = 0.0;
        for (auto r : rows) {
            const auto xr = x_.row(r).transpose();
            g.selfadjointView<Eigen::Lower>().rankUpdate(xr, w_(r));
            b += w_(r) * t_(r) * xr;
            tt += w_(r) * t_(r) * t_(r);
        }
        g = g.selfadjointView<Eigen::Lower>();
        const LsFit fit = solve_ls(g, b, tt);
        BaseTreeNode node;
        node.n_obs = static_cast<int>(rows.size());
        node.coef = fit.coef;
        node.sse = fit.sse;
        return node;
    }

    Candidate best_split(const Rows& rows) const {
        Candidate out;
        const auto n = static_cast<Eigen::Index>(rows.size());
        const Eigen::Index min = c_.min_node_size;
        if (n < 2 * min) {
            return out;
        }
        const Eigen::Index k = x_.cols();
        Eigen::MatrixXd gt = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd bt = Eigen::VectorXd::Zero(k);
        double tt = 0.0;
        for (auto r : rows) {
            const auto xr = x_.row(r).transpose();
            gt.selfadjointView<Eigen::Lower>().rankUpdate(xr, w_(r));
            bt += w_(r) * t_(r) * xr;
            tt += w_(r) * t_(r) * t_(r);
        }
        gt = gt.selfadjointView<Eigen::Lower>();
        const double parent = solve_ls(gt, bt, tt).sse;

        Rows order(rows);
        for (Eigen::Index j = 0; j < z_.cols(); ++j) {
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return z_(a, j) < z_(b, j); });
            Eigen::MatrixXd gl = Eigen::MatrixXd::Zero(k, k);
            Eigen::VectorXd bl = Eigen::VectorXd::Zero(k);
            double tl = 0.0;
            for (Eigen::Index m = 0; m < n - min; ++m) {
                const auto r = order[static_cast<std::size_t>(m)];
                const auto xr = x_.row(r).transpose();
                gl.noalias() += w_(r) * xr * xr.transpose();
                bl += w_(r) * t_(r) * xr;
                tl += w_(r) * t_(r) * t_(r);
                const Eigen::Index left = m + 1;
                if (left < min || z_(r, j) == z_(order[static_cast<std::size_t>(m + 1)], j)) {
                    continue;
                }
                const double sse = solve_ls(gl, bl, tl).sse + solve_ls(gt - gl, bt - bl, tt - tl).sse;
                const double gain = parent - sse;
                if (gain > out.gain) {
                    out.variable = static_cast<int>(j);
                    out.threshold = z_(r, j);
                    out.gain = gain;
                }
            }
        }
        return out;
    }

    const Eigen::VectorXd& t_;
    const Eigen::VectorXd& w_;
    const Eigen::MatrixXd& x_;
    const Eigen::MatrixXd& z_;
    const std::vector<ModeratorKind>& kinds_;
    const PartRegControl& c_;
    double root_ss_ = 0.0;
    BaseTree tree_;
};

Eigen::MatrixXd moderator_matrix(const std::vector<Moderator>& mods, Eigen::Index n) {
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(mods.size()));
    for (std::size_t j = 0; j < mods.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = mods[j].values;
    }
    return out;
}

DesignBlock hstack(const DesignBlock& a, const DesignBlock& b) {
    DesignBlock out;
    out.matrix.resize(a.rows(), a.cols() + b.cols());
    out.matrix << a.matrix, b.matrix;
    out.column_names = a.column_names;
    out.column_names.insert(out.column_names.end(), b.column_names.begin(), b.column_names.end());
    out.offset = a.offset_or_zero() + b.offset_or_zero();
    return out;
}

struct Moments {
    Eigen::VectorXd nu, mean, var, ml, vl;
    double neg2ll = 0.0;
    Eigen::VectorXd contrib;
};

Moments evaluate(const Counts& y, const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                 const TruncationPolicy& policy, bool need_y = true) {
    const Eigen::Index n = eta1.size();
    Moments m;
    m.nu.resize(n);
    m.mean.resize(n);
    m.var.resize(n);
    m.ml.resize(n);
    m.vl.resize(n);
    m.contrib.resize(need_y ? n : 0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double nu = std::exp(std::clamp(eta2(i), -kLogNuBound, kLogNuBound));
        const CmpMoments mo = moments_log(eta1(i), nu, policy);
        m.nu(i) = nu;
        m.mean(i) = mo.mean;
        m.var(i) = std::max(mo.variance, kVarianceFloor);
        m.ml(i) = mo.mean_lnfact;
        m.vl(i) = std::max(mo.var_lnfact, kVarianceFloor);
        if (need_y) {
            const auto yi = static_cast<std::uint64_t>(y[static_cast<std::size_t>(i)]);
            const double ll = static_cast<double>(yi) * eta1(i) - nu * log_factorial(yi) - mo.log_zeta;
            m.contrib(i) = -2.0 * ll;
            total += ll;
        }
    }
    m.neg2ll = -2.0 * total;
    return m;
}

std::vector<double> tree_gains(const BaseTree& tree, std::size_t n_mods) {
    std::vector<double> out(n_mods, 0.0);
    for (const auto& node : tree.nodes) {
        if (!node.is_leaf()) {
            out[static_cast<std::size_t>(node.variable)] += node.delta_sse;
        }
    }
    return out;
}

std::vector<double> accumulate_importance(const std::vector<BaseTree>& trees, std::size_t n_mods, int B) {
    std::vector<double> out(n_mods, 0.0);
    if (B <= 0) {
        return out;
    }
    for (int b = 0; b < B && b < static_cast<int>(trees.size()); ++b) {
        const auto g = tree_gains(trees[static_cast<std::size_t>(b)], n_mods);
        for (std::size_t j = 0; j < n_mods; ++j) out[j] += g[j];
    }
    for (auto& v : out) v /= B;
    return out;
}

void check_moderators(const std::vector<Moderator>& mods, Eigen::Index n, const char* what) {
    for (const auto& m : mods) {
        if (m.values.size() != n) {
            throw DomainError(std::string(what) + " moderator '" + m.name + "' has the wrong length");
        }
        if (!m.values.allFinite()) {
            throw DomainError(std::string(what) + " moderator '" + m.name + "' has non-finite values");
        }
    }
}

}  // namespace

int BaseTree::n_leaves() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

int BaseTree::leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& moderators, bool* unseen) const {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
        const auto& node = nodes[static_cast<std::size_t>(at)];
        const double v = moderators(node.variable);
        bool left = v <= node.threshold;
        if (!node.levels.empty() && !std::binary_search(node.levels.begin(), node.levels.end(), v)) {
            if (unseen) *unseen = true;
            left = nodes[static_cast<std::size_t>(node.left)].n_obs >= nodes[static_cast<std::size_t>(node.right)].n_obs;
        }
        at = left ? node.left : node.right;
    }
    return at;
}

Eigen::VectorXd BaseTree::predict(const Eigen::MatrixXd& design, const Eigen::MatrixXd& moderators) const {
    Eigen::VectorXd out(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        out(i) = design.row(i).dot(nodes[static_cast<std::size_t>(leaf_of(moderators.row(i)))].coef);
    }
    return out;
}

BaseTree fit_partreg(const Eigen::VectorXd& target, const Eigen::VectorXd& weights, const Eigen::MatrixXd& design,
                     const Eigen::MatrixXd& moderators, const std::vector<ModeratorKind>& kinds,
                     const PartRegControl& control) {
    const Eigen::Index n = target.size();
    if (n == 0 || weights.size() != n || design.rows() != n || moderators.rows() != n) {
        throw DomainError("fit_partreg: inputs disagree on the number of rows");
    }
    if (design.cols() < 1) {
        throw DomainError("fit_partreg: the varying design needs at least one column");
    }
    if (!kinds.empty() && static_cast<Eigen::Index>(kinds.size()) != moderators.cols()) {
        throw DomainError("fit_partreg: one kind per moderator expected");
    }
    if (!(weights.array() > 0.0).all() || !weights.allFinite() || !target.allFinite()) {
        throw DomainError("fit_partreg: weights must be positive and targets finite");
    }
    if (control.max_leaves < 1 || control.min_node_size < 1) {
        throw DomainError("fit_partreg: max_leaves and min_node_size must be positive");
    }
    return PartRegGrower(target, weights, design, moderators, kinds, control).run();
}

void BoostData::validate() const {
    const Eigen::Index n = rows();
    if (n == 0) {
        throw DomainError("empty data");
    }
    for (const DesignBlock* b : {&x1, &x2, &w1, &w2}) {
        if (b->rows() != n && !(b->cols() == 0 && b->rows() == 0)) {
            throw DomainError("design block row count differs from the response length");
        }
    }
    if (x1.cols() == 0) {
        throw DomainError("the lambda model needs a varying design");
    }
    if (z.empty()) {
        throw DomainError("the lambda model needs at least one moderator");
    }
    if (w1.cols() > 0 && u.empty()) {
        throw DomainError("a varying nu design needs at least one nu moderator");
    }
    check_moderators(z, n, "lambda");
    check_moderators(u, n, "nu");
}

void BoostControl::validate() const {
    if (!(xi > 0.0 && xi <= 1.0)) throw DomainError("xi must lie in (0, 1]");
    if (M < 2) throw DomainError("M must be at least 2");
    if (B_max < 1) throw DomainError("B_max must be positive");
    if (min_node_size < 1) throw DomainError("min_node_size must be positive");
    if (!(stop_tol >= 0.0)) throw DomainError("stop_tol must be non-negative");
    if (stop_window < 1 || divergence_window < 1) throw DomainError("windows must be positive");
}

std::string to_string(Predictor p) { return p == Predictor::lambda ? "lambda" : "nu"; }

Predictor predictor_from_string(const std::string& s) {
    if (s == "lambda") return Predictor::lambda;
    if (s == "nu") return Predictor::nu;
    throw DomainError("unknown predictor '" + s + "'");
}

BoostModel fit_cmpboost(const BoostData& data, const BoostControl& control) {
    control.validate();
    data.validate();
    const Eigen::Index n = data.rows();
    auto block = [&](const DesignBlock& b) {
        if (b.rows() == n) return b;
        DesignBlock e;
        e.matrix.resize(n, 0);
        return e;
    };
    const DesignBlock x2 = block(data.x2);
    const DesignBlock w1 = block(data.w1);
    const DesignBlock w2 = block(data.w2);

    BoostModel model;
    model.settings = control;
    model.xi = control.xi;
    model.init = fit_cmp_glm(data.y, hstack(data.x1, x2), hstack(w1, w2), data.smooths_lambda, data.smooths_nu,
                             control.init);
    model.beta0 = model.init.beta.head(data.x1.cols());
    model.phi1 = model.init.beta.tail(x2.cols());
    model.gamma0 = model.init.gamma.head(w1.cols());
    model.phi2 = model.init.gamma.tail(w2.cols());
    for (auto& v : {&model.beta0, &model.phi1, &model.gamma0, &model.phi2}) {
        *v = v->unaryExpr([](double c) { return std::isfinite(c) ? c : 0.0; });
    }
    model.x1_names = data.x1.column_names;
    model.x2_names = x2.column_names;
    model.w1_names = w1.column_names;
    model.w2_names = w2.column_names;
    const Eigen::MatrixXd zm = moderator_matrix(data.z, n);
    const Eigen::MatrixXd um = moderator_matrix(data.u, n);
    for (const auto& m : data.z) {
        model.z_names.push_back(m.name);
        model.z_kinds.push_back(m.kind);
    }
    for (const auto& m : data.u) {
        model.u_names.push_back(m.name);
        model.u_kinds.push_back(m.kind);
    }
    model.z_means = zm.colwise().mean().transpose();
    model.u_means = um.cols() > 0 ? Eigen::VectorXd(um.colwise().mean().transpose()) : Eigen::VectorXd();

    const bool boost_nu = w1.cols() > 0 && control.init.estimate_nu;
    const PartRegControl pr{control.M, control.min_node_size};
    Eigen::VectorXd lnfy(n);
    for (Eigen::Index i = 0; i < n; ++i) lnfy(i) = log_factorial(static_cast<std::uint64_t>(data.y[static_cast<std::size_t>(i)]));

    Eigen::VectorXd eta1 = model.init.eta1;
    Eigen::VectorXd eta2 = model.init.eta2;
    Moments mo = evaluate(data.y, eta1, eta2, control.init.policy);
    model.neg2ll_path.push_back(mo.neg2ll);

    std::vector<Eigen::VectorXd> eta1_hist{eta1}, eta2_hist{eta2};
    int rising = 0;
    int b = 0;
    while (b < control.B_max) {
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXi>(data.y.data(), n).cast<double>();
        const Eigen::VectorXd r1 = (y - mo.mean).cwiseQuotient(mo.var);
        BaseTree t1 = fit_partreg(r1, mo.var, data.x1.matrix, zm, model.z_kinds, pr);
        eta1 += control.xi * t1.predict(data.x1.matrix, zm);
        model.trees1.push_back(std::move(t1));
        mo = evaluate(data.y, eta1, eta2, control.init.policy);

        if (boost_nu) {
            const Eigen::VectorXd r2 = (mo.ml - lnfy).cwiseQuotient(mo.nu.cwiseProduct(mo.vl));
            const Eigen::VectorXd wt = mo.nu.array().square() * mo.vl.array();
            BaseTree t2 = fit_partreg(r2, wt, w1.matrix, um, model.u_kinds, pr);
            eta2 += control.xi * t2.predict(w1.matrix, um);
            model.trees2.push_back(std::move(t2));
            mo = evaluate(data.y, eta1, eta2, control.init.policy);
        }
        ++b;
        model.neg2ll_path.push_back(mo.neg2ll);
        eta1_hist.push_back(eta1);
        eta2_hist.push_back(eta2);

        const auto& path = model.neg2ll_path;
        rising = path[static_cast<std::size_t>(b)] > path[static_cast<std::size_t>(b - 1)] ? rising + 1 : 0;
        if (rising >= control.divergence_window) {
            model.diverged = true;
            break;
        }
        if (b >= control.stop_window) {
            const double before = path[static_cast<std::size_t>(b - control.stop_window)];
            if (before - path[static_cast<std::size_t>(b)] < control.stop_tol * std::abs(path[static_cast<std::size_t>(b)])) {
                break;
            }
        }
    }

    if (model.diverged) {
        const auto best = static_cast<int>(std::min_element(model.neg2ll_path.begin(), model.neg2ll_path.end()) -
                                           model.neg2ll_path.begin());
        model.warnings.push_back("-2 log-likelihood rose for " + std::to_string(control.divergence_window) +
                                 " consecutive iterations; kept the best iterate (" + std::to_string(best) +
                                 "); consider a smaller xi");
        b = best;
        model.trees1.resize(static_cast<std::size_t>(b));
        if (boost_nu) model.trees2.resize(static_cast<std::size_t>(b));
        model.neg2ll_path.resize(static_cast<std::size_t>(b) + 1);
    }
    model.B = b;
    model.eta1 = eta1_hist[static_cast<std::size_t>(b)];
    model.eta2 = eta2_hist[static_cast<std::size_t>(b)];
    model.importance1 = accumulate_importance(model.trees1, data.z.size(), b);
    model.importance2 = accumulate_importance(model.trees2, data.u.size(), boost_nu ? b : 0);
    return model;
}

std::vector<double> variable_importance(const BoostModel& model, Predictor predictor) {
    return predictor == Predictor::lambda ? model.importance1 : model.importance2;
}

Eigen::VectorXd partial_dependence(const BoostModel& model, Predictor predictor, int coefficient, int moderator,
                                   const Eigen::VectorXd& grid) {
    const bool lam = predictor == Predictor::lambda;
    const Eigen::VectorXd& base = lam ? model.beta0 : model.gamma0;
    const Eigen::VectorXd& means = lam ? model.z_means : model.u_means;
    const std::vector<BaseTree>& trees = lam ? model.trees1 : model.trees2;
    if (coefficient < 0 || coefficient >= base.size()) {
        throw DomainError("partial_dependence: coefficient index out of range");
    }
    if (moderator < 0 || moderator >= means.size()) {
        throw DomainError("partial_dependence: moderator index out of range");
    }
    Eigen::VectorXd out(grid.size());
    Eigen::RowVectorXd at = means.transpose();
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
        at(moderator) = grid(g);
        double v = base(coefficient);
        for (const auto& t : trees) {
            v += model.xi * t.nodes[static_cast<std::size_t>(t.leaf_of(at))].coef(coefficient);
        }
        out(g) = v;
    }
    return out;
}

BoostPrediction predict_boost(const BoostModel& model, const BoostData& rows, int n_trees) {
    const Eigen::Index n = rows.rows();
    auto cols_ok = [n](const DesignBlock& b, std::size_t want) {
        return static_cast<std::size_t>(b.cols()) == want && (want == 0 || b.rows() == n);
    };
    if (!cols_ok(rows.x1, model.x1_names.size()) || !cols_ok(rows.x2, static_cast<std::size_t>(model.phi1.size())) ||
        !cols_ok(rows.w1, static_cast<std::size_t>(model.gamma0.size())) ||
        !cols_ok(rows.w2, static_cast<std::size_t>(model.phi2.size())) || rows.z.size() != model.z_names.size() ||
        rows.u.size() != model.u_names.size() || rows.smooths_lambda.size() != model.init.smooths_lambda.size() ||
        rows.smooths_nu.size() != model.init.smooths_nu.size()) {
        throw SchemaMismatch("prediction rows do not match the fitted model's columns");
    }
    const int B = n_trees < 0 ? model.B : std::min(n_trees, model.B);
    auto zero_if_empty = [n](const DesignBlock& b, const Eigen::VectorXd& c) -> Eigen::VectorXd {
        return b.cols() == 0 ? Eigen::VectorXd::Zero(n) : Eigen::VectorXd(b.matrix * c);
    };
    BoostPrediction out;
    out.eta1 = rows.x1.matrix * model.beta0 + zero_if_empty(rows.x2, model.phi1) + rows.x1.offset_or_zero();
    out.eta2 = zero_if_empty(rows.w1, model.gamma0) + zero_if_empty(rows.w2, model.phi2);
    if (rows.x2.cols() > 0) out.eta1 += rows.x2.offset_or_zero();
    if (rows.w1.cols() > 0) out.eta2 += rows.w1.offset_or_zero();
    if (rows.w2.cols() > 0) out.eta2 += rows.w2.offset_or_zero();
    for (std::size_t s = 0; s < model.init.smooths_lambda.size(); ++s) {
        out.eta1 += model.init.smooths_lambda[s].evaluate(rows.smooths_lambda[s].values);
    }
    for (std::size_t s = 0; s < model.init.smooths_nu.size(); ++s) {
        out.eta2 += model.init.smooths_nu[s].evaluate(rows.smooths_nu[s].values);
    }
    const Eigen::MatrixXd zm = moderator_matrix(rows.z, n);
    const Eigen::MatrixXd um = moderator_matrix(rows.u, n);
    out.unseen_level.assign(static_cast<std::size_t>(n), false);
    for (int b = 0; b < B; ++b) {
        const BaseTree& t1 = model.trees1[static_cast<std::size_t>(b)];
        for (Eigen::Index i = 0; i < n; ++i) {
            bool unseen = false;
            out.eta1(i) += model.xi * rows.x1.matrix.row(i).dot(t1.nodes[static_cast<std::size_t>(t1.leaf_of(zm.row(i), &unseen))].coef);
            if (unseen) out.unseen_level[static_cast<std::size_t>(i)] = true;
        }
        if (!model.trees2.empty()) {
            const BaseTree& t2 = model.trees2[static_cast<std::size_t>(b)];
            for (Eigen::Index i = 0; i < n; ++i) {
                bool unseen = false;
                out.eta2(i) += model.xi * rows.w1.matrix.row(i).dot(t2.nodes[static_cast<std::size_t>(t2.leaf_of(um.row(i), &unseen))].coef);
                if (unseen) out.unseen_level[static_cast<std::size_t>(i)] = true;
            }
        }
    }
    const bool has_y = static_cast<Eigen::Index>(rows.y.size()) == n && n > 0;
    const Moments mo = evaluate(rows.y, out.eta1, out.eta2, model.settings.init.policy, has_y);
    out.lambda = out.eta1.array().exp();
    out.nu = mo.nu;
    out.mean = mo.mean;
    if (has_y) out.neg2ll = mo.contrib;
    return out;
}

}  // namespace cmpvc
