#include "cmpvc/mob.hpp"

#include "cmpvc/changepoint.hpp"
#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace cmpvc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-10;

using Rows = std::vector<Eigen::Index>;

DesignBlock take_rows(const DesignBlock& b, const Rows& rows) {
    DesignBlock out;
    out.column_names = b.column_names;
    out.matrix.resize(static_cast<Eigen::Index>(rows.size()), b.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.matrix.row(static_cast<Eigen::Index>(i)) = b.matrix.row(rows[i]);
    }
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const Rows& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    }
    return out;
}

Counts take_rows(const Counts& y, const Rows& rows) {
    Counts out;
    out.reserve(rows.size());
    for (auto r : rows) {
        out.push_back(y[static_cast<std::size_t>(r)]);
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

Eigen::MatrixXd hstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Rows sorted_order(const Eigen::VectorXd& v) {
    Rows order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
    return order;
}

NodeProblem node_subset(const NodeProblem& node, const Rows& rows) {
    NodeProblem out;
    out.y = take_rows(node.y, rows);
    out.x1 = take_rows(node.x1, rows);
    out.w1 = take_rows(node.w1, rows);
    out.offset1 = take_rows(node.offset1, rows);
    out.offset2 = take_rows(node.offset2, rows);
    out.start = node.start;
    return out;
}

// Summed child -2 log-likelihood after a few warm-started scoring steps.
double split_objective(const NodeProblem& node, const Rows& order, Eigen::Index k, const MobControl& control) {
    FitControl inner = control.fit;
    inner.max_iter = std::max(control.inner_refit_iters, 1);
    inner.min_iter = inner.max_iter;
    inner.tol = 0.0;
    const Rows left(order.begin(), order.begin() + k);
    const Rows right(order.begin() + k, order.end());
    double total = 0.0;
    for (const Rows* side : {&left, &right}) {
        const NodeProblem child = node_subset(node, *side);
        try {
            const GlmFit f = fit_with_offsets(child.y, child.x1, child.w1, child.offset1, child.offset2, {}, {},
                                              inner, node.start);
            total += f.neg2loglik;
        } catch (const Error&) {
            return kInf;
        }
    }
    return total;
}

SplitRecord evaluate_cuts(const NodeProblem& node, const Moderator& moderator, const Rows& order,
                          const Eigen::VectorXd& sorted, const std::vector<Eigen::Index>& cuts,
                          const MobControl& control, SplitMethod method) {
    if (cuts.empty()) {
        throw NoValidSplit("no admissible threshold for '" + moderator.name + "'");
    }
    double best = kInf;
    Eigen::Index best_k = -1;
    for (Eigen::Index k : cuts) {
        const double obj = split_objective(node, order, k, control);
        // Differences at rounding level count as ties, which go to the smaller threshold.
        if (std::isfinite(obj) && (best_k < 0 || obj < best - kTieTolerance * (std::abs(best) + 1.0))) {
            best = obj;
            best_k = k;
        }
    }
    if (best_k < 0) {
        throw NoValidSplit("every candidate refit failed for '" + moderator.name + "'");
    }
    SplitRecord rec;
    rec.variable = moderator.name;
    rec.point = sorted(best_k - 1);
    rec.method = method;
    rec.objective = best;
    rec.n_candidates = static_cast<int>(cuts.size());
    if (moderator.kind == ModeratorKind::categorical) {
        std::set<double> seen(sorted.data(), sorted.data() + sorted.size());
        rec.training_levels.assign(seen.begin(), seen.end());
    }
    return rec;
}

std::vector<Moderator> subset_moderators(const std::vector<Moderator>& mods, const Rows& rows) {
    std::vector<Moderator> out;
    out.reserve(mods.size());
    for (const auto& m : mods) {
        Moderator s;
        s.name = m.name;
        s.kind = m.kind;
        s.levels = m.levels;
        s.values = take_rows(m.values, rows);
        out.push_back(std::move(s));
    }
    return out;
}

bool goes_left(const SplitRecord& split, double value, bool& unseen) {
    unseen = false;
    if (!split.training_levels.empty() &&
        !std::binary_search(split.training_levels.begin(), split.training_levels.end(), value)) {
        unseen = true;
    }
    return value <= split.point;
}

class Grower {
public:
    Grower(const MobData& data, const MobControl& control, Eigen::VectorXd off1, Eigen::VectorXd off2,
           MobTree& tree)
        : data_(data), control_(control), off1_(std::move(off1)), off2_(std::move(off2)), tree_(tree) {}

    int grow(const Rows& rows, int depth, const FitStart& start) {
        NodeProblem problem;
        problem.y = take_rows(data_.y, rows);
        problem.x1 = take_rows(data_.x1, rows);
        problem.w1 = take_rows(data_.w1, rows);
        problem.offset1 = take_rows(off1_, rows);
        problem.offset2 = take_rows(off2_, rows);

        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        MobNode node;
        node.id = id;
        node.depth = depth;
        node.n_obs = static_cast<int>(rows.size());

        std::optional<GlmFit> fit;
        try {
            fit = fit_with_offsets(problem.y, problem.x1, problem.w1, problem.offset1, problem.offset2, {}, {},
                                   control_.fit, start);
        } catch (const Error& e) {
            tree_.warnings.push_back("node " + std::to_string(id) + ": refit failed (" + e.what() + ")");
        }
        if (!fit) {
            node.fit_failed = true;
            node.beta = start.beta;
            node.gamma = start.gamma;
            node.neg2loglik_local = cmp_neg2loglik(problem.y, problem.x1.matrix * start.beta + problem.offset1,
                                                   problem.w1.matrix * start.gamma + problem.offset2,
                                                   control_.fit.policy);
            tree_.nodes[static_cast<std::size_t>(id)] = node;
            return id;
        }
        node.beta = fit->beta;
        node.gamma = fit->gamma;
        node.neg2loglik_local = fit->neg2loglik;
        node.converged = fit->converged;
        if (!fit->converged) {
            tree_.warnings.push_back("node " + std::to_string(id) + ": fit did not converge");
        }
        tree_.nodes[static_cast<std::size_t>(id)] = node;

        const auto n = static_cast<int>(rows.size());
        if (depth >= control_.max_depth || n < 2 * control_.min_node_size) {
            return id;
        }
        const auto mods = subset_moderators(data_.moderators, rows);
        const auto selection = select_split_variable(fit->scores1, fit->scores2, mods, control_);
        if (!selection) {
            return id;
        }
        const Moderator& chosen = mods[static_cast<std::size_t>(selection->moderator)];
        problem.start = FitStart{fit->beta, fit->gamma};
        SplitRecord split;
        try {
            if (control_.split_method == SplitMethod::exhaustive) {
                split = exhaustive_split(problem, chosen, control_);
            } else {
                split = changepoint_split(problem, chosen, fit->scores1, fit->scores2, control_);
            }
        } catch (const NoValidSplit&) {
            return id;
        }
        split.variable_index = selection->moderator;
        split.statistic = selection->statistic;
        split.p_value = selection->p_value;
        split.adjusted_p_value = selection->adjusted_p_value;
        split.block = selection->block;

        Rows left, right;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (chosen.values(static_cast<Eigen::Index>(i)) <= split.point ? left : right).push_back(rows[i]);
        }
        tree_.nodes[static_cast<std::size_t>(id)].split = split;
        const int l = grow(left, depth + 1, problem.start);
        const int r = grow(right, depth + 1, problem.start);
        tree_.nodes[static_cast<std::size_t>(id)].left = l;
        tree_.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

private:
    const MobData& data_;
    const MobControl& control_;
    Eigen::VectorXd off1_;
    Eigen::VectorXd off2_;
    MobTree& tree_;
};

// Leaf index per training row.
std::vector<int> route_training(const MobTree& tree, const MobData& data) {
    std::vector<int> out(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        int at = 0;
        while (!tree.nodes[static_cast<std::size_t>(at)].is_leaf()) {
            const auto& node = tree.nodes[static_cast<std::size_t>(at)];
            const double v = data.moderators[static_cast<std::size_t>(node.split->variable_index)].values(i);
            at = v <= node.split->point ? node.left : node.right;
        }
        out[static_cast<std::size_t>(i)] = at;
    }
    return out;
}

void tree_predictors(const MobTree& tree, const MobData& data, const std::vector<int>& leaf, Eigen::VectorXd& t1,
                     Eigen::VectorXd& t2) {
    t1.resize(data.rows());
    t2.resize(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const auto& node = tree.nodes[static_cast<std::size_t>(leaf[static_cast<std::size_t>(i)])];
        t1(i) = data.x1.matrix.row(i).dot(node.beta);
        t2(i) = data.w1.matrix.row(i).dot(node.gamma);
    }
}

std::string format_vector(const Eigen::VectorXd& v) {
    std::ostringstream os;
    os << std::setprecision(4) << "(";
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        os << (j ? ", " : "") << v(j);
    }
    os << ")";
    return os.str();
}

void render_node(const MobTree& tree, int id, const std::string& prefix, const std::string& label,
                 std::ostringstream& os) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    os << prefix << "[" << node.id << "] " << label << " (n = " << node.n_obs << ")";
    if (node.is_leaf()) {
        os << std::setprecision(6) << " -2ll = " << node.neg2loglik_local << " beta = " << format_vector(node.beta)
           << " gamma = " << format_vector(node.gamma);
        if (node.fit_failed) {
            os << " [refit failed]";
        }
        os << "\n";
        return;
    }
    const auto& s = *node.split;
    os << std::setprecision(4) << " split " << s.variable << " (" << to_string(s.block)
       << " scores, p = " << std::scientific << s.adjusted_p_value << std::defaultfloat << ")\n";
    std::ostringstream point;
    point << std::setprecision(6) << s.point;
    const std::string child_prefix = prefix + "|   ";
    render_node(tree, node.left, child_prefix, s.variable + " <= " + point.str(), os);
    render_node(tree, node.right, child_prefix, s.variable + " > " + point.str(), os);
}

}  // namespace

std::string to_string(SplitMethod m) {
    switch (m) {
        case SplitMethod::exhaustive: return "exhaustive";
        case SplitMethod::cp_exact: return "cp_exact";
        case SplitMethod::cp_top_percent: return "cp_top_percent";
    }
    return "unknown";
}

SplitMethod split_method_from_string(const std::string& s) {
    if (s == "exhaustive") return SplitMethod::exhaustive;
    if (s == "cp_exact") return SplitMethod::cp_exact;
    if (s == "cp_top_percent" || s == "cp_top10") return SplitMethod::cp_top_percent;
    throw DomainError("unknown split method '" + s + "'");
}

std::string to_string(ScoreBlock b) { return b == ScoreBlock::lambda ? "lambda" : "nu"; }

void MobControl::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("alpha must lie in (0, 1)");
    }
    if (!(cp_percent > 0.0 && cp_percent <= 1.0)) {
        throw DomainError("cp_percent must lie in (0, 1]");
    }
    if (min_node_size < 1 || max_depth < 0 || quantile_thin_threshold < 2 || inner_refit_iters < 1 ||
        backfit_passes < 1 || n_sim < 1) {
        throw DomainError("invalid tree control");
    }
}

void MobData::validate() const {
    const Eigen::Index n = rows();
    for (const DesignBlock* b : {&x1, &x2, &w1, &w2}) {
        if (b->rows() != n) {
            throw DomainError("design block row count does not match response length");
        }
    }
    for (const auto& m : moderators) {
        if (m.values.size() != n) {
            throw DomainError("moderator '" + m.name + "' has the wrong length");
        }
    }
    if (moderators.empty()) {
        throw DomainError("a tree needs at least one moderator");
    }
}

int MobTree::n_leaves() const { return static_cast<int>(leaves().size()); }

std::vector<int> MobTree::leaves() const {
    std::vector<int> out;
    for (const auto& n : nodes) {
        if (n.is_leaf()) {
            out.push_back(n.id);
        }
    }
    return out;
}

std::vector<SplitRecord> MobTree::splits() const {
    std::vector<SplitRecord> out;
    for (const auto& n : nodes) {
        if (n.split && !n.is_leaf()) {
            out.push_back(*n.split);
        }
    }
    return out;
}

std::optional<VariableSelection> select_split_variable(const Eigen::MatrixXd& scores1,
                                                       const Eigen::MatrixXd& scores2,
                                                       const std::vector<Moderator>& moderators,
                                                       const MobControl& control) {
    VariableSelection best;
    const double n_tests = 2.0 * static_cast<double>(moderators.size());
    double best_p = kInf;
    for (std::size_t l = 0; l < moderators.size(); ++l) {
        for (ScoreBlock block : {ScoreBlock::lambda, ScoreBlock::nu}) {
            const Eigen::MatrixXd& s = block == ScoreBlock::lambda ? scores1 : scores2;
            FluctuationResult r;
            try {
                r = fluctuation_test(s, moderators[l].values, moderators[l].kind, control.n_sim, control.seed);
            } catch (const DegenerateModerator&) {
                r = FluctuationResult{};
            }
            best.p_values.push_back(r.p_value);
            if (r.p_value < best_p) {
                best_p = r.p_value;
                best.moderator = static_cast<int>(l);
                best.block = block;
                best.statistic = r.statistic;
                best.p_value = r.p_value;
            }
        }
    }
    best.adjusted_p_value = std::min(1.0, best.p_value * n_tests);
    if (best.moderator < 0 || !(best.adjusted_p_value < control.alpha)) {
        return std::nullopt;
    }
    return best;
}

std::vector<Eigen::Index> admissible_cuts(const Eigen::VectorXd& sorted, const MobControl& control) {
    const Eigen::Index n = sorted.size();
    const Eigen::Index m = control.min_node_size;
    std::vector<Eigen::Index> cuts;
    for (Eigen::Index k = std::max<Eigen::Index>(m, 1); k <= n - m && k < n; ++k) {
        if (sorted(k - 1) < sorted(k)) {
            cuts.push_back(k);
        }
    }
    const auto limit = static_cast<std::size_t>(control.quantile_thin_threshold);
    if (cuts.size() <= limit) {
        return cuts;
    }
    std::vector<Eigen::Index> thinned;
    const double step = static_cast<double>(cuts.size() - 1) / static_cast<double>(limit - 1);
    for (std::size_t j = 0; j < limit; ++j) {
        const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(j) * step));
        if (thinned.empty() || thinned.back() != cuts[idx]) {
            thinned.push_back(cuts[idx]);
        }
    }
    return thinned;
}

SplitRecord exhaustive_split(const NodeProblem& node, const Moderator& moderator, const MobControl& control) {
    const Rows order = sorted_order(moderator.values);
    const Eigen::VectorXd sorted = take_rows(moderator.values, order);
    return evaluate_cuts(node, moderator, order, sorted, admissible_cuts(sorted, control), control,
                         SplitMethod::exhaustive);
}

SplitRecord changepoint_split(const NodeProblem& node, const Moderator& moderator, const Eigen::MatrixXd& scores1,
                              const Eigen::MatrixXd& scores2, const MobControl& control) {
    const Rows order = sorted_order(moderator.values);
    const Eigen::VectorXd sorted = take_rows(moderator.values, order);
    const std::vector<Eigen::Index> cuts = admissible_cuts(sorted, control);
    if (cuts.empty()) {
        throw NoValidSplit("no admissible threshold for '" + moderator.name + "'");
    }
    const Eigen::MatrixXd scores = hstack(scores1, scores2);
    const GlrStats glr = glr_change_stats(scores, moderator.values, std::min(kMinSegment, control.min_node_size));

    const bool exact = control.split_method == SplitMethod::cp_exact;
    const auto take = exact ? std::size_t{1}
                            : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                                           control.cp_percent * static_cast<double>(cuts.size()) - 1e-9)));
    std::set<Eigen::Index> chosen;
    std::vector<Eigen::Index> ranked(cuts);
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return glr.stats(a, j) > glr.stats(b, j); });
        for (std::size_t r = 0; r < std::min(take, ranked.size()); ++r) {
            chosen.insert(ranked[r]);
        }
        ranked = cuts;
    }
    const std::vector<Eigen::Index> candidates(chosen.begin(), chosen.end());
    return evaluate_cuts(node, moderator, order, sorted, candidates, control, control.split_method);
}

MobTree fit_cmpmob(const MobData& data, const MobControl& control) {
    control.validate();
    data.validate();
    const Eigen::Index n = data.rows();
    const Eigen::Index p1 = data.x1.cols();
    const Eigen::Index q1 = data.w1.cols();

    MobTree tree;
    tree.settings = control;
    tree.x1_names = data.x1.column_names;
    tree.x2_names = data.x2.column_names;
    tree.w1_names = data.w1.column_names;
    tree.w2_names = data.w2.column_names;
    for (const auto& m : data.moderators) {
        tree.moderator_names.push_back(m.name);
        tree.moderator_kinds.push_back(m.kind);
    }

    // (i) global model on all data.
    const DesignBlock xg = hstack(data.x1, data.x2);
    const DesignBlock wg = hstack(data.w1, data.w2);
    const GlmFit global = fit_cmp_glm(data.y, xg, wg, data.smooths_lambda, data.smooths_nu, control.fit);
    if (!global.converged) {
        tree.warnings.push_back("global model did not converge");
    }
    tree.global_neg2ll = global.neg2loglik;
    tree.phi1 = global.beta.tail(data.x2.cols());
    tree.phi2 = global.gamma.tail(data.w2.cols());
    tree.smooths_lambda = global.smooths_lambda;
    tree.smooths_nu = global.smooths_nu;
    Eigen::VectorXd off1 = global.eta1 - data.x1.matrix * global.beta.head(p1);
    Eigen::VectorXd off2 = global.eta2 - data.w1.matrix * global.gamma.head(q1);

    // (ii) grow with the global parts fixed.
    Rows all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    {
        Grower grower(data, control, off1, off2, tree);
        grower.grow(all, 0, FitStart{global.beta.head(p1), global.gamma.head(q1)});
    }
    tree.total_local_neg2ll = 0.0;
    for (int leaf : tree.leaves()) {
        tree.total_local_neg2ll += tree.nodes[static_cast<std::size_t>(leaf)].neg2loglik_local;
    }

    // (iii) re-estimate the global parts with the tree as offset.
    const std::vector<int> leaf_of = route_training(tree, data);
    Eigen::VectorXd t1, t2;
    tree_predictors(tree, data, leaf_of, t1, t2);
    const bool has_global = data.x2.cols() + data.w2.cols() > 0 || !data.smooths_lambda.empty() ||
                            !data.smooths_nu.empty();
    tree.eta1 = t1 + off1;
    tree.eta2 = t2 + off2;
    if (has_global) {
        const Eigen::VectorXd base1 = data.x1.offset_or_zero() + data.x2.offset_or_zero();
        const Eigen::VectorXd base2 = data.w1.offset_or_zero() + data.w2.offset_or_zero();
        for (int pass = 0; pass < control.backfit_passes; ++pass) {
            if (pass > 0) {
                for (int leaf : tree.leaves()) {
                    auto& node = tree.nodes[static_cast<std::size_t>(leaf)];
                    Rows rows;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        if (leaf_of[static_cast<std::size_t>(i)] == leaf) {
                            rows.push_back(i);
                        }
                    }
                    try {
                        const GlmFit f = fit_with_offsets(take_rows(data.y, rows), take_rows(data.x1, rows),
                                                          take_rows(data.w1, rows), take_rows(off1, rows),
                                                          take_rows(off2, rows), {}, {}, control.fit,
                                                          FitStart{node.beta, node.gamma});
                        node.beta = f.beta;
                        node.gamma = f.gamma;
                    } catch (const Error& e) {
                        tree.warnings.push_back("back-fit leaf " + std::to_string(leaf) + ": " + e.what());
                    }
                }
                tree_predictors(tree, data, leaf_of, t1, t2);
            }
            try {
                const GlmFit g = fit_with_offsets(data.y, data.x2, data.w2, t1 + base1, t2 + base2,
                                                  data.smooths_lambda, data.smooths_nu, control.fit);
                tree.phi1 = g.beta;
                tree.phi2 = g.gamma;
                tree.smooths_lambda = g.smooths_lambda;
                tree.smooths_nu = g.smooths_nu;
                off1 = g.eta1 - t1;
                off2 = g.eta2 - t2;
                tree.eta1 = g.eta1;
                tree.eta2 = g.eta2;
            } catch (const Error& e) {
                tree.warnings.push_back(std::string("global back-fit failed: ") + e.what());
                break;
            }
        }
    }
    tree.final_neg2ll = cmp_neg2loglik(data.y, tree.eta1, tree.eta2, control.fit.policy);
    return tree;
}

MobPrediction predict_mob(const MobTree& tree, const MobData& rows) {
    const Eigen::Index n = rows.rows();
    if (rows.x1.cols() != static_cast<Eigen::Index>(tree.x1_names.size()) ||
        rows.w1.cols() != static_cast<Eigen::Index>(tree.w1_names.size()) || rows.x2.cols() != tree.phi1.size() ||
        rows.w2.cols() != tree.phi2.size() || rows.moderators.size() != tree.moderator_names.size() ||
        rows.smooths_lambda.size() != tree.smooths_lambda.size() ||
        rows.smooths_nu.size() != tree.smooths_nu.size()) {
        throw SchemaMismatch("prediction rows do not match the fitted tree's columns");
    }
    MobPrediction out;
    out.lambda.resize(n);
    out.nu.resize(n);
    out.mean.resize(n);
    out.leaf.resize(static_cast<std::size_t>(n));
    out.unseen_level.assign(static_cast<std::size_t>(n), false);

    Eigen::VectorXd g1 = rows.x2.matrix * tree.phi1 + rows.x1.offset_or_zero() + rows.x2.offset_or_zero();
    Eigen::VectorXd g2 = rows.w2.matrix * tree.phi2 + rows.w1.offset_or_zero() + rows.w2.offset_or_zero();
    for (std::size_t s = 0; s < tree.smooths_lambda.size(); ++s) {
        g1 += tree.smooths_lambda[s].evaluate(rows.smooths_lambda[s].values);
    }
    for (std::size_t s = 0; s < tree.smooths_nu.size(); ++s) {
        g2 += tree.smooths_nu[s].evaluate(rows.smooths_nu[s].values);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        int at = 0;
        while (!tree.nodes[static_cast<std::size_t>(at)].is_leaf()) {
            const auto& node = tree.nodes[static_cast<std::size_t>(at)];
            const auto& split = *node.split;
            const double v = rows.moderators[static_cast<std::size_t>(split.variable_index)].values(i);
            bool unseen = false;
            bool left = goes_left(split, v, unseen);
            if (unseen) {
                out.unseen_level[static_cast<std::size_t>(i)] = true;
                left = tree.nodes[static_cast<std::size_t>(node.left)].n_obs >=
                       tree.nodes[static_cast<std::size_t>(node.right)].n_obs;
            }
            at = left ? node.left : node.right;
        }
        const auto& leaf = tree.nodes[static_cast<std::size_t>(at)];
        out.leaf[static_cast<std::size_t>(i)] = at;
        const double e1 = rows.x1.matrix.row(i).dot(leaf.beta) + g1(i);
        const double e2 = std::clamp(rows.w1.matrix.row(i).dot(leaf.gamma) + g2(i), -20.0, 20.0);
        out.lambda(i) = std::exp(e1);
        out.nu(i) = std::exp(e2);
        out.mean(i) = moments_log(e1, out.nu(i), tree.settings.fit.policy).mean;
    }
    return out;
}

std::string render_text(const MobTree& tree) {
    std::ostringstream os;
    if (tree.nodes.empty()) {
        return "";
    }
    render_node(tree, 0, "", "root", os);
    return os.str();
}

}  // namespace cmpvc
