#pragma once

// Semi-varying coefficient CMP trees. Node models carry the varying blocks
// x1 (lambda) and w1 (nu); the global blocks x2, w2 and the smooth terms are
// fitted once on all data and enter every node as fixed offsets.

#include "cmpvc/fluctuation.hpp"
#include "cmpvc/irls.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace cmpvc {

enum class SplitMethod { exhaustive, cp_exact, cp_top_percent };
enum class ScoreBlock { lambda, nu };

std::string to_string(SplitMethod m);
SplitMethod split_method_from_string(const std::string& s);
std::string to_string(ScoreBlock b);

struct Moderator {
    std::string name;
    Eigen::VectorXd values;  // level codes for categorical moderators
    ModeratorKind kind = ModeratorKind::continuous;
    std::vector<std::string> levels;  // labels of the codes, categorical only
};

struct MobControl {
    double alpha = 0.05;
    int min_node_size = 50;
    int max_depth = 5;
    SplitMethod split_method = SplitMethod::exhaustive;
    double cp_percent = 0.10;
    int quantile_thin_threshold = 500;
    int inner_refit_iters = 2;
    int backfit_passes = 1;
    int n_sim = 5000;
    std::uint64_t seed = kFluctuationSeed;
    FitControl fit{};

    void validate() const;
};

struct SplitRecord {
    std::string variable;
    int variable_index = -1;
    double point = 0.0;  // left child holds values <= point
    double statistic = 0.0;
    double p_value = 1.0;           // raw p-value of the selected test
    double adjusted_p_value = 1.0;  // Bonferroni over all 2L tests
    ScoreBlock block = ScoreBlock::lambda;
    SplitMethod method = SplitMethod::exhaustive;
    double objective = 0.0;  // summed child -2 log-likelihood at the inner refit
    int n_candidates = 0;
    std::vector<double> training_levels;  // categorical splits: codes seen at the node
};

struct MobNode {
    int id = 0;
    int depth = 0;
    int n_obs = 0;
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
    std::optional<SplitRecord> split;
    int left = -1;  // indices into MobTree::nodes
    int right = -1;
    double neg2loglik_local = 0.0;
    bool converged = false;
    bool fit_failed = false;

    bool is_leaf() const { return left < 0; }
};

struct MobData {
    Counts y;
    DesignBlock x1;  // varying, lambda
    DesignBlock x2;  // global parametric, lambda (may have zero columns)
    DesignBlock w1;  // varying, nu
    DesignBlock w2;  // global parametric, nu
    std::vector<SmoothTerm> smooths_lambda;
    std::vector<SmoothTerm> smooths_nu;
    std::vector<Moderator> moderators;

    Eigen::Index rows() const { return static_cast<Eigen::Index>(y.size()); }
    void validate() const;
};

struct MobTree {
    std::vector<MobNode> nodes;  // nodes[0] is the root
    Eigen::VectorXd phi1;
    Eigen::VectorXd phi2;
    std::vector<FittedSmooth> smooths_lambda;
    std::vector<FittedSmooth> smooths_nu;
    double global_neg2ll = 0.0;       // the all-data model used to seed the offsets
    double total_local_neg2ll = 0.0;  // sum over leaves at growth time
    double final_neg2ll = 0.0;        // after the global back-fit
    Eigen::VectorXd eta1;             // training linear predictors after the back-fit
    Eigen::VectorXd eta2;
    std::vector<std::string> moderator_names;
    std::vector<ModeratorKind> moderator_kinds;
    std::vector<std::string> x1_names, x2_names, w1_names, w2_names;
    std::vector<std::string> warnings;
    MobControl settings;

    int n_leaves() const;
    std::vector<int> leaves() const;
    std::vector<SplitRecord> splits() const;  // in node order
};

// Result of the per-node variable selection.
struct VariableSelection {
    int moderator = -1;
    ScoreBlock block = ScoreBlock::lambda;
    double statistic = 0.0;
    double p_value = 1.0;
    double adjusted_p_value = 1.0;
    std::vector<double> p_values;  // 2L raw p-values, lambda block first per moderator
};

// Runs 2L fluctuation tests and returns the smallest p-value's moderator when
// its Bonferroni-adjusted value is below alpha.
std::optional<VariableSelection> select_split_variable(const Eigen::MatrixXd& scores1,
                                                       const Eigen::MatrixXd& scores2,
                                                       const std::vector<Moderator>& moderators,
                                                       const MobControl& control);

// Everything a split search needs about one node's data.
struct NodeProblem {
    Counts y;
    DesignBlock x1;
    DesignBlock w1;
    Eigen::VectorXd offset1;
    Eigen::VectorXd offset2;
    FitStart start;  // the node's fitted coefficients
};

// Sorted positions k (left child = first k rows in moderator order) at which
// a threshold is admissible: the value changes and both sides satisfy
// min_node_size, thinned to quantile_thin_threshold equally spaced ranks.
std::vector<Eigen::Index> admissible_cuts(const Eigen::VectorXd& sorted_values, const MobControl& control);

SplitRecord exhaustive_split(const NodeProblem& node, const Moderator& moderator, const MobControl& control);

// Candidates from GLR statistics on the node's score columns (both blocks).
SplitRecord changepoint_split(const NodeProblem& node, const Moderator& moderator,
                              const Eigen::MatrixXd& scores1, const Eigen::MatrixXd& scores2,
                              const MobControl& control);

MobTree fit_cmpmob(const MobData& data, const MobControl& control = {});

struct MobPrediction {
    Eigen::VectorXd lambda;
    Eigen::VectorXd nu;
    Eigen::VectorXd mean;
    std::vector<int> leaf;
    std::vector<bool> unseen_level;  // routed by the majority rule
};

// New rows must carry the same columns as the training MobData.
MobPrediction predict_mob(const MobTree& tree, const MobData& rows);

// Indented text rendering, one line per node.
std::string render_text(const MobTree& tree);

}  // namespace cmpvc
