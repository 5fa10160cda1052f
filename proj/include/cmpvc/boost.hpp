#pragma once

// Gradient boosting of both CMP linear predictors with varying-coefficient
// regression trees as base learners. The lambda and nu predictors may use
// different moderator sets.

#include "cmpvc/irls.hpp"
#include "cmpvc/mob.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cmpvc {

struct PartRegControl {
    int max_leaves = 2;
    int min_node_size = 20;
};

struct BaseTreeNode {
    int variable = -1;  // moderator column; -1 at leaves
    double threshold = 0.0;  // left child holds values <= threshold
    int left = -1;
    int right = -1;
    int n_obs = 0;
    Eigen::VectorXd coef;  // weighted least-squares fit of the target on the design
    double sse = 0.0;
    double delta_sse = 0.0;  // reduction achieved by this node's split
    std::vector<double> levels;  // categorical splits: codes seen at the node

    bool is_leaf() const { return left < 0; }
};

struct BaseTree {
    std::vector<BaseTreeNode> nodes;  // nodes[0] is the root
    bool degenerate = false;          // constant target, grown no further

    int n_leaves() const;
    // Leaf reached by one row of moderator values; unseen categorical codes go
    // to the larger child and set *unseen.
    int leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& moderators, bool* unseen = nullptr) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& design, const Eigen::MatrixXd& moderators) const;
};

// Best-first growth: repeatedly performs the leaf/variable/threshold split
// with the largest weighted SSE reduction until max_leaves leaves exist or no
// admissible split improves the fit. kinds may be empty (all continuous).
BaseTree fit_partreg(const Eigen::VectorXd& target, const Eigen::VectorXd& weights, const Eigen::MatrixXd& design,
                     const Eigen::MatrixXd& moderators, const std::vector<ModeratorKind>& kinds,
                     const PartRegControl& control);

struct BoostData {
    Counts y;
    DesignBlock x1;  // varying, lambda
    DesignBlock x2;  // global, lambda
    DesignBlock w1;  // varying, nu (zero columns: nu is not boosted)
    DesignBlock w2;  // global, nu
    std::vector<SmoothTerm> smooths_lambda;
    std::vector<SmoothTerm> smooths_nu;
    std::vector<Moderator> z;  // lambda moderators
    std::vector<Moderator> u;  // nu moderators

    Eigen::Index rows() const { return static_cast<Eigen::Index>(y.size()); }
    void validate() const;
};

struct BoostControl {
    double xi = 0.1;
    int M = 15;
    int B_max = 1000;
    int min_node_size = 20;
    double stop_tol = 1e-6;
    int stop_window = 10;
    int divergence_window = 20;
    FitControl init{};  // the initial no-varying-coefficient fit

    void validate() const;
};

enum class Predictor { lambda, nu };

std::string to_string(Predictor p);
Predictor predictor_from_string(const std::string& s);

struct BoostModel {
    GlmFit init;
    Eigen::VectorXd beta0;  // x1 part of the initial fit
    Eigen::VectorXd phi1;   // x2 part
    Eigen::VectorXd gamma0;
    Eigen::VectorXd phi2;
    std::vector<BaseTree> trees1;
    std::vector<BaseTree> trees2;  // empty when nu is not boosted
    double xi = 0.1;
    int B = 0;
    std::vector<double> importance1;  // per z moderator
    std::vector<double> importance2;  // per u moderator
    std::vector<double> neg2ll_path;  // entry 0 is the initial fit
    Eigen::VectorXd eta1;             // training predictors after B iterations
    Eigen::VectorXd eta2;
    std::vector<std::string> z_names, u_names;
    std::vector<ModeratorKind> z_kinds, u_kinds;
    Eigen::VectorXd z_means, u_means;
    std::vector<std::string> x1_names, x2_names, w1_names, w2_names;
    bool diverged = false;
    std::vector<std::string> warnings;
    BoostControl settings;
};

BoostModel fit_cmpboost(const BoostData& data, const BoostControl& control = {});

// I_j^2 = (1/B) sum over trees of the SSE reductions from splits on moderator j.
std::vector<double> variable_importance(const BoostModel& model, Predictor predictor);

// Varying coefficient `coefficient` as a function of one moderator, the other
// moderators held at their training means.
Eigen::VectorXd partial_dependence(const BoostModel& model, Predictor predictor, int coefficient, int moderator,
                                   const Eigen::VectorXd& grid);

struct BoostPrediction {
    Eigen::VectorXd eta1;
    Eigen::VectorXd eta2;
    Eigen::VectorXd lambda;
    Eigen::VectorXd nu;
    Eigen::VectorXd mean;
    Eigen::VectorXd neg2ll;  // per row; empty when rows carry no response
    std::vector<bool> unseen_level;
};

// Uses the first n_trees iterations (all when negative).
BoostPrediction predict_boost(const BoostModel& model, const BoostData& rows, int n_trees = -1);

}  // namespace cmpvc
