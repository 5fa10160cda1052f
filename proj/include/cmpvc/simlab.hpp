#pragma once

// Simulation designs for the tree and boosting studies, and the replication
// runner that turns them into per-replication CSV rows and aggregate tables.

#include "cmpvc/boost.hpp"
#include "cmpvc/irls.hpp"
#include "cmpvc/mob.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace cmpvc {

enum class Study {
    sim1_same_moderators,
    sim1_diff_moderators,
    sim2_vc_both,
    sim2_linear_nu,
};

std::string to_string(Study s);
Study study_from_string(const std::string& s);  // also accepts "sim1" and "sim2"

struct SimDesign {
    Study study = Study::sim1_same_moderators;
    int n = 1000;
    std::uint64_t seed = 1;
};

struct SimData {
    Study study = Study::sim1_same_moderators;
    Counts y;
    std::vector<std::string> names;
    Eigen::MatrixXd columns;  // n x names.size()
    Eigen::VectorXd eta1;     // true ln lambda
    Eigen::VectorXd eta2;     // true ln nu

    Eigen::Index rows() const { return columns.rows(); }
    Eigen::Index index_of(const std::string& name) const;
    Eigen::VectorXd column(const std::string& name) const;
};

// splitmix64 step; replication r of base seed s uses derive_seed(s, r).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter);

// Study 1 columns: x1 x2 x3 w1 w2 z1 z2 z3 z4. Study 2: x w z1..z10.
SimData generate(const SimDesign& design);

// The studies' model forms. Study 1: lambda varying on (1, x1, x2) with s(x3),
// nu varying on (1, w1) with s(w2), moderators z1..z4. Study 2: (1, x) and
// (1, w) varying over z1..z10, no global terms.
MobData mob_data(const SimData& data);

// Boosting form of the study-2 designs: lambda varying on (1, x) over
// z1..z10; nu varying on (1, w) over z1..z10, or global (1, w) for the design
// with a linear nu model. Study-1 data use the tree form with u = z.
BoostData boost_data(const SimData& data);

// Header "y,<names>" then one row per observation, full precision.
std::string data_csv(const SimData& data);

// Rows [begin, end) of a data set, for train/test splits.
BoostData take_rows(const BoostData& data, Eigen::Index begin, Eigen::Index end);

// One fitted replication of a tree study.
struct ReplicationRow {
    int replication = 0;
    std::uint64_t seed = 0;
    SplitMethod method = SplitMethod::exhaustive;
    std::vector<SplitRecord> splits;  // node order; splits[0] is the root split
    int n_leaves = 0;
    double initial_neg2ll = 0.0;  // all-data model that seeds the offsets
    double global_neg2ll = 0.0;   // tree model after the back-fit
    double local_neg2ll = 0.0;    // summed leaf fits at growth time
    double seconds = 0.0;
    std::string error;  // non-empty when the replication failed
};

struct MethodSummary {
    SplitMethod method = SplitMethod::exhaustive;
    int n_ok = 0;
    double split_mean = 0.0, split_sd = 0.0;
    double global_mean = 0.0, global_sd = 0.0;
    double local_mean = 0.0, local_sd = 0.0;
    double leaves_mean = 0.0, leaves_sd = 0.0;
    double seconds_median = 0.0;
};

struct SimResult {
    Study study = Study::sim1_same_moderators;
    int n = 0;
    std::uint64_t base_seed = 0;
    int replications = 0;
    std::vector<SplitMethod> methods;
    std::vector<ReplicationRow> rows;  // replication-major, methods in the given order
    std::vector<MethodSummary> summary;
};

// Replication r draws its data from derive_seed(base_seed, r). All methods
// fit the same data; failures are recorded in the row, not thrown.
SimResult run_study(Study study, int n, const std::vector<SplitMethod>& methods, int replications,
                    std::uint64_t base_seed, const MobControl& control = {});

std::string replication_csv(const SimResult& result, SplitMethod method);
// Rows Split-1, Global -2l, Local -2l, No. of terminal nodes; one
// "mean (sd)" column per method.
std::string aggregate_csv(const SimResult& result);
// Wall-clock seconds are kept out of the CSVs above so that identical runs
// produce identical files.
std::string timing_csv(const SimResult& result);

// Test -2 log-likelihood over the number of terminal nodes M, with B frozen
// at the number of iterations the training fit ran.
struct BoostSweepRow {
    int replication = 0;
    int M = 0;
    int B = 0;
    double train_neg2ll = 0.0;
    double test_neg2ll = 0.0;
    double seconds = 0.0;
    std::string error;
};

struct BoostSweep {
    Study study = Study::sim2_vc_both;
    int n = 0;
    std::vector<int> M_values;
    std::vector<BoostSweepRow> rows;
    std::vector<double> mean_test;  // per M over successful replications
    std::vector<double> mean_B;
    int best_M = 0;
};

BoostSweep run_boost_sweep(Study study, int n, const std::vector<int>& M_values, int replications,
                           std::uint64_t base_seed, const BoostControl& control = {}, double train_fraction = 0.6);

std::string boost_sweep_csv(const BoostSweep& sweep);
std::string boost_selection_csv(const BoostSweep& sweep);  // mean test -2 log-likelihood per M
std::string timing_csv(const BoostSweep& sweep);

namespace truth {

double sim1_eta1(double x1, double x2, double x3, double z1);
double sim1_eta2(Study study, double w1, double w2, double z1, double z3);

// Study 2 coefficient functions of the moderator vector z (z(0) is z1).
double beta0(const Eigen::VectorXd& z);
double beta1(const Eigen::VectorXd& z);
double gamma0(Study study, const Eigen::VectorXd& z);
double gamma1(Study study, const Eigen::VectorXd& z);

}  // namespace truth

}  // namespace cmpvc
