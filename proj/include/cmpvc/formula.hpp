#pragma once

// Model formulas of the form
//
//   lambda = vc(x1, x2 | z1, z2, z3) + s(x3); nu = vc(w1 | z1, z2) + hum
//
// vc(covariates | moderators) lists the varying coefficients; its intercept
// is implicit. Bare names are global parametric terms, s(v) or s(v, k) a
// penalized smooth with k basis functions and onehot(v) inside a moderator
// list expands a categorical moderator into binary ones. "0" drops the
// intercept and "1" alone is an intercept-only predictor. An omitted nu
// statement means a constant nu.

#include "cmpvc/boost.hpp"
#include "cmpvc/dataset.hpp"
#include "cmpvc/irls.hpp"
#include "cmpvc/mob.hpp"

#include <string>
#include <vector>

namespace cmpvc {

struct SmoothSpec {
    std::string variable;
    int basis_size = 10;
};

struct ModeratorSpec {
    std::string variable;
    bool one_hot = false;
};

struct PredictorSpec {
    bool intercept = true;
    bool has_vc = false;  // the intercept varies when true
    std::vector<std::string> varying;
    std::vector<ModeratorSpec> moderators;
    std::vector<std::string> global;
    std::vector<SmoothSpec> smooths;
};

struct ModelSpec {
    PredictorSpec lambda;
    PredictorSpec nu;
    std::string text;

    std::vector<std::string> variables() const;  // every referenced column, first use order
};

ModelSpec parse_formula(const std::string& text);
std::string to_string(const ModelSpec& spec);  // canonical form, parses back to the same spec

enum class FrameUse { glm, mob, boost };

// Design blocks assembled from a data set. Categorical covariates enter as
// indicators of all but their first level.
struct ModelFrame {
    Counts y;  // empty without a response column
    DesignBlock x1, x2, w1, w2;
    std::vector<SmoothTerm> smooths_lambda, smooths_nu;
    std::vector<Moderator> z, u;

    std::vector<Moderator> all_moderators() const;  // z then the u not in z
    MobData mob() const;
    BoostData boost() const;
};

// For glm use the varying blocks are folded into the global ones.
ModelFrame build_frame(const Dataset& data, const ModelSpec& spec, FrameUse use);

// Column schema implied by a formula: numeric unless listed in categorical.
std::vector<ColumnSchema> schema_for(const ModelSpec& spec, const std::string& response,
                                     const std::vector<std::string>& categorical);

}  // namespace cmpvc
