#pragma once

// JSON forms of fitted models and control settings, and the model artifact
// written by the command-line tool. Doubles keep round-trip precision;
// non-finite values are stored as null and read back as NaN.

#include "cmpvc/boost.hpp"
#include "cmpvc/dataset.hpp"
#include "cmpvc/formula.hpp"
#include "cmpvc/irls.hpp"
#include "cmpvc/mob.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace cmpvc {

using Json = nlohmann::json;

Json to_json(const FitControl& c);
Json to_json(const MobControl& c);
Json to_json(const BoostControl& c);

// Apply the keys present in j on top of `base`; unknown keys raise DomainError.
FitControl fit_control_from_json(const Json& j, FitControl base = {});
MobControl mob_control_from_json(const Json& j, MobControl base = {});
BoostControl boost_control_from_json(const Json& j, BoostControl base = {});

Json to_json(const FittedSmooth& s);
FittedSmooth smooth_from_json(const Json& j);

Json to_json(const GlmFit& fit);
GlmFit glm_from_json(const Json& j);  // coefficients, smooths and fit summary only

Json to_json(const MobTree& tree);
MobTree mob_from_json(const Json& j);

Json to_json(const BaseTree& tree);
BaseTree base_tree_from_json(const Json& j);

Json to_json(const BoostModel& model);
BoostModel boost_from_json(const Json& j);

enum class ModelKind { glm, mob, boost };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// Everything needed to rebuild design blocks from new CSV rows and predict.
struct FittedModel {
    ModelKind kind = ModelKind::glm;
    std::string formula;
    std::vector<ColumnSchema> schema;
    std::map<std::string, std::vector<std::string>> levels;
    GlmFit glm;
    MobTree mob;
    BoostModel boost;
};

Json to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const Json& j);

struct ModelPrediction {
    Eigen::VectorXd eta1;
    Eigen::VectorXd eta2;
    Eigen::VectorXd lambda;
    Eigen::VectorXd nu;
    Eigen::VectorXd mean;
    std::vector<int> leaf;  // mob only
    std::vector<bool> unseen_level;
};

// Rows of `data` must carry the model's schema columns, with categorical
// codes from the model's level dictionary.
ModelPrediction predict(const FittedModel& model, const Dataset& data);

}  // namespace cmpvc
