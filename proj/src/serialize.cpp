#include "cmpvc/serialize.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace cmpvc {

namespace {

constexpr int kFormatVersion = 1;

Json num(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

double get_num(const Json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json vec(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

Eigen::VectorXd get_vec(const Json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i]);
    return v;
}

Json mat(const Eigen::MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", a}};
}

Eigen::MatrixXd get_mat(const Json& j) {
    Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const Json& d = j.at("data");
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = get_vec(d.at(static_cast<std::size_t>(r))).transpose();
    return m;
}

Json doubles(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::vector<double> get_doubles(const Json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(get_num(x));
    return v;
}

std::string to_string(ModeratorKind k) {
    switch (k) {
        case ModeratorKind::continuous: return "continuous";
        case ModeratorKind::ordinal: return "ordinal";
        case ModeratorKind::categorical: return "categorical";
    }
    return "continuous";
}

ModeratorKind moderator_kind_from_string(const std::string& s) {
    if (s == "continuous") return ModeratorKind::continuous;
    if (s == "ordinal") return ModeratorKind::ordinal;
    if (s == "categorical") return ModeratorKind::categorical;
    throw DomainError("unknown moderator kind '" + s + "'");
}

Json kinds(const std::vector<ModeratorKind>& k) {
    Json a = Json::array();
    for (auto x : k) a.push_back(to_string(x));
    return a;
}

std::vector<ModeratorKind> get_kinds(const Json& j) {
    std::vector<ModeratorKind> out;
    for (const auto& x : j) out.push_back(moderator_kind_from_string(x.get<std::string>()));
    return out;
}

// Overlay helper that rejects keys outside the known set.
class Overlay {
public:
    Overlay(const Json& j, const char* what) : j_(j), what_(what) {
        if (!j.is_object()) throw DomainError(std::string(what) + " settings must be a JSON object");
    }
    template <class T>
    void take(const char* key, T& field) {
        known_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            field = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw DomainError(std::string(what_) + " setting '" + key + "' has the wrong type");
        }
    }
    const Json* sub(const char* key) {
        known_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!known_.count(k)) throw DomainError("unknown " + std::string(what_) + " setting '" + k + "'");
        }
    }

private:
    const Json& j_;
    const char* what_;
    std::set<std::string> known_;
};

}  // namespace

Json to_json(const FitControl& c) {
    return {{"max_iter", c.max_iter},
            {"tol", c.tol},
            {"min_iter", c.min_iter},
            {"estimate_nu", c.estimate_nu},
            {"scheme", c.scheme == UpdateScheme::joint ? "joint" : "alternating"},
            {"max_halvings", c.max_halvings},
            {"smoothing_freeze_iter", c.smoothing_freeze_iter},
            {"rel_tol", c.policy.rel_tol},
            {"max_terms", c.policy.max_terms}};
}

Json to_json(const MobControl& c) {
    return {{"alpha", c.alpha},
            {"min_node_size", c.min_node_size},
            {"max_depth", c.max_depth},
            {"split_method", to_string(c.split_method)},
            {"cp_percent", c.cp_percent},
            {"quantile_thin_threshold", c.quantile_thin_threshold},
            {"inner_refit_iters", c.inner_refit_iters},
            {"backfit_passes", c.backfit_passes},
            {"n_sim", c.n_sim},
            {"seed", c.seed},
            {"fit", to_json(c.fit)}};
}

Json to_json(const BoostControl& c) {
    return {{"xi", c.xi},
            {"M", c.M},
            {"B_max", c.B_max},
            {"min_node_size", c.min_node_size},
            {"stop_tol", c.stop_tol},
            {"stop_window", c.stop_window},
            {"divergence_window", c.divergence_window},
            {"init", to_json(c.init)}};
}

FitControl fit_control_from_json(const Json& j, FitControl c) {
    Overlay o(j, "fit");
    o.take("max_iter", c.max_iter);
    o.take("tol", c.tol);
    o.take("min_iter", c.min_iter);
    o.take("estimate_nu", c.estimate_nu);
    std::string scheme = c.scheme == UpdateScheme::joint ? "joint" : "alternating";
    o.take("scheme", scheme);
    if (scheme != "joint" && scheme != "alternating") throw DomainError("unknown update scheme '" + scheme + "'");
    c.scheme = scheme == "joint" ? UpdateScheme::joint : UpdateScheme::alternating;
    o.take("max_halvings", c.max_halvings);
    o.take("smoothing_freeze_iter", c.smoothing_freeze_iter);
    o.take("rel_tol", c.policy.rel_tol);
    o.take("max_terms", c.policy.max_terms);
    o.finish();
    return c;
}

MobControl mob_control_from_json(const Json& j, MobControl c) {
    Overlay o(j, "mob");
    o.take("alpha", c.alpha);
    o.take("min_node_size", c.min_node_size);
    o.take("max_depth", c.max_depth);
    std::string method = to_string(c.split_method);
    o.take("split_method", method);
    c.split_method = split_method_from_string(method);
    o.take("cp_percent", c.cp_percent);
    o.take("quantile_thin_threshold", c.quantile_thin_threshold);
    o.take("inner_refit_iters", c.inner_refit_iters);
    o.take("backfit_passes", c.backfit_passes);
    o.take("n_sim", c.n_sim);
    o.take("seed", c.seed);
    if (const Json* f = o.sub("fit")) c.fit = fit_control_from_json(*f, c.fit);
    o.finish();
    return c;
}

BoostControl boost_control_from_json(const Json& j, BoostControl c) {
    Overlay o(j, "boost");
    o.take("xi", c.xi);
    o.take("M", c.M);
    o.take("B_max", c.B_max);
    o.take("min_node_size", c.min_node_size);
    o.take("stop_tol", c.stop_tol);
    o.take("stop_window", c.stop_window);
    o.take("divergence_window", c.divergence_window);
    if (const Json* f = o.sub("init")) c.init = fit_control_from_json(*f, c.init);
    o.finish();
    return c;
}

Json to_json(const FittedSmooth& s) {
    return {{"variable", s.variable},
            {"knots", doubles(s.basis.basis.knots())},
            {"degree", s.basis.basis.degree()},
            {"constraint", mat(s.basis.constraint)},
            {"penalty", mat(s.basis.penalty)},
            {"coefficients", vec(s.coefficients)},
            {"smoothing_parameter", num(s.smoothing_parameter)},
            {"edf", num(s.edf)}};
}

FittedSmooth smooth_from_json(const Json& j) {
    FittedSmooth s;
    s.variable = j.at("variable").get<std::string>();
    s.basis.basis = BSplineBasis(get_doubles(j.at("knots")), j.at("degree").get<int>());
    s.basis.constraint = get_mat(j.at("constraint"));
    s.basis.penalty = get_mat(j.at("penalty"));
    s.coefficients = get_vec(j.at("coefficients"));
    s.smoothing_parameter = get_num(j.at("smoothing_parameter"));
    s.edf = get_num(j.at("edf"));
    return s;
}

namespace {

Json smooths(const std::vector<FittedSmooth>& v) {
    Json a = Json::array();
    for (const auto& s : v) a.push_back(to_json(s));
    return a;
}

std::vector<FittedSmooth> get_smooths(const Json& j) {
    std::vector<FittedSmooth> out;
    for (const auto& s : j) out.push_back(smooth_from_json(s));
    return out;
}

Json split_json(const SplitRecord& s) {
    return {{"variable", s.variable},
            {"variable_index", s.variable_index},
            {"point", num(s.point)},
            {"statistic", num(s.statistic)},
            {"p_value", num(s.p_value)},
            {"adjusted_p_value", num(s.adjusted_p_value)},
            {"block", to_string(s.block)},
            {"method", to_string(s.method)},
            {"objective", num(s.objective)},
            {"n_candidates", s.n_candidates},
            {"training_levels", doubles(s.training_levels)}};
}

SplitRecord get_split(const Json& j) {
    SplitRecord s;
    s.variable = j.at("variable").get<std::string>();
    s.variable_index = j.at("variable_index").get<int>();
    s.point = get_num(j.at("point"));
    s.statistic = get_num(j.at("statistic"));
    s.p_value = get_num(j.at("p_value"));
    s.adjusted_p_value = get_num(j.at("adjusted_p_value"));
    s.block = j.at("block").get<std::string>() == "nu" ? ScoreBlock::nu : ScoreBlock::lambda;
    s.method = split_method_from_string(j.at("method").get<std::string>());
    s.objective = get_num(j.at("objective"));
    s.n_candidates = j.at("n_candidates").get<int>();
    s.training_levels = get_doubles(j.at("training_levels"));
    return s;
}

}  // namespace

Json to_json(const GlmFit& f) {
    return {{"beta", vec(f.beta)},
            {"gamma", vec(f.gamma)},
            {"se_beta", vec(f.se_beta)},
            {"se_gamma", vec(f.se_gamma)},
            {"smooths_lambda", smooths(f.smooths_lambda)},
            {"smooths_nu", smooths(f.smooths_nu)},
            {"neg2loglik", num(f.neg2loglik)},
            {"penalized_objective", num(f.penalized_objective)},
            {"edf", num(f.edf)},
            {"converged", f.converged},
            {"iterations", f.iterations},
            {"nu_clamped", f.nu_clamped},
            {"dropped_lambda_columns", f.dropped_lambda_columns},
            {"dropped_nu_columns", f.dropped_nu_columns}};
}

GlmFit glm_from_json(const Json& j) {
    GlmFit f;
    f.beta = get_vec(j.at("beta"));
    f.gamma = get_vec(j.at("gamma"));
    f.se_beta = get_vec(j.at("se_beta"));
    f.se_gamma = get_vec(j.at("se_gamma"));
    f.smooths_lambda = get_smooths(j.at("smooths_lambda"));
    f.smooths_nu = get_smooths(j.at("smooths_nu"));
    f.neg2loglik = get_num(j.at("neg2loglik"));
    f.penalized_objective = get_num(j.at("penalized_objective"));
    f.edf = get_num(j.at("edf"));
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.at("iterations").get<int>();
    f.nu_clamped = j.at("nu_clamped").get<bool>();
    f.dropped_lambda_columns = j.at("dropped_lambda_columns").get<std::vector<int>>();
    f.dropped_nu_columns = j.at("dropped_nu_columns").get<std::vector<int>>();
    return f;
}

Json to_json(const MobTree& t) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) {
        Json j = {{"id", n.id},
                  {"depth", n.depth},
                  {"n_obs", n.n_obs},
                  {"beta", vec(n.beta)},
                  {"gamma", vec(n.gamma)},
                  {"left", n.left},
                  {"right", n.right},
                  {"neg2loglik_local", num(n.neg2loglik_local)},
                  {"converged", n.converged},
                  {"fit_failed", n.fit_failed}};
        j["split"] = n.split ? split_json(*n.split) : Json(nullptr);
        nodes.push_back(j);
    }
    return {{"nodes", nodes},
            {"phi1", vec(t.phi1)},
            {"phi2", vec(t.phi2)},
            {"smooths_lambda", smooths(t.smooths_lambda)},
            {"smooths_nu", smooths(t.smooths_nu)},
            {"global_neg2ll", num(t.global_neg2ll)},
            {"total_local_neg2ll", num(t.total_local_neg2ll)},
            {"final_neg2ll", num(t.final_neg2ll)},
            {"moderator_names", t.moderator_names},
            {"moderator_kinds", kinds(t.moderator_kinds)},
            {"x1_names", t.x1_names},
            {"x2_names", t.x2_names},
            {"w1_names", t.w1_names},
            {"w2_names", t.w2_names},
            {"warnings", t.warnings},
            {"settings", to_json(t.settings)}};
}

MobTree mob_from_json(const Json& j) {
    MobTree t;
    for (const auto& n : j.at("nodes")) {
        MobNode m;
        m.id = n.at("id").get<int>();
        m.depth = n.at("depth").get<int>();
        m.n_obs = n.at("n_obs").get<int>();
        m.beta = get_vec(n.at("beta"));
        m.gamma = get_vec(n.at("gamma"));
        m.left = n.at("left").get<int>();
        m.right = n.at("right").get<int>();
        m.neg2loglik_local = get_num(n.at("neg2loglik_local"));
        m.converged = n.at("converged").get<bool>();
        m.fit_failed = n.at("fit_failed").get<bool>();
        if (!n.at("split").is_null()) m.split = get_split(n.at("split"));
        t.nodes.push_back(std::move(m));
    }
    const auto n_nodes = static_cast<int>(t.nodes.size());
    for (const auto& m : t.nodes) {
        if ((m.left < 0) != (m.right < 0) || m.left >= n_nodes || m.right >= n_nodes || (m.left >= 0 && !m.split)) {
            throw ParseError("tree JSON has an inconsistent node " + std::to_string(m.id));
        }
    }
    t.phi1 = get_vec(j.at("phi1"));
    t.phi2 = get_vec(j.at("phi2"));
    t.smooths_lambda = get_smooths(j.at("smooths_lambda"));
    t.smooths_nu = get_smooths(j.at("smooths_nu"));
    t.global_neg2ll = get_num(j.at("global_neg2ll"));
    t.total_local_neg2ll = get_num(j.at("total_local_neg2ll"));
    t.final_neg2ll = get_num(j.at("final_neg2ll"));
    t.moderator_names = j.at("moderator_names").get<std::vector<std::string>>();
    t.moderator_kinds = get_kinds(j.at("moderator_kinds"));
    t.x1_names = j.at("x1_names").get<std::vector<std::string>>();
    t.x2_names = j.at("x2_names").get<std::vector<std::string>>();
    t.w1_names = j.at("w1_names").get<std::vector<std::string>>();
    t.w2_names = j.at("w2_names").get<std::vector<std::string>>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    t.settings = mob_control_from_json(j.at("settings"));
    return t;
}

Json to_json(const BaseTree& t) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) {
        nodes.push_back({{"variable", n.variable},
                         {"threshold", num(n.threshold)},
                         {"left", n.left},
                         {"right", n.right},
                         {"n_obs", n.n_obs},
                         {"coef", vec(n.coef)},
                         {"sse", num(n.sse)},
                         {"delta_sse", num(n.delta_sse)},
                         {"levels", doubles(n.levels)}});
    }
    return {{"nodes", nodes}, {"degenerate", t.degenerate}};
}

BaseTree base_tree_from_json(const Json& j) {
    BaseTree t;
    for (const auto& n : j.at("nodes")) {
        BaseTreeNode b;
        b.variable = n.at("variable").get<int>();
        b.threshold = get_num(n.at("threshold"));
        b.left = n.at("left").get<int>();
        b.right = n.at("right").get<int>();
        b.n_obs = n.at("n_obs").get<int>();
        b.coef = get_vec(n.at("coef"));
        b.sse = get_num(n.at("sse"));
        b.delta_sse = get_num(n.at("delta_sse"));
        b.levels = get_doubles(n.at("levels"));
        t.nodes.push_back(std::move(b));
    }
    const auto n_nodes = static_cast<int>(t.nodes.size());
    for (const auto& b : t.nodes) {
        if ((b.left < 0) != (b.right < 0) || b.left >= n_nodes || b.right >= n_nodes) {
            throw ParseError("base tree JSON has an inconsistent node");
        }
    }
    t.degenerate = j.at("degenerate").get<bool>();
    return t;
}

Json to_json(const BoostModel& m) {
    Json t1 = Json::array(), t2 = Json::array();
    for (const auto& t : m.trees1) t1.push_back(to_json(t));
    for (const auto& t : m.trees2) t2.push_back(to_json(t));
    return {{"init", to_json(m.init)},
            {"beta0", vec(m.beta0)},
            {"phi1", vec(m.phi1)},
            {"gamma0", vec(m.gamma0)},
            {"phi2", vec(m.phi2)},
            {"trees1", t1},
            {"trees2", t2},
            {"xi", m.xi},
            {"B", m.B},
            {"importance1", doubles(m.importance1)},
            {"importance2", doubles(m.importance2)},
            {"neg2ll_path", doubles(m.neg2ll_path)},
            {"z_names", m.z_names},
            {"u_names", m.u_names},
            {"z_kinds", kinds(m.z_kinds)},
            {"u_kinds", kinds(m.u_kinds)},
            {"z_means", vec(m.z_means)},
            {"u_means", vec(m.u_means)},
            {"x1_names", m.x1_names},
            {"x2_names", m.x2_names},
            {"w1_names", m.w1_names},
            {"w2_names", m.w2_names},
            {"diverged", m.diverged},
            {"warnings", m.warnings},
            {"settings", to_json(m.settings)}};
}

BoostModel boost_from_json(const Json& j) {
    BoostModel m;
    m.init = glm_from_json(j.at("init"));
    m.beta0 = get_vec(j.at("beta0"));
    m.phi1 = get_vec(j.at("phi1"));
    m.gamma0 = get_vec(j.at("gamma0"));
    m.phi2 = get_vec(j.at("phi2"));
    for (const auto& t : j.at("trees1")) m.trees1.push_back(base_tree_from_json(t));
    for (const auto& t : j.at("trees2")) m.trees2.push_back(base_tree_from_json(t));
    m.xi = j.at("xi").get<double>();
    m.B = j.at("B").get<int>();
    if (static_cast<int>(m.trees1.size()) < m.B || (!m.trees2.empty() && static_cast<int>(m.trees2.size()) < m.B)) {
        throw ParseError("boost JSON holds fewer trees than its iteration count");
    }
    m.importance1 = get_doubles(j.at("importance1"));
    m.importance2 = get_doubles(j.at("importance2"));
    m.neg2ll_path = get_doubles(j.at("neg2ll_path"));
    m.z_names = j.at("z_names").get<std::vector<std::string>>();
    m.u_names = j.at("u_names").get<std::vector<std::string>>();
    m.z_kinds = get_kinds(j.at("z_kinds"));
    m.u_kinds = get_kinds(j.at("u_kinds"));
    m.z_means = get_vec(j.at("z_means"));
    m.u_means = get_vec(j.at("u_means"));
    m.x1_names = j.at("x1_names").get<std::vector<std::string>>();
    m.x2_names = j.at("x2_names").get<std::vector<std::string>>();
    m.w1_names = j.at("w1_names").get<std::vector<std::string>>();
    m.w2_names = j.at("w2_names").get<std::vector<std::string>>();
    m.diverged = j.at("diverged").get<bool>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    m.settings = boost_control_from_json(j.at("settings"));
    return m;
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::glm: return "glm";
        case ModelKind::mob: return "mob";
        case ModelKind::boost: return "boost";
    }
    return "glm";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "glm") return ModelKind::glm;
    if (s == "mob") return ModelKind::mob;
    if (s == "boost") return ModelKind::boost;
    throw DomainError("unknown model kind '" + s + "'");
}

Json to_json(const FittedModel& m) {
    Json schema = Json::array();
    for (const auto& c : m.schema) {
        schema.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"role", to_string(c.role)}});
    }
    Json j = {{"format", "cmpvc-model"},
              {"version", kFormatVersion},
              {"kind", to_string(m.kind)},
              {"formula", m.formula},
              {"schema", schema},
              {"levels", m.levels}};
    switch (m.kind) {
        case ModelKind::glm: j["model"] = to_json(m.glm); break;
        case ModelKind::mob: j["model"] = to_json(m.mob); break;
        case ModelKind::boost: j["model"] = to_json(m.boost); break;
    }
    return j;
}

FittedModel fitted_model_from_json(const Json& j) {
    try {
        if (j.at("format").get<std::string>() != "cmpvc-model") throw ParseError("not a cmpvc model file");
        if (j.at("version").get<int>() != kFormatVersion) {
            throw ParseError("unsupported model file version " + std::to_string(j.at("version").get<int>()));
        }
        FittedModel m;
        m.kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.formula = j.at("formula").get<std::string>();
        for (const auto& c : j.at("schema")) {
            m.schema.push_back({c.at("name").get<std::string>(), column_kind_from_string(c.at("kind").get<std::string>()),
                                column_role_from_string(c.at("role").get<std::string>())});
        }
        m.levels = j.at("levels").get<std::map<std::string, std::vector<std::string>>>();
        switch (m.kind) {
            case ModelKind::glm: m.glm = glm_from_json(j.at("model")); break;
            case ModelKind::mob: m.mob = mob_from_json(j.at("model")); break;
            case ModelKind::boost: m.boost = boost_from_json(j.at("model")); break;
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    }
}

ModelPrediction predict(const FittedModel& model, const Dataset& data) {
    const ModelSpec spec = parse_formula(model.formula);
    Dataset d = data;
    std::set<std::string> covariates;
    for (const PredictorSpec* p : {&spec.lambda, &spec.nu}) {
        covariates.insert(p->varying.begin(), p->varying.end());
        covariates.insert(p->global.begin(), p->global.end());
    }
    for (auto& c : d.columns) {
        if (c.kind != ColumnKind::categorical) continue;
        const auto it = model.levels.find(c.name);
        const std::size_t known = it == model.levels.end() ? 0 : it->second.size();
        if (c.levels.size() > known) {
            if (covariates.count(c.name)) {
                throw SchemaMismatch("covariate '" + c.name + "' has level '" + c.levels[known] +
                                     "' that the model was not fitted on");
            }
            c.levels.resize(known);
        }
    }
    ModelPrediction out;
    const Eigen::Index n = d.rows();
    switch (model.kind) {
        case ModelKind::glm: {
            const ModelFrame f = build_frame(d, spec, FrameUse::glm);
            const GlmFit& g = model.glm;
            if (f.x1.cols() != g.beta.size() || f.w1.cols() != g.gamma.size() ||
                f.smooths_lambda.size() != g.smooths_lambda.size() || f.smooths_nu.size() != g.smooths_nu.size()) {
                throw SchemaMismatch("prediction rows do not match the fitted model's columns");
            }
            out.eta1 = f.x1.matrix * g.beta;
            out.eta2 = f.w1.matrix * g.gamma;
            for (std::size_t s = 0; s < g.smooths_lambda.size(); ++s) {
                out.eta1 += g.smooths_lambda[s].evaluate(f.smooths_lambda[s].values);
            }
            for (std::size_t s = 0; s < g.smooths_nu.size(); ++s) {
                out.eta2 += g.smooths_nu[s].evaluate(f.smooths_nu[s].values);
            }
            out.eta2 = out.eta2.cwiseMax(-20.0).cwiseMin(20.0);
            out.lambda = out.eta1.array().exp();
            out.nu = out.eta2.array().exp();
            out.mean.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) out.mean(i) = moments_log(out.eta1(i), out.nu(i)).mean;
            out.unseen_level.assign(static_cast<std::size_t>(n), false);
            break;
        }
        case ModelKind::mob: {
            const MobPrediction p = predict_mob(model.mob, build_frame(d, spec, FrameUse::mob).mob());
            out.lambda = p.lambda;
            out.nu = p.nu;
            out.eta1 = p.lambda.array().log();
            out.eta2 = p.nu.array().log();
            out.mean = p.mean;
            out.leaf = p.leaf;
            out.unseen_level = p.unseen_level;
            break;
        }
        case ModelKind::boost: {
            BoostData rows = build_frame(d, spec, FrameUse::boost).boost();
            const BoostPrediction p = predict_boost(model.boost, rows);
            out.eta1 = p.eta1;
            out.eta2 = p.eta2;
            out.lambda = p.lambda;
            out.nu = p.nu;
            out.mean = p.mean;
            out.unseen_level = p.unseen_level;
            break;
        }
    }
    return out;
}

}  // namespace cmpvc
