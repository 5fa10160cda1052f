// cmpvc: fit CMP GLMs, trees and boosted models from CSV files, predict from
// saved models and run the simulation studies.

#include "cmpvc/boost.hpp"
#include "cmpvc/dataset.hpp"
#include "cmpvc/errors.hpp"
#include "cmpvc/formula.hpp"
#include "cmpvc/irls.hpp"
#include "cmpvc/mob.hpp"
#include "cmpvc/serialize.hpp"
#include "cmpvc/simlab.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace cmpvc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kFit = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
    }
    return out;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---------------------------------------------------------------- fit

struct FitOptions {
    std::string kind;
    std::string data;
    std::string formula;
    std::string response;
    std::string categorical;
    std::string schema;
    std::string config;
    std::string out = ".";
    bool poisson = false;
    bool compare_poisson = false;
    std::vector<std::string> pd;
    int pd_points = 100;
    std::optional<double> xi, alpha, cp_percent;
    std::optional<int> M, B_max, min_node_size, max_depth;
    std::optional<std::string> split_method;
};

struct Controls {
    FitControl fit;
    MobControl mob;
    BoostControl boost;
};

Controls build_controls(const FitOptions& o) {
    Controls c;
    try {
        if (!o.config.empty()) {
            const Json j = read_json_file(o.config);
            if (!j.is_object()) throw UsageError("config must be a JSON object");
            for (const auto& [k, v] : j.items()) {
                if (k == "fit") c.fit = fit_control_from_json(v, c.fit);
                else if (k == "mob") c.mob = mob_control_from_json(v, c.mob);
                else if (k == "boost") c.boost = boost_control_from_json(v, c.boost);
                else throw UsageError("unknown config key '" + k + "'");
            }
            if (!j.contains("mob") || !j["mob"].contains("fit")) c.mob.fit = c.fit;
            if (!j.contains("boost") || !j["boost"].contains("init")) c.boost.init = c.fit;
        }
        if (o.alpha) c.mob.alpha = *o.alpha;
        if (o.cp_percent) c.mob.cp_percent = *o.cp_percent;
        if (o.max_depth) c.mob.max_depth = *o.max_depth;
        if (o.split_method) c.mob.split_method = split_method_from_string(*o.split_method);
        if (o.xi) c.boost.xi = *o.xi;
        if (o.M) c.boost.M = *o.M;
        if (o.B_max) c.boost.B_max = *o.B_max;
        if (o.min_node_size) {
            c.mob.min_node_size = *o.min_node_size;
            c.boost.min_node_size = *o.min_node_size;
        }
        if (o.poisson) {
            c.fit.estimate_nu = false;
            c.mob.fit.estimate_nu = false;
            c.boost.init.estimate_nu = false;
        }
        c.mob.validate();
        c.boost.validate();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    return c;
}

std::vector<ColumnSchema> read_schema(const std::string& path) {
    const Json j = read_json_file(path);
    if (!j.is_array()) throw UsageError("schema file must hold a JSON array of columns");
    std::vector<ColumnSchema> out;
    for (const auto& c : j) {
        if (!c.is_object()) throw UsageError("schema entries must be objects");
        for (const auto& [k, v] : c.items()) {
            if (k != "name" && k != "kind" && k != "role") throw UsageError("unknown schema key '" + k + "'");
        }
        try {
            out.push_back({c.at("name").get<std::string>(),
                           column_kind_from_string(c.value("kind", std::string("numeric"))),
                           column_role_from_string(c.value("role", std::string("global")))});
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("bad schema entry: ") + e.what());
        }
    }
    return out;
}

std::vector<ColumnSchema> fit_schema(const FitOptions& o, const ModelSpec& spec) {
    if (!o.schema.empty()) {
        std::vector<ColumnSchema> s = read_schema(o.schema);
        validate_schema(s);
        for (const auto& v : spec.variables()) {
            const auto it = std::find_if(s.begin(), s.end(), [&](const ColumnSchema& c) { return c.name == v; });
            if (it == s.end() || it->role == ColumnRole::ignored) {
                throw SchemaMismatch("formula uses '" + v + "', which the schema omits or ignores");
            }
        }
        return s;
    }
    if (o.response.empty()) throw UsageError("--response is required without --schema");
    return schema_for(spec, o.response, split_list(o.categorical));
}

std::string coefficient_table(const std::vector<std::string>& names, const Eigen::VectorXd& est,
                              const Eigen::VectorXd& se) {
    std::ostringstream os;
    std::size_t w = 12;
    for (const auto& n : names) w = std::max(w, n.size() + 2);
    os << "  " << std::left << std::setw(static_cast<int>(w)) << "term" << std::right << std::setw(14) << "estimate"
       << std::setw(14) << "std.error" << std::setw(10) << "z" << "\n";
    for (Eigen::Index j = 0; j < est.size(); ++j) {
        const double s = j < se.size() ? se(j) : std::nan("");
        os << "  " << std::left << std::setw(static_cast<int>(w)) << names[static_cast<std::size_t>(j)] << std::right
           << std::setw(14) << fixed(est(j), 6) << std::setw(14) << (std::isfinite(s) ? fixed(s, 6) : "NA")
           << std::setw(10) << (std::isfinite(s) && s > 0 ? fixed(est(j) / s, 2) : "NA") << "\n";
    }
    return os.str();
}

std::string smooth_lines(const std::vector<FittedSmooth>& sm, const char* which) {
    std::ostringstream os;
    for (const auto& s : sm) {
        os << "  s(" << s.variable << ") in " << which << ": edf " << fixed(s.edf, 3) << ", smoothing parameter "
           << std::setprecision(4) << s.smoothing_parameter << "\n";
    }
    return os.str();
}

double smooth_edf(const std::vector<FittedSmooth>& a, const std::vector<FittedSmooth>& b) {
    double e = 0.0;
    for (const auto& s : a) e += s.edf;
    for (const auto& s : b) e += s.edf;
    return e;
}

std::string summary_line(const std::string& label, std::size_t n, double neg2ll, std::optional<double> df) {
    std::ostringstream os;
    os << label << ": n=" << n << " -2logLik=" << fixed(neg2ll, 4) << " logLik=" << fixed(-0.5 * neg2ll, 4);
    if (df) {
        os << " df=" << fixed(*df, 3) << " AIC=" << fixed(neg2ll + 2.0 * *df, 4);
    } else {
        os << " AIC=NA";
    }
    return os.str();
}

int find_name(const std::vector<std::string>& names, const std::string& key, const char* what) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == key) return static_cast<int>(i);
    }
    try {
        std::size_t used = 0;
        const int k = std::stoi(key, &used);
        if (used == key.size() && k >= 0 && k < static_cast<int>(names.size())) return k;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("unknown ") + what + " '" + key + "'");
}

std::string partial_dependence_csv(const BoostModel& m, const BoostData& d, const std::vector<std::string>& specs,
                                   int points) {
    std::ostringstream os;
    os << std::setprecision(17) << "predictor,coefficient,moderator,value,estimate\n";
    for (const auto& spec : specs) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw UsageError("--pd expects predictor:coefficient:moderator, got '" + spec + "'");
        Predictor pred;
        try {
            pred = predictor_from_string(parts[0]);
        } catch (const Error&) {
            throw UsageError("--pd predictor must be lambda or nu, got '" + parts[0] + "'");
        }
        const bool lam = pred == Predictor::lambda;
        const int coef = find_name(lam ? m.x1_names : m.w1_names, parts[1], "varying coefficient");
        const int mod = find_name(lam ? m.z_names : m.u_names, parts[2], "moderator");
        const Eigen::VectorXd& v = (lam ? d.z : d.u)[static_cast<std::size_t>(mod)].values;
        const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(points, v.minCoeff(), v.maxCoeff());
        const Eigen::VectorXd est = partial_dependence(m, pred, coef, mod, grid);
        for (Eigen::Index g = 0; g < grid.size(); ++g) {
            os << to_string(pred) << ',' << (lam ? m.x1_names : m.w1_names)[static_cast<std::size_t>(coef)] << ','
               << (lam ? m.z_names : m.u_names)[static_cast<std::size_t>(mod)] << ',' << grid(g) << ',' << est(g)
               << '\n';
        }
    }
    return os.str();
}

int cmd_fit(const FitOptions& o) {
    const ModelKind kind = model_kind_from_string(o.kind);
    ModelSpec spec;
    try {
        spec = parse_formula(o.formula);
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    }
    if (!o.pd.empty() && kind != ModelKind::boost) throw UsageError("--pd applies to boost fits only");
    if (o.compare_poisson && kind != ModelKind::glm) throw UsageError("--compare-poisson applies to glm fits only");
    const Controls c = build_controls(o);
    const std::vector<ColumnSchema> schema = fit_schema(o, spec);

    const Dataset data = ingest_csv(o.data, schema);
    std::cerr << "read " << data.rows_read << " rows, dropped " << data.rows_dropped
              << " with missing values, kept " << data.rows() << "\n";
    const auto use = kind == ModelKind::glm ? FrameUse::glm : kind == ModelKind::mob ? FrameUse::mob : FrameUse::boost;
    const ModelFrame frame = build_frame(data, spec, use);
    const auto n = static_cast<std::size_t>(data.rows());

    FittedModel model;
    model.kind = kind;
    model.formula = to_string(spec);
    model.schema = schema;
    model.levels = data.level_dictionary();

    const fs::path out(o.out);
    std::ostringstream report;
    std::vector<std::string> summary;
    try {
        switch (kind) {
            case ModelKind::glm: {
                model.glm = fit_cmp_glm(frame.y, frame.x1, frame.w1, frame.smooths_lambda, frame.smooths_nu, c.fit);
                const GlmFit& g = model.glm;
                report << (o.poisson ? "Poisson GLM" : "CMP GLM") << " (" << model.formula << ")\n"
                       << "n = " << n << ", " << (g.converged ? "converged" : "NOT converged") << " after "
                       << g.iterations << " iterations\n\nlambda\n"
                       << coefficient_table(frame.x1.column_names, g.beta, g.se_beta);
                if (!o.poisson) report << "\nnu\n" << coefficient_table(frame.w1.column_names, g.gamma, g.se_gamma);
                report << smooth_lines(g.smooths_lambda, "lambda") << smooth_lines(g.smooths_nu, "nu");
                if (g.nu_clamped) report << "warning: ln nu reached its clamp\n";
                summary.push_back(summary_line(o.poisson ? "poisson" : "cmp", n, g.neg2loglik, g.edf));
                if (o.compare_poisson) {
                    FitControl pc = c.fit;
                    pc.estimate_nu = false;
                    const GlmFit p = fit_cmp_glm(frame.y, frame.x1, frame.w1, frame.smooths_lambda, {}, pc);
                    report << "\nPoisson comparison\n"
                           << coefficient_table(frame.x1.column_names, p.beta, p.se_beta)
                           << smooth_lines(p.smooths_lambda, "lambda");
                    summary.push_back(summary_line("poisson", n, p.neg2loglik, p.edf));
                }
                break;
            }
            case ModelKind::mob: {
                model.mob = fit_cmpmob(frame.mob(), c.mob);
                const MobTree& t = model.mob;
                const double leaf_params = static_cast<double>(t.n_leaves()) *
                                           static_cast<double>(frame.x1.cols() + (o.poisson ? 0 : frame.w1.cols()));
                const double df = leaf_params + static_cast<double>(t.phi1.size() + (o.poisson ? 0 : t.phi2.size())) +
                                  smooth_edf(t.smooths_lambda, o.poisson ? std::vector<FittedSmooth>{} : t.smooths_nu);
                report << "CMP tree (" << model.formula << "), split search " << to_string(c.mob.split_method)
                       << "\n\n"
                       << render_text(t) << "\n";
                if (t.phi1.size() > 0) report << "global lambda terms\n" << coefficient_table(t.x2_names, t.phi1, {});
                if (t.phi2.size() > 0) report << "global nu terms\n" << coefficient_table(t.w2_names, t.phi2, {});
                report << smooth_lines(t.smooths_lambda, "lambda") << smooth_lines(t.smooths_nu, "nu");
                report << "terminal nodes " << t.n_leaves() << ", all-data -2logLik " << fixed(t.global_neg2ll)
                       << ", summed leaf -2logLik " << fixed(t.total_local_neg2ll) << "\n";
                for (const auto& w : t.warnings) report << "warning: " << w << "\n";
                summary.push_back(summary_line("mob", n, t.final_neg2ll, df) +
                                  " leaves=" + std::to_string(t.n_leaves()));
                break;
            }
            case ModelKind::boost: {
                const BoostData bd = frame.boost();
                model.boost = fit_cmpboost(bd, c.boost);
                const BoostModel& m = model.boost;
                report << "CMP boosting (" << model.formula << ")\nxi = " << m.xi << ", M = " << c.boost.M
                       << ", iterations = " << m.B << (m.diverged ? " (diverged, truncated to best iterate)" : "")
                       << "\ninitial -2logLik " << fixed(m.neg2ll_path.front()) << ", final "
                       << fixed(m.neg2ll_path.back()) << "\n\nimportance\n";
                std::ostringstream imp;
                imp << std::setprecision(17) << "predictor,moderator,importance\n";
                for (std::size_t k = 0; k < m.importance1.size(); ++k) {
                    imp << "lambda," << m.z_names[k] << ',' << m.importance1[k] << '\n';
                    report << "  lambda " << std::left << std::setw(14) << m.z_names[k] << std::right
                           << std::setprecision(6) << m.importance1[k] << "\n";
                }
                for (std::size_t k = 0; k < m.importance2.size(); ++k) {
                    imp << "nu," << m.u_names[k] << ',' << m.importance2[k] << '\n';
                    report << "  nu     " << std::left << std::setw(14) << m.u_names[k] << std::right
                           << std::setprecision(6) << m.importance2[k] << "\n";
                }
                for (const auto& w : m.warnings) report << "warning: " << w << "\n";
                write_atomic(out / "importance.csv", imp.str());
                if (!o.pd.empty()) {
                    write_atomic(out / "partial_dependence.csv", partial_dependence_csv(m, bd, o.pd, o.pd_points));
                }
                summary.push_back(summary_line("boost", n, m.neg2ll_path.back(), std::nullopt) +
                                  " B=" + std::to_string(m.B));
                break;
            }
        }
    } catch (const ParseError&) {
        throw;
    } catch (const SchemaMismatch&) {
        throw;
    } catch (const Error& e) {
        std::cerr << "fit failed: " << e.what() << "\n";
        return kFit;
    }
    for (const auto& s : summary) report << s << "\n";
    write_atomic(out / "model.json", to_json(model).dump(1) + "\n");
    write_atomic(out / "report.txt", report.str());
    for (const auto& s : summary) std::cout << s << "\n";
    return kOk;
}

// ------------------------------------------------------------ predict

struct PredictOptions {
    std::string model;
    std::string data;
    std::string out = "predictions.csv";
};

int cmd_predict(const PredictOptions& o) {
    std::ifstream in(o.model);
    if (!in) throw UsageError("cannot open '" + o.model + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    const FittedModel model = fitted_model_from_json(j);
    const Dataset data = ingest_csv(o.data, model.schema, model.levels, true);
    std::cerr << "read " << data.rows_read << " rows, dropped " << data.rows_dropped << " with missing values\n";
    const ModelPrediction p = predict(model, data);
    std::ostringstream os;
    os << std::setprecision(17) << "row,eta1,eta2,lambda,nu,mean" << (p.leaf.empty() ? "" : ",leaf")
       << ",unseen_level\n";
    for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
        os << i + 1 << ',' << p.eta1(i) << ',' << p.eta2(i) << ',' << p.lambda(i) << ',' << p.nu(i) << ','
           << p.mean(i);
        if (!p.leaf.empty()) os << ',' << p.leaf[static_cast<std::size_t>(i)];
        os << ',' << (p.unseen_level[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    }
    write_atomic(o.out, os.str());
    if (data.response()) {
        const double d = cmp_neg2loglik(data.counts(), p.eta1, p.eta2);
        std::cout << summary_line("predict", static_cast<std::size_t>(data.rows()), d, std::nullopt) << "\n";
    }
    return kOk;
}

// ----------------------------------------------------------- simulate

struct SimOptions {
    std::string study;
    int n = 1000;
    int reps = 10;
    std::uint64_t seed = 1;
    std::string methods = "exhaustive,cp_exact,cp_top10";
    std::string M = "2,5,10,15,20,25";
    std::optional<int> B_max;
    std::optional<double> xi;
    std::string out = ".";
    std::string emit_data;
};

int cmd_simulate(const SimOptions& o) {
    Study study;
    try {
        study = study_from_string(o.study);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (o.n < 10) throw UsageError("--n must be at least 10");
    if (o.reps < 1) throw UsageError("--reps must be at least 1");
    if (!o.emit_data.empty()) {
        write_atomic(o.emit_data, data_csv(generate({study, o.n, o.seed})));
        return kOk;
    }
    const fs::path out(o.out);
    const std::string stem = to_string(study) + "_n" + std::to_string(o.n);
    const bool tree_study = study == Study::sim1_same_moderators || study == Study::sim1_diff_moderators;
    if (tree_study) {
        std::vector<SplitMethod> methods;
        try {
            for (const auto& m : split_list(o.methods)) methods.push_back(split_method_from_string(m));
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        if (methods.empty()) throw UsageError("--methods is empty");
        const SimResult r = run_study(study, o.n, methods, o.reps, o.seed);
        for (SplitMethod m : methods) {
            write_atomic(out / (stem + "_" + to_string(m) + ".csv"), replication_csv(r, m));
        }
        write_atomic(out / (stem + "_aggregate.csv"), aggregate_csv(r));
        write_atomic(out / (stem + "_timing.csv"), timing_csv(r));
        std::cout << aggregate_csv(r);
        int failed = 0;
        for (const auto& row : r.rows) failed += !row.error.empty();
        if (failed) std::cerr << failed << " fits failed; see the replication files\n";
        return kOk;
    }
    std::vector<int> Ms;
    for (const auto& m : split_list(o.M)) {
        try {
            std::size_t used = 0;
            Ms.push_back(std::stoi(m, &used));
            if (used != m.size()) throw std::invalid_argument(m);
        } catch (const std::exception&) {
            throw UsageError("--M expects a comma-separated list of integers");
        }
    }
    BoostControl c;
    if (o.B_max) c.B_max = *o.B_max;
    if (o.xi) c.xi = *o.xi;
    for (int m : Ms) {
        c.M = m;
        try {
            c.validate();
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
    const BoostSweep sw = run_boost_sweep(study, o.n, Ms, o.reps, o.seed, c);
    write_atomic(out / (stem + "_boost_sweep.csv"), boost_sweep_csv(sw));
    write_atomic(out / (stem + "_selection.csv"), boost_selection_csv(sw));
    write_atomic(out / (stem + "_timing.csv"), timing_csv(sw));
    std::cout << boost_selection_csv(sw) << "best M " << sw.best_M << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conway-Maxwell-Poisson varying coefficient models"};
    app.require_subcommand(1);

    FitOptions fo;
    auto* fit = app.add_subcommand("fit", "fit a glm, mob or boost model");
    fit->add_option("kind", fo.kind, "glm, mob or boost")->required()->check(CLI::IsMember({"glm", "mob", "boost"}));
    fit->add_option("--data", fo.data, "input CSV")->required();
    fit->add_option("--formula", fo.formula, "model formula")->required();
    fit->add_option("--response", fo.response, "count response column");
    fit->add_option("--categorical", fo.categorical, "comma-separated categorical columns");
    fit->add_option("--schema", fo.schema, "JSON column schema, replaces --response/--categorical");
    fit->add_option("--config", fo.config, "JSON settings with fit, mob and boost sections");
    fit->add_option("--out", fo.out, "output directory");
    fit->add_flag("--poisson", fo.poisson, "fix nu at 1");
    fit->add_flag("--compare-poisson", fo.compare_poisson, "also fit the Poisson model (glm)");
    fit->add_option("--pd", fo.pd, "partial dependence predictor:coefficient:moderator (boost)");
    fit->add_option("--pd-points", fo.pd_points, "grid size for --pd")->check(CLI::PositiveNumber);
    fit->add_option("--xi", fo.xi, "boosting step length");
    fit->add_option("--M", fo.M, "terminal nodes per base tree");
    fit->add_option("--B-max", fo.B_max, "maximum boosting iterations");
    fit->add_option("--alpha", fo.alpha, "tree test level");
    fit->add_option("--split-method", fo.split_method, "exhaustive, cp_exact or cp_top10");
    fit->add_option("--cp-percent", fo.cp_percent, "candidate share for cp_top10");
    fit->add_option("--min-node-size", fo.min_node_size, "smallest node");
    fit->add_option("--max-depth", fo.max_depth, "deepest tree level");

    PredictOptions po;
    auto* pred = app.add_subcommand("predict", "predict from a saved model");
    pred->add_option("--model", po.model, "model.json from fit")->required();
    pred->add_option("--data", po.data, "CSV with the model's columns")->required();
    pred->add_option("--out", po.out, "output CSV");

    SimOptions so;
    auto* sim = app.add_subcommand("simulate", "run a simulation study");
    sim->add_option("--study", so.study, "sim1, sim1_diff_moderators, sim2 or sim2_linear_nu")->required();
    sim->add_option("--n", so.n, "sample size");
    sim->add_option("--reps", so.reps, "replications");
    sim->add_option("--seed", so.seed, "base seed");
    sim->add_option("--methods", so.methods, "split methods (tree studies)");
    sim->add_option("--M", so.M, "terminal-node counts (boosting studies)");
    sim->add_option("--B-max", so.B_max, "maximum boosting iterations");
    sim->add_option("--xi", so.xi, "boosting step length");
    sim->add_option("--out", so.out, "output directory");
    sim->add_option("--emit-data", so.emit_data, "write one generated data set to this CSV and stop");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    try {
        if (*fit) return cmd_fit(fo);
        if (*pred) return cmd_predict(po);
        if (*sim) return cmd_simulate(so);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const SchemaMismatch& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "fit failed: " << e.what() << "\n";
        return kFit;
    }
    return kUsage;
}
