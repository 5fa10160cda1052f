#include "cmpvc/dataset.hpp"
#include "cmpvc/errors.hpp"
#include "cmpvc/formula.hpp"
#include "cmpvc/serialize.hpp"
#include "cmpvc/simlab.hpp"

#include <doctest.h>

#include <sstream>

using namespace cmpvc;

namespace {

const char* kSim1Formula =
    "lambda = vc(x1, x2 | z1, z2, z3, z4) + s(x3); nu = vc(w1 | z1, z2, z3, z4) + s(w2)";

Dataset sim_dataset(const SimData& d, const std::string& formula) {
    const ModelSpec spec = parse_formula(formula);
    std::istringstream in(data_csv(d));
    return ingest(in, schema_for(spec, "y", {}));
}

double max_abs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("csv parser handles quotes, CRLF and blank lines") {
    std::istringstream in("a,b,c\r\n1,\"x, \"\"y\"\"\",3\r\n\r\n4,\"multi\nline\",6\n");
    const CsvTable t = parse_csv(in);
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "x, \"y\"");
    CHECK(t.rows[1][1] == "multi\nline");
    CHECK(t.lines[0] == 2);
    CHECK(t.lines[1] == 4);
    std::istringstream bad("a,b\n1,\"open\n");
    CHECK_THROWS_AS(parse_csv(bad), ParseError);
}

TEST_CASE("rows missing a used field are dropped and counted") {
    std::ostringstream csv;
    csv << "casual,temp,hum,note\n";
    for (int i = 0; i < 744; ++i) {
        const bool miss_temp = i == 10, miss_hum = i == 200, miss_y = i == 743;
        csv << (miss_y ? "" : std::to_string(i % 7)) << ',' << (miss_temp ? "NA" : "0.5") << ','
            << (miss_hum ? "" : "0.3") << ',' << (i == 5 ? "" : "ok") << '\n';
    }
    const std::vector<ColumnSchema> schema{{"casual", ColumnKind::count, ColumnRole::response},
                                           {"temp", ColumnKind::numeric, ColumnRole::global},
                                           {"hum", ColumnKind::numeric, ColumnRole::global},
                                           {"note", ColumnKind::categorical, ColumnRole::ignored}};
    validate_schema(schema);
    std::istringstream in(csv.str());
    const Dataset d = ingest(in, schema);
    CHECK(d.rows_read == 744);
    CHECK(d.rows_dropped == 3);
    CHECK(d.rows() == 741);
    CHECK_FALSE(d.has("note"));
    CHECK(d.counts().size() == 741);
}

TEST_CASE("a non-integer count names the offending cell") {
    std::istringstream in("y,x\n1,0.1\n2.5,0.2\n");
    try {
        ingest(in, {{"y", ColumnKind::count, ColumnRole::response}, {"x", ColumnKind::numeric, ColumnRole::global}});
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);
        CHECK(e.column() == "y");
        CHECK(std::string(e.what()).find("line 3, column 'y'") != std::string::npos);
    }
    std::istringstream neg("y,x\n-1,0.1\n");
    CHECK_THROWS_AS(ingest(neg, {{"y", ColumnKind::count, ColumnRole::response}}), ParseError);
    std::istringstream text("y,x\n1,abc\n");
    CHECK_THROWS_AS(ingest(text, {{"x", ColumnKind::numeric, ColumnRole::global}}), ParseError);
}

TEST_CASE("schema problems raise SchemaMismatch") {
    CHECK_THROWS_AS(validate_schema({{"y", ColumnKind::numeric, ColumnRole::response}}), SchemaMismatch);
    CHECK_THROWS_AS(validate_schema({{"x", ColumnKind::numeric, ColumnRole::global}}), SchemaMismatch);
    CHECK_THROWS_AS(validate_schema({{"y", ColumnKind::count, ColumnRole::response},
                                     {"y", ColumnKind::numeric, ColumnRole::global}}),
                    SchemaMismatch);
    std::istringstream in("y,x\n1,2\n");
    CHECK_THROWS_AS(ingest(in, {{"z", ColumnKind::numeric, ColumnRole::global}}), SchemaMismatch);
    std::istringstream ragged("y,x\n1,2,3\n");
    CHECK_THROWS_AS(ingest(ragged, {{"x", ColumnKind::numeric, ColumnRole::global}}), ParseError);
}

TEST_CASE("categorical codes follow first appearance and known dictionaries") {
    const std::vector<ColumnSchema> schema{{"s", ColumnKind::categorical, ColumnRole::moderator_lambda}};
    std::istringstream in("s\nwinter\nspring\nwinter\nfall\n");
    const Dataset d = ingest(in, schema);
    const Column& c = d.column("s");
    CHECK(c.levels == std::vector<std::string>{"winter", "spring", "fall"});
    CHECK(c.values(0) == 0.0);
    CHECK(c.values(1) == 1.0);
    CHECK(c.values(3) == 2.0);

    std::vector<std::string> names;
    const Eigen::MatrixXd oh = one_hot(c, true, &names);
    CHECK(names == std::vector<std::string>{"s=spring", "s=fall"});
    CHECK(oh.rows() == 4);
    CHECK(oh(0, 0) == 0.0);
    CHECK(oh(1, 0) == 1.0);
    CHECK(oh(3, 1) == 1.0);
    CHECK(one_hot(c, false).cols() == 3);

    std::istringstream again("s\nfall\nsummer\n");
    const Dataset e = ingest(again, schema, d.level_dictionary());
    CHECK(e.column("s").values(0) == 2.0);
    CHECK(e.column("s").values(1) == 3.0);
    CHECK(e.column("s").levels.back() == "summer");
}

TEST_CASE("formula grammar") {
    const ModelSpec s = parse_formula("lambda = vc(x1, x2 | z1, onehot(season)) + s(x3, 12) + hum; nu = vc(w1 | z1)");
    CHECK(s.lambda.has_vc);
    CHECK(s.lambda.varying == std::vector<std::string>{"x1", "x2"});
    REQUIRE(s.lambda.moderators.size() == 2);
    CHECK(s.lambda.moderators[1].one_hot);
    CHECK(s.lambda.global == std::vector<std::string>{"hum"});
    REQUIRE(s.lambda.smooths.size() == 1);
    CHECK(s.lambda.smooths[0].basis_size == 12);
    CHECK(s.nu.varying == std::vector<std::string>{"w1"});
    CHECK(s.variables() == std::vector<std::string>{"x1", "x2", "z1", "season", "hum", "x3", "w1"});

    const ModelSpec r = parse_formula(to_string(s));
    CHECK(to_string(r) == to_string(s));

    const ModelSpec plain = parse_formula("lambda = x");
    CHECK_FALSE(plain.lambda.has_vc);
    CHECK(plain.nu.intercept);
    CHECK(plain.nu.global.empty());
    CHECK_FALSE(parse_formula("lambda = 0 + x").lambda.intercept);
    CHECK(parse_formula("lambda = vc(1 | z)").lambda.varying.empty());

    CHECK_THROWS_AS(parse_formula("nu = x"), ParseError);
    CHECK_THROWS_AS(parse_formula("lambda = x +"), ParseError);
    CHECK_THROWS_AS(parse_formula("lambda = vc(x)"), ParseError);
    CHECK_THROWS_AS(parse_formula("lambda = x; lambda = y"), ParseError);
    CHECK_THROWS_AS(parse_formula("mu = x"), ParseError);
    CHECK_THROWS_AS(parse_formula("lambda = x * y"), ParseError);
    CHECK_THROWS_AS(parse_formula("lambda = s(x, 2)"), ParseError);
}

TEST_CASE("schema_for assigns roles and kinds") {
    const ModelSpec s = parse_formula("lambda = vc(x | z) + s(t) + g; nu = vc(w | u)");
    const auto schema = schema_for(s, "y", {"z"});
    validate_schema(schema);
    auto find = [&](const std::string& n) {
        return *std::find_if(schema.begin(), schema.end(), [&](const ColumnSchema& c) { return c.name == n; });
    };
    CHECK(find("y").role == ColumnRole::response);
    CHECK(find("x").role == ColumnRole::varying);
    CHECK(find("z").role == ColumnRole::moderator_lambda);
    CHECK(find("z").kind == ColumnKind::categorical);
    CHECK(find("t").role == ColumnRole::smooth);
    CHECK(find("g").role == ColumnRole::global);
    CHECK(find("u").role == ColumnRole::moderator_nu);
    CHECK_THROWS_AS(schema_for(s, "x", {}), SchemaMismatch);
    CHECK_THROWS_AS(schema_for(s, "y", {"nope"}), SchemaMismatch);
}

TEST_CASE("the study formula rebuilds the generator's tree data") {
    const SimData sd = generate({Study::sim1_same_moderators, 300, 4});
    const MobData ref = mob_data(sd);
    const MobData got = build_frame(sim_dataset(sd, kSim1Formula), parse_formula(kSim1Formula), FrameUse::mob).mob();
    CHECK(got.y == ref.y);
    CHECK(got.x1.matrix == ref.x1.matrix);
    CHECK(got.w1.matrix == ref.w1.matrix);
    CHECK(got.x2.cols() == 0);
    REQUIRE(got.smooths_lambda.size() == 1);
    CHECK(got.smooths_lambda[0].values == ref.smooths_lambda[0].values);
    REQUIRE(got.moderators.size() == 4);
    CHECK(got.moderators[0].values == ref.moderators[0].values);
    CHECK(got.x1.column_names == std::vector<std::string>{"(Intercept)", "x1", "x2"});

    const ModelFrame g = build_frame(sim_dataset(sd, kSim1Formula), parse_formula(kSim1Formula), FrameUse::glm);
    CHECK(g.x1.cols() == 3);
    CHECK(g.x2.cols() == 0);
    CHECK(g.z.empty());
}

TEST_CASE("control settings reject unknown keys") {
    const MobControl m = mob_control_from_json(Json{{"alpha", 0.01}, {"split_method", "cp_top10"}, {"fit", {{"tol", 1e-9}}}});
    CHECK(m.alpha == 0.01);
    CHECK(m.split_method == SplitMethod::cp_top_percent);
    CHECK(m.fit.tol == 1e-9);
    CHECK_THROWS_AS(mob_control_from_json(Json{{"alpah", 0.01}}), DomainError);
    CHECK_THROWS_AS(boost_control_from_json(Json{{"xi", "big"}}), DomainError);
    CHECK_THROWS_AS(fit_control_from_json(Json{{"init", {}}}), DomainError);
    const BoostControl b = boost_control_from_json(to_json(BoostControl{}));
    CHECK(b.xi == BoostControl{}.xi);
    CHECK(b.B_max == BoostControl{}.B_max);
}

TEST_CASE("serialized models reproduce training fits") {
    SUBCASE("glm") {
        const SimData sd = generate({Study::sim1_same_moderators, 600, 5});
        const char* f = "lambda = x1 + x2 + s(x3); nu = w1 + s(w2)";
        const Dataset d = sim_dataset(sd, f);
        const ModelFrame fr = build_frame(d, parse_formula(f), FrameUse::glm);
        FittedModel m;
        m.kind = ModelKind::glm;
        m.formula = f;
        m.schema = schema_for(parse_formula(f), "y", {});
        m.glm = fit_cmp_glm(fr.y, fr.x1, fr.w1, fr.smooths_lambda, fr.smooths_nu);
        const FittedModel back = fitted_model_from_json(Json::parse(to_json(m).dump()));
        const ModelPrediction p = predict(back, d);
        CHECK(max_abs(p.eta1, m.glm.eta1) < 1e-10);
        CHECK(max_abs(p.eta2, m.glm.eta2) < 1e-10);
        CHECK(max_abs(p.mean, m.glm.mean) < 1e-10);
        CHECK(back.glm.neg2loglik == m.glm.neg2loglik);
    }
    SUBCASE("mob") {
        const SimData sd = generate({Study::sim1_same_moderators, 1000, 6});
        const Dataset d = sim_dataset(sd, kSim1Formula);
        MobControl c;
        c.split_method = SplitMethod::cp_exact;
        FittedModel m;
        m.kind = ModelKind::mob;
        m.formula = kSim1Formula;
        m.schema = schema_for(parse_formula(kSim1Formula), "y", {});
        m.mob = fit_cmpmob(build_frame(d, parse_formula(kSim1Formula), FrameUse::mob).mob(), c);
        const FittedModel back = fitted_model_from_json(Json::parse(to_json(m).dump()));
        CHECK(render_text(back.mob) == render_text(m.mob));
        const ModelPrediction p = predict(back, d);
        CHECK(max_abs(p.eta1, m.mob.eta1) < 1e-10);
        CHECK(max_abs(p.eta2, m.mob.eta2) < 1e-10);
    }
    SUBCASE("boost") {
        const SimData sd = generate({Study::sim2_vc_both, 400, 7});
        const char* f = "lambda = vc(x | z1, z2, z3); nu = vc(w | z1, z2, z3)";
        const Dataset d = sim_dataset(sd, f);
        BoostControl c;
        c.M = 3;
        c.B_max = 30;
        FittedModel m;
        m.kind = ModelKind::boost;
        m.formula = f;
        m.schema = schema_for(parse_formula(f), "y", {});
        m.boost = fit_cmpboost(build_frame(d, parse_formula(f), FrameUse::boost).boost(), c);
        const FittedModel back = fitted_model_from_json(Json::parse(to_json(m).dump()));
        const ModelPrediction p = predict(back, d);
        CHECK(max_abs(p.eta1, m.boost.eta1) < 1e-10);
        CHECK(max_abs(p.eta2, m.boost.eta2) < 1e-10);
        CHECK(back.boost.importance1 == m.boost.importance1);
    }
}

TEST_CASE("model files are checked on load") {
    CHECK_THROWS_AS(fitted_model_from_json(Json{{"format", "other"}}), ParseError);
    CHECK_THROWS_AS(fitted_model_from_json(Json::object()), ParseError);
    Json j = to_json(FittedModel{});
    j["version"] = 99;
    CHECK_THROWS_AS(fitted_model_from_json(j), ParseError);
}

TEST_CASE("predicting with an unseen covariate level is a schema error") {
    const char* f = "lambda = season";
    const std::vector<ColumnSchema> schema{{"y", ColumnKind::count, ColumnRole::response},
                                           {"season", ColumnKind::categorical, ColumnRole::global}};
    std::ostringstream csv;
    csv << "y,season\n";
    for (int i = 0; i < 60; ++i) csv << (i % 5) << ',' << (i % 2 ? "a" : "b") << '\n';
    std::istringstream in(csv.str());
    const Dataset d = ingest(in, schema);
    const ModelFrame fr = build_frame(d, parse_formula(f), FrameUse::glm);
    FittedModel m;
    m.formula = f;
    m.schema = schema;
    m.levels = d.level_dictionary();
    m.glm = fit_cmp_glm(fr.y, fr.x1, fr.w1);
    std::istringstream fresh("season\nc\n");
    const Dataset e = ingest(fresh, schema, m.levels, true);
    CHECK(e.response() == nullptr);
    CHECK_THROWS_AS(predict(m, e), SchemaMismatch);
}
