#include "cmpvc/boost.hpp"
#include "cmpvc/errors.hpp"
#include "cmpvc/simlab.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace cmpvc;

namespace {

struct Problem {
    Eigen::VectorXd t, w;
    Eigen::MatrixXd x, z;
};

Problem random_problem(std::uint64_t seed, int n, int k, int l) {
    Rng rng(seed);
    Problem p;
    p.t.resize(n);
    p.w.resize(n);
    p.x.resize(n, k);
    p.z.resize(n, l);
    for (int i = 0; i < n; ++i) {
        p.x(i, 0) = 1.0;
        for (int c = 1; c < k; ++c) p.x(i, c) = uniform01(rng);
        for (int j = 0; j < l; ++j) p.z(i, j) = std::floor(uniform01(rng) * 40.0) / 40.0;
        p.w(i) = 0.5 + uniform01(rng);
        p.t(i) = (p.z(i, 0) > 0.3 ? 1.0 : 0.0) + p.x(i, k - 1) * p.z(i, l - 1) + (uniform01(rng) - 0.5);
    }
    return p;
}

BoostData poisson_data(int n, std::uint64_t seed) {
    Rng rng(seed);
    BoostData d;
    d.x1.matrix.resize(n, 2);
    d.w1 = DesignBlock::intercept(n);
    Eigen::MatrixXd z(n, 3);
    for (int i = 0; i < n; ++i) {
        const double x = uniform01(rng);
        for (int j = 0; j < 3; ++j) z(i, j) = uniform01(rng);
        d.x1.matrix.row(i) << 1.0, x;
        const double eta = 0.5 + (z(i, 1) > 0.5 ? 1.0 : 0.0) + x * z(i, 2);
        d.y.push_back(static_cast<int>(draw({std::exp(eta), 1.0}, rng)));
    }
    for (int j = 0; j < 3; ++j) d.z.push_back({"z" + std::to_string(j + 1), z.col(j), ModeratorKind::continuous, {}});
    d.u = d.z;
    return d;
}

}  // namespace

TEST_CASE("step target splits at the jump with leaf means 0 and 1") {
    const int n = 200;
    Eigen::VectorXd t(n), z(n);
    for (int i = 0; i < n; ++i) {
        z(i) = (i + 0.5) / n;
        t(i) = z(i) > 0.5 ? 1.0 : 0.0;
    }
    const BaseTree tree = fit_partreg(t, Eigen::VectorXd::Ones(n), Eigen::MatrixXd::Ones(n, 1), z, {}, {2, 20});
    REQUIRE(tree.n_leaves() == 2);
    CHECK(tree.nodes[0].variable == 0);
    CHECK(tree.nodes[0].threshold == z(99));
    CHECK(tree.nodes[1].coef(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tree.nodes[2].coef(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tree.nodes[0].delta_sse == doctest::Approx(50.0).epsilon(1e-10));
}

TEST_CASE("two-leaf trees match a brute-force scan") {
    for (int trial = 0; trial < 100; ++trial) {
        const Problem p = random_problem(derive_seed(77, static_cast<std::uint64_t>(trial)), 150, 1 + trial % 3, 3);
        const BaseTree tree = fit_partreg(p.t, p.w, p.x, p.z, {}, {2, 20});
        const oracle::Stump s = oracle::brute_stump(p.t, p.w, p.x, p.z, 20);
        REQUIRE(tree.n_leaves() == 2);
        CHECK(tree.nodes[0].variable == s.variable);
        CHECK(tree.nodes[0].threshold == s.threshold);
        CHECK(tree.nodes[0].delta_sse == doctest::Approx(s.gain).epsilon(1e-8));
        CHECK((tree.nodes[1].coef - s.left).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((tree.nodes[2].coef - s.right).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("leaf bounds and weight scaling") {
    const Problem p = random_problem(5, 400, 2, 4);
    const BaseTree tree = fit_partreg(p.t, p.w, p.x, p.z, {}, {8, 25});
    CHECK(tree.n_leaves() <= 8);
    const Eigen::VectorXd pred = tree.predict(p.x, p.z);
    std::vector<int> counts(tree.nodes.size(), 0);
    for (Eigen::Index i = 0; i < p.z.rows(); ++i) ++counts[static_cast<std::size_t>(tree.leaf_of(p.z.row(i)))];
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        if (tree.nodes[id].is_leaf()) {
            CHECK(counts[id] >= 25);
            CHECK(counts[id] == tree.nodes[id].n_obs);
        }
    }
    CHECK(pred.allFinite());

    const BaseTree doubled = fit_partreg(p.t, 2.0 * p.w, p.x, p.z, {}, {8, 25});
    REQUIRE(doubled.nodes.size() == tree.nodes.size());
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        CHECK(doubled.nodes[id].variable == tree.nodes[id].variable);
        CHECK(doubled.nodes[id].threshold == tree.nodes[id].threshold);
        CHECK((doubled.nodes[id].coef - tree.nodes[id].coef).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("constant target gives a single leaf") {
    const Problem p = random_problem(9, 100, 2, 2);
    const BaseTree tree = fit_partreg(Eigen::VectorXd::Constant(100, 0.25), p.w, p.x, p.z, {}, {10, 5});
    CHECK(tree.degenerate);
    CHECK(tree.n_leaves() == 1);
    CHECK(tree.nodes[0].coef(0) == doctest::Approx(0.25));
    CHECK(std::abs(tree.nodes[0].coef(1)) < 1e-12);
    CHECK_THROWS_AS(fit_partreg(p.t, -p.w, p.x, p.z, {}, {2, 5}), DomainError);
}

TEST_CASE("categorical splits route unseen codes to the larger child") {
    const int n = 120;
    Eigen::VectorXd t(n), z(n);
    for (int i = 0; i < n; ++i) {
        z(i) = i % 3;
        t(i) = z(i) == 0 ? 2.0 : 0.0;
    }
    const BaseTree tree = fit_partreg(t, Eigen::VectorXd::Ones(n), Eigen::MatrixXd::Ones(n, 1), z,
                                      {ModeratorKind::categorical}, {2, 10});
    REQUIRE(tree.n_leaves() == 2);
    bool unseen = false;
    Eigen::RowVectorXd row(1);
    row << 7.0;
    CHECK(tree.nodes[static_cast<std::size_t>(tree.nodes[0].right)].n_obs == 80);
    CHECK(tree.leaf_of(row, &unseen) == tree.nodes[0].right);
    CHECK(unseen);
    row << 0.0;
    unseen = false;
    CHECK(tree.leaf_of(row, &unseen) == tree.nodes[0].left);
    CHECK_FALSE(unseen);
}

TEST_CASE("one boosting step lowers -2 log-likelihood") {
    const BoostData d = boost_data(generate({Study::sim2_vc_both, 600, 3}));
    BoostControl c;
    c.M = 2;
    c.B_max = 1;
    const BoostModel m = fit_cmpboost(d, c);
    REQUIRE(m.B == 1);
    REQUIRE(m.neg2ll_path.size() == 2);
    CHECK(m.neg2ll_path[1] < m.neg2ll_path[0]);
    CHECK(m.trees1.size() == 1);
    CHECK(m.trees2.size() == 1);
}

TEST_CASE("nu fixed at one reduces to Poisson boosting") {
    const BoostData d = poisson_data(500, 21);
    BoostControl c;
    c.M = 2;
    c.B_max = 15;
    c.stop_tol = 0.0;
    c.init.estimate_nu = false;
    const BoostModel m = fit_cmpboost(d, c);
    REQUIRE(m.B == 15);
    CHECK(m.trees2.empty());
    CHECK(m.gamma0(0) == 0.0);

    // Oracle: Poisson IRLS start, then stumps fitted to (y - mu)/mu with weights mu.
    const Eigen::MatrixXd& x = d.x1.matrix;
    Eigen::MatrixXd z(500, 3);
    for (int j = 0; j < 3; ++j) z.col(j) = d.z[static_cast<std::size_t>(j)].values;
    Eigen::VectorXd eta = x * oracle::poisson_irls(x, d.y);
    for (int b = 0; b < 15; ++b) {
        const Eigen::VectorXd mu = eta.array().exp();
        Eigen::VectorXd r(500);
        for (int i = 0; i < 500; ++i) r(i) = (d.y[static_cast<std::size_t>(i)] - mu(i)) / mu(i);
        const oracle::Stump s = oracle::brute_stump(r, mu, x, z, c.min_node_size);
        REQUIRE(s.variable >= 0);
        for (int i = 0; i < 500; ++i) {
            const auto& coef = z(i, s.variable) <= s.threshold ? s.left : s.right;
            eta(i) += c.xi * x.row(i).dot(coef);
        }
    }
    CHECK((m.eta1 - eta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(m.eta2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predictions replay the training path") {
    const SimData sd = generate({Study::sim2_vc_both, 1000, 8});
    const BoostData all = boost_data(sd);
    const BoostData train = take_rows(all, 0, 600);
    BoostControl c;
    c.M = 6;
    c.B_max = 40;
    const BoostModel m = fit_cmpboost(train, c);
    REQUIRE(m.B == 40);

    const BoostPrediction full = predict_boost(m, train);
    CHECK((full.eta1 - m.eta1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((full.eta2 - m.eta2).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(full.neg2ll.sum() == doctest::Approx(m.neg2ll_path.back()).epsilon(1e-10));
    for (int b : {0, 1, 17}) {
        const BoostPrediction part = predict_boost(m, train, b);
        CHECK(part.neg2ll.sum() == doctest::Approx(m.neg2ll_path[static_cast<std::size_t>(b)]).epsilon(1e-10));
    }

    // Importance mass is the recorded SSE reduction spread over B iterations.
    for (Predictor pr : {Predictor::lambda, Predictor::nu}) {
        const auto& trees = pr == Predictor::lambda ? m.trees1 : m.trees2;
        double recorded = 0.0;
        for (const auto& t : trees) {
            for (const auto& node : t.nodes) recorded += node.delta_sse;
        }
        const auto imp = variable_importance(m, pr);
        const double mass = std::accumulate(imp.begin(), imp.end(), 0.0) * m.B;
        CHECK(mass == doctest::Approx(recorded).epsilon(1e-12));
    }

    // Training -2 log-likelihood never rises by more than the stopping slack.
    for (std::size_t b = 1; b < m.neg2ll_path.size(); ++b) {
        CHECK(m.neg2ll_path[b] <= m.neg2ll_path[b - 1] + c.stop_tol * std::abs(m.neg2ll_path[b - 1]));
    }

    BoostData bad = take_rows(all, 600, 1000);
    bad.z.pop_back();
    CHECK_THROWS_AS(predict_boost(m, bad), SchemaMismatch);
}

TEST_CASE("importance and partial dependence of small models") {
    Rng rng(4);
    const int n = 400;
    BoostData d;
    d.x1 = DesignBlock::intercept(n);
    Eigen::MatrixXd z(n, 6);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 6; ++j) z(i, j) = uniform01(rng);
        d.y.push_back(static_cast<int>(draw({z(i, 4) > 0.5 ? 12.0 : 2.0, 1.0}, rng)));
    }
    for (int j = 0; j < 6; ++j) d.z.push_back({"z" + std::to_string(j + 1), z.col(j), ModeratorKind::continuous, {}});
    BoostControl c;
    c.M = 2;
    c.B_max = 1;
    c.init.estimate_nu = false;
    d.w1 = DesignBlock::intercept(n);
    d.u = d.z;
    const BoostModel m = fit_cmpboost(d, c);
    const auto imp = variable_importance(m, Predictor::lambda);
    for (int j = 0; j < 6; ++j) {
        if (j == 4) {
            CHECK(imp[static_cast<std::size_t>(j)] > 0.0);
        } else {
            CHECK(imp[static_cast<std::size_t>(j)] == 0.0);
        }
    }

    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
    BoostModel none = m;
    none.trees1.clear();
    none.B = 0;
    const Eigen::VectorXd flat = partial_dependence(none, Predictor::lambda, 0, 4, grid);
    CHECK((flat.array() == m.beta0(0)).all());
    const Eigen::VectorXd step = partial_dependence(m, Predictor::lambda, 0, 4, grid);
    CHECK(step(10) > step(0));
    CHECK_THROWS_AS(partial_dependence(m, Predictor::lambda, 1, 0, grid), DomainError);
}

TEST_CASE("halving the learning rate over twice the iterations gives similar fits") {
    const BoostData all = boost_data(generate({Study::sim2_vc_both, 1000, 12}));
    const BoostData train = take_rows(all, 0, 600);
    BoostControl a;
    a.xi = 0.05;
    a.B_max = 200;
    a.stop_tol = 0.0;
    BoostControl b = a;
    b.xi = 0.1;
    b.B_max = 100;
    const BoostModel ma = fit_cmpboost(train, a);
    const BoostModel mb = fit_cmpboost(train, b);
    const Eigen::VectorXd ea = predict_boost(ma, train).mean;
    const Eigen::VectorXd eb = predict_boost(mb, train).mean;
    const std::vector<double> pa(ea.data(), ea.data() + ea.size());
    const std::vector<double> pb(eb.data(), eb.data() + eb.size());
    CHECK(oracle::correlation(pa, pb) >= 0.99);
}

TEST_CASE("control validation") {
    BoostControl c;
    c.xi = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.xi = 1.5;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.xi = 0.8;
    c.M = 1;
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK(predictor_from_string("nu") == Predictor::nu);
    CHECK_THROWS_AS(predictor_from_string("mu"), DomainError);
}
