// Acceptance run: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance [--only 1,3,...] [--expect-fail 8,10] [--log path]
//
// Lines go to stdout and, with --log, to a file as well (ctest hides the
// output of passing tests).
//
// The exit status is nonzero when a criterion fails that is not listed in
// --expect-fail, or when a criterion throws.

#include "cmpvc/boost.hpp"
#include "cmpvc/changepoint.hpp"
#include "cmpvc/cmp.hpp"
#include "cmpvc/dataset.hpp"
#include "cmpvc/errors.hpp"
#include "cmpvc/formula.hpp"
#include "cmpvc/irls.hpp"
#include "cmpvc/mob.hpp"
#include "cmpvc/simlab.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cmpvc;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

Outcome verdict(bool ok, const std::string& detail) {
    return {ok ? Status::pass : Status::fail, detail};
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<SplitMethod> kAllMethods{SplitMethod::exhaustive, SplitMethod::cp_exact,
                                           SplitMethod::cp_top_percent};

// ------------------------------------------------------------------ 1

Outcome distribution() {
    const auto t0 = std::chrono::steady_clock::now();
    const double lambdas[] = {0.1, 0.5, 1, 2, 5, 10};
    const double nus[] = {0.3, 0.5, 1, 1.5, 2, 5};
    const TruncationPolicy policy;
    double worst_norm = 0.0, worst_red = 0.0, worst_mom = 0.0;
    for (double lam : lambdas) {
        for (double nu : nus) {
            const CmpParams p{lam, nu};
            const auto hi = truncation_bound(p, policy);
            double total = 0.0;
            for (std::uint64_t y = 0; y <= hi; ++y) total += std::exp(log_pmf(y, p, policy));
            worst_norm = std::max(worst_norm, std::abs(total - 1.0));
            const CmpMoments m = moments(p, policy);
            const oracle::BruteMoments b = oracle::brute_cmp(lam, nu);
            for (auto [got, want] : {std::pair{m.mean, b.mean}, std::pair{m.variance, b.variance},
                                     std::pair{m.mean_lnfact, b.mean_lnfact}, std::pair{m.var_lnfact, b.var_lnfact}}) {
                worst_mom = std::max(worst_mom, std::abs(got - want) / std::max(1.0, std::abs(want)));
            }
        }
        for (std::uint64_t y = 0; y <= 50; ++y) {
            const double pois = std::exp(static_cast<double>(y) * std::log(lam) - lam - std::lgamma(y + 1.0));
            worst_red = std::max(worst_red, std::abs(std::exp(log_pmf(y, {lam, 1.0}, policy)) - pois));
            if (lam < 1.0) {
                const double geo = std::pow(lam, static_cast<double>(y)) * (1.0 - lam);
                worst_red = std::max(worst_red, std::abs(std::exp(log_pmf(y, {lam, 0.0}, policy)) - geo));
            }
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << std::scientific << std::setprecision(2) << "max |sum pmf - 1| " << worst_norm << " (<= 1e-10), reductions "
      << worst_red << " (<= 1e-12), moments rel. " << worst_mom << " (<= 1e-8), " << std::fixed << secs
      << " s (< 10 s)";
    return verdict(worst_norm <= 1e-10 && worst_red <= 1e-12 && worst_mom <= 1e-8 && secs < 10.0, d.str());
}

// ------------------------------------------------------------- shared

double study1_seconds = 0.0;

const SimResult& study1_n5000() {
    static const SimResult r = [] {
        const auto t0 = std::chrono::steady_clock::now();
        SimResult out = run_study(Study::sim1_same_moderators, 5000, kAllMethods, 10, 2024);
        study1_seconds = seconds_since(t0);
        return out;
    }();
    return r;
}

// ------------------------------------------------------------------ 2

Outcome irls_recovery() {
    const SimResult& r = study1_n5000();
    const double lo = 25156.85 - 3 * 141.98, hi = 25156.85 + 3 * 141.98;
    int inside = 0, reps = 0;
    double sum = 0.0;
    for (const auto& row : r.rows) {
        if (row.method != SplitMethod::exhaustive) continue;
        ++reps;
        sum += row.initial_neg2ll;
        inside += row.error.empty() && row.initial_neg2ll >= lo && row.initial_neg2ll <= hi;
    }

    const SimData sd = generate({Study::sim1_same_moderators, 5000, derive_seed(2024, 0)});
    const MobData md = mob_data(sd);
    auto t0 = std::chrono::steady_clock::now();
    const GlmFit g = fit_cmp_glm(md.y, md.x1, md.w1, md.smooths_lambda, md.smooths_nu);
    const double fit_secs = seconds_since(t0);

    DesignBlock x;
    x.matrix.resize(5000, 4);
    x.matrix << Eigen::VectorXd::Ones(5000), sd.column("x1"), sd.column("x2"), sd.column("x3");
    FitControl pc;
    pc.estimate_nu = false;
    pc.tol = 1e-14;
    pc.max_iter = 100;
    const GlmFit p = fit_cmp_glm(sd.y, x, DesignBlock::intercept(5000), {}, {}, pc);
    const double diff = (p.beta - oracle::poisson_irls(x.matrix, sd.y)).cwiseAbs().maxCoeff();

    std::ostringstream d;
    d << inside << "/" << reps << " global -2l in [" << fmt(lo, 2) << ", " << fmt(hi, 2) << "], mean "
      << fmt(sum / reps, 2) << "; Poisson vs oracle max |dbeta| " << std::scientific << std::setprecision(2) << diff
      << " (<= 1e-6); global fit " << std::fixed << fit_secs << " s (< 120 s)";
    return verdict(inside == reps && diff <= 1e-6 && fit_secs < 120.0, d.str());
}

// ------------------------------------------------------------------ 3

Outcome split_recovery() {
    const SimResult& r = study1_n5000();
    const double secs = study1_seconds;
    bool ok = true;
    std::ostringstream d;
    for (const auto& s : r.summary) {
        int two = 0;
        for (const auto& row : r.rows) {
            two += row.method == s.method && row.error.empty() && row.n_leaves == 2 && !row.splits.empty() &&
                   row.splits[0].variable == "z1";
        }
        const bool m_ok = s.n_ok == 10 && two == 10 && s.split_mean >= 0.648 && s.split_mean <= 0.652;
        ok = ok && m_ok;
        d << to_string(s.method) << " mean split " << fmt(s.split_mean) << " (sd " << fmt(s.split_sd) << "), "
          << two << "/10 with 2 leaves on z1; ";
    }
    d << "study " << fmt(secs, 1) << " s (< 1800 s)";
    return verdict(ok && secs < 1800.0, d.str());
}

// ------------------------------------------------------------------ 4

Outcome containment() {
    MobControl c;
    c.quantile_thin_threshold = 1000000;  // exhaustive scans every admissible cut
    const SimResult r = run_study(Study::sim1_same_moderators, 1000,
                                  {SplitMethod::exhaustive, SplitMethod::cp_top_percent}, 10, 4040, c);
    int same = 0, same_tree = 0;
    for (std::size_t i = 0; i + 1 < r.rows.size(); i += 2) {
        const auto& ex = r.rows[i];
        const auto& cp = r.rows[i + 1];
        if (!ex.error.empty() || !cp.error.empty() || ex.splits.empty() || cp.splits.empty()) continue;
        const bool root = ex.splits[0].variable == cp.splits[0].variable && ex.splits[0].point == cp.splits[0].point;
        same += root;
        bool tree = root && ex.splits.size() == cp.splits.size();
        for (std::size_t k = 0; tree && k < ex.splits.size(); ++k) {
            tree = ex.splits[k].variable == cp.splits[k].variable && ex.splits[k].point == cp.splits[k].point;
        }
        same_tree += tree;
    }
    return verdict(same >= 9, "cp_top10 root split equals exhaustive in " + std::to_string(same) +
                                  "/10 replications at n=1000 (>= 9); whole trees equal in " +
                                  std::to_string(same_tree) + "/10");
}

// ------------------------------------------------------------------ 5

Outcome speed() {
    const SimResult r =
        run_study(Study::sim1_same_moderators, 2000, {SplitMethod::exhaustive, SplitMethod::cp_exact}, 10, 5050);
    std::vector<double> ex, cp;
    for (const auto& row : r.rows) (row.method == SplitMethod::exhaustive ? ex : cp).push_back(row.seconds);
    const double ratio = median(cp) / median(ex);
    return verdict(ratio <= 0.5, "median cp_exact " + fmt(median(cp), 3) + " s vs exhaustive " + fmt(median(ex), 3) +
                                     " s, ratio " + fmt(ratio, 3) + " (<= 0.5)");
}

// ------------------------------------------------------------------ 6

Outcome localization() {
    const int reps = 20, n = 5000;
    int all_columns = 0;
    std::vector<int> per_column(5, 0);
    for (int r = 0; r < reps; ++r) {
        const MobData md = mob_data(generate({Study::sim1_same_moderators, n, derive_seed(6060, r)}));
        const GlmFit f = fit_cmp_glm(md.y, md.x1, md.w1, md.smooths_lambda, md.smooths_nu);
        Eigen::MatrixXd scores(n, f.scores1.cols() + f.scores2.cols());
        scores << f.scores1, f.scores2;
        const Eigen::VectorXd& z1 = md.moderators[0].values;
        const GlrStats g = glr_change_stats(scores, z1);
        const auto true_k = static_cast<Eigen::Index>((z1.array() <= 0.65).count());
        const auto top = static_cast<Eigen::Index>(0.10 * n);
        bool ok = true;
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            // The true split lies between order statistics true_k and true_k + 1.
            const double at = g.stats.col(j).segment(true_k - 2, 5).maxCoeff();
            const bool in = (g.stats.col(j).array() > at).count() < top;
            per_column[static_cast<std::size_t>(j)] += in;
            ok = ok && in;
        }
        all_columns += ok;
    }
    std::ostringstream d;
    d << all_columns << "/" << reps << " replications at n=5000 with 0.65 in every column's top 10% (>= 95%); per column";
    for (int c : per_column) d << " " << c;
    return verdict(all_columns >= 0.95 * reps, d.str());
}

// ------------------------------------------------------------------ 7

Outcome appendix_structure() {
    const SimResult r = run_study(Study::sim1_diff_moderators, 5000, kAllMethods, 10, 7070);
    bool ok = true;
    std::ostringstream d;
    for (const auto& s : r.summary) {
        int leaves_ok = 0, root_z3 = 0;
        for (const auto& row : r.rows) {
            if (row.method != s.method || !row.error.empty()) continue;
            leaves_ok += row.n_leaves >= 3 && row.n_leaves <= 4;
            root_z3 += !row.splits.empty() && row.splits[0].variable == "z3";
        }
        const bool m_ok = leaves_ok == 10 && root_z3 == 10 && s.split_mean >= 0.49 && s.split_mean <= 0.51;
        ok = ok && m_ok;
        d << to_string(s.method) << " " << leaves_ok << "/10 with 3-4 leaves (mean " << fmt(s.leaves_mean, 1) << "), " << root_z3 << "/10 root on z3, mean "
          << fmt(s.split_mean) << "; ";
    }
    return verdict(ok, d.str());
}

// ------------------------------------------------------------------ 8

Outcome model_selection() {
    BoostControl c;
    c.xi = 0.1;
    c.B_max = 500;
    c.min_node_size = 20;
    const std::vector<int> Ms{2, 5, 10, 15, 20, 25};
    const BoostSweep sw = run_boost_sweep(Study::sim2_vc_both, 1000, Ms, 5, 8080, c);
    std::ostringstream d;
    d << "mean test -2l by M:";
    double B_at_best = 0.0;
    for (std::size_t k = 0; k < Ms.size(); ++k) {
        d << " " << Ms[k] << ":" << fmt(sw.mean_test[k], 1) << "(B " << fmt(sw.mean_B[k], 0) << ")";
        if (Ms[k] == sw.best_M) B_at_best = sw.mean_B[k];
    }
    d << "; minimum at M=" << sw.best_M << " (want 10-20), B " << fmt(B_at_best, 0) << " (want 100-300)";
    return verdict(sw.best_M >= 10 && sw.best_M <= 20 && B_at_best >= 100 && B_at_best <= 300, d.str());
}

// -------------------------------------------------------------- 9, 10

struct RecoveryRuns {
    double corr_b0[2] = {0, 0};  // [A3 linear nu, study 2]
    double corr_b1[2] = {0, 0};
    int lambda_top = 0, nu_top = 0, both_top = 0;
    int reps = 20;
};

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return oracle::correlation({a.data(), a.data() + a.size()}, {b.data(), b.data() + b.size()});
}

const RecoveryRuns& recovery_runs() {
    static const RecoveryRuns runs = [] {
        RecoveryRuns out;
        BoostControl c;
        c.xi = 0.1;
        c.M = 15;
        c.B_max = 500;
        c.min_node_size = 20;
        const Study designs[2] = {Study::sim2_linear_nu, Study::sim2_vc_both};
        for (int s = 0; s < 2; ++s) {
            for (int r = 0; r < out.reps; ++r) {
                const SimData sd = generate({designs[s], 1000, derive_seed(9090 + s, r)});
                const BoostModel m = fit_cmpboost(take_rows(boost_data(sd), 0, 600), c);
                const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(100, 0.0, 1.0);
                Eigen::VectorXd t0(100), t1(100);
                for (Eigen::Index g = 0; g < 100; ++g) {
                    Eigen::VectorXd z = m.z_means;
                    z(0) = grid(g);
                    t0(g) = truth::beta0(z);
                    t1(g) = truth::beta1(z);
                }
                out.corr_b0[s] += pearson(partial_dependence(m, Predictor::lambda, 0, 0, grid), t0) / out.reps;
                out.corr_b1[s] += pearson(partial_dependence(m, Predictor::lambda, 1, 0, grid), t1) / out.reps;
                if (designs[s] != Study::sim2_vc_both) continue;
                const auto argmax = [](const std::vector<double>& v) {
                    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
                };
                const int l = argmax(variable_importance(m, Predictor::lambda));
                const int u = argmax(variable_importance(m, Predictor::nu));
                const bool lt = l == 0 || l == 1, ut = u == 4 || u == 5;
                out.lambda_top += lt;
                out.nu_top += ut;
                out.both_top += lt && ut;
            }
        }
        return out;
    }();
    return runs;
}

Outcome function_recovery() {
    const RecoveryRuns& r = recovery_runs();
    std::ostringstream d;
    d << "mean correlation over " << r.reps << " reps: A3 beta0 " << fmt(r.corr_b0[0], 3) << ", beta1 "
      << fmt(r.corr_b1[0], 3) << " (>= 0.9); study 2 beta0 " << fmt(r.corr_b0[1], 3) << ", beta1 "
      << fmt(r.corr_b1[1], 3) << " (>= 0.8)";
    return verdict(r.corr_b0[0] >= 0.9 && r.corr_b1[0] >= 0.9 && r.corr_b0[1] >= 0.8 && r.corr_b1[1] >= 0.8, d.str());
}

Outcome importance_ranking() {
    const RecoveryRuns& r = recovery_runs();
    std::ostringstream d;
    d << "lambda top in {z1,z2} " << r.lambda_top << "/" << r.reps << ", nu top in {z5,z6} " << r.nu_top << "/"
      << r.reps << ", both " << r.both_top << "/" << r.reps << " (>= 80%)";
    return verdict(r.both_top >= 0.8 * r.reps, d.str());
}

// ----------------------------------------------------------------- 11

Outcome null_size() {
    const int reps = 100, n = 1000;
    int single = 0;
    for (int r = 0; r < reps; ++r) {
        Rng rng(derive_seed(1111, static_cast<std::uint64_t>(r)));
        MobData md;
        md.x1.matrix.resize(n, 2);
        md.w1 = DesignBlock::intercept(n);
        md.x2.matrix.resize(n, 0);
        md.w2.matrix.resize(n, 0);
        Eigen::MatrixXd z(n, 3);
        for (int i = 0; i < n; ++i) {
            const double x = uniform01(rng);
            md.x1.matrix.row(i) << 1.0, x;
            for (int j = 0; j < 3; ++j) z(i, j) = uniform01(rng);
            md.y.push_back(static_cast<int>(draw({std::exp(1.0 + x), 1.3}, rng)));
        }
        for (int j = 0; j < 3; ++j) {
            md.moderators.push_back({"z" + std::to_string(j + 1), z.col(j), ModeratorKind::continuous, {}});
        }
        MobControl c;
        c.alpha = 0.05;
        c.split_method = SplitMethod::cp_exact;
        single += fit_cmpmob(md, c).n_leaves() == 1;
    }
    return verdict(single >= 90, std::to_string(single) + "/100 single-node trees on no-signal data (>= 90)");
}

// ----------------------------------------------------------------- 12

Outcome bike() {
    const char* path = std::getenv("CMP_BIKE_CSV");
    if (!path || !*path) return {Status::skip, "set CMP_BIKE_CSV to the hourly bike-sharing CSV to run"};
    std::ifstream in(path);
    if (!in) return {Status::fail, std::string("cannot open ") + path};
    // January 2012 only, with the day of month taken from dteday.
    const CsvTable t = parse_csv(in);
    const auto col = [&](const std::string& name) {
        const auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end()) throw SchemaMismatch("bike file has no column '" + name + "'");
        return static_cast<std::size_t>(it - t.header.begin());
    };
    const std::size_t date = col("dteday");
    std::ostringstream csv;
    for (std::size_t j = 0; j < t.header.size(); ++j) csv << t.header[j] << ',';
    csv << "day\n";
    for (const auto& row : t.rows) {
        if (row[date].rfind("2012-01-", 0) != 0) continue;
        for (const auto& cell : row) csv << cell << ',';
        csv << std::stoi(row[date].substr(8, 2)) << '\n';
    }
    const ModelSpec spec =
        parse_formula("lambda = day + hr + holiday + weekday + weathersit + atemp + hum + windspeed");
    std::istringstream sub(csv.str());
    const Dataset d = ingest(sub, schema_for(spec, "casual", {"holiday", "weekday", "weathersit"}));
    const ModelFrame f = build_frame(d, spec, FrameUse::glm);
    const GlmFit cmp = fit_cmp_glm(f.y, f.x1, f.w1);
    FitControl pc;
    pc.estimate_nu = false;
    const GlmFit pois = fit_cmp_glm(f.y, f.x1, f.w1, {}, {}, pc);
    const double ll_cmp = -0.5 * cmp.neg2loglik, ll_pois = -0.5 * pois.neg2loglik;
    std::ostringstream o;
    o << d.rows() << " rows retained (want 741), logLik CMP " << fmt(ll_cmp, 2) << " vs Poisson " << fmt(ll_pois, 2)
      << ", gap " << fmt(ll_cmp - ll_pois, 2) << " (>= 2000)";
    return verdict(d.rows() == 741 && ll_cmp - ll_pois >= 2000.0, o.str());
}

std::set<int> parse_ids(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.insert(std::stoi(item));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, expect_fail;
    std::ofstream log;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            only = parse_ids(argv[++i]);
        } else if (a == "--expect-fail" && i + 1 < argc) {
            expect_fail = parse_ids(argv[++i]);
        } else if (a == "--log" && i + 1 < argc) {
            log.open(argv[++i], std::ios::trunc);
        } else {
            std::cerr << "usage: acceptance [--only 1,2,...] [--expect-fail 8,10] [--log path]\n";
            return 1;
        }
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"distribution correctness", distribution},
        {"IRLS recovery", irls_recovery},
        {"split-point recovery", split_recovery},
        {"candidate containment", containment},
        {"speed", speed},
        {"change-point localization", localization},
        {"different-moderator structure", appendix_structure},
        {"boosting model selection", model_selection},
        {"function recovery", function_recovery},
        {"importance ranking", importance_ranking},
        {"null size", null_size},
        {"bike ingestion", bike},
    };
    int unexpected = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[k].second();
        } catch (const std::exception& e) {
            out = {Status::fail, std::string("threw: ") + e.what()};
            ++unexpected;
        }
        const char* tag = out.status == Status::pass ? "PASS" : out.status == Status::skip ? "SKIP" : "FAIL";
        std::ostringstream line;
        line << "criterion " << std::setw(2) << id << " [" << tag << "] " << criteria[k].first << ": " << out.detail
             << " [" << fmt(seconds_since(t0), 1) << " s]\n";
        std::cout << line.str() << std::flush;
        if (log) log << line.str() << std::flush;
        if (out.status == Status::fail && !expect_fail.count(id)) ++unexpected;
    }
    if (!expect_fail.empty()) {
        std::ostringstream line;
        line << "expected failures:";
        for (int id : expect_fail) line << " " << id;
        line << "\n";
        std::cout << line.str();
        if (log) log << line.str();
    }
    return unexpected == 0 ? 0 : 1;
}
