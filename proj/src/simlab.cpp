#include "cmpvc/simlab.hpp"

#include "cmpvc/cmp.hpp"
#include "cmpvc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace cmpvc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_sim1(Study s) {
    return s == Study::sim1_same_moderators || s == Study::sim1_diff_moderators;
}

double sq(double v) { return v * v; }

}  // namespace

std::string to_string(Study s) {
    switch (s) {
        case Study::sim1_same_moderators: return "sim1_same_moderators";
        case Study::sim1_diff_moderators: return "sim1_diff_moderators";
        case Study::sim2_vc_both: return "sim2_vc_both";
        case Study::sim2_linear_nu: return "sim2_linear_nu";
    }
    return "unknown";
}

Study study_from_string(const std::string& s) {
    if (s == "sim1" || s == "sim1_same_moderators") return Study::sim1_same_moderators;
    if (s == "sim1_diff_moderators") return Study::sim1_diff_moderators;
    if (s == "sim2" || s == "sim2_vc_both") return Study::sim2_vc_both;
    if (s == "sim2_linear_nu") return Study::sim2_linear_nu;
    throw DomainError("unknown study '" + s + "'");
}

Eigen::Index SimData::index_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (names[j] == name) {
            return static_cast<Eigen::Index>(j);
        }
    }
    throw DomainError("no column named '" + name + "'");
}

Eigen::VectorXd SimData::column(const std::string& name) const {
    return columns.col(index_of(name));
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter) {
    return splitmix64(splitmix64(base) + counter);
}

namespace truth {

double sim1_eta1(double x1, double x2, double x3, double z1) {
    const double split = z1 > 0.65 ? 2.0 * x1 : x2;
    return 2.0 + split + 2.0 * sq(std::sin(kTwoPi * x3));
}

double sim1_eta2(Study study, double w1, double w2, double z1, double z3) {
    const bool right = study == Study::sim1_diff_moderators ? z3 > 0.5 : z1 > 0.65;
    return 0.25 + (right ? 0.5 * w1 : 0.0) + 0.5 * sq(std::cos(kTwoPi * w2));
}

double beta0(const Eigen::VectorXd& z) {
    return sq(std::sin(kTwoPi * z(0))) + std::exp(z(1) - 1.0);
}

double beta1(const Eigen::VectorXd& z) {
    return 2.0 * sq(std::cos(kTwoPi * z(0))) + z(1) * (1.0 - z(1));
}

double gamma0(Study study, const Eigen::VectorXd& z) {
    return study == Study::sim2_linear_nu ? 0.25 : sq(std::sin(kTwoPi * z(4)));
}

double gamma1(Study study, const Eigen::VectorXd& z) {
    return study == Study::sim2_linear_nu ? 0.25 : 0.5 * sq(std::cos(kTwoPi * z(5)));
}

}  // namespace truth

MobData mob_data(const SimData& data) {
    const Eigen::Index n = data.rows();
    const bool study1 = is_sim1(data.study);
    const std::string wv = study1 ? "w1" : "w";
    MobData md;
    md.y = data.y;
    if (study1) {
        md.x1.matrix.resize(n, 3);
        md.x1.matrix << Eigen::VectorXd::Ones(n), data.column("x1"), data.column("x2");
        md.x1.column_names = {"(Intercept)", "x1", "x2"};
    } else {
        md.x1.matrix.resize(n, 2);
        md.x1.matrix << Eigen::VectorXd::Ones(n), data.column("x");
        md.x1.column_names = {"(Intercept)", "x"};
    }
    md.w1.matrix.resize(n, 2);
    md.w1.matrix << Eigen::VectorXd::Ones(n), data.column(wv);
    md.w1.column_names = {"(Intercept)", wv};
    md.x2.matrix.resize(n, 0);
    md.w2.matrix.resize(n, 0);
    if (study1) {
        SmoothTerm s1;
        s1.variable = "x3";
        s1.values = data.column("x3");
        SmoothTerm s2;
        s2.variable = "w2";
        s2.values = data.column("w2");
        md.smooths_lambda = {s1};
        md.smooths_nu = {s2};
    }
    for (const auto& name : data.names) {
        if (name[0] == 'z') {
            md.moderators.push_back({name, data.column(name), ModeratorKind::continuous, {}});
        }
    }
    return md;
}

BoostData boost_data(const SimData& data) {
    const MobData md = mob_data(data);
    BoostData bd;
    bd.y = md.y;
    bd.x1 = md.x1;
    bd.x2 = md.x2;
    bd.w1 = md.w1;
    bd.w2 = md.w2;
    bd.smooths_lambda = md.smooths_lambda;
    bd.smooths_nu = md.smooths_nu;
    bd.z = md.moderators;
    bd.u = md.moderators;
    if (data.study == Study::sim2_linear_nu) {
        bd.w2 = bd.w1;
        bd.w1.matrix.resize(data.rows(), 0);
        bd.w1.column_names.clear();
        bd.u.clear();
    }
    return bd;
}

BoostData take_rows(const BoostData& data, Eigen::Index begin, Eigen::Index end) {
    const Eigen::Index m = end - begin;
    auto block = [&](const DesignBlock& b) {
        DesignBlock out;
        out.column_names = b.column_names;
        out.matrix = b.cols() == 0 ? Eigen::MatrixXd(m, 0) : Eigen::MatrixXd(b.matrix.middleRows(begin, m));
        if (b.offset.size() > 0) out.offset = b.offset.segment(begin, m);
        return out;
    };
    BoostData out;
    out.y.assign(data.y.begin() + begin, data.y.begin() + end);
    out.x1 = block(data.x1);
    out.x2 = block(data.x2);
    out.w1 = block(data.w1);
    out.w2 = block(data.w2);
    out.smooths_lambda = data.smooths_lambda;
    out.smooths_nu = data.smooths_nu;
    for (auto& s : out.smooths_lambda) s.values = s.values.segment(begin, m).eval();
    for (auto& s : out.smooths_nu) s.values = s.values.segment(begin, m).eval();
    out.z = data.z;
    out.u = data.u;
    for (auto& z : out.z) z.values = z.values.segment(begin, m).eval();
    for (auto& u : out.u) u.values = u.values.segment(begin, m).eval();
    return out;
}

SimData generate(const SimDesign& design) {
    if (design.n < 1) {
        throw DomainError("simulation size must be positive");
    }
    SimData d;
    d.study = design.study;
    if (is_sim1(design.study)) {
        d.names = {"x1", "x2", "x3", "w1", "w2", "z1", "z2", "z3", "z4"};
    } else {
        d.names = {"x", "w"};
        for (int j = 1; j <= 10; ++j) {
            d.names.push_back("z" + std::to_string(j));
        }
    }
    const Eigen::Index n = design.n;
    const auto p = static_cast<Eigen::Index>(d.names.size());
    d.columns.resize(n, p);
    d.eta1.resize(n);
    d.eta2.resize(n);
    d.y.resize(static_cast<std::size_t>(n));

    Rng rng(design.seed);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            d.columns(i, j) = uniform01(rng);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = d.columns.row(i);
        if (is_sim1(design.study)) {
            d.eta1(i) = truth::sim1_eta1(r(0), r(1), r(2), r(5));
            d.eta2(i) = truth::sim1_eta2(design.study, r(3), r(4), r(5), r(7));
        } else {
            const Eigen::VectorXd z = r.tail(10).transpose();
            d.eta1(i) = truth::beta0(z) + r(0) * truth::beta1(z);
            d.eta2(i) = truth::gamma0(design.study, z) + r(1) * truth::gamma1(design.study, z);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const CmpParams params{std::exp(d.eta1(i)), std::exp(d.eta2(i))};
        d.y[static_cast<std::size_t>(i)] = static_cast<int>(draw(params, rng));
    }
    return d;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string data_csv(const SimData& data) {
    std::ostringstream os;
    os << std::setprecision(17) << "y";
    for (const auto& n : data.names) os << ',' << n;
    os << '\n';
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        os << data.y[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < data.columns.cols(); ++j) os << ',' << data.columns(i, j);
        os << '\n';
    }
    return os.str();
}

SimResult run_study(Study study, int n, const std::vector<SplitMethod>& methods, int replications,
                    std::uint64_t base_seed, const MobControl& control) {
    if (replications < 1 || methods.empty()) {
        throw DomainError("run_study needs at least one replication and one method");
    }
    if (!is_sim1(study)) {
        throw DomainError("run_study covers the tree designs; use run_boost_sweep for study 2");
    }
    SimResult res;
    res.study = study;
    res.n = n;
    res.base_seed = base_seed;
    res.replications = replications;
    res.methods = methods;
    for (int r = 0; r < replications; ++r) {
        const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(r));
        const MobData md = mob_data(generate({study, n, seed}));
        for (SplitMethod m : methods) {
            ReplicationRow row;
            row.replication = r;
            row.seed = seed;
            row.method = m;
            MobControl c = control;
            c.split_method = m;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const MobTree tree = fit_cmpmob(md, c);
                row.seconds = seconds_since(t0);
                row.splits = tree.splits();
                row.n_leaves = tree.n_leaves();
                row.initial_neg2ll = tree.global_neg2ll;
                row.global_neg2ll = tree.final_neg2ll;
                row.local_neg2ll = tree.total_local_neg2ll;
            } catch (const Error& e) {
                row.seconds = seconds_since(t0);
                row.error = e.what();
            }
            res.rows.push_back(std::move(row));
        }
    }
    for (SplitMethod m : methods) {
        MethodSummary sum;
        sum.method = m;
        std::vector<double> split, global, local, leaves, secs;
        for (const auto& row : res.rows) {
            if (row.method != m || !row.error.empty()) continue;
            ++sum.n_ok;
            if (!row.splits.empty()) split.push_back(row.splits.front().point);
            global.push_back(row.global_neg2ll);
            local.push_back(row.local_neg2ll);
            leaves.push_back(row.n_leaves);
            secs.push_back(row.seconds);
        }
        mean_sd(split, sum.split_mean, sum.split_sd);
        mean_sd(global, sum.global_mean, sum.global_sd);
        mean_sd(local, sum.local_mean, sum.local_sd);
        mean_sd(leaves, sum.leaves_mean, sum.leaves_sd);
        sum.seconds_median = median(secs);
        res.summary.push_back(sum);
    }
    return res;
}

std::string replication_csv(const SimResult& result, SplitMethod method) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "study,n,replication,seed,method,n_leaves,split1_variable,split1_point,initial_neg2ll,global_neg2ll,"
          "local_neg2ll,splits,error\n";
    for (const auto& row : result.rows) {
        if (row.method != method) continue;
        std::string all;
        for (const auto& s : row.splits) {
            std::ostringstream one;
            one << std::setprecision(17) << s.variable << "<=" << s.point;
            all += (all.empty() ? "" : ";") + one.str();
        }
        os << to_string(result.study) << ',' << result.n << ',' << row.replication << ',' << row.seed << ','
           << to_string(method) << ',' << row.n_leaves << ',' << (row.splits.empty() ? "" : row.splits[0].variable)
           << ',';
        if (!row.splits.empty()) os << row.splits[0].point;
        os << ',' << row.initial_neg2ll << ',' << row.global_neg2ll << ',' << row.local_neg2ll << ','
           << csv_field(all) << ',' << csv_field(row.error) << '\n';
    }
    return os.str();
}

std::string aggregate_csv(const SimResult& result) {
    std::ostringstream os;
    os << "quantity";
    for (const auto& s : result.summary) os << ',' << to_string(s.method);
    os << '\n';
    auto line = [&](const char* label, int digits, auto mean, auto sd) {
        os << label;
        for (const auto& s : result.summary) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(digits) << mean(s) << " (" << sd(s) << ")";
            os << ',' << cell.str();
        }
        os << '\n';
    };
    line("Split-1", 4, [](const MethodSummary& s) { return s.split_mean; }, [](const MethodSummary& s) { return s.split_sd; });
    line("Global -2l", 2, [](const MethodSummary& s) { return s.global_mean; }, [](const MethodSummary& s) { return s.global_sd; });
    line("Local -2l", 2, [](const MethodSummary& s) { return s.local_mean; }, [](const MethodSummary& s) { return s.local_sd; });
    line("No. of terminal nodes", 2, [](const MethodSummary& s) { return s.leaves_mean; }, [](const MethodSummary& s) { return s.leaves_sd; });
    os << "replications";
    for (const auto& s : result.summary) os << ',' << s.n_ok << '/' << result.replications;
    os << '\n';
    return os.str();
}

std::string timing_csv(const SimResult& result) {
    std::ostringstream os;
    os << std::setprecision(6) << "replication,method,seconds\n";
    for (const auto& row : result.rows) {
        os << row.replication << ',' << to_string(row.method) << ',' << row.seconds << '\n';
    }
    return os.str();
}

BoostSweep run_boost_sweep(Study study, int n, const std::vector<int>& M_values, int replications,
                           std::uint64_t base_seed, const BoostControl& control, double train_fraction) {
    if (replications < 1 || M_values.empty()) {
        throw DomainError("run_boost_sweep needs at least one replication and one M");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DomainError("train_fraction must lie in (0, 1)");
    }
    BoostSweep sw;
    sw.study = study;
    sw.n = n;
    sw.M_values = M_values;
    const auto n_train = static_cast<Eigen::Index>(std::lround(train_fraction * n));
    for (int r = 0; r < replications; ++r) {
        const BoostData all = boost_data(generate({study, n, derive_seed(base_seed, static_cast<std::uint64_t>(r))}));
        const BoostData train = take_rows(all, 0, n_train);
        const BoostData test = take_rows(all, n_train, n);
        for (int M : M_values) {
            BoostSweepRow row;
            row.replication = r;
            row.M = M;
            BoostControl c = control;
            c.M = M;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const BoostModel model = fit_cmpboost(train, c);
                row.B = model.B;
                row.train_neg2ll = model.neg2ll_path.back();
                row.test_neg2ll = predict_boost(model, test).neg2ll.sum();
            } catch (const Error& e) {
                row.error = e.what();
            }
            row.seconds = seconds_since(t0);
            sw.rows.push_back(std::move(row));
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (int M : M_values) {
        double t = 0.0, b = 0.0;
        int k = 0;
        for (const auto& row : sw.rows) {
            if (row.M == M && row.error.empty()) {
                t += row.test_neg2ll;
                b += row.B;
                ++k;
            }
        }
        sw.mean_test.push_back(k ? t / k : std::numeric_limits<double>::quiet_NaN());
        sw.mean_B.push_back(k ? b / k : std::numeric_limits<double>::quiet_NaN());
        if (k && sw.mean_test.back() < best) {
            best = sw.mean_test.back();
            sw.best_M = M;
        }
    }
    return sw;
}

std::string boost_sweep_csv(const BoostSweep& sweep) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "study,n,replication,M,B,train_neg2ll,test_neg2ll,error\n";
    for (const auto& row : sweep.rows) {
        os << to_string(sweep.study) << ',' << sweep.n << ',' << row.replication << ',' << row.M << ',' << row.B << ','
           << row.train_neg2ll << ',' << row.test_neg2ll << ',' << csv_field(row.error) << '\n';
    }
    return os.str();
}

std::string boost_selection_csv(const BoostSweep& sweep) {
    std::ostringstream os;
    os << std::setprecision(17) << "M,mean_test_neg2ll,mean_B\n";
    for (std::size_t k = 0; k < sweep.M_values.size(); ++k) {
        os << sweep.M_values[k] << ',' << sweep.mean_test[k] << ',' << sweep.mean_B[k] << '\n';
    }
    return os.str();
}

std::string timing_csv(const BoostSweep& sweep) {
    std::ostringstream os;
    os << std::setprecision(6) << "replication,M,seconds\n";
    for (const auto& row : sweep.rows) os << row.replication << ',' << row.M << ',' << row.seconds << '\n';
    return os.str();
}

}  // namespace cmpvc
