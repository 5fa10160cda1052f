#include "cmpvc/fluctuation.hpp"

#include "cmpvc/cmp.hpp"
#include "cmpvc/errors.hpp"
#include "cmpvc/linalg.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>
#include <vector>

namespace cmpvc {

namespace {

constexpr double kTrimLow = 0.1;
constexpr double kTrimHigh = 0.9;
constexpr int kGrid = 1000;
constexpr int kTailExceedances = 50;

// Box-Muller on uniform01 keeps the simulated null identical across standard libraries.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(rng_);
        while (u1 <= 0.0) {
            u1 = uniform01(rng_);
        }
        const double u2 = uniform01(rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    Rng rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

std::vector<double> simulate_null(int k, int n_sim, std::uint64_t seed) {
    NormalStream normal(seed + static_cast<std::uint64_t>(k));
    std::vector<double> out(static_cast<std::size_t>(n_sim));
    Eigen::MatrixXd walk(kGrid, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kGrid));
    for (int s = 0; s < n_sim; ++s) {
        for (int j = 0; j < k; ++j) {
            double acc = 0.0;
            for (int g = 0; g < kGrid; ++g) {
                acc += normal.next() * scale;
                walk(g, j) = acc;
            }
        }
        double best = 0.0;
        for (int g = 0; g < kGrid; ++g) {
            const double t = static_cast<double>(g + 1) / kGrid;
            if (t < kTrimLow || t > kTrimHigh) {
                continue;
            }
            double q = 0.0;
            for (int j = 0; j < k; ++j) {
                const double b = walk(g, j) - t * walk(kGrid - 1, j);
                q += b * b;
            }
            best = std::max(best, q / (t * (1.0 - t)));
        }
        out[static_cast<std::size_t>(s)] = best;
    }
    std::sort(out.begin(), out.end());
    return out;
}

const std::vector<double>& null_distribution(int k, int n_sim, std::uint64_t seed) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, std::uint64_t>, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_tuple(k, n_sim, seed);
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, simulate_null(k, n_sim, seed)).first;
    }
    return it->second;
}

}  // namespace

Eigen::MatrixXd decorrelate(const Eigen::MatrixXd& scores) {
    const Eigen::Index n = scores.rows();
    const Eigen::MatrixXd centred = scores.rowwise() - scores.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n);
    return centred * inverse_sqrt_psd(cov);
}

double suplm_tail_approx(double x, int k) {
    if (!(x > 0.0)) {
        return 1.0;
    }
    const double half_k = 0.5 * k;
    const double log_lead = half_k * std::log(x) - 0.5 * x - half_k * std::log(2.0) - std::lgamma(half_k);
    const double span = std::log((kTrimHigh * (1.0 - kTrimLow)) / (kTrimLow * (1.0 - kTrimHigh)));
    const double bracket = (1.0 - k / x) * span + 2.0 / x;
    return std::clamp(std::exp(log_lead) * bracket, 0.0, 1.0);
}

double suplm_p_value(double statistic, int k, int n_sim, std::uint64_t seed) {
    if (k < 1 || n_sim < 1) {
        throw DomainError("supLM p-value needs k >= 1 and n_sim >= 1");
    }
    if (!(statistic > 0.0)) {
        return 1.0;
    }
    const auto& null = null_distribution(k, n_sim, seed);
    const auto exceed = static_cast<int>(null.end() - std::lower_bound(null.begin(), null.end(), statistic));
    if (exceed >= kTailExceedances) {
        return static_cast<double>(exceed) / n_sim;
    }
    const double cap = static_cast<double>(kTailExceedances) / n_sim;
    return std::min(suplm_tail_approx(statistic, k), cap);
}

FluctuationResult fluctuation_test(const Eigen::MatrixXd& scores, const Eigen::VectorXd& moderator,
                                   ModeratorKind kind, int n_sim, std::uint64_t seed) {
    const Eigen::Index n = scores.rows();
    const Eigen::Index k = scores.cols();
    if (moderator.size() != n) {
        throw DomainError("moderator length does not match scores");
    }
    if (n < 2 || moderator.minCoeff() == moderator.maxCoeff()) {
        throw DegenerateModerator("moderator has fewer than two distinct values");
    }
    FluctuationResult out;
    if (k == 0 || scores.cwiseAbs().maxCoeff() == 0.0) {
        return out;
    }
    const Eigen::MatrixXd s = decorrelate(scores);

    if (kind == ModeratorKind::categorical) {
        std::map<double, std::pair<Eigen::RowVectorXd, Eigen::Index>> levels;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto [it, fresh] = levels.try_emplace(moderator(i), Eigen::RowVectorXd::Zero(k), 0);
            it->second.first += s.row(i);
            it->second.second += 1;
        }
        double stat = 0.0;
        for (const auto& [level, acc] : levels) {
            stat += acc.first.squaredNorm() / static_cast<double>(acc.second);
        }
        const double df = static_cast<double>(k) * static_cast<double>(levels.size() - 1);
        out.statistic = stat;
        out.p_value = boost::math::gamma_q(0.5 * df, 0.5 * stat);
        return out;
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return moderator(a) < moderator(b); });
    Eigen::RowVectorXd cum = Eigen::RowVectorXd::Zero(k);
    const double nd = static_cast<double>(n);
    double best = 0.0;
    for (Eigen::Index pos = 0; pos + 1 < n; ++pos) {
        cum += s.row(order[static_cast<std::size_t>(pos)]);
        if (moderator(order[static_cast<std::size_t>(pos)]) == moderator(order[static_cast<std::size_t>(pos + 1)])) {
            continue;
        }
        const double t = static_cast<double>(pos + 1) / nd;
        if (t < kTrimLow || t > kTrimHigh) {
            continue;
        }
        best = std::max(best, cum.squaredNorm() / nd / (t * (1.0 - t)));
    }
    out.statistic = best;
    out.p_value = suplm_p_value(best, static_cast<int>(k), n_sim, seed);
    return out;
}

}  // namespace cmpvc
