#include "cmpvc/cmp.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace cmpvc {

namespace {

constexpr std::size_t kFactorialTableSize = 100001;

const std::vector<double>& factorial_table() {
    static const std::vector<double> table = [] {
        std::vector<double> t(kFactorialTableSize);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = std::lgamma(static_cast<double>(i) + 1.0);
        }
        t[0] = 0.0;
        t[1] = 0.0;
        return t;
    }();
    return table;
}

const std::vector<double>& log_table() {
    static const std::vector<double> table = [] {
        std::vector<double> t(kFactorialTableSize);
        t[0] = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < t.size(); ++i) {
            t[i] = std::log(static_cast<double>(i));
        }
        return t;
    }();
    return table;
}

inline double fast_log_factorial(const std::vector<double>& table, std::uint64_t n) {
    return n < table.size() ? table[n] : std::lgamma(static_cast<double>(n) + 1.0);
}

double log_int(std::uint64_t k) {
    const auto& table = log_table();
    return k < table.size() ? table[k] : std::log(static_cast<double>(k));
}

std::string describe(double log_lambda, double nu) {
    std::ostringstream os;
    os << "lambda=" << std::exp(log_lambda) << ", nu=" << nu;
    return os.str();
}

void validate_log(double log_lambda, double nu) {
    if (!std::isfinite(log_lambda) || !std::isfinite(nu) || nu < 0.0) {
        throw DomainError("invalid CMP parameters (" + describe(log_lambda, nu) + ")");
    }
    if (nu == 0.0 && !(log_lambda < 0.0)) {
        throw DomainError("geometric branch (nu = 0) requires 0 < lambda < 1 (" +
                          describe(log_lambda, nu) + ")");
    }
}

// Weighted sums over the retained support, with weights exp(a_s - a_mode)
// and values centred on the mode so variances keep full precision.
struct SeriesSums {
    std::uint64_t mode = 0;
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    double log_mode_term = 0.0;
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    double u = 0.0;
};

std::uint64_t locate_mode(double log_lambda, double nu, const TruncationPolicy& policy) {
    if (nu == 0.0) {
        return 0;
    }
    // Terms grow while s + 1 < lambda^(1/nu).
    const double x = log_lambda / nu;
    if (x > std::log(static_cast<double>(policy.max_terms))) {
        throw NonConvergent("CMP series mode exceeds max_terms (" + describe(log_lambda, nu) + ")");
    }
    const double peak = std::exp(x);
    return peak < 1.0 ? 0 : static_cast<std::uint64_t>(std::floor(peak));
}

template <bool WithMoments>
SeriesSums accumulate(double log_lambda, double nu, const TruncationPolicy& policy) {
    SeriesSums out;
    out.mode = locate_mode(log_lambda, nu, policy);
    const std::uint64_t m = out.mode;
    const auto& lf = factorial_table();
    const double lf_m = fast_log_factorial(lf, m);
    const double a_m = static_cast<double>(m) * log_lambda - nu * lf_m;
    out.log_mode_term = a_m;

    // With moments the tail is also weighted by the (centred) integrands,
    // so the stop test scales by their size at the current term.
    auto tail_weight = [&](std::uint64_t s, double ratio) {
        if constexpr (WithMoments) {
            const double d = std::abs(static_cast<double>(s) - static_cast<double>(m)) +
                             1.0 / (1.0 - ratio);
            const double ls = log_int(s + 2);
            return (1.0 + d * d) * (1.0 + ls * ls);
        } else {
            return 1.0;
        }
    };
    auto weight = [&](std::uint64_t s) {
        return std::exp(static_cast<double>(s) * log_lambda - nu * fast_log_factorial(lf, s) - a_m);
    };

    std::size_t terms = 0;
    auto add = [&](std::uint64_t s, double w) {
        out.s0 += w;
        if constexpr (WithMoments) {
            const double d = static_cast<double>(s) - static_cast<double>(m);
            const double l = fast_log_factorial(lf, s) - lf_m;
            out.s1 += w * d;
            out.s2 += w * d * d;
            out.t1 += w * l;
            out.t2 += w * l * l;
            out.u += w * d * l;
        }
    };

    // Forward from the mode. Past the mode the term ratios decrease, so the
    // remaining tail is bounded by a geometric series in the current ratio.
    std::uint64_t s = m;
    double w = 1.0;
    for (;;) {
        add(s, w);
        ++terms;
        const double next = weight(s + 1);
        if (next == 0.0) {
            break;
        }
        const double r = next / w;
        // tail_weight >= 1, so a large term with r >= 1/2 cannot pass the test.
        const bool hopeless = r >= 0.5 && w > policy.rel_tol * out.s0;
        if (r < 1.0 && !hopeless && w * r / (1.0 - r) * tail_weight(s, r) <= policy.rel_tol * out.s0) {
            break;
        }
        if (terms >= policy.max_terms || s + 1 >= policy.max_terms) {
            throw NonConvergent("CMP series did not reach tolerance within max_terms (" +
                                describe(log_lambda, nu) + ")");
        }
        ++s;
        w = next;
    }
    out.hi = s;

    // Backward from just below the mode.
    out.lo = m;
    if (m > 0) {
        std::uint64_t t = m - 1;
        w = weight(t);
        for (;;) {
            add(t, w);
            ++terms;
            out.lo = t;
            if (t == 0) {
                break;
            }
            const double prev = weight(t - 1);
            if (prev == 0.0) {
                break;
            }
            const double q = prev / w;
            const bool hopeless = q >= 0.5 && w > policy.rel_tol * out.s0;
            if (q < 1.0 && !hopeless && w * q / (1.0 - q) * tail_weight(t, q) <= policy.rel_tol * out.s0) {
                break;
            }
            if (terms >= policy.max_terms) {
                throw NonConvergent("CMP series did not reach tolerance within max_terms (" +
                                    describe(log_lambda, nu) + ")");
            }
            --t;
            w = prev;
        }
    }
    return out;
}

}  // namespace

void validate(const CmpParams& params) {
    if (!std::isfinite(params.lambda) || !std::isfinite(params.nu) || params.nu < 0.0 ||
        params.lambda <= 0.0) {
        throw DomainError("invalid CMP parameters: lambda must be > 0 and nu >= 0");
    }
    if (params.nu == 0.0 && params.lambda >= 1.0) {
        throw DomainError("geometric branch (nu = 0) requires 0 < lambda < 1");
    }
}

void validate(const TruncationPolicy& policy) {
    if (!(policy.rel_tol > 0.0 && policy.rel_tol < 1.0)) {
        throw DomainError("TruncationPolicy.rel_tol must lie in (0, 1)");
    }
    if (policy.max_terms < 10) {
        throw DomainError("TruncationPolicy.max_terms must be at least 10");
    }
}

double log_factorial(std::uint64_t n) {
    const auto& table = factorial_table();
    if (n < table.size()) {
        return table[n];
    }
    return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_zeta(const CmpParams& params, const TruncationPolicy& policy) {
    validate(params);
    validate(policy);
    const double ll = std::log(params.lambda);
    const SeriesSums sums = accumulate<false>(ll, params.nu, policy);
    return sums.log_mode_term + std::log(sums.s0);
}

double log_pmf(std::uint64_t y, const CmpParams& params, const TruncationPolicy& policy) {
    const double lz = log_zeta(params, policy);
    return static_cast<double>(y) * std::log(params.lambda) - params.nu * log_factorial(y) - lz;
}

CmpMoments moments_log(double log_lambda, double nu, const TruncationPolicy& policy) {
    validate_log(log_lambda, nu);
    const SeriesSums sums = accumulate<true>(log_lambda, nu, policy);
    const double m = static_cast<double>(sums.mode);
    const double lf_m = log_factorial(sums.mode);
    const double d_mean = sums.s1 / sums.s0;
    const double l_mean = sums.t1 / sums.s0;

    CmpMoments out;
    out.mean = m + d_mean;
    out.variance = std::max(sums.s2 / sums.s0 - d_mean * d_mean, 0.0);
    out.mean_lnfact = lf_m + l_mean;
    out.var_lnfact = std::max(sums.t2 / sums.s0 - l_mean * l_mean, 0.0);
    out.cov_y_lnfact = sums.u / sums.s0 - d_mean * l_mean;
    out.log_zeta = sums.log_mode_term + std::log(sums.s0);
    return out;
}

CmpMoments moments(const CmpParams& params, const TruncationPolicy& policy) {
    validate(params);
    validate(policy);
    return moments_log(std::log(params.lambda), params.nu, policy);
}

std::uint64_t truncation_bound(const CmpParams& params, const TruncationPolicy& policy) {
    validate(params);
    validate(policy);
    return accumulate<false>(std::log(params.lambda), params.nu, policy).hi;
}

std::uint64_t draw(const CmpParams& params, Rng& rng, const TruncationPolicy& policy) {
    validate(params);
    const double ll = std::log(params.lambda);
    const SeriesSums sums = accumulate<false>(ll, params.nu, policy);
    const double lz = sums.log_mode_term + std::log(sums.s0);
    const double u = uniform01(rng);
    double cdf = 0.0;
    for (std::uint64_t y = 0; y < sums.hi; ++y) {
        cdf += std::exp(static_cast<double>(y) * ll - params.nu * log_factorial(y) - lz);
        if (u < cdf) {
            return y;
        }
    }
    return sums.hi;
}

std::vector<std::uint64_t> sample(const CmpParams& params, std::size_t count, std::uint64_t seed,
                                  const TruncationPolicy& policy) {
    validate(params);
    validate(policy);
    const double ll = std::log(params.lambda);
    const SeriesSums sums = accumulate<false>(ll, params.nu, policy);
    const double lz = sums.log_mode_term + std::log(sums.s0);

    std::vector<double> cdf(sums.hi + 1);
    double acc = 0.0;
    for (std::uint64_t y = 0; y <= sums.hi; ++y) {
        acc += std::exp(static_cast<double>(y) * ll - params.nu * log_factorial(y) - lz);
        cdf[y] = acc;
    }
    cdf.back() = std::numeric_limits<double>::infinity();

    Rng rng(seed);
    std::vector<std::uint64_t> out(count);
    for (auto& v : out) {
        const double u = uniform01(rng);
        v = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    }
    return out;
}

}  // namespace cmpvc
