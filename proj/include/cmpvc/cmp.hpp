#pragma once

// Conway-Maxwell-Poisson distribution: normalizer, pmf, moments and sampling.
//
// P(Y = y) = lambda^y / ((y!)^nu * zeta(lambda, nu)),
// zeta(lambda, nu) = sum_s lambda^s / (s!)^nu.
//
// All series are summed outward from the mode in log space, so large lambda
// and small nu do not overflow. Truncation is governed by TruncationPolicy.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace cmpvc {

using Rng = std::mt19937_64;

// Uniform draw in [0, 1) from the top 53 bits; bit-identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct CmpParams {
    double lambda = 1.0;
    double nu = 1.0;
};

struct CmpMoments {
    double mean = 0.0;         // E[Y]
    double variance = 0.0;     // V[Y]
    double mean_lnfact = 0.0;  // E[ln Y!]
    double var_lnfact = 0.0;   // V[ln Y!]
    double cov_y_lnfact = 0.0; // Cov(Y, ln Y!)
    double log_zeta = 0.0;
};

struct TruncationPolicy {
    double rel_tol = 1e-12;
    std::size_t max_terms = 100000;
};

// Throws DomainError unless the pair lies in the CMP parameter space.
void validate(const CmpParams& params);
void validate(const TruncationPolicy& policy);

// ln(n!) from a cached table for small n, lgamma beyond.
double log_factorial(std::uint64_t n);

double log_zeta(const CmpParams& params, const TruncationPolicy& policy = {});

double log_pmf(std::uint64_t y, const CmpParams& params, const TruncationPolicy& policy = {});

CmpMoments moments(const CmpParams& params, const TruncationPolicy& policy = {});

// Same as moments() but parameterized by ln(lambda) so regression code never
// round-trips the linear predictor through exp/log.
CmpMoments moments_log(double log_lambda, double nu, const TruncationPolicy& policy = {});

// Largest y whose probability mass is retained by the truncated series.
std::uint64_t truncation_bound(const CmpParams& params, const TruncationPolicy& policy = {});

// One draw by sequential inversion of the CDF.
std::uint64_t draw(const CmpParams& params, Rng& rng, const TruncationPolicy& policy = {});

// i.i.d. draws by inversion of the truncated CDF; deterministic given seed.
std::vector<std::uint64_t> sample(const CmpParams& params, std::size_t count, std::uint64_t seed,
                                  const TruncationPolicy& policy = {});

}  // namespace cmpvc
