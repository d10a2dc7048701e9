#pragma once

// Small numeric helpers shared across the library. Special functions are
// backed by Boost.Math; everything here is allocation-free.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace epicast {

inline constexpr double two_pi = 2.0 * std::numbers::pi_v<double>;

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Sample variance with denominator n-1 (n >= 2).
inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_variance: need n >= 2");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double sample_sd(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("logit: p must lie in (0,1)");
    return std::log(p / (1.0 - p));
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<>(), x); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

inline double digamma(double x) { return boost::math::digamma(x); }

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) { return boost::math::ibeta(a, b, x); }

/// Upper regularized incomplete gamma Q(a, z).
inline double reg_inc_gamma_upper(double a, double z) { return boost::math::gamma_q(a, z); }

/// Two-sided p-value of a t statistic with the given degrees of freedom.
inline double t_pvalue_two_sided(double t, double df) {
    const boost::math::students_t_distribution<> dist(df);
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

/// Two-sided p-value of a standard normal statistic.
inline double normal_pvalue_two_sided(double z) { return 2.0 * normal_cdf(-std::abs(z)); }

inline bool is_count(double x) {
    return std::isfinite(x) && x >= 0.0 && std::floor(x) == x;
}

/// splitmix64 step; used to derive independent RNG substreams from one seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic substream seed for a (seed, a, b, c) tuple, e.g. model x origin x path.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64(s);
    s ^= a + 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= b + 0xa0761d6478bd642fULL;
    h ^= splitmix64(s);
    s ^= c + 0xe7037ed1a0b428dbULL;
    h ^= splitmix64(s);
    return h;
}

}  // namespace epicast
