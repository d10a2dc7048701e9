#pragma once

// Calibration diagnostics: probability integral transform for continuous and
// count forecasts (non-randomized), PIT histograms, the logistic calibration
// slope for binary forecasts, and tests for equal predictive performance
// (Diebold-Mariano, sign-flip permutation, paired t).

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epicast/distributions.hpp"
#include "epicast/math.hpp"

namespace epicast {

/// Mean relative PIT frequencies over J equal bins; uniform forecasts give
/// every bin height 1/J.
struct PitHistogram {
    int bin_count = 0;
    std::vector<double> bin_heights;
    std::size_t n = 0;
};

/// Outcome of a two-sided test for a difference in predictive performance.
struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string method;
    std::size_t n = 0;
    bool degenerate = false;  // zero-variance / identical-score special case
};

/// PIT of a continuous forecast is simply F(y).
inline double pit_continuous(double f_at_y) {
    if (!(f_at_y >= 0.0 && f_at_y <= 1.0)) throw std::domain_error("pit_continuous: F(y) must lie in [0,1]");
    return f_at_y;
}

/// Non-randomized count PIT: the conditional cdf F(u|y), piecewise linear
/// between P(y-1) and P(y). A zero-probability observation degenerates to
/// the step 1{u >= P(y)}.
inline double pit_count_cdf(double u, double cdf_at_y, double cdf_at_y_minus_1) {
    if (!(cdf_at_y_minus_1 >= 0.0 && cdf_at_y >= cdf_at_y_minus_1 && cdf_at_y <= 1.0))
        throw std::domain_error("pit_count_cdf: need 0 <= P(y-1) <= P(y) <= 1");
    if (cdf_at_y == cdf_at_y_minus_1) return (u >= cdf_at_y) ? 1.0 : 0.0;
    if (u <= cdf_at_y_minus_1) return 0.0;
    if (u >= cdf_at_y) return 1.0;
    return (u - cdf_at_y_minus_1) / (cdf_at_y - cdf_at_y_minus_1);
}

/// Streaming accumulator for count-PIT histograms: feed one forecast at a
/// time as the cdf pair (P(y), P(y-1)); partitions may be accumulated
/// independently and merged.
class PitAccumulator {
  public:
    explicit PitAccumulator(int bin_count) : sums_(static_cast<std::size_t>(bin_count), 0.0) {
        if (bin_count < 2) throw std::invalid_argument("PitAccumulator: need at least 2 bins");
    }

    void add(double cdf_at_y, double cdf_at_y_minus_1) {
        const int j_count = static_cast<int>(sums_.size());
        double prev = 0.0;
        for (int j = 1; j <= j_count; ++j) {
            const double u = static_cast<double>(j) / static_cast<double>(j_count);
            const double cur = (j == j_count) ? 1.0 : pit_count_cdf(u, cdf_at_y, cdf_at_y_minus_1);
            sums_[static_cast<std::size_t>(j - 1)] += cur - prev;
            prev = cur;
        }
        ++n_;
    }

    void merge(const PitAccumulator& other) {
        if (other.sums_.size() != sums_.size()) throw std::invalid_argument("PitAccumulator: bin mismatch");
        for (std::size_t j = 0; j < sums_.size(); ++j) sums_[j] += other.sums_[j];
        n_ += other.n_;
    }

    PitHistogram histogram() const {
        if (n_ == 0) throw std::logic_error("PitAccumulator: no forecasts added");
        PitHistogram h;
        h.bin_count = static_cast<int>(sums_.size());
        h.n = n_;
        h.bin_heights.resize(sums_.size());
        for (std::size_t j = 0; j < sums_.size(); ++j) h.bin_heights[j] = sums_[j] / static_cast<double>(n_);
        return h;
    }

  private:
    std::vector<double> sums_;
    std::size_t n_ = 0;
};

/// Count-PIT histogram for paired forecasts and observations.
inline PitHistogram pit_histogram(const std::vector<CountDistribution>& forecasts,
                                  const std::vector<long>& observations, int bin_count) {
    if (forecasts.size() != observations.size()) throw std::invalid_argument("pit_histogram: length mismatch");
    if (forecasts.empty()) throw std::invalid_argument("pit_histogram: empty input");
    PitAccumulator acc(bin_count);
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        const long y = observations[i];
        if (y < 0) throw std::invalid_argument("pit_histogram: negative observation");
        acc.add(forecasts[i].cdf(y), forecasts[i].cdf(y - 1));
    }
    return acc.histogram();
}

/// ML logistic regression of binary outcomes on logit-transformed forecast
/// probabilities. Perfectly calibrated forecasts give slope 1 in expectation.
/// Separation (diverging coefficients) is reported as its own error.
struct CalibrationFit {
    double intercept = 0.0;
    double slope = 0.0;
    int iterations = 0;
};

class SeparationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline CalibrationFit calibration_slope(const std::vector<double>& probabilities,
                                        const std::vector<int>& outcomes) {
    const std::size_t n = probabilities.size();
    if (n != outcomes.size()) throw std::invalid_argument("calibration_slope: length mismatch");
    if (n < 2) throw std::invalid_argument("calibration_slope: need at least 2 observations");
    bool any0 = false, any1 = false;
    for (int y : outcomes) {
        if (y == 0) any0 = true;
        else if (y == 1) any1 = true;
        else throw std::invalid_argument("calibration_slope: outcomes must be 0/1");
    }
    if (!any0 || !any1) throw std::domain_error("calibration_slope: need both outcome classes");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(probabilities[i] > 0.0 && probabilities[i] < 1.0))
            throw std::domain_error("calibration_slope: probabilities must lie strictly in (0,1)");
        x[i] = logit(probabilities[i]);
    }
    if (*std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end()) < 1e-12)
        throw std::domain_error("calibration_slope: constant probabilities give a degenerate design");

    // With a single covariate, (quasi-)separation -- every success logit at or
    // above every failure logit, or the reverse -- is detectable exactly, and
    // the ML estimate diverges there. Check up front: for mild separation the
    // Newton iteration can meet the gradient tolerance at a large but finite
    // slope before the coefficient guard below would trip.
    double min0 = std::numeric_limits<double>::infinity(), max0 = -min0;
    double min1 = min0, max1 = max0;
    for (std::size_t i = 0; i < n; ++i) {
        if (outcomes[i] == 1) {
            min1 = std::min(min1, x[i]);
            max1 = std::max(max1, x[i]);
        } else {
            min0 = std::min(min0, x[i]);
            max0 = std::max(max0, x[i]);
        }
    }
    if (min1 >= max0 || max1 <= min0)
        throw SeparationError("calibration_slope: outcome classes are separated in the forecast logit");

    // Newton-Raphson on (intercept, slope).
    Eigen::Vector2d beta = Eigen::Vector2d::Zero();
    for (int iter = 1; iter <= 50; ++iter) {
        Eigen::Vector2d grad = Eigen::Vector2d::Zero();
        Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = beta(0) + beta(1) * x[i];
            const double p = expit(eta);
            const double r = static_cast<double>(outcomes[i]) - p;
            const double w = p * (1.0 - p);
            grad(0) += r;
            grad(1) += r * x[i];
            hess(0, 0) += w;
            hess(0, 1) += w * x[i];
            hess(1, 1) += w * x[i] * x[i];
        }
        hess(1, 0) = hess(0, 1);
        if (grad.cwiseAbs().maxCoeff() < 1e-8) return {beta(0), beta(1), iter - 1};
        Eigen::Vector2d step = hess.ldlt().solve(grad);
        if (!step.allFinite()) throw SeparationError("calibration_slope: singular information matrix");
        beta += step;
        if (beta.cwiseAbs().maxCoeff() > 30.0)
            throw SeparationError("calibration_slope: separation detected (coefficients diverge)");
    }
    throw std::runtime_error("calibration_slope: Newton-Raphson failed to converge in 50 iterations");
}

namespace detail {
inline std::vector<double> score_differences(const std::vector<double>& a, const std::vector<double>& b,
                                             const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}
}  // namespace detail

/// Diebold-Mariano test for equal forecast performance at horizon k. The
/// long-run variance uses the rectangular kernel: gamma_0 + 2 sum_{l<k} gamma_l
/// with 1/n-normalized autocovariances. Identical score series short-circuit
/// to statistic 0, p 1; otherwise a non-positive variance estimate is an error.
inline TestResult dm_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                          int horizon) {
    if (horizon < 1) throw std::invalid_argument("dm_test: horizon must be >= 1");
    const auto d = detail::score_differences(scores_a, scores_b, "dm_test");
    const std::size_t n = d.size();
    if (n < 2 * static_cast<std::size_t>(horizon))
        throw std::invalid_argument("dm_test: need n >= 2 * horizon");
    const bool identical = std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
    if (identical) return {0.0, 1.0, "dm", n, true};
    const double dbar = mean(d);
    double v_hat = 0.0;
    for (int lag = 0; lag < horizon; ++lag) {
        double gamma = 0.0;
        for (std::size_t t = static_cast<std::size_t>(lag); t < n; ++t)
            gamma += (d[t] - dbar) * (d[t - static_cast<std::size_t>(lag)] - dbar);
        gamma /= static_cast<double>(n);
        v_hat += (lag == 0) ? gamma : 2.0 * gamma;
    }
    if (!(v_hat > 0.0)) throw std::domain_error("dm_test: non-positive long-run variance estimate");
    const double stat = dbar / std::sqrt(v_hat / static_cast<double>(n));
    return {stat, normal_pvalue_two_sided(stat), "dm", n, false};
}

/// Sign-flip permutation test on paired differences;
/// p = (1 + #{|mean_perm| >= |mean_obs|}) / (R + 1).
inline TestResult permutation_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                                   int replications, std::uint64_t seed) {
    if (replications < 99) throw std::invalid_argument("permutation_test: need at least 99 replications");
    const auto d = detail::score_differences(scores_a, scores_b, "permutation_test");
    if (d.empty()) throw std::invalid_argument("permutation_test: empty input");
    const double obs = mean(d);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(0.5);
    long exceed = 0;
    for (int r = 0; r < replications; ++r) {
        double s = 0.0;
        for (double v : d) s += flip(rng) ? v : -v;
        if (std::abs(s / static_cast<double>(d.size())) >= std::abs(obs)) ++exceed;
    }
    const double p = static_cast<double>(1 + exceed) / static_cast<double>(replications + 1);
    return {obs, p, "permutation", d.size(), false};
}

/// Paired t test on score differences; identical series (zero variance) are
/// reported as p = 1 with the degenerate flag rather than an error.
inline TestResult paired_t_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b) {
    const auto d = detail::score_differences(scores_a, scores_b, "paired_t_test");
    const std::size_t n = d.size();
    if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
    const double dbar = mean(d);
    const double var = sample_variance(d);
    if (var == 0.0) return {0.0, 1.0, "paired_t", n, true};
    const double stat = dbar / std::sqrt(var / static_cast<double>(n));
    return {stat, t_pvalue_two_sided(stat, static_cast<double>(n - 1)), "paired_t", n, false};
}

}  // namespace epicast
