#pragma once

// Scoring functions for point and probabilistic forecasts. All scores are
// negatively oriented (smaller is better). Proper scores of predictive laws:
// log score, Brier score, ranked probability score, Dawid-Sebastiani score,
// their multivariate forms, and the energy score for sample ensembles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "epicast/distributions.hpp"
#include "epicast/math.hpp"

namespace epicast {

/// Sentinel reported in place of an infinite log score (observation with
/// zero predicted probability); callers can detect it via the flag.
inline constexpr double k_log_score_sentinel = 700.0;

/// A named series of per-forecast scores with its arithmetic mean.
struct ScoreSeries {
    std::string name;
    std::vector<double> values;
    double mean = 0.0;
};

inline double abs_error(double pred, double obs) { return std::abs(pred - obs); }

inline double sq_error(double pred, double obs) { return (pred - obs) * (pred - obs); }

/// |pred - obs| / obs; the observation must be positive.
inline double abs_pct_error(double pred, double obs) {
    if (!(obs > 0.0)) throw std::domain_error("abs_pct_error: observation must be > 0");
    return std::abs(pred - obs) / obs;
}

/// |pred - obs| / pred; the prediction must be positive.
inline double rel_error(double pred, double obs) {
    if (!(pred > 0.0)) throw std::domain_error("rel_error: prediction must be > 0");
    return std::abs(pred - obs) / pred;
}

namespace detail {
inline void check_paired(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
    if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}
}  // namespace detail

inline double mae(const std::vector<double>& preds, const std::vector<double>& obs) {
    detail::check_paired(preds.size(), obs.size(), "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - obs[i]);
    return s / static_cast<double>(preds.size());
}

inline double rmse(const std::vector<double>& preds, const std::vector<double>& obs) {
    detail::check_paired(preds.size(), obs.size(), "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) s += sq_error(preds[i], obs[i]);
    return std::sqrt(s / static_cast<double>(preds.size()));
}

/// MAE(A) / MAE(B); below 1 means A is the better point forecaster.
inline double rel_mae(const std::vector<double>& preds_a, const std::vector<double>& preds_b,
                      const std::vector<double>& obs) {
    const double mae_b = mae(preds_b, obs);
    if (mae_b == 0.0) throw std::domain_error("rel_mae: reference forecast has zero MAE");
    return mae(preds_a, obs) / mae_b;
}

/// -log pmf(obs). A zero-probability observation yields the sentinel and
/// sets *zero_prob instead of returning infinity.
inline double log_score(const CountDistribution& dist, long obs, bool* zero_prob = nullptr) {
    if (obs < 0) throw std::invalid_argument("log_score: observation must be >= 0");
    if (zero_prob) *zero_prob = false;
    const double lp = dist.log_pmf(obs);
    if (!std::isfinite(lp) || -lp > k_log_score_sentinel) {
        if (zero_prob) *zero_prob = true;
        return k_log_score_sentinel;
    }
    return -lp;
}

/// -y log(pi) - (1-y) log(1-pi) for a binary outcome; a deterministic
/// forecast that misses gets the sentinel with *zero_prob set.
inline double log_score_binary(double pi, int y, bool* zero_prob = nullptr) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw std::domain_error("log_score_binary: pi must lie in [0,1]");
    if (y != 0 && y != 1) throw std::invalid_argument("log_score_binary: outcome must be 0 or 1");
    if (zero_prob) *zero_prob = false;
    const double p_obs = (y == 1) ? pi : 1.0 - pi;
    if (p_obs <= 0.0) {
        if (zero_prob) *zero_prob = true;
        return k_log_score_sentinel;
    }
    return std::min(-std::log(p_obs), k_log_score_sentinel);
}

/// (pi - y)^2 for a binary outcome.
inline double brier(double pi, int y) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw std::domain_error("brier: pi must lie in [0,1]");
    if (y != 0 && y != 1) throw std::invalid_argument("brier: outcome must be 0 or 1");
    const double d = pi - static_cast<double>(y);
    return d * d;
}

/// Ranked probability score: sum over j >= 0 of (P_j - 1{obs <= j})^2.
/// The sum is cut once j >= obs and either the remaining cdf tail is below
/// 1e-13 or the pmf stream has provably run dry (rounding can pin the
/// accumulated cdf a few ulp short of 1); both bound the discarded
/// contribution far under 1e-9.
inline double rps(const CountDistribution& dist, long obs) {
    if (obs < 0) throw std::invalid_argument("rps: observation must be >= 0");
    constexpr double tail = 1e-13;
    PmfStream stream(dist);
    double cdf = 0.0, score = 0.0;
    for (long j = 0;; ++j) {
        cdf += stream.next();
        const double indicator = (obs <= j) ? 1.0 : 0.0;
        const double d = cdf - indicator;
        score += d * d;
        if (j >= obs && (1.0 - cdf < tail || stream.exhausted())) break;
        if (j > (1L << 33)) throw std::runtime_error("rps: support scan exceeded cap");
    }
    return score;
}

/// Sample version of the RPS (the d=1 energy score):
/// (1/M) sum |x_i - y| - (1/(2 M^2)) sum_ij |x_i - x_j|.
inline double rps_from_samples(const SampleEnsemble& ens, double obs) {
    if (ens.dim() != 1) throw std::invalid_argument("rps_from_samples: ensemble must be univariate");
    const Eigen::Index m = ens.size();
    if (m < 2) throw std::invalid_argument("rps_from_samples: need at least two draws");
    std::vector<double> x(ens.samples().col(0).data(), ens.samples().col(0).data() + m);
    std::sort(x.begin(), x.end());
    double dist_to_obs = 0.0, pairwise = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        dist_to_obs += std::abs(x[static_cast<std::size_t>(i)] - obs);
        // sum_ij |x_i - x_j| = 2 * sum_k x_(k) * (2k - M + 1) over sorted draws
        pairwise += x[static_cast<std::size_t>(i)] * static_cast<double>(2 * i - m + 1);
    }
    const double mm = static_cast<double>(m);
    return dist_to_obs / mm - pairwise / (mm * mm);
}

/// Dawid-Sebastiani score 2 log(sigma) + (y - mu)^2 / sigma^2.
inline double dss(double mean, double variance, double obs) {
    if (!(variance > 0.0)) throw std::domain_error("dss: variance must be > 0");
    const double d = obs - mean;
    return std::log(variance) + d * d / variance;
}

namespace detail {

// Cholesky factor of the predictive covariance, with a one-shot diagonal
// jitter of 1e-10 * mean(diag) when the plain factorization fails.
inline Eigen::LLT<Eigen::MatrixXd> factor_covariance(const Eigen::MatrixXd& cov, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        const double jitter = 1e-10 * cov.diagonal().mean();
        Eigen::MatrixXd bumped = cov;
        bumped.diagonal().array() += jitter;
        llt.compute(bumped);
        if (llt.info() != Eigen::Success)
            throw std::domain_error(std::string(what) + ": covariance is singular even after jitter");
    }
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        const double l = llt.matrixLLT()(i, i);
        if (!(l > 0.0) || !std::isfinite(std::log(l)))
            throw std::domain_error(std::string(what) + ": covariance is singular even after jitter");
    }
    return llt;
}

inline double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixLLT().rows(); ++i) s += std::log(llt.matrixLLT()(i, i));
    return 2.0 * s;
}

}  // namespace detail

/// Multivariate Dawid-Sebastiani score log|Sigma| + (y-mu)' Sigma^{-1} (y-mu),
/// divided by 2d when scaled (the default reporting convention).
inline double mdss(const MultivariateMoments& mm, const Eigen::VectorXd& obs, bool scaled = true) {
    if (obs.size() != mm.dim()) throw std::invalid_argument("mdss: observation dimension mismatch");
    const auto llt = detail::factor_covariance(mm.covariance, "mdss");
    const Eigen::VectorXd resid = obs - mm.mean;
    const double quad = resid.dot(llt.solve(resid));
    const double value = detail::log_det_from_llt(llt) + quad;
    return scaled ? value / (2.0 * static_cast<double>(mm.dim())) : value;
}

/// Log-determinant sharpness log|Sigma| (divided by 2d when scaled); reads
/// only the predictive covariance, never the observation.
inline double log_det_sharpness(const MultivariateMoments& mm, bool scaled = true) {
    const auto llt = detail::factor_covariance(mm.covariance, "log_det_sharpness");
    const double value = detail::log_det_from_llt(llt);
    return scaled ? value / (2.0 * static_cast<double>(mm.dim())) : value;
}

/// Energy score (1/M) sum ||x_i - y|| - (1/(2 M^2)) sum_ij ||x_i - x_j||;
/// reduces exactly to rps_from_samples for univariate ensembles.
inline double energy_score(const SampleEnsemble& ens, const Eigen::VectorXd& obs) {
    if (ens.dim() != obs.size()) throw std::invalid_argument("energy_score: dimension mismatch");
    if (ens.size() < 2) throw std::invalid_argument("energy_score: need at least two draws");
    if (ens.dim() == 1) return rps_from_samples(ens, obs(0));
    const Eigen::MatrixXd& x = ens.samples();
    const Eigen::Index m = x.rows();
    double dist_to_obs = 0.0, pairwise = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        dist_to_obs += (x.row(i).transpose() - obs).norm();
        for (Eigen::Index j = i + 1; j < m; ++j) pairwise += (x.row(i) - x.row(j)).norm();
    }
    const double mm = static_cast<double>(m);
    return dist_to_obs / mm - pairwise / (mm * mm);
}

/// Wraps per-forecast scores with their arithmetic mean.
inline ScoreSeries mean_score(std::string name, std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("mean_score: empty score series");
    const double m = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return ScoreSeries{std::move(name), std::move(values), m};
}

}  // namespace epicast
