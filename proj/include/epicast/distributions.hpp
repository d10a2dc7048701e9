#pragma once

// Predictive distributions for count forecasts: analytic families, empirical
// pmfs over 0..K, equally weighted negative-binomial mixtures (the averaged
// conditional laws of simulated paths), continuous laws with an optional log
// scale, sample ensembles, and first/second multivariate moments.
//
// Negative binomial convention throughout: variance = mean + mean^2 / psi,
// psi > 0 ("size" parameterization); psi -> infinity recovers the Poisson.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "epicast/math.hpp"

namespace epicast {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

struct Poisson {
    double mean;
};

struct NegBin {
    double mean;
    double psi;
};

/// Probabilities over the support 0..K; must sum to 1 within 1e-12.
struct EmpiricalPmf {
    std::vector<double> probs;
};

/// Equal-weight mixture of negative binomials.
struct MixtureNegBin {
    std::vector<NegBin> components;
};

/// Simulated outcomes, one row per draw. Count-valued ensembles are
/// validated to hold non-negative integers.
class SampleEnsemble {
  public:
    SampleEnsemble(Eigen::MatrixXd samples, bool counts) : samples_(std::move(samples)), counts_(counts) {
        if (samples_.rows() < 1) throw std::invalid_argument("SampleEnsemble: need at least one draw");
        if (counts_) {
            for (Eigen::Index i = 0; i < samples_.rows(); ++i)
                for (Eigen::Index j = 0; j < samples_.cols(); ++j)
                    if (!is_count(samples_(i, j)))
                        throw std::invalid_argument("SampleEnsemble: count ensemble holds a non-count value");
        }
    }

    const Eigen::MatrixXd& samples() const { return samples_; }
    Eigen::Index size() const { return samples_.rows(); }
    Eigen::Index dim() const { return samples_.cols(); }
    bool counts() const { return counts_; }

  private:
    Eigen::MatrixXd samples_;
    bool counts_;
};

/// Mean vector and covariance matrix of a multivariate predictive law.
struct MultivariateMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    MultivariateMoments(Eigen::VectorXd m, Eigen::MatrixXd cov)
        : mean(std::move(m)), covariance(std::move(cov)) {
        const auto d = mean.size();
        if (covariance.rows() != d || covariance.cols() != d)
            throw std::invalid_argument("MultivariateMoments: dimension mismatch");
        const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
        if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw std::invalid_argument("MultivariateMoments: covariance not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-8 * std::max(covariance.trace(), 0.0))
            throw std::invalid_argument("MultivariateMoments: covariance not positive semi-definite");
    }

    Eigen::Index dim() const { return mean.size(); }
};

/// Mean and unbiased sample covariance of an ensemble.
inline MultivariateMoments ensemble_moments(const SampleEnsemble& ens) {
    if (ens.size() < 2) throw std::invalid_argument("ensemble_moments: need at least two draws");
    const Eigen::MatrixXd& x = ens.samples();
    const Eigen::VectorXd m = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - m.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    cov = 0.5 * (cov + cov.transpose());
    return MultivariateMoments(m, std::move(cov));
}

namespace detail {

inline void check_mean_psi(double mean, double psi, const char* what) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw std::invalid_argument(std::string(what) + ": mean must be > 0");
    if (!(psi > 0.0)) throw std::invalid_argument(std::string(what) + ": psi must be > 0");
}

inline double nb_log_pmf(long k, double mean, double psi) {
    if (k < 0) return -std::numeric_limits<double>::infinity();
    const double kk = static_cast<double>(k);
    return std::lgamma(kk + psi) - std::lgamma(psi) - std::lgamma(kk + 1.0) -
           psi * std::log1p(mean / psi) + kk * (std::log(mean) - std::log(psi + mean));
}

inline double poisson_log_pmf(long k, double mean) {
    if (k < 0) return -std::numeric_limits<double>::infinity();
    const double kk = static_cast<double>(k);
    return kk * std::log(mean) - mean - std::lgamma(kk + 1.0);
}

// P(Y <= k) for the negative binomial; regularized incomplete beta for
// large k, pmf recurrence below.
inline double nb_cdf(long k, double mean, double psi) {
    if (k < 0) return 0.0;
    if (k > 512) return reg_inc_beta(psi, static_cast<double>(k) + 1.0, psi / (psi + mean));
    double log_p = -psi * std::log1p(mean / psi);
    const double log_ratio = std::log(mean) - std::log(psi + mean);
    double cdf = std::exp(log_p);
    for (long j = 1; j <= k; ++j) {
        log_p += std::log(static_cast<double>(j - 1) + psi) - std::log(static_cast<double>(j)) + log_ratio;
        cdf += std::exp(log_p);
    }
    return std::min(cdf, 1.0);
}

inline double poisson_cdf(long k, double mean) {
    if (k < 0) return 0.0;
    if (k > 512) return reg_inc_gamma_upper(static_cast<double>(k) + 1.0, mean);
    double log_p = -mean;
    const double log_mean = std::log(mean);
    double cdf = std::exp(log_p);
    for (long j = 1; j <= k; ++j) {
        log_p += log_mean - std::log(static_cast<double>(j));
        cdf += std::exp(log_p);
    }
    return std::min(cdf, 1.0);
}

}  // namespace detail

/// A predictive distribution over counts 0, 1, 2, ...
class CountDistribution {
  public:
    using Form = std::variant<Poisson, NegBin, EmpiricalPmf, MixtureNegBin>;

    CountDistribution(Poisson p) : form_(p) {  // NOLINT(google-explicit-constructor)
        if (!(p.mean > 0.0) || !std::isfinite(p.mean))
            throw std::invalid_argument("Poisson: mean must be > 0");
    }

    CountDistribution(NegBin nb) : form_(nb) {  // NOLINT(google-explicit-constructor)
        detail::check_mean_psi(nb.mean, nb.psi, "NegBin");
    }

    CountDistribution(EmpiricalPmf e) : form_(std::move(e)) {  // NOLINT(google-explicit-constructor)
        const auto& probs = std::get<EmpiricalPmf>(form_).probs;
        if (probs.empty()) throw std::invalid_argument("EmpiricalPmf: empty support");
        double total = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw std::invalid_argument("EmpiricalPmf: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("EmpiricalPmf: probabilities must sum to 1");
        auto& cum = cumulative_;
        cum.resize(probs.size());
        double run = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            run += probs[i];
            cum[i] = std::min(run, 1.0);
        }
        cum.back() = 1.0;
    }

    CountDistribution(MixtureNegBin m) : form_(std::move(m)) {  // NOLINT(google-explicit-constructor)
        const auto& comps = std::get<MixtureNegBin>(form_).components;
        if (comps.empty()) throw std::invalid_argument("MixtureNegBin: empty mixture");
        for (const auto& c : comps) detail::check_mean_psi(c.mean, c.psi, "MixtureNegBin component");
    }

    const Form& form() const { return form_; }

    /// P(Y = k). Mixtures return the arithmetic mean of component pmfs.
    double pmf(long k) const {
        return std::visit(
            [k, this](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    return std::exp(detail::poisson_log_pmf(k, f.mean));
                } else if constexpr (std::is_same_v<T, NegBin>) {
                    return std::exp(detail::nb_log_pmf(k, f.mean, f.psi));
                } else if constexpr (std::is_same_v<T, EmpiricalPmf>) {
                    if (k < 0 || static_cast<std::size_t>(k) >= f.probs.size()) return 0.0;
                    return f.probs[static_cast<std::size_t>(k)];
                } else {
                    double s = 0.0;
                    for (const auto& c : f.components) s += std::exp(detail::nb_log_pmf(k, c.mean, c.psi));
                    return s / static_cast<double>(f.components.size());
                }
            },
            form_);
    }

    /// log P(Y = k); -inf when the probability is exactly zero. Mixtures use
    /// log-sum-exp so far-tail observations keep a finite value.
    double log_pmf(long k) const {
        return std::visit(
            [k](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    return detail::poisson_log_pmf(k, f.mean);
                } else if constexpr (std::is_same_v<T, NegBin>) {
                    return detail::nb_log_pmf(k, f.mean, f.psi);
                } else if constexpr (std::is_same_v<T, EmpiricalPmf>) {
                    if (k < 0 || static_cast<std::size_t>(k) >= f.probs.size())
                        return -std::numeric_limits<double>::infinity();
                    return std::log(f.probs[static_cast<std::size_t>(k)]);
                } else {
                    double max_lp = -std::numeric_limits<double>::infinity();
                    std::vector<double> lps;
                    lps.reserve(f.components.size());
                    for (const auto& c : f.components) {
                        lps.push_back(detail::nb_log_pmf(k, c.mean, c.psi));
                        max_lp = std::max(max_lp, lps.back());
                    }
                    if (!std::isfinite(max_lp)) return -std::numeric_limits<double>::infinity();
                    double s = 0.0;
                    for (double lp : lps) s += std::exp(lp - max_lp);
                    return max_lp + std::log(s) - std::log(static_cast<double>(f.components.size()));
                }
            },
            form_);
    }

    /// P(Y <= k); k < 0 gives 0.
    double cdf(long k) const {
        if (k < 0) return 0.0;
        return std::visit(
            [k, this](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    return detail::poisson_cdf(k, f.mean);
                } else if constexpr (std::is_same_v<T, NegBin>) {
                    return detail::nb_cdf(k, f.mean, f.psi);
                } else if constexpr (std::is_same_v<T, EmpiricalPmf>) {
                    if (static_cast<std::size_t>(k) >= cumulative_.size()) return 1.0;
                    return cumulative_[static_cast<std::size_t>(k)];
                } else {
                    double s = 0.0;
                    for (const auto& c : f.components) s += detail::nb_cdf(k, c.mean, c.psi);
                    return std::min(s / static_cast<double>(f.components.size()), 1.0);
                }
            },
            form_);
    }

    Moments moments() const {
        return std::visit(
            [](const auto& f) -> Moments {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    return {f.mean, f.mean};
                } else if constexpr (std::is_same_v<T, NegBin>) {
                    return {f.mean, f.mean + f.mean * f.mean / f.psi};
                } else if constexpr (std::is_same_v<T, EmpiricalPmf>) {
                    double m = 0.0, m2 = 0.0;
                    for (std::size_t k = 0; k < f.probs.size(); ++k) {
                        const double kk = static_cast<double>(k);
                        m += kk * f.probs[k];
                        m2 += kk * kk * f.probs[k];
                    }
                    return {m, std::max(0.0, m2 - m * m)};
                } else {
                    // Law of total variance across equal-weight components.
                    const double inv = 1.0 / static_cast<double>(f.components.size());
                    double m = 0.0, within = 0.0, m2 = 0.0;
                    for (const auto& c : f.components) {
                        m += inv * c.mean;
                        m2 += inv * c.mean * c.mean;
                        within += inv * (c.mean + c.mean * c.mean / c.psi);
                    }
                    return {m, within + std::max(0.0, m2 - m * m)};
                }
            },
            form_);
    }

    /// Smallest k with cdf(k) >= p, 0 < p < 1.
    long quantile(double p) const {
        double q[1] = {p};
        long out[1];
        quantiles(q, out);
        return out[0];
    }

    /// Batch quantiles in one support scan; ps need not be sorted.
    void quantiles(std::span<const double> ps, std::span<long> out) const;

    /// m iid draws (d = 1 ensemble); reproducible for a fixed seed.
    SampleEnsemble simulate(std::size_t m, std::uint64_t seed) const {
        if (m < 1) throw std::invalid_argument("simulate: m must be >= 1");
        std::mt19937_64 rng(seed);
        Eigen::MatrixXd draws(static_cast<Eigen::Index>(m), 1);
        for (std::size_t i = 0; i < m; ++i) draws(static_cast<Eigen::Index>(i), 0) = static_cast<double>(draw(rng));
        return SampleEnsemble(std::move(draws), true);
    }

    /// Single draw from a caller-owned generator.
    long draw(std::mt19937_64& rng) const {
        return std::visit(
            [&rng, this](const auto& f) -> long {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    return std::poisson_distribution<long>(f.mean)(rng);
                } else if constexpr (std::is_same_v<T, NegBin>) {
                    return draw_negbin(rng, f);
                } else if constexpr (std::is_same_v<T, EmpiricalPmf>) {
                    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
                    return static_cast<long>(it - cumulative_.begin());
                } else {
                    const auto idx = std::uniform_int_distribution<std::size_t>(0, f.components.size() - 1)(rng);
                    return draw_negbin(rng, f.components[idx]);
                }
            },
            form_);
    }

  private:
    static long draw_negbin(std::mt19937_64& rng, const NegBin& nb) {
        const double lambda = std::gamma_distribution<double>(nb.psi, nb.mean / nb.psi)(rng);
        return std::poisson_distribution<long>(lambda)(rng);
    }

    Form form_;
    std::vector<double> cumulative_;  // EmpiricalPmf only
};

/// Streams pmf(0), pmf(1), ... of a CountDistribution using stable log-space
/// recurrences; lets RPS sums and quantile scans run in O(1) per support point.
class PmfStream {
  public:
    explicit PmfStream(const CountDistribution& dist) {
        std::visit(
            [this](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    log_terms_.push_back(-f.mean);
                    log_means_.push_back(std::log(f.mean));
                    kind_ = Kind::poisson;
                } else if constexpr (std::is_same_v<T, NegBin>) {
                    init_negbin({f});
                } else if constexpr (std::is_same_v<T, EmpiricalPmf>) {
                    probs_ = f.probs;
                    kind_ = Kind::empirical;
                } else {
                    init_negbin(f.components);
                }
            },
            dist.form());
    }

    /// pmf at the next support point (starting from k = 0).
    double next() {
        double value = 0.0;
        switch (kind_) {
            case Kind::poisson:
                value = std::exp(log_terms_[0]);
                log_terms_[0] += log_means_[0] - std::log(static_cast<double>(k_ + 1));
                break;
            case Kind::negbin: {
                double s = 0.0;
                const double kk = static_cast<double>(k_);
                for (std::size_t i = 0; i < log_terms_.size(); ++i) {
                    s += std::exp(log_terms_[i]);
                    log_terms_[i] += std::log(kk + psis_[i]) - std::log(kk + 1.0) + log_ratios_[i];
                }
                value = s / static_cast<double>(log_terms_.size());
                break;
            }
            case Kind::empirical:
                value = (static_cast<std::size_t>(k_) < probs_.size()) ? probs_[static_cast<std::size_t>(k_)] : 0.0;
                break;
        }
        ++k_;
        return value;
    }

    long position() const { return k_; }

    /// True once the stream provably has no mass left to emit: the empirical
    /// support is consumed, or every analytic term has underflowed to exact
    /// zero on a decreasing tail (the per-step log increments below are
    /// monotone, so a non-positive step stays non-positive). Scans that wait
    /// for the accumulated cdf to reach 1 need this escape, because rounding
    /// can pin the running sum a few ulp short of 1 forever.
    bool exhausted() const {
        constexpr double dead = -800.0;  // exp() underflows to exactly 0 below ~-745
        const double kk = static_cast<double>(k_);
        switch (kind_) {
            case Kind::poisson:
                return log_terms_[0] <= dead && log_means_[0] <= std::log(kk + 1.0);
            case Kind::negbin:
                for (std::size_t i = 0; i < log_terms_.size(); ++i) {
                    const double step =
                        std::log(kk + psis_[i]) - std::log(kk + 1.0) + log_ratios_[i];
                    if (log_terms_[i] > dead || step > 0.0) return false;
                }
                return true;
            case Kind::empirical:
                return static_cast<std::size_t>(k_) >= probs_.size();
        }
        return false;
    }

  private:
    enum class Kind { poisson, negbin, empirical };

    void init_negbin(const std::vector<NegBin>& comps) {
        kind_ = Kind::negbin;
        for (const auto& c : comps) {
            log_terms_.push_back(-c.psi * std::log1p(c.mean / c.psi));
            log_ratios_.push_back(std::log(c.mean) - std::log(c.psi + c.mean));
            psis_.push_back(c.psi);
        }
    }

    Kind kind_ = Kind::empirical;
    long k_ = 0;
    std::vector<double> log_terms_, log_ratios_, psis_, log_means_, probs_;
};

inline void CountDistribution::quantiles(std::span<const double> ps, std::span<long> out) const {
    if (ps.size() != out.size()) throw std::invalid_argument("quantiles: size mismatch");
    for (double p : ps)
        if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0,1)");
    if (const auto* e = std::get_if<EmpiricalPmf>(&form_)) {
        (void)e;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), ps[i]);
            out[i] = (it == cumulative_.end()) ? static_cast<long>(cumulative_.size()) - 1
                                               : static_cast<long>(it - cumulative_.begin());
        }
        return;
    }
    std::vector<std::size_t> order(ps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ps[a] < ps[b]; });

    PmfStream stream(*this);
    double cdf = 0.0;
    std::size_t next_idx = 0;
    const long k_cap = 1L << 33;
    for (long k = 0; next_idx < order.size(); ++k) {
        if (k > k_cap) throw std::runtime_error("quantile: support scan exceeded cap");
        cdf += stream.next();
        // Once the accumulated mass is numerically 1, every remaining level
        // is reached at this k; a dead stream can no longer move the cdf, so
        // the same holds even when rounding left the sum short of 1.
        const bool topped = cdf >= 1.0 - 1e-13 || stream.exhausted();
        // The running sum only nominates candidates: a level is released when
        // the closed-form cdf (the one cdf() exposes) reaches it, so that
        // quantile(cdf(k)) <= k holds exactly despite the two arithmetics
        // differing by a few ulp.
        double closed = -1.0;
        while (next_idx < order.size()) {
            const double p = ps[order[next_idx]];
            if (!topped) {
                if (cdf < p - 1e-10) break;
                if (closed < 0.0) closed = this->cdf(k);
                if (closed < p) break;
            }
            out[order[next_idx]] = k;
            ++next_idx;
        }
    }
}

enum class Scale { natural, log };

struct Gaussian {
    double mean;
    double sd;
};

struct LogNormal {
    double meanlog;
    double sdlog;
};

/// A continuous predictive law. A Gaussian declared on the log scale is the
/// forecast of log(Y); all queries are answered on the natural scale.
class ContinuousDistribution {
  public:
    ContinuousDistribution(Gaussian g, Scale scale = Scale::natural) : scale_(scale) {
        if (!(g.sd > 0.0)) throw std::invalid_argument("Gaussian: sd must be > 0");
        if (scale == Scale::log) {
            form_ = LogNormal{g.mean, g.sd};
        } else {
            form_ = g;
        }
    }

    ContinuousDistribution(LogNormal ln, Scale scale = Scale::natural) : scale_(scale) {
        if (!(ln.sdlog > 0.0)) throw std::invalid_argument("LogNormal: sdlog must be > 0");
        if (scale == Scale::log)
            throw std::invalid_argument("ContinuousDistribution: log-scale LogNormal is not supported");
        form_ = ln;
    }

    Scale declared_scale() const { return scale_; }

    /// CDF on the natural scale.
    double cdf(double x) const {
        if (const auto* g = std::get_if<Gaussian>(&form_)) return normal_cdf((x - g->mean) / g->sd);
        const auto& ln = std::get<LogNormal>(form_);
        if (x <= 0.0) return 0.0;
        return normal_cdf((std::log(x) - ln.meanlog) / ln.sdlog);
    }

    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0,1)");
        const double z = normal_quantile(p);
        if (const auto* g = std::get_if<Gaussian>(&form_)) return g->mean + g->sd * z;
        const auto& ln = std::get<LogNormal>(form_);
        return std::exp(ln.meanlog + ln.sdlog * z);
    }

    /// Moments on the natural scale.
    Moments moments() const {
        if (const auto* g = std::get_if<Gaussian>(&form_)) return {g->mean, g->sd * g->sd};
        const auto& ln = std::get<LogNormal>(form_);
        const double s2 = ln.sdlog * ln.sdlog;
        const double m = std::exp(ln.meanlog + 0.5 * s2);
        return {m, (std::exp(s2) - 1.0) * std::exp(2.0 * ln.meanlog + s2)};
    }

  private:
    std::variant<Gaussian, LogNormal> form_;
    Scale scale_;
};

/// Bins a continuous law into a count pmf: pi_0 = F(0.5), pi_k = F(k+0.5) -
/// F(k-0.5), truncated once the upper tail mass drops below 1e-9 and
/// renormalized.
inline CountDistribution discretize(const ContinuousDistribution& dist) {
    constexpr double tail = 1e-9;
    constexpr long k_max = 1L << 25;
    long hi = static_cast<long>(std::ceil(std::max(0.0, dist.quantile(1.0 - tail))));
    while (1.0 - dist.cdf(static_cast<double>(hi) + 0.5) >= tail) {
        ++hi;
        if (hi > k_max) throw std::runtime_error("discretize: support exceeds cap");
    }
    if (hi > k_max) throw std::runtime_error("discretize: support exceeds cap");
    std::vector<double> probs(static_cast<std::size_t>(hi) + 1);
    double prev = 0.0, total = 0.0;
    for (long k = 0; k <= hi; ++k) {
        const double up = dist.cdf(static_cast<double>(k) + 0.5);
        probs[static_cast<std::size_t>(k)] = std::max(0.0, up - prev);
        total += probs[static_cast<std::size_t>(k)];
        prev = up;
    }
    if (!(total > 0.0)) throw std::runtime_error("discretize: all mass below the count support");
    for (double& p : probs) p /= total;
    return CountDistribution(EmpiricalPmf{std::move(probs)});
}

}  // namespace epicast
