#pragma once

// Endemic-epidemic negative-binomial time-series model for multivariate
// surveillance counts. The conditional mean of group g in week t splits into
// an autonomous endemic part and an autoregressive epidemic part coupled
// across groups by a (possibly power-adjusted) contact matrix:
//
//   mu_gt = nu_gt + phi_gt * sum_g' c_{g'g} Y_{g',t-1},
//   nu_gt  = exp(alpha_g + group-specific seasonality + holiday effect),
//   phi_gt = exp(delta_g + shared seasonality + optional holiday effect),
//
// with Y_gt | past ~ NegBin(mu_gt, psi_g), psi shared or group-specific.
// Fitting is maximum likelihood conditional on the first observation, on the
// unconstrained scale (log psi, log kappa).

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "epicast/calendar.hpp"
#include "epicast/contacts.hpp"
#include "epicast/distributions.hpp"
#include "epicast/math.hpp"
#include "epicast/optim.hpp"
#include "epicast/series.hpp"

namespace epicast {

enum class ContactStructure {
    none,            // identity coupling: each group driven by its own lag
    homogeneous,     // all-ones matrix, row-normalized to 1/G
    fixed,           // supplied matrix, row-normalized
    power_adjusted,  // supplied matrix, C^kappa with kappa estimated, then row-normalized
};

struct EEModelSpec {
    int endemic_harmonics = 1;                // sin/cos pairs with group-specific coefficients
    std::vector<int> endemic_holiday_weeks;   // ISO weeks sharing one endemic coefficient
    int epidemic_harmonics = 0;               // sin/cos pairs with shared coefficients
    std::vector<int> epidemic_holiday_weeks;  // ISO weeks sharing one epidemic coefficient
    double omega = two_pi / 52.0;             // seasonal base frequency, radians per week
    ContactStructure contact = ContactStructure::none;
    std::optional<ContactMatrix> contact_matrix;  // required for fixed / power_adjusted
    bool shared_overdispersion = false;           // one psi instead of one per group
    int season_start_week = 27;                   // boundary for seasonal log-likelihood sums
};

/// Offsets of each coefficient block inside the packed parameter vector.
struct ParamLayout {
    Eigen::Index groups = 0;
    int s_end = 0, s_epi = 0;
    bool hol_end = false, hol_epi = false;
    bool shared_psi = false, has_kappa = false;

    Eigen::Index end_intercepts = 0;  // [end_intercepts, +G)
    Eigen::Index end_harmonics = 0;   // [.., +2*s_end*G), ordered g-major then (sin, cos) per pair
    Eigen::Index end_holiday = 0;
    Eigen::Index epi_intercepts = 0;
    Eigen::Index epi_harmonics = 0;  // 2*s_epi shared coefficients
    Eigen::Index epi_holiday = 0;
    Eigen::Index log_psi = 0;  // 1 or G entries
    Eigen::Index log_kappa = 0;
    Eigen::Index total = 0;
};

inline ParamLayout make_layout(const EEModelSpec& spec, Eigen::Index groups) {
    ParamLayout lay;
    lay.groups = groups;
    lay.s_end = spec.endemic_harmonics;
    lay.s_epi = spec.epidemic_harmonics;
    lay.hol_end = !spec.endemic_holiday_weeks.empty();
    lay.hol_epi = !spec.epidemic_holiday_weeks.empty();
    lay.shared_psi = spec.shared_overdispersion;
    lay.has_kappa = spec.contact == ContactStructure::power_adjusted;

    Eigen::Index at = 0;
    lay.end_intercepts = at;
    at += groups;
    lay.end_harmonics = at;
    at += 2 * lay.s_end * groups;
    lay.end_holiday = at;
    at += lay.hol_end ? 1 : 0;
    lay.epi_intercepts = at;
    at += groups;
    lay.epi_harmonics = at;
    at += 2 * lay.s_epi;
    lay.epi_holiday = at;
    at += lay.hol_epi ? 1 : 0;
    lay.log_psi = at;
    at += lay.shared_psi ? 1 : groups;
    lay.log_kappa = at;
    at += lay.has_kappa ? 1 : 0;
    lay.total = at;
    return lay;
}

struct EEModelFit {
    EEModelSpec spec;
    std::vector<std::string> param_names;
    Eigen::VectorXd parameters;
    double loglik = 0.0;
    double aic = 0.0;
    Eigen::MatrixXd covariance;  // inverse observed information; valid iff covariance_ok
    bool covariance_ok = false;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    Eigen::Index n_terms = 0;  // group-weeks entering the conditional likelihood
};

/// One analytic one-week-ahead forecast: a negative binomial per group.
struct OneStepForecast {
    Eigen::Index t = 0;  // data column being predicted
    CalendarWeek week;
    std::vector<NegBin> laws;
};

/// Monte-Carlo forward simulation: M paths over H weeks and G groups, plus
/// the per-path conditional NB laws needed for Rao-Blackwellized forecasts.
/// Flat column order is week-major: column h*G + g.
struct PathSimulation {
    Eigen::Index origin = 0;  // first simulated data column
    Eigen::Index groups = 0, horizon = 0;
    std::vector<CalendarWeek> weeks;  // length H
    Eigen::MatrixXd samples;          // M x (H*G) simulated counts
    Eigen::MatrixXd cond_means;       // M x (H*G) conditional NB means
    Eigen::MatrixXd cond_psis;        // M x (H*G) conditional NB overdispersions

    Eigen::Index flat(Eigen::Index h, Eigen::Index g) const { return h * groups + g; }
    SampleEnsemble ensemble() const { return SampleEnsemble(samples, true); }
};

/// Mixture marginals and moment summaries of a path simulation.
struct LongTermPredictive {
    std::vector<std::vector<CountDistribution>> weekly;  // [h][g]: equal-weight NB mixture
    std::vector<MultivariateMoments> weekly_moments;     // per week, dimension G
    MultivariateMoments joint;                           // dimension H*G
};

struct FinalSizeForecast {
    std::vector<CountDistribution> per_group;  // NB moment approximation
    std::vector<bool> poisson_fallback;        // set where ensemble variance <= mean
    Eigen::MatrixXd totals;                    // M x G season totals behind the moments
};

struct PeakWeekForecast {
    std::vector<CalendarWeek> weeks;     // forecast horizon, chronological
    std::vector<double> probabilities;   // peak-week pmf over those weeks
    CalendarWeek median, lower, upper;   // 50% / 2.5% / 97.5% quantiles
};

/// Endemic and epidemic mean components for fitted weeks t = first_t .. T-1.
struct FittedDecomposition {
    Eigen::Index first_t = 1;
    Eigen::MatrixXd endemic;   // G x (T - first_t)
    Eigen::MatrixXd epidemic;  // G x (T - first_t)
};

class EEModel {
  public:
    EEModel(EEModelSpec spec, const SurveillanceSeries& data)
        : spec_(std::move(spec)),
          counts_(data.counts()),
          weeks_(data.weeks()),
          labels_(data.group_labels()),
          layout_(make_layout(spec_, data.groups())) {
        if (spec_.endemic_harmonics < 0 || spec_.epidemic_harmonics < 0)
            throw std::invalid_argument("EEModel: harmonic counts must be >= 0");
        if (!(spec_.omega > 0.0)) throw std::invalid_argument("EEModel: omega must be > 0");
        const bool needs_matrix =
            spec_.contact == ContactStructure::fixed || spec_.contact == ContactStructure::power_adjusted;
        if (needs_matrix) {
            if (!spec_.contact_matrix) throw std::invalid_argument("EEModel: contact matrix required");
            if (spec_.contact_matrix->groups() != groups())
                throw std::invalid_argument("EEModel: contact matrix dimension mismatch");
            // Symmetry and a non-negative spectrum are kappa-independent, so a
            // structurally unusable matrix should fail loudly here; during the
            // fit the likelihood only soft-fails kappa-dependent breakdowns.
            if (spec_.contact == ContactStructure::power_adjusted) {
                Eigen::MatrixXd q;
                Eigen::VectorXd lambda;
                detail::checked_contact_eigen(spec_.contact_matrix->weights(), q, lambda);
            }
        }
        // Covariate design must have full column rank: harmonics need at
        // least 2S+1 distinct phases and holiday coefficients need both
        // indicator values present among fitted weeks.
        check_design_rank();
    }

    const EEModelSpec& spec() const { return spec_; }
    const ParamLayout& layout() const { return layout_; }
    Eigen::Index groups() const { return counts_.rows(); }
    Eigen::Index weeks_count() const { return counts_.cols(); }
    const std::vector<std::string>& group_labels() const { return labels_; }
    const Eigen::MatrixXd& counts() const { return counts_; }

    /// Calendar week of time index t, extended past the data range.
    CalendarWeek week_at(Eigen::Index t) const {
        const auto last = static_cast<Eigen::Index>(weeks_.size()) - 1;
        if (t <= last) return weeks_[static_cast<std::size_t>(t)];
        return advance_weeks(weeks_[static_cast<std::size_t>(last)], t - last);
    }

    std::vector<std::string> param_names() const {
        std::vector<std::string> names;
        names.reserve(static_cast<std::size_t>(layout_.total));
        const auto g_name = [this](Eigen::Index g) { return labels_[static_cast<std::size_t>(g)]; };
        for (Eigen::Index g = 0; g < groups(); ++g) names.push_back("end.intercept." + g_name(g));
        for (Eigen::Index g = 0; g < groups(); ++g)
            for (int s = 1; s <= layout_.s_end; ++s) {
                names.push_back("end.sin" + std::to_string(s) + "." + g_name(g));
                names.push_back("end.cos" + std::to_string(s) + "." + g_name(g));
            }
        if (layout_.hol_end) names.push_back("end.holiday");
        for (Eigen::Index g = 0; g < groups(); ++g) names.push_back("epi.intercept." + g_name(g));
        for (int s = 1; s <= layout_.s_epi; ++s) {
            names.push_back("epi.sin" + std::to_string(s));
            names.push_back("epi.cos" + std::to_string(s));
        }
        if (layout_.hol_epi) names.push_back("epi.holiday");
        if (layout_.shared_psi) {
            names.push_back("log_psi");
        } else {
            for (Eigen::Index g = 0; g < groups(); ++g) names.push_back("log_psi." + g_name(g));
        }
        if (layout_.has_kappa) names.push_back("log_kappa");
        return names;
    }

    /// Row-normalized effective contact matrix at the given kappa (ignored
    /// unless the structure is power-adjusted); optionally also its
    /// elementwise kappa derivative.
    Eigen::MatrixXd effective_contacts(double kappa, Eigen::MatrixXd* d_kappa = nullptr) const {
        const Eigen::Index g = groups();
        if (d_kappa) d_kappa->setZero(g, g);
        switch (spec_.contact) {
            case ContactStructure::none:
                return Eigen::MatrixXd::Identity(g, g);
            case ContactStructure::homogeneous:
                return Eigen::MatrixXd::Constant(g, g, 1.0 / static_cast<double>(g));
            case ContactStructure::fixed:
                return row_normalize(*spec_.contact_matrix).weights();
            case ContactStructure::power_adjusted:
                break;
        }
        const PowerTransformResult p = power_transform_with_derivative(*spec_.contact_matrix, kappa);
        Eigen::MatrixXd m(g, g);
        for (Eigen::Index i = 0; i < g; ++i) {
            const double r = p.matrix.row(i).sum();
            if (!(r > 0.0))
                throw std::domain_error("effective_contacts: zero contact row after power transform");
            m.row(i) = p.matrix.row(i) / r;
            if (d_kappa) {
                const double dr = p.derivative.row(i).sum();
                d_kappa->row(i) = (p.derivative.row(i) - m.row(i) * dr) / r;
            }
        }
        return m;
    }

    /// Endemic rates nu_g(t) and epidemic factors phi_g(t). These depend on
    /// time only through seasonality and calendar effects, never on counts.
    void predictors(const Eigen::VectorXd& theta, Eigen::Index t, Eigen::VectorXd& nu,
                    Eigen::VectorXd& phi) const {
        check_theta(theta);
        const Eigen::Index g_count = groups();
        const double tt = static_cast<double>(t + 1);  // 1-based week index in the harmonics
        const int max_s = std::max(layout_.s_end, layout_.s_epi);
        std::vector<double> sins(static_cast<std::size_t>(max_s)), coss(static_cast<std::size_t>(max_s));
        for (int s = 1; s <= max_s; ++s) {
            sins[static_cast<std::size_t>(s - 1)] = std::sin(spec_.omega * s * tt);
            coss[static_cast<std::size_t>(s - 1)] = std::cos(spec_.omega * s * tt);
        }
        const int week_no = week_at(t).week;
        const bool he = layout_.hol_end && contains(spec_.endemic_holiday_weeks, week_no);
        const bool hp = layout_.hol_epi && contains(spec_.epidemic_holiday_weeks, week_no);

        nu.resize(g_count);
        phi.resize(g_count);
        double epi_shared = 0.0;
        for (int s = 0; s < layout_.s_epi; ++s)
            epi_shared += theta(layout_.epi_harmonics + 2 * s) * sins[static_cast<std::size_t>(s)] +
                          theta(layout_.epi_harmonics + 2 * s + 1) * coss[static_cast<std::size_t>(s)];
        if (hp) epi_shared += theta(layout_.epi_holiday);
        for (Eigen::Index g = 0; g < g_count; ++g) {
            double eta = theta(layout_.end_intercepts + g);
            const Eigen::Index base = layout_.end_harmonics + g * 2 * layout_.s_end;
            for (int s = 0; s < layout_.s_end; ++s)
                eta += theta(base + 2 * s) * sins[static_cast<std::size_t>(s)] +
                       theta(base + 2 * s + 1) * coss[static_cast<std::size_t>(s)];
            if (he) eta += theta(layout_.end_holiday);
            nu(g) = std::exp(eta);
            phi(g) = std::exp(theta(layout_.epi_intercepts + g) + epi_shared);
        }
    }

    /// mu_t = nu_t + phi_t .* (C' y_prev) for a given previous-week count
    /// vector; t >= 1 in-sample, larger t extends the calendar.
    Eigen::VectorXd conditional_mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& y_prev,
                                     Eigen::Index t) const {
        if (y_prev.size() != groups()) throw std::invalid_argument("conditional_mean: y_prev size mismatch");
        Eigen::VectorXd nu, phi;
        predictors(theta, t, nu, phi);
        const Eigen::MatrixXd c = effective_contacts(kappa_of(theta));
        return nu + phi.cwiseProduct(c.transpose() * y_prev);
    }

    /// Conditional log-likelihood given the first observation. Throws with
    /// the offending (group, week) when a term is not finite.
    double log_likelihood(const Eigen::VectorXd& theta) const {
        Eigen::Index bad_g = -1, bad_t = -1;
        const double ll = log_likelihood_impl(theta, nullptr, &bad_g, &bad_t);
        if (!std::isfinite(ll))
            throw std::domain_error("log_likelihood: non-finite term at group " + std::to_string(bad_g) +
                                    ", week index " + std::to_string(bad_t));
        return ll;
    }

    /// Log-likelihood and its analytic gradient on the packed parameters.
    double log_likelihood(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
        Eigen::Index bad_g = -1, bad_t = -1;
        const double ll = log_likelihood_impl(theta, &grad, &bad_g, &bad_t);
        if (!std::isfinite(ll))
            throw std::domain_error("log_likelihood: non-finite term at group " + std::to_string(bad_g) +
                                    ", week index " + std::to_string(bad_t));
        return ll;
    }

    /// Per-season partial sums of the conditional log-likelihood, in
    /// chronological order; they add up to the total.
    std::vector<std::pair<std::string, double>> seasonal_loglik(const Eigen::VectorXd& theta) const {
        check_theta(theta);
        std::vector<std::pair<std::string, double>> out;
        const Eigen::VectorXd psi = psi_of(theta);
        const Eigen::MatrixXd c = effective_contacts(kappa_of(theta));
        for (Eigen::Index t = 1; t < weeks_count(); ++t) {
            Eigen::VectorXd nu, phi;
            predictors(theta, t, nu, phi);
            const Eigen::VectorXd mu = nu + phi.cwiseProduct(c.transpose() * counts_.col(t - 1));
            double term = 0.0;
            for (Eigen::Index g = 0; g < groups(); ++g)
                term += detail::nb_log_pmf(static_cast<long>(counts_(g, t)), mu(g), psi(g));
            const std::string season = season_label(week_at(t), spec_.season_start_week);
            if (out.empty() || out.back().first != season) out.emplace_back(season, 0.0);
            out.back().second += term;
        }
        return out;
    }

    /// Maximum-likelihood fit from a data-driven default start (endemic
    /// intercepts at log group means, everything else neutral).
    EEModelFit fit(std::optional<Eigen::VectorXd> init = std::nullopt, OptimSettings settings = {}) const {
        Eigen::VectorXd x0 = init ? *init : default_init();
        if (x0.size() != layout_.total) throw std::invalid_argument("fit: init has wrong length");

        const ObjectiveFn objective = [this](const Eigen::VectorXd& th, Eigen::VectorXd* grad) {
            Eigen::VectorXd g;
            const double ll = log_likelihood_impl(th, grad ? &g : nullptr, nullptr, nullptr);
            if (grad) {
                if (g.size() == 0 || !std::isfinite(ll)) {
                    grad->setConstant(layout_.total, std::numeric_limits<double>::quiet_NaN());
                } else {
                    *grad = -g;
                }
            }
            return -ll;
        };
        const OptimResult opt = bfgs_minimize(objective, std::move(x0), settings);

        EEModelFit fit_out;
        fit_out.spec = spec_;
        fit_out.param_names = param_names();
        fit_out.parameters = opt.x;
        fit_out.loglik = -opt.fx;
        fit_out.aic = 2.0 * opt.fx + 2.0 * static_cast<double>(layout_.total);
        fit_out.converged = opt.converged;
        fit_out.iterations = opt.iterations;
        fit_out.grad_norm = opt.gradient.cwiseAbs().maxCoeff();
        fit_out.n_terms = (weeks_count() - 1) * groups();

        // Covariance = inverse observed information, from a central
        // finite-difference Hessian of the analytic gradient.
        const auto grad_fn = [this](const Eigen::VectorXd& th) {
            Eigen::VectorXd g;
            log_likelihood_impl(th, &g, nullptr, nullptr);
            return Eigen::VectorXd(-g);
        };
        const Eigen::MatrixXd info = fd_hessian_from_gradient(grad_fn, opt.x);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            fit_out.covariance = ldlt.solve(Eigen::MatrixXd::Identity(layout_.total, layout_.total));
            fit_out.covariance_ok = fit_out.covariance.allFinite();
        } else {
            fit_out.covariance.setConstant(layout_.total, layout_.total,
                                           std::numeric_limits<double>::quiet_NaN());
            fit_out.covariance_ok = false;
        }
        return fit_out;
    }

    /// Analytic one-week-ahead negative-binomial forecasts for data columns
    /// first_t..last_t, conditioning on the observed previous week.
    std::vector<OneStepForecast> one_step_ahead(const Eigen::VectorXd& theta, Eigen::Index first_t,
                                                Eigen::Index last_t) const {
        check_theta(theta);
        if (first_t < 1 || last_t >= weeks_count() || first_t > last_t)
            throw std::invalid_argument("one_step_ahead: t range must lie within 1..T-1");
        const Eigen::VectorXd psi = psi_of(theta);
        const Eigen::MatrixXd c = effective_contacts(kappa_of(theta));
        std::vector<OneStepForecast> out;
        out.reserve(static_cast<std::size_t>(last_t - first_t + 1));
        for (Eigen::Index t = first_t; t <= last_t; ++t) {
            Eigen::VectorXd nu, phi;
            predictors(theta, t, nu, phi);
            const Eigen::VectorXd mu = nu + phi.cwiseProduct(c.transpose() * counts_.col(t - 1));
            OneStepForecast f;
            f.t = t;
            f.week = week_at(t);
            f.laws.reserve(static_cast<std::size_t>(groups()));
            for (Eigen::Index g = 0; g < groups(); ++g) f.laws.push_back(NegBin{mu(g), psi(g)});
            out.push_back(std::move(f));
        }
        return out;
    }

    /// M forward trajectories starting at data column `origin` (conditioning
    /// on the observed week origin-1), keeping each path's conditional NB
    /// laws. Paths use independent seed substreams: fixed seed, fixed result.
    PathSimulation simulate_paths(const Eigen::VectorXd& theta, Eigen::Index origin, Eigen::Index horizon,
                                  Eigen::Index m_paths, std::uint64_t seed) const {
        check_theta(theta);
        if (origin < 1 || origin > weeks_count())
            throw std::invalid_argument("simulate_paths: origin must have observed history");
        if (horizon < 1 || m_paths < 1) throw std::invalid_argument("simulate_paths: need H >= 1, M >= 1");
        const Eigen::Index g_count = groups();
        const Eigen::VectorXd psi = psi_of(theta);
        const Eigen::MatrixXd c_t = effective_contacts(kappa_of(theta)).transpose();

        PathSimulation sim;
        sim.origin = origin;
        sim.groups = g_count;
        sim.horizon = horizon;
        sim.weeks.reserve(static_cast<std::size_t>(horizon));
        for (Eigen::Index h = 0; h < horizon; ++h) sim.weeks.push_back(week_at(origin + h));
        sim.samples.resize(m_paths, horizon * g_count);
        sim.cond_means.resize(m_paths, horizon * g_count);
        sim.cond_psis.resize(m_paths, horizon * g_count);

        // Predictors are count-free, so hoist them out of the path loop.
        std::vector<Eigen::VectorXd> nus(static_cast<std::size_t>(horizon)),
            phis(static_cast<std::size_t>(horizon));
        for (Eigen::Index h = 0; h < horizon; ++h)
            predictors(theta, origin + h, nus[static_cast<std::size_t>(h)], phis[static_cast<std::size_t>(h)]);

        for (Eigen::Index m = 0; m < m_paths; ++m) {
            std::mt19937_64 rng(substream_seed(seed, 0, static_cast<std::uint64_t>(origin),
                                               static_cast<std::uint64_t>(m)));
            Eigen::VectorXd y_prev = counts_.col(origin - 1);
            for (Eigen::Index h = 0; h < horizon; ++h) {
                const Eigen::VectorXd mu = nus[static_cast<std::size_t>(h)] +
                                           phis[static_cast<std::size_t>(h)].cwiseProduct(c_t * y_prev);
                for (Eigen::Index g = 0; g < g_count; ++g) {
                    const Eigen::Index col = sim.flat(h, g);
                    sim.cond_means(m, col) = mu(g);
                    sim.cond_psis(m, col) = psi(g);
                    const double lambda =
                        std::gamma_distribution<double>(psi(g), mu(g) / psi(g))(rng);
                    const double y = static_cast<double>(std::poisson_distribution<long>(lambda)(rng));
                    sim.samples(m, col) = y;
                    y_prev(g) = y;
                }
            }
        }
        return sim;
    }

    /// Endemic/epidemic split of the fitted means; the two components sum to
    /// the conditional mean exactly.
    FittedDecomposition decompose_fitted(const Eigen::VectorXd& theta) const {
        check_theta(theta);
        FittedDecomposition dec;
        dec.first_t = 1;
        const Eigen::Index cols = weeks_count() - 1;
        dec.endemic.resize(groups(), cols);
        dec.epidemic.resize(groups(), cols);
        const Eigen::MatrixXd c_t = effective_contacts(kappa_of(theta)).transpose();
        for (Eigen::Index t = 1; t < weeks_count(); ++t) {
            Eigen::VectorXd nu, phi;
            predictors(theta, t, nu, phi);
            dec.endemic.col(t - 1) = nu;
            dec.epidemic.col(t - 1) = phi.cwiseProduct(c_t * counts_.col(t - 1));
        }
        return dec;
    }

    /// Default start: endemic intercepts at log group means, other
    /// coefficients 0, psi = 1, kappa = 1.
    Eigen::VectorXd default_init() const {
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(layout_.total);
        for (Eigen::Index g = 0; g < groups(); ++g)
            x0(layout_.end_intercepts + g) = std::log(std::max(counts_.row(g).mean(), 0.1));
        return x0;
    }

    Eigen::VectorXd psi_of(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd psi(groups());
        for (Eigen::Index g = 0; g < groups(); ++g)
            psi(g) = std::exp(theta(layout_.log_psi + (layout_.shared_psi ? 0 : g)));
        return psi;
    }

    double kappa_of(const Eigen::VectorXd& theta) const {
        return layout_.has_kappa ? std::exp(theta(layout_.log_kappa)) : 1.0;
    }

  private:
    static bool contains(const std::vector<int>& v, int x) {
        for (int e : v)
            if (e == x) return true;
        return false;
    }

    void check_theta(const Eigen::VectorXd& theta) const {
        if (theta.size() != layout_.total)
            throw std::invalid_argument("EEModel: parameter vector has wrong length (expected " +
                                        std::to_string(layout_.total) + ")");
    }

    void check_design_rank() const {
        const Eigen::Index t_count = weeks_count();
        const int max_s = std::max(layout_.s_end, layout_.s_epi);
        if (max_s > 0 && t_count - 1 < 2 * max_s + 1)
            throw std::invalid_argument("EEModel: too few weeks for the requested harmonics");
        const auto indicator_varies = [this, t_count](const std::vector<int>& hol_weeks) {
            bool seen0 = false, seen1 = false;
            for (Eigen::Index t = 1; t < t_count; ++t)
                (contains(hol_weeks, week_at(t).week) ? seen1 : seen0) = true;
            return seen0 && seen1;
        };
        if (layout_.hol_end && !indicator_varies(spec_.endemic_holiday_weeks))
            throw std::invalid_argument("EEModel: endemic holiday indicator is constant over fitted weeks");
        if (layout_.hol_epi && !indicator_varies(spec_.epidemic_holiday_weeks))
            throw std::invalid_argument("EEModel: epidemic holiday indicator is constant over fitted weeks");
    }

    // Core likelihood pass. Returns -inf (recording the offending term)
    // instead of throwing so optimizer line searches can back off.
    double log_likelihood_impl(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::Index* bad_g,
                               Eigen::Index* bad_t) const {
        check_theta(theta);
        const Eigen::Index g_count = groups();
        const Eigen::VectorXd psi = psi_of(theta);
        const double kappa = kappa_of(theta);
        Eigen::MatrixXd dc_dkappa;
        Eigen::MatrixXd c;
        try {
            c = effective_contacts(kappa, (grad && layout_.has_kappa) ? &dc_dkappa : nullptr);
        } catch (const std::domain_error&) {
            if (bad_g) *bad_g = -1;
            if (bad_t) *bad_t = -1;
            return -std::numeric_limits<double>::infinity();
        }
        const Eigen::MatrixXd c_t = c.transpose();

        if (grad) grad->setZero(layout_.total);
        double ll = 0.0;
        double d_kappa_total = 0.0;
        Eigen::VectorXd nu, phi;
        const double tiny = std::numeric_limits<double>::min();
        Eigen::VectorXd d_drive;
        for (Eigen::Index t = 1; t < weeks_count(); ++t) {
            predictors(theta, t, nu, phi);
            const Eigen::VectorXd drive = c_t * counts_.col(t - 1);
            if (grad && layout_.has_kappa) d_drive = dc_dkappa.transpose() * counts_.col(t - 1);
            const double tt = static_cast<double>(t + 1);
            const int week_no = week_at(t).week;
            const bool he = layout_.hol_end && contains(spec_.endemic_holiday_weeks, week_no);
            const bool hp = layout_.hol_epi && contains(spec_.epidemic_holiday_weeks, week_no);
            double w_nu_sum = 0.0, w_epi_sum = 0.0;
            for (Eigen::Index g = 0; g < g_count; ++g) {
                const double mu = nu(g) + phi(g) * drive(g);
                const double y = counts_(g, t);
                if (!(mu > 0.0) || !std::isfinite(mu)) {
                    if (bad_g) *bad_g = g;
                    if (bad_t) *bad_t = t;
                    return -std::numeric_limits<double>::infinity();
                }
                const double term = detail::nb_log_pmf(static_cast<long>(y), mu, psi(g));
                if (!std::isfinite(term)) {
                    if (bad_g) *bad_g = g;
                    if (bad_t) *bad_t = t;
                    return -std::numeric_limits<double>::infinity();
                }
                ll += term;
                if (!grad) continue;

                const double p = psi(g);
                const double w = y / std::max(mu, tiny) - (y + p) / (p + mu);  // d term / d mu
                const double w_nu = w * nu(g);
                const double w_epi = w * phi(g) * drive(g);
                w_nu_sum += w_nu;
                w_epi_sum += w_epi;
                (*grad)(layout_.end_intercepts + g) += w_nu;
                const Eigen::Index base = layout_.end_harmonics + g * 2 * layout_.s_end;
                for (int s = 1; s <= layout_.s_end; ++s) {
                    (*grad)(base + 2 * (s - 1)) += w_nu * std::sin(spec_.omega * s * tt);
                    (*grad)(base + 2 * (s - 1) + 1) += w_nu * std::cos(spec_.omega * s * tt);
                }
                (*grad)(layout_.epi_intercepts + g) += w_epi;
                // d term / d log psi (chain rule through psi = exp(.))
                const double dpsi = digamma(y + p) - digamma(p) - std::log1p(mu / p) + 1.0 - (y + p) / (p + mu);
                (*grad)(layout_.log_psi + (layout_.shared_psi ? 0 : g)) += p * dpsi;
                if (layout_.has_kappa) d_kappa_total += w * phi(g) * d_drive(g);
            }
            if (!grad) continue;
            if (he) (*grad)(layout_.end_holiday) += w_nu_sum;
            for (int s = 1; s <= layout_.s_epi; ++s) {
                (*grad)(layout_.epi_harmonics + 2 * (s - 1)) += w_epi_sum * std::sin(spec_.omega * s * tt);
                (*grad)(layout_.epi_harmonics + 2 * (s - 1) + 1) += w_epi_sum * std::cos(spec_.omega * s * tt);
            }
            if (hp) (*grad)(layout_.epi_holiday) += w_epi_sum;
        }
        if (grad && layout_.has_kappa) (*grad)(layout_.log_kappa) = d_kappa_total * kappa;
        return ll;
    }

    EEModelSpec spec_;
    Eigen::MatrixXd counts_;
    std::vector<CalendarWeek> weeks_;
    std::vector<std::string> labels_;
    ParamLayout layout_;
};

/// Equal-weight mixture marginals plus empirical moment summaries; needs at
/// least two paths for the covariances.
inline LongTermPredictive long_term_predictive(const PathSimulation& sim) {
    const Eigen::Index m = sim.samples.rows();
    if (m < 2) throw std::invalid_argument("long_term_predictive: need at least two paths");
    LongTermPredictive out{ {}, {}, ensemble_moments(sim.ensemble())};
    out.weekly.resize(static_cast<std::size_t>(sim.horizon));
    out.weekly_moments.reserve(static_cast<std::size_t>(sim.horizon));
    for (Eigen::Index h = 0; h < sim.horizon; ++h) {
        auto& row = out.weekly[static_cast<std::size_t>(h)];
        row.reserve(static_cast<std::size_t>(sim.groups));
        for (Eigen::Index g = 0; g < sim.groups; ++g) {
            const Eigen::Index col = sim.flat(h, g);
            MixtureNegBin mix;
            mix.components.reserve(static_cast<std::size_t>(m));
            for (Eigen::Index i = 0; i < m; ++i)
                mix.components.push_back(NegBin{sim.cond_means(i, col), sim.cond_psis(i, col)});
            row.emplace_back(std::move(mix));
        }
        const Eigen::Index first = sim.flat(h, 0);
        out.weekly_moments.emplace_back(out.joint.mean.segment(first, sim.groups),
                                        out.joint.covariance.block(first, first, sim.groups, sim.groups));
    }
    return out;
}

/// Per-group season totals approximated by moment-matched negative binomials
/// (Poisson when the ensemble variance does not exceed the mean; a point
/// mass at zero when the total never moves off zero).
inline FinalSizeForecast final_size_forecast(const PathSimulation& sim) {
    const Eigen::Index m = sim.samples.rows();
    if (m < 2) throw std::invalid_argument("final_size_forecast: need at least two paths");
    FinalSizeForecast out;
    out.totals.setZero(m, sim.groups);
    for (Eigen::Index g = 0; g < sim.groups; ++g)
        for (Eigen::Index h = 0; h < sim.horizon; ++h) out.totals.col(g) += sim.samples.col(sim.flat(h, g));
    for (Eigen::Index g = 0; g < sim.groups; ++g) {
        std::vector<double> tot(out.totals.col(g).data(), out.totals.col(g).data() + m);
        const double mean_tot = mean(tot);
        const double var_tot = sample_variance(tot);
        if (var_tot > mean_tot && mean_tot > 0.0) {
            out.per_group.emplace_back(NegBin{mean_tot, mean_tot * mean_tot / (var_tot - mean_tot)});
            out.poisson_fallback.push_back(false);
        } else if (mean_tot > 0.0) {
            out.per_group.emplace_back(Poisson{mean_tot});
            out.poisson_fallback.push_back(true);
        } else {
            out.per_group.emplace_back(EmpiricalPmf{{1.0}});
            out.poisson_fallback.push_back(true);
        }
    }
    return out;
}

/// Distribution of the week with the highest total count along each path;
/// ties break to the earliest week. Quantiles use the smallest week whose
/// cumulative probability reaches the level.
inline PeakWeekForecast peak_week_forecast(const PathSimulation& sim) {
    const Eigen::Index m = sim.samples.rows();
    std::vector<double> prob(static_cast<std::size_t>(sim.horizon), 0.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::Index best_h = 0;
        double best = -1.0;
        for (Eigen::Index h = 0; h < sim.horizon; ++h) {
            double total = 0.0;
            for (Eigen::Index g = 0; g < sim.groups; ++g) total += sim.samples(i, sim.flat(h, g));
            if (total > best) {
                best = total;
                best_h = h;
            }
        }
        prob[static_cast<std::size_t>(best_h)] += 1.0;
    }
    for (double& p : prob) p /= static_cast<double>(m);
    const auto week_quantile = [&](double level) {
        double cum = 0.0;
        for (std::size_t h = 0; h < prob.size(); ++h) {
            cum += prob[h];
            if (cum >= level) return sim.weeks[h];
        }
        return sim.weeks.back();
    };
    PeakWeekForecast out;
    out.weeks = sim.weeks;
    out.median = week_quantile(0.5);
    out.lower = week_quantile(0.025);
    out.upper = week_quantile(0.975);
    out.probabilities = std::move(prob);  // the lambda above reads prob
    return out;
}

/// Draws a fresh series from the model: seasonality and calendar effects per
/// the spec, counts evolving from y0. Used for simulation studies.
inline SurveillanceSeries simulate_series(const EEModelSpec& spec, const Eigen::VectorXd& theta,
                                          const Eigen::VectorXd& y0, CalendarWeek start, Eigen::Index t_count,
                                          std::vector<std::string> labels, std::uint64_t seed) {
    const Eigen::Index g_count = y0.size();
    if (t_count < 2) throw std::invalid_argument("simulate_series: need T >= 2");
    std::vector<CalendarWeek> weeks;
    weeks.reserve(static_cast<std::size_t>(t_count));
    CalendarWeek w = start;
    for (Eigen::Index t = 0; t < t_count; ++t, w = next_week(w)) weeks.push_back(w);

    // A zero-count scaffold gives us the predictor machinery; the counts
    // themselves are drawn sequentially below.
    SurveillanceSeries scaffold(Eigen::MatrixXd::Zero(g_count, t_count), weeks, labels);
    EEModel model(spec, scaffold);
    const Eigen::VectorXd psi = model.psi_of(theta);
    const Eigen::MatrixXd c_t = model.effective_contacts(model.kappa_of(theta)).transpose();

    Eigen::MatrixXd counts(g_count, t_count);
    counts.col(0) = y0;
    std::mt19937_64 rng(seed);
    Eigen::VectorXd nu, phi;
    for (Eigen::Index t = 1; t < t_count; ++t) {
        model.predictors(theta, t, nu, phi);
        const Eigen::VectorXd mu = nu + phi.cwiseProduct(c_t * counts.col(t - 1));
        for (Eigen::Index g = 0; g < g_count; ++g) {
            const double lambda = std::gamma_distribution<double>(psi(g), mu(g) / psi(g))(rng);
            counts(g, t) = static_cast<double>(std::poisson_distribution<long>(lambda)(rng));
        }
    }
    return SurveillanceSeries(std::move(counts), std::move(weeks), std::move(labels));
}

}  // namespace epicast
