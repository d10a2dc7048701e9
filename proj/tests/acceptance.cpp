// Acceptance gate: one criterion per line, [PASS] / [FAIL] / [SKIP], with a
// nonzero exit code if anything fails. Criteria that reproduce published
// surveillance results run only when the corresponding dataset fixtures are
// bundled under data/fixtures/; otherwise they are reported as skipped.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "epicast/epicast.hpp"

using namespace epicast;

namespace {

int failures = 0;
int passes = 0;
int skips = 0;

struct Skip {
    std::string reason;
};

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

void run_criterion(int number, const std::string& name, double time_limit_s,
                   const std::function<void(Check&)>& body) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(check);
    } catch (const Skip& s) {
        std::printf("[SKIP] %2d %s: %s\n", number, name.c_str(), s.reason.c_str());
        ++skips;
        return;
    } catch (const std::exception& e) {
        check.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - t0)
            .count();
    if (time_limit_s > 0.0 && elapsed > time_limit_s)
        check.require(false, "exceeded the " + std::to_string(time_limit_s) + " s budget");
    if (check.ok) {
        std::printf("[PASS] %2d %s (%.1fs)\n", number, name.c_str(), elapsed);
        ++passes;
    } else {
        std::printf("[FAIL] %2d %s: %s (%.1fs)\n", number, name.c_str(), check.detail.c_str(), elapsed);
        ++failures;
    }
    std::fflush(stdout);
}

CountDistribution nb_from_moments(double mean, double variance) {
    return CountDistribution(NegBin{mean, mean * mean / (variance - mean)});
}

std::string data_file(const char* name) {
    return (std::filesystem::path(EPICAST_DATA_DIR) / name).string();
}

void need_fixture(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw Skip{"dataset fixture not bundled (" + path + ")"};
}

// --------------------------------------------------------------------------
// 1. The mean log score, RPS and DSS over many outcomes drawn from a known
//    law are all strictly smaller under the true forecast than under eight
//    moment-perturbed rivals, by more than three Monte Carlo standard errors.

void criterion_propriety(Check& check) {
    const double mu = 10.0, var = 60.0;  // NegBin(10, 2)
    const CountDistribution truth = nb_from_moments(mu, var);
    std::vector<CountDistribution> rivals;
    for (double f : {0.8, 0.9, 1.1, 1.2}) rivals.push_back(nb_from_moments(f * mu, var));
    for (double f : {0.5, 2.0}) rivals.push_back(nb_from_moments(mu, f * var));
    rivals.push_back(nb_from_moments(0.9 * mu, 0.5 * var));
    rivals.push_back(nb_from_moments(1.1 * mu, 2.0 * var));

    const std::size_t n = 100000;
    const SampleEnsemble draws = truth.simulate(n, 20260814);
    std::map<long, double> weight;  // outcome -> multiplicity
    for (Eigen::Index i = 0; i < draws.samples().rows(); ++i)
        weight[static_cast<long>(draws.samples()(i, 0))] += 1.0;

    // per-outcome scores for one forecast, in the map's key order
    const auto score_table = [&](const CountDistribution& dist) {
        std::vector<std::array<double, 3>> table;
        table.reserve(weight.size());
        const Moments mom = dist.moments();
        for (const auto& [k, w] : weight)
            table.push_back({log_score(dist, k), rps(dist, k),
                             dss(mom.mean, mom.variance, static_cast<double>(k))});
        return table;
    };

    const auto truth_table = score_table(truth);
    const char* score_names[3] = {"log score", "rps", "dss"};
    for (std::size_t r = 0; r < rivals.size(); ++r) {
        const auto rival_table = score_table(rivals[r]);
        for (int s = 0; s < 3; ++s) {
            // paired difference rival - truth, weighted by outcome multiplicity
            double sum = 0.0, sumsq = 0.0;
            std::size_t i = 0;
            for (const auto& [k, w] : weight) {
                const double d = rival_table[i][static_cast<std::size_t>(s)] -
                                 truth_table[i][static_cast<std::size_t>(s)];
                sum += w * d;
                sumsq += w * d * d;
                ++i;
            }
            const double nn = static_cast<double>(n);
            const double mean_d = sum / nn;
            const double se = std::sqrt((sumsq / nn - mean_d * mean_d) / nn);
            check.require(mean_d > 3.0 * se, std::string(score_names[s]) + " margin for rival " +
                                                 std::to_string(r + 1) + " is " + std::to_string(mean_d) +
                                                 " <= 3se = " + std::to_string(3.0 * se));
        }
    }
}

// --------------------------------------------------------------------------
// 2. PIT histograms: forecasting with the true law gives near-uniform bins;
//    an overdispersed forecast (variance x4) piles mass into the center.

void criterion_pit_uniformity(Check& check) {
    const double mu = 10.0, var = 60.0;
    const CountDistribution truth = nb_from_moments(mu, var);
    const std::size_t n = 10000;
    const SampleEnsemble draws = truth.simulate(n, 424243);
    std::vector<long> obs;
    obs.reserve(n);
    for (Eigen::Index i = 0; i < draws.samples().rows(); ++i)
        obs.push_back(static_cast<long>(draws.samples()(i, 0)));

    const PitHistogram ideal = pit_histogram(std::vector<CountDistribution>(n, truth), obs, 10);
    for (int b = 0; b < 10; ++b)
        check.require(ideal.bin_heights[static_cast<std::size_t>(b)] >= 0.08 &&
                          ideal.bin_heights[static_cast<std::size_t>(b)] <= 0.12,
                      "ideal-forecast bin " + std::to_string(b + 1) + " height " +
                          std::to_string(ideal.bin_heights[static_cast<std::size_t>(b)]) +
                          " outside [0.08, 0.12]");

    const CountDistribution wide = nb_from_moments(mu, 4.0 * var);
    const PitHistogram hump = pit_histogram(std::vector<CountDistribution>(n, wide), obs, 10);
    check.require(hump.bin_heights[4] > 0.12 && hump.bin_heights[5] > 0.12,
                  "overdispersed forecast lacks the central hump: bins 5/6 are " +
                      std::to_string(hump.bin_heights[4]) + ", " + std::to_string(hump.bin_heights[5]));
}

// --------------------------------------------------------------------------
// 3. Exact score identities.

void criterion_score_identities(Check& check) {
    // multivariate DSS on a diagonal covariance = sum of univariate DSS
    Eigen::VectorXd mean(3), obs3(3);
    mean << 1.0, 2.0, 3.0;
    obs3 << 2.0, 1.0, 5.0;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
    cov.diagonal() << 2.0, 3.0, 4.0;
    const MultivariateMoments mm{mean, cov};
    double univariate_sum = 0.0;
    for (int i = 0; i < 3; ++i) univariate_sum += dss(mean(i), cov(i, i), obs3(i));
    check.require(std::abs(mdss(mm, obs3, false) - univariate_sum) < 1e-8,
                  "diagonal mdss does not reduce to summed dss");

    // at dimension one the scaled mdss is half the dss
    Eigen::VectorXd m1(1), o1(1);
    m1 << 4.0;
    o1 << 7.0;
    Eigen::MatrixXd v1(1, 1);
    v1 << 5.0;
    check.require(std::abs(mdss(MultivariateMoments{m1, v1}, o1, true) - 0.5 * dss(4.0, 5.0, 7.0)) < 1e-8,
                  "scaled mdss at d=1 is not dss/2");

    // at dimension one the energy score is the sample RPS
    const SampleEnsemble ens = CountDistribution(NegBin{6.0, 3.0}).simulate(400, 99123);
    Eigen::VectorXd y1(1);
    y1 << 5.0;
    check.require(std::abs(energy_score(ens, y1) - rps_from_samples(ens, 5)) < 1e-8,
                  "energy score at d=1 differs from sample RPS");

    // pmf-form RPS against a brute-force truncated sum
    std::mt19937_64 rng(5550123);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        CountDistribution dist = [&]() -> CountDistribution {
            if (rep % 2 == 0) return CountDistribution(NegBin{1.0 + 20.0 * unif(rng), 0.5 + 5.0 * unif(rng)});
            std::vector<double> p(static_cast<std::size_t>(2 + rep % 7), 0.0);
            double total = 0.0;
            for (double& v : p) total += (v = 0.05 + unif(rng));
            for (double& v : p) v /= total;
            return CountDistribution(EmpiricalPmf{p});
        }();
        const long y = static_cast<long>(12.0 * unif(rng));
        double brute = 0.0, cdf = 0.0;
        for (long j = 0; cdf < 1.0 - 1e-14 || j <= y; ++j) {
            cdf += dist.pmf(j);
            const double step = std::min(cdf, 1.0) - (y <= j ? 1.0 : 0.0);
            brute += step * step;
            if (j > 100000) break;
        }
        check.require(std::abs(rps(dist, y) - brute) < 1e-9,
                      "rps case " + std::to_string(rep) + " deviates from the brute-force sum");
    }
}

// --------------------------------------------------------------------------
// 4. The non-randomized count PIT matches its piecewise-linear definition and
//    is monotone in u.

void criterion_count_pit_oracle(Check& check) {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        double a = unif(rng), b = unif(rng);
        if (a > b) std::swap(a, b);
        if (rep % 25 == 0) a = b;  // exercise the degenerate step
        const double u = unif(rng);
        const double direct = [&] {
            if (b <= a) return u >= b ? 1.0 : 0.0;
            if (u <= a) return 0.0;
            if (u >= b) return 1.0;
            return (u - a) / (b - a);
        }();
        check.require(std::abs(pit_count_cdf(u, b, a) - direct) < 1e-12,
                      "triple " + std::to_string(rep) + " deviates from the piecewise formula");
    }
    for (int g = 0; g < 20; ++g) {
        double a = unif(rng), b = unif(rng);
        if (a > b) std::swap(a, b);
        double prev = -1.0;
        for (int i = 0; i <= 100; ++i) {
            const double v = pit_count_cdf(static_cast<double>(i) / 100.0, b, a);
            check.require(v >= prev, "count PIT is not monotone in u");
            prev = v;
        }
    }
}

// --------------------------------------------------------------------------
// 5. Under equal skill (iid score differences) the two-sided DM test rejects
//    at the nominal 5% level.

void criterion_dm_calibration(Check& check) {
    const int reps = 10000, n = 200;
    std::mt19937_64 rng(777001);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> a(n), b(n, 0.0);
    int rejections = 0;
    for (int rep = 0; rep < reps; ++rep) {
        for (double& v : a) v = noise(rng);
        if (dm_test(a, b, 1).p_value < 0.05) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / reps;
    check.require(rate >= 0.035 && rate <= 0.065,
                  "rejection rate " + std::to_string(rate) + " outside [0.035, 0.065]");
}

// --------------------------------------------------------------------------
// 6. Fitting recovers the generating parameters: 95% Wald intervals cover the
//    truth in at least 90 of 100 replications, and the analytic gradient
//    matches finite differences.

void criterion_parameter_recovery(Check& check) {
    EEModelSpec spec;
    spec.contact = ContactStructure::fixed;
    spec.contact_matrix = ContactMatrix::identity(2, {"a", "b"});
    Eigen::VectorXd truth(10);
    truth << std::log(50.0), std::log(80.0),  // endemic intercepts
        0.4, 0.2, 0.3, -0.15,                 // endemic harmonics
        std::log(0.4), std::log(0.35),        // epidemic intercepts
        std::log(8.0), std::log(10.0);        // per-group overdispersion
    Eigen::VectorXd y0(2);
    y0 << 50.0, 80.0;

    const int reps = 100;
    std::vector<int> covered(10, 0);
    for (int rep = 0; rep < reps; ++rep) {
        const SurveillanceSeries data = simulate_series(spec, truth, y0, CalendarWeek{2010, 1}, 500,
                                                        {"a", "b"}, substream_seed(912, rep));
        const EEModel model(spec, data);
        if (rep == 0) {
            // gradient check at a point jittered away from the optimum
            Eigen::VectorXd at = truth;
            std::mt19937_64 rng(4242);
            std::uniform_real_distribution<double> unif(-0.15, 0.15);
            for (Eigen::Index i = 0; i < at.size(); ++i) at(i) += unif(rng);
            Eigen::VectorXd grad;
            model.log_likelihood(at, grad);
            const Eigen::VectorXd fd = central_fd_gradient(
                [&](const Eigen::VectorXd& th) { return model.log_likelihood(th); }, at);
            const double rel = (grad - fd).norm() / std::max(1.0, fd.norm());
            check.require(rel < 1e-5, "analytic gradient deviates from finite differences by " +
                                          std::to_string(rel));
        }
        const EEModelFit fit = model.fit();
        if (!fit.converged || !fit.covariance_ok) continue;  // counts against coverage
        for (Eigen::Index p = 0; p < 10; ++p) {
            const double se = std::sqrt(fit.covariance(p, p));
            if (std::abs(fit.parameters(p) - truth(p)) <= 1.959964 * se)
                ++covered[static_cast<std::size_t>(p)];
        }
    }
    for (std::size_t p = 0; p < 10; ++p)
        check.require(covered[p] >= 90, "parameter " + std::to_string(p) + " covered in only " +
                                            std::to_string(covered[p]) + "/100 intervals");
}

// --------------------------------------------------------------------------
// 7. A one-week simulated forecast is an equal-weight mixture of identical
//    conditional laws, so its pmf collapses onto the analytic one-step pmf.

void criterion_rao_blackwell(Check& check) {
    EEModelSpec spec;
    Eigen::VectorXd theta(5);
    theta << std::log(60.0), 0.5, 0.3, std::log(0.4), std::log(6.0);
    Eigen::VectorXd y0(1);
    y0 << 60.0;
    const SurveillanceSeries data =
        simulate_series(spec, theta, y0, CalendarWeek{2014, 1}, 120, {"all"}, 5150);
    const EEModel model(spec, data);

    const Eigen::Index origin = 110;
    const PathSimulation sim = model.simulate_paths(theta, origin, 1, 200, 8721);
    const LongTermPredictive pred = long_term_predictive(sim);
    const CountDistribution& mixture = pred.weekly[0][0];
    const CountDistribution analytic(model.one_step_ahead(theta, origin, origin)[0].laws[0]);

    bool compared_any = false;
    for (long k = 0;; ++k) {
        const double p = analytic.pmf(k);
        if (p > 1e-10) {
            compared_any = true;
            check.require(std::abs(mixture.pmf(k) - p) < 1e-12,
                          "mixture pmf deviates at k = " + std::to_string(k));
        }
        if (analytic.cdf(k) > 1.0 - 1e-11 && k > 10) break;
    }
    check.require(compared_any, "no pmf values above the mass threshold");
}

// --------------------------------------------------------------------------
// 8. Contact-matrix algebra on the bundled 6x6 contact fixture.

void criterion_contact_algebra(Check& check) {
    const ContactMatrix c = read_contacts_csv(data_file("contacts.csv"));
    const Eigen::MatrixXd w = c.weights();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(w.rows(), w.cols());
    check.require((power_transform(c, 0.0).weights() - identity).cwiseAbs().maxCoeff() < 1e-8,
                  "kappa = 0 does not give the identity");
    check.require((power_transform(c, 1.0).weights() - w).cwiseAbs().maxCoeff() < 1e-8,
                  "kappa = 1 does not reproduce the input");
    check.require((power_transform(c, 2.0).weights() - w * w).cwiseAbs().maxCoeff() < 1e-8,
                  "kappa = 2 does not give the matrix square");
    const Eigen::VectorXd row_sums = row_normalize(c).weights().rowwise().sum();
    check.require((row_sums.array() - 1.0).abs().maxCoeff() < 1e-12, "normalized rows do not sum to 1");
}

// --------------------------------------------------------------------------
// 9-10. Age-stratified norovirus reproduction (needs the bundled fixture).

ExperimentConfig norovirus_config() {
    const std::string counts = data_file("fixtures/norovirus.csv");
    const std::string contacts = data_file("fixtures/norovirus_contacts.csv");
    need_fixture(counts);
    need_fixture(contacts);
    ExperimentConfig cfg;
    cfg.data_path = counts;
    cfg.contacts_path = contacts;
    cfg.train_end = "2015-W26";
    cfg.test_start = "2015-W27";
    cfg.test_end = "2016-W26";
    cfg.scores = {"log_score", "dss"};
    cfg.seed = 1;
    const auto model = [](const std::string& name, const std::string& contact) {
        ModelConfig mc;
        mc.name = name;
        mc.contact = contact;
        mc.endemic_harmonics = 1;
        mc.epidemic_harmonics = 1;
        mc.endemic_holiday_weeks = {52, 1};
        mc.omega_period = 52.0;
        return mc;
    };
    cfg.models = {model("power_adjusted", "power"), model("reciprocal", "fixed"),
                  model("no_mixing", "none"), model("homogeneous", "homogeneous")};
    return cfg;
}

void criterion_norovirus_one_step(Check& check) {
    const EvaluationReport r = run_experiment(norovirus_config());
    check.require(r.failures.empty(), "a model failed to fit");
    if (!check.ok) return;
    const double expected_aic[4] = {6035.0, 6051.0, 6055.0, 6132.0};
    const double expected_dss[4] = {3.012, 3.031, 3.003, 3.093};
    const double expected_ls[4] = {2.391, 2.399, 2.385, 2.420};
    double aic[4];
    for (int m = 0; m < 4; ++m) {
        aic[m] = r.models[static_cast<std::size_t>(m)].fit->aic;
        check.require(std::abs(aic[m] - expected_aic[m]) <= 2.0,
                      r.models[static_cast<std::size_t>(m)].name + " AIC " + std::to_string(aic[m]));
        check.require(std::abs(r.models[static_cast<std::size_t>(m)].score_means[1] - expected_dss[m]) <=
                          0.05,
                      r.models[static_cast<std::size_t>(m)].name + " mean DSS off");
        check.require(std::abs(r.models[static_cast<std::size_t>(m)].score_means[0] - expected_ls[m]) <=
                          0.05,
                      r.models[static_cast<std::size_t>(m)].name + " mean log score off");
    }
    check.require(aic[0] < aic[1] && aic[1] < aic[2] && aic[2] < aic[3], "AIC ordering violated");
}

void criterion_norovirus_long_term(Check& check) {
    ExperimentConfig cfg = norovirus_config();
    cfg.mode = "long_term";
    cfg.horizon = 52;
    cfg.origins = {"2015-W27"};
    cfg.simulations = 1000;
    cfg.naive_final_size = true;
    const EvaluationReport r = run_experiment(cfg);
    check.require(r.failures.empty(), "a model failed to fit");
    if (!check.ok) return;

    const auto weekly_mdss = [&](std::size_t m) {
        double sum = 0.0;
        for (const WeeklyMvRow& row : r.models[m].weekly_mv) sum += row.mdss;
        return sum / static_cast<double>(r.models[m].weekly_mv.size());
    };
    const double power = weekly_mdss(0), reciprocal = weekly_mdss(1), none = weekly_mdss(2),
                 homogeneous = weekly_mdss(3);
    check.require(none < power && power < reciprocal && reciprocal < homogeneous,
                  "weekly mdss ordering violated");
    check.require(std::abs(none - 1.521) <= 0.05, "no-mixing weekly mdss off");
    check.require(std::abs(power - 1.527) <= 0.05, "power-adjusted weekly mdss off");
    check.require(std::abs(reciprocal - 1.539) <= 0.05, "reciprocal weekly mdss off");
    check.require(std::abs(homogeneous - 1.564) <= 0.05, "homogeneous weekly mdss off");

    const double naive = r.naive_final_size->aggregates[0].mdss;
    check.require(std::abs(naive - 4.084) <= 0.05, "naive aggregated mdss " + std::to_string(naive));
    check.require(naive < r.models[3].aggregates[0].mdss,
                  "season-history baseline does not beat homogeneous mixing");
}

// --------------------------------------------------------------------------
// 11. Univariate ILI reproduction (needs the bundled fixture).

void criterion_ili(Check& check) {
    const std::string counts = data_file("fixtures/ili.csv");
    need_fixture(counts);
    ExperimentConfig cfg;
    cfg.data_path = counts;
    cfg.train_end = "2012-W48";
    cfg.test_start = "2012-W49";
    cfg.test_end = "2016-W52";
    cfg.scores = {"log_score", "dss"};
    cfg.seed = 1;
    ModelConfig mc;
    mc.name = "ee_nb";
    mc.contact = "none";
    mc.endemic_harmonics = 1;
    mc.epidemic_harmonics = 1;
    mc.endemic_holiday_weeks = {52};
    mc.omega_period = 52.1775;
    cfg.models = {mc};
    const EvaluationReport r = run_experiment(cfg);
    check.require(r.failures.empty(), "the model failed to fit");
    if (!check.ok) return;
    check.require(r.models[0].rows.size() == 213, "expected 213 one-week-ahead forecasts");
    check.require(std::abs(r.models[0].score_means[1] - 13.58) <= 0.2,
                  "mean DSS " + std::to_string(r.models[0].score_means[1]));
    check.require(std::abs(r.models[0].score_means[0] - 7.71) <= 0.1,
                  "mean log score " + std::to_string(r.models[0].score_means[0]));

    ExperimentConfig lt = cfg;
    lt.mode = "long_term";
    lt.horizon = 30;
    lt.origins = {"2012-W49", "2013-W49", "2014-W49", "2015-W49"};
    lt.simulations = 1000;
    const EvaluationReport rl = run_experiment(lt);
    check.require(rl.failures.empty(), "the long-term run failed");
    if (!check.ok) return;
    for (const PeakRow& p : rl.models[0].peaks) {
        check.require(parse_week(p.median).week == 5, "peak median " + p.median);
        check.require(parse_week(p.lower).week == 2, "peak 2.5% quantile " + p.lower);
        check.require(parse_week(p.upper).week == 16, "peak 97.5% quantile " + p.upper);
    }
}

}  // namespace

int main() {
    std::printf("acceptance criteria\n");
    run_criterion(1, "proper scores prefer the true law over eight perturbed rivals", 30.0,
                  criterion_propriety);
    run_criterion(2, "PIT histograms are uniform under the truth and humped when overdispersed", 10.0,
                  criterion_pit_uniformity);
    run_criterion(3, "score identities (diagonal mdss, scaled d=1, energy = sample RPS, RPS oracle)", 0.0,
                  criterion_score_identities);
    run_criterion(4, "count PIT matches its piecewise definition and is monotone", 0.0,
                  criterion_count_pit_oracle);
    run_criterion(5, "DM test rejects at the nominal 5% level under equal skill", 60.0,
                  criterion_dm_calibration);
    run_criterion(6, "Wald intervals cover the generating parameters; gradient check", 300.0,
                  criterion_parameter_recovery);
    run_criterion(7, "one-week simulated forecasts collapse onto the analytic one-step pmf", 0.0,
                  criterion_rao_blackwell);
    run_criterion(8, "contact-matrix power transform and row normalization", 0.0,
                  criterion_contact_algebra);
    run_criterion(9, "norovirus one-week-ahead model comparison", 600.0, criterion_norovirus_one_step);
    run_criterion(10, "norovirus long-term multivariate ranking", 600.0, criterion_norovirus_long_term);
    run_criterion(11, "ILI one-week-ahead scores and peak-week forecasts", 600.0, criterion_ili);
    std::printf("%d passed, %d failed, %d skipped\n", passes, failures, skips);
    return failures == 0 ? 0 : 1;
}
