// Scoring rules: hand-computable values, brute-force oracles, the identities
// tying the multivariate scores to their univariate forms, and propriety of
// the log score and RPS via exact expectations under a known truth.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "epicast/distributions.hpp"
#include "epicast/scores.hpp"

using namespace epicast;
using Catch::Approx;

namespace {

SampleEnsemble column(std::vector<double> values) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(values.size()), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = values[static_cast<std::size_t>(i)];
    return SampleEnsemble(x, false);
}

// Independent RPS oracle built on the NB pmf recurrence (never the library
// pmf): sum (cdf_j - 1{obs <= j})^2 until the tail is negligible.  The
// recurrence is multiplicative, so a pmf that underflowed to exact zero stays
// zero; stopping there guards against the accumulated cdf rounding to a value
// pinned just short of 1.
double rps_oracle_nb(double mean, double psi, long obs) {
    double pmf = std::pow(psi / (psi + mean), psi);
    double cdf = 0.0, score = 0.0;
    for (long j = 0;; ++j) {
        cdf += pmf;
        const double d = cdf - ((obs <= j) ? 1.0 : 0.0);
        score += d * d;
        if (j >= obs && (1.0 - cdf < 1e-14 || pmf == 0.0)) break;
        pmf *= (static_cast<double>(j) + psi) / (static_cast<double>(j) + 1.0) * mean / (psi + mean);
    }
    return score;
}

}  // namespace

TEST_CASE("point error measures") {
    CHECK(abs_error(3.0, 5.0) == 2.0);
    CHECK(sq_error(3.0, 5.0) == 4.0);
    CHECK(abs_pct_error(110.0, 100.0) == Approx(0.1).margin(1e-15));
    CHECK(rel_error(100.0, 110.0) == Approx(0.1).margin(1e-15));
    CHECK_THROWS_AS(abs_pct_error(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(rel_error(0.0, 1.0), std::domain_error);

    CHECK(mae({0.0, 0.0}, {1.0, 3.0}) == 2.0);
    CHECK(rmse({0.0, 0.0}, {1.0, 3.0}) == Approx(std::sqrt(5.0)).margin(1e-12));
    CHECK(rel_mae({0.0, 0.0}, {2.0, 2.0}, {1.0, 1.0}) == Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(mae({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(rmse({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(rel_mae({1.0}, {2.0}, {2.0}), std::domain_error);
}

TEST_CASE("log score values and the zero-probability sentinel") {
    CHECK(log_score(Poisson{1.0}, 0) == Approx(1.0).margin(1e-12));

    bool zero = true;
    const double ls = log_score(NegBin{4.0, 2.0}, 3, &zero);
    CHECK(ls == Approx(-detail::nb_log_pmf(3, 4.0, 2.0)).margin(1e-12));
    CHECK_FALSE(zero);

    const double miss = log_score(EmpiricalPmf{{1.0}}, 1, &zero);
    CHECK(miss == k_log_score_sentinel);
    CHECK(zero);

    CHECK(log_score(EmpiricalPmf{{1.0}}, 1) == 700.0);  // flag pointer optional
    CHECK_THROWS_AS(log_score(Poisson{1.0}, -1), std::invalid_argument);
}

TEST_CASE("binary log score and Brier score") {
    CHECK(log_score_binary(0.25, 1) == Approx(-std::log(0.25)).margin(1e-12));
    CHECK(log_score_binary(0.25, 0) == Approx(-std::log(0.75)).margin(1e-12));
    CHECK(log_score_binary(1.0, 1) == 0.0);

    bool zero = false;
    CHECK(log_score_binary(0.0, 1, &zero) == k_log_score_sentinel);
    CHECK(zero);
    CHECK_THROWS_AS(log_score_binary(1.5, 1), std::domain_error);
    CHECK_THROWS_AS(log_score_binary(0.5, 2), std::invalid_argument);

    CHECK(brier(0.25, 1) == Approx(0.5625).margin(1e-15));
    CHECK(brier(0.25, 0) == Approx(0.0625).margin(1e-15));

    // Propriety: with true event probability q, the expected Brier score
    // q (pi-1)^2 + (1-q) pi^2 is minimized at pi = q.
    const double q = 0.3;
    const auto expected = [&](double pi) { return q * brier(pi, 1) + (1.0 - q) * brier(pi, 0); };
    for (double pi : {0.0, 0.1, 0.2, 0.4, 0.5, 0.9}) CHECK(expected(q) < expected(pi));
}

TEST_CASE("RPS on hand-checkable distributions") {
    CHECK(rps(EmpiricalPmf{{0.5, 0.5}}, 1) == Approx(0.25).margin(1e-12));
    CHECK(rps(EmpiricalPmf{{0.0, 0.0, 1.0}}, 2) == Approx(0.0).margin(1e-12));
    CHECK(rps(EmpiricalPmf{{0.0, 0.0, 1.0}}, 0) == Approx(2.0).margin(1e-12));
    CHECK_THROWS_AS(rps(Poisson{1.0}, -1), std::invalid_argument);
}

TEST_CASE("RPS agrees with a brute-force oracle on random NB cases") {
    std::mt19937 rng(912873);
    std::uniform_real_distribution<double> mean_d(0.5, 30.0), psi_d(0.3, 10.0);
    std::uniform_int_distribution<long> obs_d(0, 40);
    for (int c = 0; c < 50; ++c) {
        const double mean = mean_d(rng), psi = psi_d(rng);
        const long obs = obs_d(rng);
        INFO("case " << c << ": mean=" << mean << " psi=" << psi << " obs=" << obs);
        CHECK(rps(NegBin{mean, psi}, obs) == Approx(rps_oracle_nb(mean, psi, obs)).margin(1e-9));
    }
}

TEST_CASE("sample RPS: exact two-draw case and convergence to the analytic value") {
    CHECK(rps_from_samples(column({0.0, 2.0}), 1.0) == Approx(0.5).margin(1e-12));
    CHECK_THROWS_AS(rps_from_samples(column({1.0}), 1.0), std::invalid_argument);

    const CountDistribution pois(Poisson{4.0});
    const SampleEnsemble draws = pois.simulate(20000, 5);
    CHECK(std::abs(rps_from_samples(draws, 3.0) - rps(pois, 3)) < 0.02);
}

TEST_CASE("Dawid-Sebastiani score") {
    CHECK(dss(2.0, 4.0, 4.0) == Approx(2.0 * std::log(2.0) + 1.0).margin(1e-12));
    CHECK_THROWS_AS(dss(2.0, 0.0, 4.0), std::domain_error);

    // Propriety direction: under truth N-like moments (10, 20), the expected
    // DSS log v + (sigma^2 + (mu - m)^2) / v is minimized at (m, v) = (10, 20).
    const auto expected = [](double m, double v) { return std::log(v) + (20.0 + (10.0 - m) * (10.0 - m)) / v; };
    for (double m : {8.0, 12.0})
        for (double v : {10.0, 40.0}) CHECK(expected(10.0, 20.0) < expected(m, v));
}

TEST_CASE("multivariate DSS reduces to the univariate score") {
    Eigen::VectorXd mu1(1), y1(1);
    mu1 << 2.0;
    y1 << 4.0;
    Eigen::MatrixXd sig1(1, 1);
    sig1 << 4.0;
    const MultivariateMoments mm1(mu1, sig1);

    CHECK(mdss(mm1, y1, false) == Approx(dss(2.0, 4.0, 4.0)).margin(1e-12));
    CHECK(mdss(mm1, y1) == Approx(dss(2.0, 4.0, 4.0) / 2.0).margin(1e-12));
    CHECK(mdss(mm1, y1) == Approx(1.1931).margin(5e-5));

    // Diagonal covariance: the unscaled mDSS is the sum of per-component DSS.
    Eigen::VectorXd mu(3), y(3);
    mu << 1.0, 5.0, 9.0;
    y << 2.0, 3.0, 9.5;
    Eigen::MatrixXd sig = Eigen::MatrixXd::Zero(3, 3);
    sig.diagonal() << 0.5, 2.0, 4.0;
    const MultivariateMoments mm(mu, sig);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) total += dss(mu(i), sig(i, i), y(i));
    CHECK(mdss(mm, y, false) == Approx(total).margin(1e-10));
    CHECK(mdss(mm, y) == Approx(total / 6.0).margin(1e-10));

    Eigen::VectorXd wrong(2);
    wrong << 1.0, 2.0;
    CHECK_THROWS_AS(mdss(mm, wrong), std::invalid_argument);
}

TEST_CASE("mDSS quadratic form against an explicit inverse") {
    Eigen::VectorXd mu(2), y(2);
    mu << 3.0, 7.0;
    y << 4.0, 5.0;
    Eigen::MatrixXd sig(2, 2);
    sig << 2.0, 0.6, 0.6, 1.5;
    const Eigen::VectorXd r = y - mu;
    const double expected = std::log(sig.determinant()) + r.dot(sig.inverse() * r);
    CHECK(mdss(MultivariateMoments(mu, sig), y, false) == Approx(expected).margin(1e-10));
}

TEST_CASE("singular covariances: jitter rescue and honest failure") {
    Eigen::VectorXd mu(2), y(2);
    mu << 1.0, 1.0;
    y << 1.0, 2.0;

    Eigen::MatrixXd rank1(2, 2);
    rank1 << 1.0, 1.0, 1.0, 1.0;  // PSD but singular -> diagonal jitter applies
    CHECK(std::isfinite(mdss(MultivariateMoments(mu, rank1), y, false)));

    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(mdss(MultivariateMoments(mu, zero), y), std::domain_error);
}

TEST_CASE("log-determinant sharpness") {
    Eigen::VectorXd mu(1);
    mu << 5.0;
    Eigen::MatrixXd sig(1, 1);
    sig << std::exp(2.0);
    const MultivariateMoments mm(mu, sig);
    CHECK(log_det_sharpness(mm) == Approx(1.0).margin(1e-12));
    CHECK(log_det_sharpness(mm, false) == Approx(2.0).margin(1e-12));

    // Scoring the predictive mean isolates the determinant term.
    CHECK(mdss(mm, mu, false) == Approx(log_det_sharpness(mm, false)).margin(1e-12));
}

TEST_CASE("energy score: hand values and the univariate delegation") {
    Eigen::MatrixXd x(2, 2);
    x << 0.0, 0.0, 2.0, 0.0;
    Eigen::VectorXd y(2);
    y << 1.0, 0.0;
    CHECK(energy_score(SampleEnsemble(x, true), y) == Approx(0.5).margin(1e-12));

    Eigen::MatrixXd tri(3, 2);
    tri << 0.0, 0.0, 0.0, 2.0, 2.0, 0.0;
    Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
    const double expected = 4.0 / 3.0 - (4.0 + 2.0 * std::sqrt(2.0)) / 9.0;
    CHECK(energy_score(SampleEnsemble(tri, true), origin) == Approx(expected).margin(1e-12));

    const SampleEnsemble uni = CountDistribution(NegBin{6.0, 2.0}).simulate(500, 11);
    Eigen::VectorXd obs1(1);
    obs1 << 7.0;
    CHECK(energy_score(uni, obs1) == rps_from_samples(uni, 7.0));

    Eigen::VectorXd wrong(3);
    wrong.setZero();
    CHECK_THROWS_AS(energy_score(SampleEnsemble(x, true), wrong), std::invalid_argument);
    Eigen::MatrixXd one(1, 2);
    one.setZero();
    CHECK_THROWS_AS(energy_score(SampleEnsemble(one, true), y), std::invalid_argument);
}

TEST_CASE("mean_score wraps values with their mean") {
    const ScoreSeries s = mean_score("rps", {1.0, 2.0, 3.0});
    CHECK(s.name == "rps");
    CHECK(s.values.size() == 3);
    CHECK(s.mean == Approx(2.0).margin(1e-14));
    CHECK_THROWS_AS(mean_score("rps", {}), std::invalid_argument);
}

TEST_CASE("log score and RPS prefer the true distribution in expectation") {
    // Exact expectations under truth NB(10, 2), no Monte Carlo: for each
    // forecast F, E[S(F, Y)] = sum_k pmf_true(k) S(F, k) over the support.
    const CountDistribution truth(NegBin{10.0, 2.0});
    long k_max = 0;
    while (truth.cdf(k_max) < 1.0 - 1e-13) ++k_max;

    const auto expected_scores = [&](const CountDistribution& f) {
        double e_ls = 0.0, e_rps = 0.0;
        for (long k = 0; k <= k_max; ++k) {
            const double w = truth.pmf(k);
            e_ls += w * log_score(f, k);
            e_rps += w * rps(f, k);
        }
        return std::pair{e_ls, e_rps};
    };

    const auto [ls_true, rps_true] = expected_scores(truth);
    for (const auto& wrong : {NegBin{8.0, 2.0}, NegBin{12.0, 2.0}, NegBin{10.0, 0.8}, NegBin{10.0, 8.0}}) {
        const auto [ls_w, rps_w] = expected_scores(wrong);
        CHECK(ls_true < ls_w);
        CHECK(rps_true < rps_w);
    }
}
