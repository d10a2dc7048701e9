#pragma once

// Experiment orchestration: declarative configs, rolling-origin evaluation
// of endemic-epidemic models and naive baselines, score/calibration report
// assembly, and emission as CSV tables plus one machine-readable JSON
// aggregate. Everything except wall-clock timings is a pure function of
// (data, config, seed); timings are written to a separate sidecar table.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "epicast/baselines.hpp"
#include "epicast/calibration.hpp"
#include "epicast/contacts.hpp"
#include "epicast/distributions.hpp"
#include "epicast/ee_model.hpp"
#include "epicast/io.hpp"
#include "epicast/scores.hpp"
#include "epicast/series.hpp"

namespace epicast {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

struct ModelConfig {
    std::string name;
    std::string contact = "none";  // none | homogeneous | fixed | power
    int endemic_harmonics = 1;
    int epidemic_harmonics = 0;
    std::vector<int> endemic_holiday_weeks;
    std::vector<int> epidemic_holiday_weeks;
    double omega_period = 52.0;  // seasonal period in weeks; omega = 2*pi / period
    bool shared_overdispersion = false;
};

struct ExperimentConfig {
    std::string data_path;
    std::string contacts_path;        // optional; required by fixed/power contact models
    std::vector<std::string> groups;  // optional subset/order of data columns
    std::string train_end;            // "YYYY-Www", last training week
    std::string test_start;
    std::string test_end;
    std::string mode = "one_step_ahead";  // or "long_term"
    int horizon = 1;                      // long_term: weeks ahead per origin
    std::vector<std::string> origins;     // long_term: forecast origin weeks
    std::vector<ModelConfig> models;
    bool naive_weekly = false;      // weekly historical log-normal baseline
    bool naive_final_size = false;  // long_term only: NB on past season totals
    std::vector<std::string> scores = {"log_score", "rps", "dss"};
    int pit_bins = 10;
    int simulations = 1000;  // Monte-Carlo paths per long-term origin
    std::uint64_t seed = 1;
    int season_start_week = 27;  // first ISO week of a season
    std::string out_dir = "out";
    int threads = 1;
};

inline const std::vector<std::string>& known_scores() {
    static const std::vector<std::string> names = {"log_score", "rps",       "dss", "abs_error",
                                                   "sq_error",  "abs_pct_error", "rel_error"};
    return names;
}

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.data_path.empty()) throw std::invalid_argument("config: data path is required");
    if (cfg.mode != "one_step_ahead" && cfg.mode != "long_term")
        throw std::invalid_argument("config: mode must be one_step_ahead or long_term");
    if (cfg.train_end.empty() || cfg.test_start.empty() || cfg.test_end.empty())
        throw std::invalid_argument("config: train_end, test_start and test_end are required");
    if (cfg.horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
    if (cfg.simulations < 1) throw std::invalid_argument("config: simulations must be >= 1");
    if (cfg.pit_bins < 2) throw std::invalid_argument("config: pit_bins must be >= 2");
    if (cfg.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    if (cfg.season_start_week < 1 || cfg.season_start_week > 53)
        throw std::invalid_argument("config: season_start_week must be an ISO week");
    if (cfg.models.empty() && !cfg.naive_weekly && !cfg.naive_final_size)
        throw std::invalid_argument("config: no models or baselines requested");
    if (cfg.scores.empty()) throw std::invalid_argument("config: at least one score is required");
    for (const auto& s : cfg.scores) {
        bool ok = false;
        for (const auto& k : known_scores()) ok = ok || (k == s);
        if (!ok) throw std::invalid_argument("config: unknown score '" + s + "'");
    }
    if (cfg.mode == "long_term" && cfg.origins.empty())
        throw std::invalid_argument("config: long_term mode needs at least one origin week");
    if (cfg.naive_final_size && cfg.mode != "long_term")
        throw std::invalid_argument("config: naive_final_size applies to long_term mode only");
    std::vector<std::string> names;
    for (const auto& mc : cfg.models) {
        if (mc.name.empty()) throw std::invalid_argument("config: every model needs a name");
        if (mc.name == "naive") throw std::invalid_argument("config: model name 'naive' is reserved");
        for (const auto& n : names)
            if (n == mc.name) throw std::invalid_argument("config: duplicate model name '" + mc.name + "'");
        names.push_back(mc.name);
        if (mc.contact != "none" && mc.contact != "homogeneous" && mc.contact != "fixed" &&
            mc.contact != "power")
            throw std::invalid_argument("config: model '" + mc.name + "' has unknown contact structure '" +
                                        mc.contact + "'");
        if ((mc.contact == "fixed" || mc.contact == "power") && cfg.contacts_path.empty())
            throw std::invalid_argument("config: model '" + mc.name + "' needs a contact matrix file");
        if (!(mc.omega_period > 0.0))
            throw std::invalid_argument("config: model '" + mc.name + "' needs omega_period > 0");
        if (mc.endemic_harmonics < 0 || mc.epidemic_harmonics < 0)
            throw std::invalid_argument("config: harmonic counts must be >= 0");
    }
}

inline ExperimentConfig config_from_json(const ordered_json& j) {
    ExperimentConfig cfg;
    cfg.data_path = j.value("data", "");
    cfg.contacts_path = j.value("contacts", "");
    cfg.groups = j.value("groups", std::vector<std::string>{});
    cfg.train_end = j.value("train_end", "");
    cfg.test_start = j.value("test_start", "");
    cfg.test_end = j.value("test_end", "");
    cfg.mode = j.value("mode", "one_step_ahead");
    cfg.horizon = j.value("horizon", 1);
    cfg.origins = j.value("origins", std::vector<std::string>{});
    cfg.naive_weekly = j.value("naive_weekly", false);
    cfg.naive_final_size = j.value("naive_final_size", false);
    cfg.scores = j.value("scores", std::vector<std::string>{"log_score", "rps", "dss"});
    cfg.pit_bins = j.value("pit_bins", 10);
    cfg.simulations = j.value("simulations", 1000);
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(1));
    cfg.season_start_week = j.value("season_start_week", 27);
    cfg.out_dir = j.value("out_dir", "out");
    cfg.threads = j.value("threads", 1);
    for (const auto& mj : j.value("models", ordered_json::array())) {
        ModelConfig mc;
        mc.name = mj.value("name", "");
        mc.contact = mj.value("contact", "none");
        mc.endemic_harmonics = mj.value("endemic_harmonics", 1);
        mc.epidemic_harmonics = mj.value("epidemic_harmonics", 0);
        mc.endemic_holiday_weeks = mj.value("endemic_holiday_weeks", std::vector<int>{});
        mc.epidemic_holiday_weeks = mj.value("epidemic_holiday_weeks", std::vector<int>{});
        mc.omega_period = mj.value("omega_period", 52.0);
        mc.shared_overdispersion = mj.value("shared_overdispersion", false);
        cfg.models.push_back(std::move(mc));
    }
    return cfg;
}

inline ordered_json config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["data"] = cfg.data_path;
    j["contacts"] = cfg.contacts_path;
    j["groups"] = cfg.groups;
    j["train_end"] = cfg.train_end;
    j["test_start"] = cfg.test_start;
    j["test_end"] = cfg.test_end;
    j["mode"] = cfg.mode;
    j["horizon"] = cfg.horizon;
    j["origins"] = cfg.origins;
    j["models"] = ordered_json::array();
    for (const auto& mc : cfg.models) {
        ordered_json mj;
        mj["name"] = mc.name;
        mj["contact"] = mc.contact;
        mj["endemic_harmonics"] = mc.endemic_harmonics;
        mj["epidemic_harmonics"] = mc.epidemic_harmonics;
        mj["endemic_holiday_weeks"] = mc.endemic_holiday_weeks;
        mj["epidemic_holiday_weeks"] = mc.epidemic_holiday_weeks;
        mj["omega_period"] = mc.omega_period;
        mj["shared_overdispersion"] = mc.shared_overdispersion;
        j["models"].push_back(std::move(mj));
    }
    j["naive_weekly"] = cfg.naive_weekly;
    j["naive_final_size"] = cfg.naive_final_size;
    j["scores"] = cfg.scores;
    j["pit_bins"] = cfg.pit_bins;
    j["simulations"] = cfg.simulations;
    j["seed"] = cfg.seed;
    j["season_start_week"] = cfg.season_start_week;
    j["out_dir"] = cfg.out_dir;
    j["threads"] = cfg.threads;
    return j;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("load_config: " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Report structures

struct ForecastKey {
    std::string origin;  // first forecast week of the task (one-step: the week itself)
    std::string week;    // target week
    std::string group;
};

struct FanRow {
    ForecastKey key;
    double mean = 0.0;
    double q025 = 0.0, q10 = 0.0, q50 = 0.0, q90 = 0.0, q975 = 0.0;
};

struct WeeklyMvRow {
    std::string origin, week;
    double mdss = 0.0, log_ds = 0.0;  // scaled by 2d
};

struct AggregateRow {
    std::string origin;
    double mdss = 0.0, log_ds = 0.0;  // scaled; season totals, dimension G
};

struct FinalSizeRow {
    std::string origin, group;
    double mean = 0.0, variance = 0.0;
    bool poisson_fallback = false;
    double log_score = 0.0, dss = 0.0;
    long observed = 0;
};

struct PeakRow {
    std::string origin;
    std::string median, lower, upper;  // forecast quantile weeks
    std::string observed;
    std::vector<std::pair<std::string, double>> pmf;
};

struct ParamRow {
    std::string name;
    double estimate = 0.0;
    std::optional<double> std_error;
};

struct FitSummary {
    std::vector<ParamRow> params;
    double loglik = 0.0, aic = 0.0, grad_norm = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::pair<std::string, double>> seasonal_loglik;
};

struct ModelReport {
    std::string name;
    std::vector<ForecastKey> rows;
    std::vector<std::string> score_names;
    std::vector<std::vector<double>> score_values;  // [score][row]
    std::vector<double> score_means;
    long zero_probability_flags = 0;
    PitHistogram pit;
    std::vector<FanRow> fan;
    std::optional<FitSummary> fit;
    // long-term extras (empty in one-step mode)
    std::vector<WeeklyMvRow> weekly_mv;
    std::vector<AggregateRow> aggregates;
    std::vector<FinalSizeRow> final_size;
    std::vector<PeakRow> peaks;
    // sidecar only; never part of report.json
    std::vector<std::pair<std::string, double>> timings;
};

struct NaiveFinalSizeReport {
    std::vector<AggregateRow> aggregates;
    std::vector<FinalSizeRow> final_size;
};

struct TestRow {
    std::string score, model_a, model_b, method;
    double statistic = 0.0, p_value = 1.0;
    std::size_t n = 0;
    bool degenerate = false;
};

struct EvaluationReport {
    std::string mode;
    std::uint64_t seed = 0;
    std::vector<std::string> score_names;
    ordered_json config;
    std::vector<ModelReport> models;
    std::optional<NaiveFinalSizeReport> naive_final_size;
    std::vector<TestRow> tests;
    std::vector<std::pair<std::string, std::string>> failures;  // model name -> error
};

// ---------------------------------------------------------------------------
// Report <-> JSON

namespace detail {

inline ordered_json key_to_json(const ForecastKey& k) {
    return ordered_json{{"origin", k.origin}, {"week", k.week}, {"group", k.group}};
}

inline ForecastKey key_from_json(const ordered_json& j) {
    return ForecastKey{j.at("origin"), j.at("week"), j.at("group")};
}

inline ordered_json fit_to_json(const FitSummary& fit) {
    ordered_json fj;
    fj["params"] = ordered_json::array();
    for (const auto& p : fit.params) {
        ordered_json pj;
        pj["name"] = p.name;
        pj["estimate"] = p.estimate;
        if (p.std_error) pj["std_error"] = *p.std_error;
        else pj["std_error"] = nullptr;
        fj["params"].push_back(std::move(pj));
    }
    fj["loglik"] = fit.loglik;
    fj["aic"] = fit.aic;
    fj["converged"] = fit.converged;
    fj["iterations"] = fit.iterations;
    fj["grad_norm"] = fit.grad_norm;
    fj["seasonal_loglik"] = ordered_json::array();
    for (const auto& [season, ll] : fit.seasonal_loglik)
        fj["seasonal_loglik"].push_back(ordered_json{{"season", season}, {"loglik", ll}});
    return fj;
}

inline ordered_json model_to_json(const ModelReport& m) {
    ordered_json j;
    j["name"] = m.name;
    j["rows"] = ordered_json::array();
    for (const auto& k : m.rows) j["rows"].push_back(key_to_json(k));
    j["scores"] = ordered_json::array();
    for (std::size_t s = 0; s < m.score_names.size(); ++s) {
        ordered_json sj;
        sj["name"] = m.score_names[s];
        sj["mean"] = m.score_means[s];
        sj["values"] = m.score_values[s];
        j["scores"].push_back(std::move(sj));
    }
    j["zero_probability_flags"] = m.zero_probability_flags;
    j["pit"] = ordered_json{{"bins", m.pit.bin_count}, {"n", m.pit.n}, {"heights", m.pit.bin_heights}};
    j["fan"] = ordered_json::array();
    for (const auto& f : m.fan) {
        ordered_json fj = key_to_json(f.key);
        fj["mean"] = f.mean;
        fj["q025"] = f.q025;
        fj["q10"] = f.q10;
        fj["q50"] = f.q50;
        fj["q90"] = f.q90;
        fj["q975"] = f.q975;
        j["fan"].push_back(std::move(fj));
    }
    if (m.fit) j["fit"] = fit_to_json(*m.fit);
    else j["fit"] = nullptr;
    j["weekly_multivariate"] = ordered_json::array();
    for (const auto& r : m.weekly_mv)
        j["weekly_multivariate"].push_back(
            ordered_json{{"origin", r.origin}, {"week", r.week}, {"mdss", r.mdss}, {"log_ds", r.log_ds}});
    j["aggregates"] = ordered_json::array();
    for (const auto& r : m.aggregates)
        j["aggregates"].push_back(ordered_json{{"origin", r.origin}, {"mdss", r.mdss}, {"log_ds", r.log_ds}});
    j["final_size"] = ordered_json::array();
    for (const auto& r : m.final_size)
        j["final_size"].push_back(ordered_json{{"origin", r.origin},
                                               {"group", r.group},
                                               {"mean", r.mean},
                                               {"variance", r.variance},
                                               {"poisson_fallback", r.poisson_fallback},
                                               {"log_score", r.log_score},
                                               {"dss", r.dss},
                                               {"observed", r.observed}});
    j["peak_weeks"] = ordered_json::array();
    for (const auto& r : m.peaks) {
        ordered_json pj;
        pj["origin"] = r.origin;
        pj["median"] = r.median;
        pj["lower"] = r.lower;
        pj["upper"] = r.upper;
        pj["observed"] = r.observed;
        pj["pmf"] = ordered_json::array();
        for (const auto& [wk, p] : r.pmf) pj["pmf"].push_back(ordered_json{{"week", wk}, {"probability", p}});
        j["peak_weeks"].push_back(std::move(pj));
    }
    return j;
}

inline ModelReport model_from_json(const ordered_json& j) {
    ModelReport m;
    m.name = j.at("name");
    for (const auto& kj : j.at("rows")) m.rows.push_back(key_from_json(kj));
    for (const auto& sj : j.at("scores")) {
        m.score_names.push_back(sj.at("name"));
        m.score_means.push_back(sj.at("mean"));
        m.score_values.push_back(sj.at("values").get<std::vector<double>>());
    }
    m.zero_probability_flags = j.at("zero_probability_flags");
    m.pit.bin_count = j.at("pit").at("bins");
    m.pit.n = j.at("pit").at("n");
    m.pit.bin_heights = j.at("pit").at("heights").get<std::vector<double>>();
    for (const auto& fj : j.at("fan")) {
        FanRow f;
        f.key = key_from_json(fj);
        f.mean = fj.at("mean");
        f.q025 = fj.at("q025");
        f.q10 = fj.at("q10");
        f.q50 = fj.at("q50");
        f.q90 = fj.at("q90");
        f.q975 = fj.at("q975");
        m.fan.push_back(std::move(f));
    }
    if (!j.at("fit").is_null()) {
        FitSummary fit;
        for (const auto& pj : j.at("fit").at("params")) {
            ParamRow p;
            p.name = pj.at("name");
            p.estimate = pj.at("estimate");
            if (!pj.at("std_error").is_null()) p.std_error = pj.at("std_error").get<double>();
            fit.params.push_back(std::move(p));
        }
        fit.loglik = j.at("fit").at("loglik");
        fit.aic = j.at("fit").at("aic");
        fit.converged = j.at("fit").at("converged");
        fit.iterations = j.at("fit").at("iterations");
        fit.grad_norm = j.at("fit").at("grad_norm");
        for (const auto& sj : j.at("fit").at("seasonal_loglik"))
            fit.seasonal_loglik.emplace_back(sj.at("season"), sj.at("loglik"));
        m.fit = std::move(fit);
    }
    for (const auto& rj : j.at("weekly_multivariate"))
        m.weekly_mv.push_back(WeeklyMvRow{rj.at("origin"), rj.at("week"), rj.at("mdss"), rj.at("log_ds")});
    for (const auto& rj : j.at("aggregates"))
        m.aggregates.push_back(AggregateRow{rj.at("origin"), rj.at("mdss"), rj.at("log_ds")});
    for (const auto& rj : j.at("final_size"))
        m.final_size.push_back(FinalSizeRow{rj.at("origin"), rj.at("group"), rj.at("mean"),
                                            rj.at("variance"), rj.at("poisson_fallback"),
                                            rj.at("log_score"), rj.at("dss"), rj.at("observed")});
    for (const auto& pj : j.at("peak_weeks")) {
        PeakRow r;
        r.origin = pj.at("origin");
        r.median = pj.at("median");
        r.lower = pj.at("lower");
        r.upper = pj.at("upper");
        r.observed = pj.at("observed");
        for (const auto& wj : pj.at("pmf")) r.pmf.emplace_back(wj.at("week"), wj.at("probability"));
        m.peaks.push_back(std::move(r));
    }
    return m;
}

}  // namespace detail

inline ordered_json report_to_json(const EvaluationReport& r) {
    ordered_json j;
    j["mode"] = r.mode;
    j["seed"] = r.seed;
    j["scores"] = r.score_names;
    j["config"] = r.config;
    j["models"] = ordered_json::array();
    for (const auto& m : r.models) j["models"].push_back(detail::model_to_json(m));
    if (r.naive_final_size) {
        ordered_json nj;
        nj["aggregates"] = ordered_json::array();
        for (const auto& a : r.naive_final_size->aggregates)
            nj["aggregates"].push_back(
                ordered_json{{"origin", a.origin}, {"mdss", a.mdss}, {"log_ds", a.log_ds}});
        nj["final_size"] = ordered_json::array();
        for (const auto& f : r.naive_final_size->final_size)
            nj["final_size"].push_back(ordered_json{{"origin", f.origin},
                                                    {"group", f.group},
                                                    {"mean", f.mean},
                                                    {"variance", f.variance},
                                                    {"poisson_fallback", f.poisson_fallback},
                                                    {"log_score", f.log_score},
                                                    {"dss", f.dss},
                                                    {"observed", f.observed}});
        j["naive_final_size"] = std::move(nj);
    } else {
        j["naive_final_size"] = nullptr;
    }
    j["tests"] = ordered_json::array();
    for (const auto& t : r.tests)
        j["tests"].push_back(ordered_json{{"score", t.score},
                                          {"model_a", t.model_a},
                                          {"model_b", t.model_b},
                                          {"method", t.method},
                                          {"statistic", t.statistic},
                                          {"p_value", t.p_value},
                                          {"n", t.n},
                                          {"degenerate", t.degenerate}});
    j["failures"] = ordered_json::array();
    for (const auto& [model, error] : r.failures)
        j["failures"].push_back(ordered_json{{"model", model}, {"error", error}});
    return j;
}

inline EvaluationReport report_from_json(const ordered_json& j) {
    EvaluationReport r;
    r.mode = j.at("mode");
    r.seed = j.at("seed");
    r.score_names = j.at("scores").get<std::vector<std::string>>();
    r.config = j.at("config");
    for (const auto& mj : j.at("models")) r.models.push_back(detail::model_from_json(mj));
    if (!j.at("naive_final_size").is_null()) {
        NaiveFinalSizeReport n;
        for (const auto& aj : j.at("naive_final_size").at("aggregates"))
            n.aggregates.push_back(AggregateRow{aj.at("origin"), aj.at("mdss"), aj.at("log_ds")});
        for (const auto& fj : j.at("naive_final_size").at("final_size"))
            n.final_size.push_back(FinalSizeRow{fj.at("origin"), fj.at("group"), fj.at("mean"),
                                                fj.at("variance"), fj.at("poisson_fallback"),
                                                fj.at("log_score"), fj.at("dss"), fj.at("observed")});
        r.naive_final_size = std::move(n);
    }
    for (const auto& tj : j.at("tests"))
        r.tests.push_back(TestRow{tj.at("score"), tj.at("model_a"), tj.at("model_b"), tj.at("method"),
                                  tj.at("statistic"), tj.at("p_value"), tj.at("n"), tj.at("degenerate")});
    for (const auto& fj : j.at("failures")) r.failures.emplace_back(fj.at("model"), fj.at("error"));
    return r;
}

inline EvaluationReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_report: cannot open " + path);
    ordered_json j;
    in >> j;
    return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Experiment execution

namespace detail {

struct PreparedExperiment {
    SurveillanceSeries data;
    std::optional<ContactMatrix> contacts;
    Eigen::Index train_end = 0;
    Eigen::Index test_start = 0, test_end = 0;
    std::vector<Eigen::Index> origin_idx;
};

inline Eigen::Index resolve_week(const SurveillanceSeries& data, const std::string& label,
                                 const char* what) {
    const Eigen::Index idx = data.index_of(parse_week(label));
    if (idx < 0) throw std::invalid_argument(std::string("config: ") + what + " week " + label +
                                             " is not in the data");
    return idx;
}

inline PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    PreparedExperiment prep{ingest_csv(cfg.data_path, cfg.groups), std::nullopt, 0, 0, 0, {}};
    if (!cfg.contacts_path.empty()) {
        prep.contacts = read_contacts_csv(cfg.contacts_path);
        if (prep.contacts->groups() != prep.data.groups())
            throw std::invalid_argument("config: contact matrix dimension does not match the data groups");
    }
    prep.train_end = resolve_week(prep.data, cfg.train_end, "train_end");
    prep.test_start = resolve_week(prep.data, cfg.test_start, "test_start");
    prep.test_end = resolve_week(prep.data, cfg.test_end, "test_end");
    if (prep.train_end < 1) throw std::invalid_argument("config: training window is too short");
    if (prep.test_start <= prep.train_end)
        throw std::invalid_argument("config: test window must start after the training window");
    if (prep.test_end < prep.test_start) throw std::invalid_argument("config: empty test window");
    if (cfg.mode == "long_term") {
        for (const auto& o : cfg.origins) {
            const Eigen::Index idx = resolve_week(prep.data, o, "origin");
            if (idx <= prep.train_end)
                throw std::invalid_argument("config: origin " + o + " lies inside the training window");
            if (idx + cfg.horizon - 1 > prep.test_end)
                throw std::invalid_argument("config: origin " + o + " plus horizon exceeds the test window");
            prep.origin_idx.push_back(idx);
        }
    }
    return prep;
}

inline EEModelSpec make_spec(const ModelConfig& mc, const ExperimentConfig& cfg,
                             const std::optional<ContactMatrix>& contacts) {
    EEModelSpec spec;
    spec.endemic_harmonics = mc.endemic_harmonics;
    spec.epidemic_harmonics = mc.epidemic_harmonics;
    spec.endemic_holiday_weeks = mc.endemic_holiday_weeks;
    spec.epidemic_holiday_weeks = mc.epidemic_holiday_weeks;
    spec.omega = two_pi / mc.omega_period;
    spec.shared_overdispersion = mc.shared_overdispersion;
    spec.season_start_week = cfg.season_start_week;
    if (mc.contact == "none") {
        spec.contact = ContactStructure::none;
    } else if (mc.contact == "homogeneous") {
        spec.contact = ContactStructure::homogeneous;
    } else if (mc.contact == "fixed") {
        spec.contact = ContactStructure::fixed;
        spec.contact_matrix = contacts;
    } else {
        spec.contact = ContactStructure::power_adjusted;
        spec.contact_matrix = contacts;
    }
    return spec;
}

/// Requested scores of one predictive law against one observation; appends
/// one value per score column.
inline void append_scores(const CountDistribution& dist, long y, const std::vector<std::string>& names,
                          std::vector<std::vector<double>>& values, long& zero_flags) {
    const Moments mom = dist.moments();
    for (std::size_t s = 0; s < names.size(); ++s) {
        const std::string& n = names[s];
        double v = 0.0;
        if (n == "log_score") {
            bool flag = false;
            v = log_score(dist, y, &flag);
            if (flag) ++zero_flags;
        } else if (n == "rps") {
            v = rps(dist, y);
        } else if (n == "dss") {
            v = dss(mom.mean, mom.variance, static_cast<double>(y));
        } else if (n == "abs_error") {
            v = abs_error(mom.mean, static_cast<double>(y));
        } else if (n == "sq_error") {
            v = sq_error(mom.mean, static_cast<double>(y));
        } else if (n == "abs_pct_error") {
            v = abs_pct_error(mom.mean, static_cast<double>(y));
        } else {
            v = rel_error(mom.mean, static_cast<double>(y));
        }
        values[s].push_back(v);
    }
}

inline FanRow make_fan_row(const CountDistribution& dist, ForecastKey key) {
    static const double levels[5] = {0.025, 0.1, 0.5, 0.9, 0.975};
    long qs[5];
    dist.quantiles(std::span<const double>(levels, 5), std::span<long>(qs, 5));
    FanRow f;
    f.key = std::move(key);
    f.mean = dist.moments().mean;
    f.q025 = static_cast<double>(qs[0]);
    f.q10 = static_cast<double>(qs[1]);
    f.q50 = static_cast<double>(qs[2]);
    f.q90 = static_cast<double>(qs[3]);
    f.q975 = static_cast<double>(qs[4]);
    return f;
}

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline FitSummary summarize_fit(const EEModelFit& fit, const EEModel& train_model) {
    FitSummary s;
    for (Eigen::Index i = 0; i < fit.parameters.size(); ++i) {
        ParamRow p;
        p.name = fit.param_names[static_cast<std::size_t>(i)];
        p.estimate = fit.parameters(i);
        if (fit.covariance_ok && fit.covariance(i, i) >= 0.0) p.std_error = std::sqrt(fit.covariance(i, i));
        s.params.push_back(std::move(p));
    }
    s.loglik = fit.loglik;
    s.aic = fit.aic;
    s.converged = fit.converged;
    s.iterations = fit.iterations;
    s.grad_norm = fit.grad_norm;
    s.seasonal_loglik = train_model.seasonal_loglik(fit.parameters);
    return s;
}

/// Observed season totals per group over [origin, origin + h) and the
/// observed peak week of the window.
inline Eigen::VectorXd observed_totals(const SurveillanceSeries& data, Eigen::Index origin,
                                       Eigen::Index horizon) {
    Eigen::VectorXd tot = Eigen::VectorXd::Zero(data.groups());
    for (Eigen::Index h = 0; h < horizon; ++h) tot += data.column(origin + h);
    return tot;
}

inline CalendarWeek observed_peak_week(const SurveillanceSeries& data, Eigen::Index origin,
                                       Eigen::Index horizon) {
    Eigen::Index best_h = 0;
    double best = -1.0;
    for (Eigen::Index h = 0; h < horizon; ++h) {
        const double tot = data.column(origin + h).sum();
        if (tot > best) {
            best = tot;
            best_h = h;
        }
    }
    return data.week(origin + best_h);
}

/// Scores the trajectory-level summaries of a path simulation into the
/// long-term report blocks shared by every simulation-based model.
inline void append_long_term_blocks(ModelReport& rep, const PathSimulation& sim,
                                    const LongTermPredictive& ltp, const SurveillanceSeries& data,
                                    const std::string& origin_label) {
    for (Eigen::Index h = 0; h < sim.horizon; ++h) {
        const Eigen::VectorXd obs = data.column(sim.origin + h);
        WeeklyMvRow row;
        row.origin = origin_label;
        row.week = to_string(sim.weeks[static_cast<std::size_t>(h)]);
        row.mdss = mdss(ltp.weekly_moments[static_cast<std::size_t>(h)], obs, true);
        row.log_ds = log_det_sharpness(ltp.weekly_moments[static_cast<std::size_t>(h)], true);
        rep.weekly_mv.push_back(std::move(row));
    }

    const FinalSizeForecast fs = final_size_forecast(sim);
    const Eigen::VectorXd obs_tot = observed_totals(data, sim.origin, sim.horizon);
    const MultivariateMoments total_moments = ensemble_moments(SampleEnsemble(fs.totals, true));
    rep.aggregates.push_back(AggregateRow{origin_label, mdss(total_moments, obs_tot, true),
                                          log_det_sharpness(total_moments, true)});
    for (Eigen::Index g = 0; g < sim.groups; ++g) {
        const CountDistribution& law = fs.per_group[static_cast<std::size_t>(g)];
        const Moments mom = law.moments();
        FinalSizeRow row;
        row.origin = origin_label;
        row.group = data.group_labels()[static_cast<std::size_t>(g)];
        row.mean = mom.mean;
        row.variance = mom.variance;
        row.poisson_fallback = fs.poisson_fallback[static_cast<std::size_t>(g)];
        const long y_tot = static_cast<long>(obs_tot(g));
        row.log_score = log_score(law, y_tot);
        row.dss = dss(mom.mean, mom.variance, static_cast<double>(y_tot));
        row.observed = y_tot;
        rep.final_size.push_back(std::move(row));
    }

    const PeakWeekForecast peak = peak_week_forecast(sim);
    PeakRow prow;
    prow.origin = origin_label;
    prow.median = to_string(peak.median);
    prow.lower = to_string(peak.lower);
    prow.upper = to_string(peak.upper);
    prow.observed = to_string(observed_peak_week(data, sim.origin, sim.horizon));
    for (std::size_t h = 0; h < peak.weeks.size(); ++h)
        if (peak.probabilities[h] > 0.0)
            prow.pmf.emplace_back(to_string(peak.weeks[h]), peak.probabilities[h]);
    rep.peaks.push_back(std::move(prow));
}

inline ModelReport evaluate_ee_model(const ExperimentConfig& cfg, const PreparedExperiment& prep,
                                     const ModelConfig& mc, std::size_t model_idx) {
    ModelReport rep;
    rep.name = mc.name;
    rep.score_names = cfg.scores;
    rep.score_values.assign(cfg.scores.size(), {});

    const EEModelSpec spec = make_spec(mc, cfg, prep.contacts);
    const SurveillanceSeries train = prep.data.slice(0, prep.train_end);
    const EEModel train_model(spec, train);
    const EEModelFit fit = train_model.fit();
    rep.fit = summarize_fit(fit, train_model);

    const EEModel full_model(spec, prep.data);
    PitAccumulator pit(cfg.pit_bins);
    const std::uint64_t model_seed = substream_seed(cfg.seed, static_cast<std::uint64_t>(model_idx) + 1);

    if (cfg.mode == "one_step_ahead") {
        for (Eigen::Index t = prep.test_start; t <= prep.test_end; ++t) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto forecasts = full_model.one_step_ahead(fit.parameters, t, t);
            const std::string week_label = to_string(forecasts[0].week);
            for (Eigen::Index g = 0; g < prep.data.groups(); ++g) {
                const CountDistribution dist(forecasts[0].laws[static_cast<std::size_t>(g)]);
                const long y = static_cast<long>(prep.data.count(g, t));
                ForecastKey key{week_label, week_label, prep.data.group_labels()[static_cast<std::size_t>(g)]};
                rep.rows.push_back(key);
                append_scores(dist, y, rep.score_names, rep.score_values, rep.zero_probability_flags);
                pit.add(dist.cdf(y), dist.cdf(y - 1));
                rep.fan.push_back(make_fan_row(dist, key));
            }
            rep.timings.emplace_back(week_label, seconds_since(t0));
        }
    } else {
        for (const Eigen::Index origin : prep.origin_idx) {
            const auto t0 = std::chrono::steady_clock::now();
            const PathSimulation sim = full_model.simulate_paths(
                fit.parameters, origin, cfg.horizon, cfg.simulations, model_seed);
            const LongTermPredictive ltp = long_term_predictive(sim);
            const std::string origin_label = to_string(prep.data.week(origin));
            for (Eigen::Index h = 0; h < sim.horizon; ++h) {
                const std::string week_label = to_string(sim.weeks[static_cast<std::size_t>(h)]);
                for (Eigen::Index g = 0; g < sim.groups; ++g) {
                    const CountDistribution& dist = ltp.weekly[static_cast<std::size_t>(h)][static_cast<std::size_t>(g)];
                    const long y = static_cast<long>(prep.data.count(g, origin + h));
                    ForecastKey key{origin_label, week_label,
                                    prep.data.group_labels()[static_cast<std::size_t>(g)]};
                    rep.rows.push_back(key);
                    append_scores(dist, y, rep.score_names, rep.score_values, rep.zero_probability_flags);
                    pit.add(dist.cdf(y), dist.cdf(y - 1));
                    rep.fan.push_back(make_fan_row(dist, key));
                }
            }
            append_long_term_blocks(rep, sim, ltp, prep.data, origin_label);
            rep.timings.emplace_back(origin_label, seconds_since(t0));
        }
    }
    rep.pit = pit.histogram();
    for (const auto& vals : rep.score_values) rep.score_means.push_back(mean(vals));
    return rep;
}

inline ModelReport evaluate_naive_weekly(const ExperimentConfig& cfg, const PreparedExperiment& prep) {
    ModelReport rep;
    rep.name = "naive";
    rep.score_names = cfg.scores;
    rep.score_values.assign(cfg.scores.size(), {});
    PitAccumulator pit(cfg.pit_bins);
    const SurveillanceSeries& data = prep.data;

    const auto forecast_week = [&](const HistoricalIndex& index, Eigen::Index t, Eigen::Index g,
                                   const std::string& origin_label) {
        const CountDistribution dist = naive_forecast(index, data.week(t));
        const long y = static_cast<long>(data.count(g, t));
        ForecastKey key{origin_label, to_string(data.week(t)),
                        data.group_labels()[static_cast<std::size_t>(g)]};
        rep.rows.push_back(key);
        append_scores(dist, y, rep.score_names, rep.score_values, rep.zero_probability_flags);
        pit.add(dist.cdf(y), dist.cdf(y - 1));
        rep.fan.push_back(make_fan_row(dist, key));
        return dist;
    };

    if (cfg.mode == "one_step_ahead") {
        // Expanding history: the forecast for week t sees all observations
        // before t.
        std::vector<HistoricalIndex> index(static_cast<std::size_t>(data.groups()));
        for (Eigen::Index g = 0; g < data.groups(); ++g)
            index[static_cast<std::size_t>(g)] = HistoricalIndex(data, g, prep.test_start - 1);
        for (Eigen::Index t = prep.test_start; t <= prep.test_end; ++t) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::string week_label = to_string(data.week(t));
            for (Eigen::Index g = 0; g < data.groups(); ++g) {
                forecast_week(index[static_cast<std::size_t>(g)], t, g, week_label);
                index[static_cast<std::size_t>(g)].add(data.week(t).week,
                                                       static_cast<long>(data.count(g, t)));
            }
            rep.timings.emplace_back(week_label, seconds_since(t0));
        }
    } else {
        // History is frozen at each forecast origin.
        for (const Eigen::Index origin : prep.origin_idx) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::string origin_label = to_string(data.week(origin));
            Eigen::VectorXd agg_mean = Eigen::VectorXd::Zero(data.groups());
            Eigen::VectorXd agg_var = Eigen::VectorXd::Zero(data.groups());
            for (Eigen::Index h = 0; h < cfg.horizon; ++h) {
                const Eigen::Index t = origin + h;
                Eigen::VectorXd wk_mean(data.groups()), wk_var(data.groups());
                for (Eigen::Index g = 0; g < data.groups(); ++g) {
                    HistoricalIndex index(data, g, origin - 1);
                    const CountDistribution dist = forecast_week(index, t, g, origin_label);
                    const Moments mom = dist.moments();
                    wk_mean(g) = mom.mean;
                    wk_var(g) = std::max(mom.variance, 1e-12);
                }
                agg_mean += wk_mean;
                agg_var += wk_var;
                const MultivariateMoments weekly_mm(wk_mean, wk_var.asDiagonal());
                WeeklyMvRow row;
                row.origin = origin_label;
                row.week = to_string(data.week(t));
                row.mdss = mdss(weekly_mm, data.column(t), true);
                row.log_ds = log_det_sharpness(weekly_mm, true);
                rep.weekly_mv.push_back(std::move(row));
            }
            // Independence across weeks and groups gives additive moments
            // for the season totals.
            const MultivariateMoments agg_mm(agg_mean, agg_var.asDiagonal());
            const Eigen::VectorXd obs_tot = observed_totals(data, origin, cfg.horizon);
            rep.aggregates.push_back(
                AggregateRow{origin_label, mdss(agg_mm, obs_tot, true), log_det_sharpness(agg_mm, true)});
            rep.timings.emplace_back(origin_label, seconds_since(t0));
        }
    }
    rep.pit = pit.histogram();
    for (const auto& vals : rep.score_values) rep.score_means.push_back(mean(vals));
    return rep;
}

/// Past complete-season totals per group, for seasons ending before `origin`.
inline std::vector<std::vector<double>> past_season_totals(const SurveillanceSeries& data,
                                                           Eigen::Index origin, int season_start_week) {
    std::vector<std::vector<double>> totals(static_cast<std::size_t>(data.groups()));
    Eigen::VectorXd run = Eigen::VectorXd::Zero(data.groups());
    bool in_season = false;
    for (Eigen::Index t = 0; t < origin; ++t) {
        const bool starts = data.week(t).week == season_start_week;
        if (starts) {
            if (in_season)
                for (Eigen::Index g = 0; g < data.groups(); ++g)
                    totals[static_cast<std::size_t>(g)].push_back(run(g));
            run.setZero();
            in_season = true;
        }
        if (in_season) run += data.column(t);
    }
    // A season still running at the origin is incomplete and is dropped.
    return totals;
}

inline NaiveFinalSizeReport evaluate_naive_final_size(const ExperimentConfig& cfg,
                                                      const PreparedExperiment& prep) {
    NaiveFinalSizeReport rep;
    const SurveillanceSeries& data = prep.data;
    for (const Eigen::Index origin : prep.origin_idx) {
        const std::string origin_label = to_string(data.week(origin));
        const auto totals = past_season_totals(data, origin, cfg.season_start_week);
        const Eigen::VectorXd obs_tot = observed_totals(data, origin, cfg.horizon);
        Eigen::VectorXd mean_vec(data.groups());
        Eigen::VectorXd var_vec(data.groups());
        for (Eigen::Index g = 0; g < data.groups(); ++g) {
            bool fallback = false;
            const CountDistribution law = naive_final_size(totals[static_cast<std::size_t>(g)], &fallback);
            const Moments mom = law.moments();
            mean_vec(g) = mom.mean;
            var_vec(g) = std::max(mom.variance, 1e-12);
            FinalSizeRow row;
            row.origin = origin_label;
            row.group = data.group_labels()[static_cast<std::size_t>(g)];
            row.mean = mom.mean;
            row.variance = mom.variance;
            row.poisson_fallback = fallback;
            const long y_tot = static_cast<long>(obs_tot(g));
            row.log_score = log_score(law, y_tot);
            row.dss = dss(mom.mean, mom.variance, static_cast<double>(y_tot));
            row.observed = y_tot;
            rep.final_size.push_back(std::move(row));
        }
        // Groups are fitted independently: diagonal joint covariance.
        const MultivariateMoments mm(mean_vec, var_vec.asDiagonal());
        rep.aggregates.push_back(
            AggregateRow{origin_label, mdss(mm, obs_tot, true), log_det_sharpness(mm, true)});
    }
    return rep;
}

inline bool same_rows(const std::vector<ForecastKey>& a, const std::vector<ForecastKey>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].origin != b[i].origin || a[i].week != b[i].week || a[i].group != b[i].group) return false;
    return true;
}

}  // namespace detail

/// Fit summaries for every configured model without running forecasts.
struct FitReport {
    std::vector<std::pair<std::string, FitSummary>> fits;
    std::vector<std::pair<std::string, std::string>> failures;
};

inline FitReport fit_models(const ExperimentConfig& cfg) {
    const detail::PreparedExperiment prep = detail::prepare_experiment(cfg);
    const SurveillanceSeries train = prep.data.slice(0, prep.train_end);
    FitReport report;
    for (const ModelConfig& mc : cfg.models) {
        try {
            const EEModel model(detail::make_spec(mc, cfg, prep.contacts), train);
            const EEModelFit fit = model.fit();
            report.fits.emplace_back(mc.name, detail::summarize_fit(fit, model));
        } catch (const std::exception& e) {
            report.failures.emplace_back(mc.name, e.what());
        }
    }
    return report;
}

inline ordered_json fit_report_to_json(const FitReport& r) {
    ordered_json j;
    j["models"] = ordered_json::array();
    for (const auto& [name, fit] : r.fits)
        j["models"].push_back(ordered_json{{"name", name}, {"fit", detail::fit_to_json(fit)}});
    j["failures"] = ordered_json::array();
    for (const auto& [model, error] : r.failures)
        j["failures"].push_back(ordered_json{{"model", model}, {"error", error}});
    return j;
}

/// Runs the configured experiment: fit each model on the training window,
/// forecast and score the test window, accumulate calibration diagnostics,
/// and compare every model pair with DM, permutation and paired-t tests.
/// Failing models are reported in `failures` while the rest proceed.
inline EvaluationReport run_experiment(const ExperimentConfig& cfg) {
    const detail::PreparedExperiment prep = detail::prepare_experiment(cfg);

    EvaluationReport report;
    report.mode = cfg.mode;
    report.seed = cfg.seed;
    report.score_names = cfg.scores;
    report.config = config_to_json(cfg);

    struct Task {
        std::string name;
        std::function<ModelReport()> run;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < cfg.models.size(); ++i) {
        const ModelConfig& mc = cfg.models[i];
        tasks.push_back({mc.name, [&, i] { return detail::evaluate_ee_model(cfg, prep, cfg.models[i], i); }});
    }
    if (cfg.naive_weekly)
        tasks.push_back({"naive", [&] { return detail::evaluate_naive_weekly(cfg, prep); }});

    std::vector<std::optional<ModelReport>> results(tasks.size());
    std::vector<std::optional<std::string>> errors(tasks.size());
    const auto run_task = [&](std::size_t i) {
        try {
            results[i] = tasks[i].run();
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    if (cfg.threads <= 1 || tasks.size() <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::vector<std::future<void>> futures;
        futures.reserve(tasks.size());
        for (std::size_t i = 0; i < tasks.size(); ++i)
            futures.push_back(std::async(std::launch::async, run_task, i));
        for (auto& f : futures) f.get();
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (results[i]) {
            report.models.push_back(std::move(*results[i]));
        } else {
            report.failures.emplace_back(tasks[i].name, *errors[i]);
        }
    }

    if (cfg.naive_final_size) {
        try {
            report.naive_final_size = detail::evaluate_naive_final_size(cfg, prep);
        } catch (const std::exception& e) {
            report.failures.emplace_back("naive_final_size", e.what());
        }
    }

    // Pairwise score comparisons on aligned forecast rows.
    const int dm_horizon = (cfg.mode == "long_term") ? cfg.horizon : 1;
    for (std::size_t a = 0; a < report.models.size(); ++a) {
        for (std::size_t b = a + 1; b < report.models.size(); ++b) {
            const ModelReport& ma = report.models[a];
            const ModelReport& mb = report.models[b];
            if (!detail::same_rows(ma.rows, mb.rows)) continue;
            for (std::size_t s = 0; s < cfg.scores.size(); ++s) {
                const auto push = [&](const TestResult& t) {
                    report.tests.push_back(TestRow{cfg.scores[s], ma.name, mb.name, t.method, t.statistic,
                                                   t.p_value, t.n, t.degenerate});
                };
                try {
                    push(dm_test(ma.score_values[s], mb.score_values[s], dm_horizon));
                } catch (const std::exception&) {
                    // Degenerate long-run variance: fall through to the other tests.
                }
                push(permutation_test(ma.score_values[s], mb.score_values[s], 9999,
                                      substream_seed(cfg.seed, 0x7065726d, a, b)));
                push(paired_t_test(ma.score_values[s], mb.score_values[s]));
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Emission

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("emit_report: cannot write " + p.string());
    return out;
}

inline void split_week_label(const std::string& label, int& year, int& week) {
    const CalendarWeek w = parse_week(label);
    year = w.year;
    week = w.week;
}

}  // namespace detail

/// Writes scores_by_week.csv, mean_scores.csv, pit_bins.csv,
/// fanchart_quantiles.csv, tests.csv, timings.csv and report.json into dir.
/// All tables use '.' decimals, UTF-8 and LF line endings; everything except
/// timings.csv is byte-reproducible for fixed (data, config, seed).
inline void emit_report(const EvaluationReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);

    {
        auto out = detail::open_out(base / "scores_by_week.csv");
        out << "model,origin,year,week,group";
        for (const auto& s : report.score_names) out << ',' << s;
        out << '\n';
        for (const auto& m : report.models) {
            for (std::size_t i = 0; i < m.rows.size(); ++i) {
                int year = 0, week = 0;
                detail::split_week_label(m.rows[i].week, year, week);
                out << m.name << ',' << m.rows[i].origin << ',' << year << ',' << week << ','
                    << m.rows[i].group;
                for (std::size_t s = 0; s < m.score_names.size(); ++s)
                    out << ',' << format_double(m.score_values[s][i]);
                out << '\n';
            }
        }
    }
    {
        auto out = detail::open_out(base / "mean_scores.csv");
        out << "model,score,mean,n\n";
        for (const auto& m : report.models)
            for (std::size_t s = 0; s < m.score_names.size(); ++s)
                out << m.name << ',' << m.score_names[s] << ',' << format_double(m.score_means[s]) << ','
                    << m.score_values[s].size() << '\n';
    }
    {
        auto out = detail::open_out(base / "pit_bins.csv");
        out << "model,bin,lower,upper,height,n\n";
        for (const auto& m : report.models) {
            for (int b = 0; b < m.pit.bin_count; ++b) {
                out << m.name << ',' << (b + 1) << ','
                    << format_double(static_cast<double>(b) / m.pit.bin_count) << ','
                    << format_double(static_cast<double>(b + 1) / m.pit.bin_count) << ','
                    << format_double(m.pit.bin_heights[static_cast<std::size_t>(b)]) << ',' << m.pit.n
                    << '\n';
            }
        }
    }
    {
        auto out = detail::open_out(base / "fanchart_quantiles.csv");
        out << "model,origin,year,week,group,mean,q2.5,q10,q50,q90,q97.5\n";
        for (const auto& m : report.models) {
            for (const auto& f : m.fan) {
                int year = 0, week = 0;
                detail::split_week_label(f.key.week, year, week);
                out << m.name << ',' << f.key.origin << ',' << year << ',' << week << ',' << f.key.group
                    << ',' << format_double(f.mean) << ',' << format_double(f.q025) << ','
                    << format_double(f.q10) << ',' << format_double(f.q50) << ',' << format_double(f.q90)
                    << ',' << format_double(f.q975) << '\n';
            }
        }
    }
    {
        auto out = detail::open_out(base / "tests.csv");
        out << "score,model_a,model_b,method,statistic,p_value,n,degenerate\n";
        for (const auto& t : report.tests)
            out << t.score << ',' << t.model_a << ',' << t.model_b << ',' << t.method << ','
                << format_double(t.statistic) << ',' << format_double(t.p_value) << ',' << t.n << ','
                << (t.degenerate ? 1 : 0) << '\n';
    }
    {
        auto out = detail::open_out(base / "timings.csv");
        out << "model,origin,seconds\n";
        for (const auto& m : report.models)
            for (const auto& [origin, secs] : m.timings)
                out << m.name << ',' << origin << ',' << format_double(secs) << '\n';
    }
    {
        auto out = detail::open_out(base / "report.json");
        out << report_to_json(report).dump(2) << '\n';
    }
}

/// Forecast-only emission: fanchart_quantiles.csv plus forecast.json with
/// predictive summaries (no scores, calibration or tests).
inline void emit_forecasts(const EvaluationReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);
    {
        auto out = detail::open_out(base / "fanchart_quantiles.csv");
        out << "model,origin,year,week,group,mean,q2.5,q10,q50,q90,q97.5\n";
        for (const auto& m : report.models) {
            for (const auto& f : m.fan) {
                int year = 0, week = 0;
                detail::split_week_label(f.key.week, year, week);
                out << m.name << ',' << f.key.origin << ',' << year << ',' << week << ',' << f.key.group
                    << ',' << format_double(f.mean) << ',' << format_double(f.q025) << ','
                    << format_double(f.q10) << ',' << format_double(f.q50) << ',' << format_double(f.q90)
                    << ',' << format_double(f.q975) << '\n';
            }
        }
    }
    ordered_json j;
    j["mode"] = report.mode;
    j["seed"] = report.seed;
    j["models"] = ordered_json::array();
    for (const auto& m : report.models) {
        ordered_json mj;
        mj["name"] = m.name;
        mj["fan"] = ordered_json::array();
        for (const auto& f : m.fan) {
            ordered_json fj = detail::key_to_json(f.key);
            fj["mean"] = f.mean;
            fj["q025"] = f.q025;
            fj["q10"] = f.q10;
            fj["q50"] = f.q50;
            fj["q90"] = f.q90;
            fj["q975"] = f.q975;
            mj["fan"].push_back(std::move(fj));
        }
        mj["final_size"] = ordered_json::array();
        for (const auto& f : m.final_size)
            mj["final_size"].push_back(ordered_json{{"origin", f.origin},
                                                    {"group", f.group},
                                                    {"mean", f.mean},
                                                    {"variance", f.variance},
                                                    {"poisson_fallback", f.poisson_fallback}});
        mj["peak_weeks"] = ordered_json::array();
        for (const auto& r : m.peaks) {
            ordered_json pj;
            pj["origin"] = r.origin;
            pj["median"] = r.median;
            pj["lower"] = r.lower;
            pj["upper"] = r.upper;
            pj["pmf"] = ordered_json::array();
            for (const auto& [wk, p] : r.pmf)
                pj["pmf"].push_back(ordered_json{{"week", wk}, {"probability", p}});
            mj["peak_weeks"].push_back(std::move(pj));
        }
        j["models"].push_back(std::move(mj));
    }
    j["failures"] = ordered_json::array();
    for (const auto& [model, error] : report.failures)
        j["failures"].push_back(ordered_json{{"model", model}, {"error", error}});
    auto out = detail::open_out(base / "forecast.json");
    out << j.dump(2) << '\n';
}

}  // namespace epicast
