// Command-line front end, driven as a subprocess: subcommands, overrides,
// emitted artifacts and the three exit codes (0 success, 1 configuration or
// data errors, 2 contained per-model failures).

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "epicast/harness.hpp"

using namespace epicast;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "epicast_cli_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EPICAST_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

// Short synthetic two-group dataset; the CLI tests only need plausible counts
// and care about artifacts and exit codes, not forecast quality.
struct Dataset {
    std::filesystem::path counts, contacts;
};

const Dataset& dataset() {
    static const Dataset ds = [] {
        const ContactMatrix contacts((Eigen::MatrixXd(2, 2) << 3.0, 1.0, 1.0, 2.0).finished(),
                                     {"young", "old"});
        EEModelSpec spec;
        spec.contact = ContactStructure::fixed;
        spec.contact_matrix = contacts;
        Eigen::VectorXd theta(10);
        theta << std::log(60.0), std::log(95.0), 0.5, 0.25, 0.45, -0.2, std::log(0.35),
            std::log(0.30), std::log(7.0), std::log(9.0);
        Eigen::VectorXd y0(2);
        y0 << 55.0, 90.0;
        const SurveillanceSeries series =
            simulate_series(spec, theta, y0, CalendarWeek{2016, 1}, 150, {"young", "old"}, 4711);
        if (series.counts().minCoeff() <= 0.0)
            throw std::runtime_error("cli fixture drew a zero count; change the seed");
        Dataset out{scratch_dir() / "counts.csv", scratch_dir() / "contacts.csv"};
        write_counts_csv(series, out.counts.string());
        write_contacts_csv(contacts, out.contacts.string());
        return out;
    }();
    return ds;
}

// Two full training years (the weekly baseline needs two past observations of
// each ISO week), 46 one-step test weeks, both models plus the baseline.
ordered_json cli_config() {
    const Dataset& ds = dataset();
    ExperimentConfig cfg;
    cfg.data_path = ds.counts.string();
    cfg.contacts_path = ds.contacts.string();
    cfg.train_end = "2017-W52";
    cfg.test_start = "2018-W01";
    cfg.test_end = "2018-W46";
    cfg.scores = {"log_score", "rps", "dss"};
    cfg.seed = 7;
    ModelConfig coupled;
    coupled.name = "coupled";
    coupled.contact = "fixed";
    ModelConfig independent;
    independent.name = "independent";
    independent.contact = "none";
    cfg.models = {coupled, independent};
    cfg.naive_weekly = true;
    return config_to_json(cfg);
}

std::filesystem::path write_config(const std::string& name, const ordered_json& j) {
    const auto path = scratch_dir() / name;
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    return path;
}

ordered_json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    ordered_json j;
    in >> j;
    return j;
}

}  // namespace

TEST_CASE("evaluate writes a full report directory and exits with 0") {
    ordered_json j = cli_config();
    const auto out_dir = scratch_dir() / "eval_out";
    j["out_dir"] = out_dir.string();
    const auto cfg = write_config("evaluate.json", j);

    CHECK(run_cli("evaluate --config " + cfg.string()) == 0);
    for (const char* name : {"report.json", "scores_by_week.csv", "mean_scores.csv", "pit_bins.csv",
                             "fanchart_quantiles.csv", "tests.csv", "timings.csv"})
        CHECK(std::filesystem::exists(out_dir / name));
    const EvaluationReport report = load_report((out_dir / "report.json").string());
    CHECK(report.seed == 7);
    CHECK(report.models.size() == 3);
    CHECK(report.failures.empty());

    // the report subcommand summarizes what evaluate wrote
    CHECK(run_cli("report --out-dir " + out_dir.string()) == 0);
}

TEST_CASE("command-line overrides replace config values") {
    ordered_json j = cli_config();
    j["models"] = ordered_json::array({ordered_json{{"name", "independent"}, {"contact", "none"}}});
    j["naive_weekly"] = false;
    const auto cfg = write_config("override.json", j);
    const auto out_dir = scratch_dir() / "override_out";

    CHECK(run_cli("evaluate --config " + cfg.string() + " --seed 99 --out-dir " + out_dir.string() +
                  " --threads 2") == 0);
    const ordered_json report = read_json(out_dir / "report.json");
    CHECK(report["seed"] == 99);
    CHECK(report["config"]["out_dir"] == out_dir.string());
    CHECK(report["config"]["threads"] == 2);
}

TEST_CASE("configuration and data problems exit with 1") {
    CHECK(run_cli("evaluate --config " + (scratch_dir() / "missing.json").string()) == 1);

    ordered_json bad_mode = cli_config();
    bad_mode["mode"] = "backtest";
    CHECK(run_cli("evaluate --config " + write_config("bad_mode.json", bad_mode).string()) == 1);

    ordered_json bad_data = cli_config();
    bad_data["data"] = (scratch_dir() / "no_counts.csv").string();
    CHECK(run_cli("evaluate --config " + write_config("bad_data.json", bad_data).string()) == 1);

    CHECK(run_cli("bogus") == 1);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("report --out-dir " + (scratch_dir() / "no_report_here").string()) == 1);
}

TEST_CASE("a failing model yields a partial report and exit code 2") {
    Eigen::MatrixXd c(2, 2);
    c << 3.0, 1.0, 0.5, 2.0;  // asymmetric: the power transform will refuse it
    const auto asym = scratch_dir() / "asymmetric.csv";
    write_contacts_csv(ContactMatrix(c, {"young", "old"}), asym.string());

    ordered_json j = cli_config();
    j["models"].push_back(ordered_json{{"name", "broken"}, {"contact", "power"}});
    const auto out_dir = scratch_dir() / "partial_out";
    j["out_dir"] = out_dir.string();
    const auto cfg = write_config("partial.json", j);

    CHECK(run_cli("evaluate --config " + cfg.string() + " --contacts " + asym.string()) == 2);
    const ordered_json report = read_json(out_dir / "report.json");
    CHECK(report["models"].size() == 3);
    REQUIRE(report["failures"].size() == 1);
    CHECK(report["failures"][0]["model"] == "broken");
}

TEST_CASE("fit writes parameter summaries without forecasting") {
    ordered_json j = cli_config();
    const auto out_dir = scratch_dir() / "fit_out";
    j["out_dir"] = out_dir.string();
    const auto cfg = write_config("fit.json", j);

    CHECK(run_cli("fit --config " + cfg.string()) == 0);
    const ordered_json fit = read_json(out_dir / "fit.json");
    CHECK(fit["models"].size() == 2);
    CHECK(fit["failures"].empty());
    CHECK_FALSE(std::filesystem::exists(out_dir / "report.json"));
}

TEST_CASE("forecast writes fan charts and predictive summaries") {
    ordered_json j = cli_config();
    j["mode"] = "long_term";
    j["horizon"] = 4;
    j["origins"] = ordered_json::array({"2018-W10"});
    j["simulations"] = 100;
    j["naive_weekly"] = false;
    const auto out_dir = scratch_dir() / "forecast_out";
    j["out_dir"] = out_dir.string();
    const auto cfg = write_config("forecast.json", j);

    CHECK(run_cli("forecast --config " + cfg.string()) == 0);
    CHECK(std::filesystem::exists(out_dir / "fanchart_quantiles.csv"));
    const ordered_json fc = read_json(out_dir / "forecast.json");
    CHECK(fc["mode"] == "long_term");
    CHECK(fc["models"].size() == 2);
    CHECK(fc["models"][0]["fan"].size() == 4 * 2);  // horizon x groups
    CHECK_FALSE(std::filesystem::exists(out_dir / "scores_by_week.csv"));
}
