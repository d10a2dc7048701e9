// Command-line front end: fit models, produce forecasts, run a full
// evaluation experiment, or pretty-print an existing report directory.
//
// Exit codes: 0 full success, 1 configuration/data/usage errors,
// 2 partial model failures (a report was still written).

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "epicast/epicast.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string contacts;
    std::uint64_t seed = 0;
    int threads = 0;
    CLI::Option* out_dir_opt = nullptr;
    CLI::Option* contacts_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    args.seed_opt = sub->add_option("--seed", args.seed, "override the config seed");
    args.out_dir_opt = sub->add_option("--out-dir", args.out_dir, "override the output directory");
    args.threads_opt = sub->add_option("--threads", args.threads, "override the worker thread count");
    args.contacts_opt = sub->add_option("--contacts", args.contacts, "override the contact matrix CSV");
}

epicast::ExperimentConfig load_with_overrides(const CommonArgs& args) {
    epicast::ExperimentConfig cfg = epicast::load_config(args.config_path);
    if (args.seed_opt->count() > 0) cfg.seed = args.seed;
    if (args.out_dir_opt->count() > 0) cfg.out_dir = args.out_dir;
    if (args.threads_opt->count() > 0) cfg.threads = args.threads;
    if (args.contacts_opt->count() > 0) cfg.contacts_path = args.contacts;
    return cfg;
}

void print_failures(const std::vector<std::pair<std::string, std::string>>& failures) {
    for (const auto& [model, error] : failures)
        std::fprintf(stderr, "error: model %s failed: %s\n", model.c_str(), error.c_str());
}

int cmd_fit(const epicast::ExperimentConfig& cfg) {
    const epicast::FitReport report = epicast::fit_models(cfg);
    for (const auto& [name, fit] : report.fits) {
        std::printf("model %s: loglik %.4f  aic %.4f  %s in %d iterations\n", name.c_str(), fit.loglik,
                    fit.aic, fit.converged ? "converged" : "NOT CONVERGED", fit.iterations);
        std::printf("  %-24s %12s %12s\n", "parameter", "estimate", "std.error");
        for (const auto& p : fit.params) {
            if (p.std_error)
                std::printf("  %-24s %12.6f %12.6f\n", p.name.c_str(), p.estimate, *p.std_error);
            else
                std::printf("  %-24s %12.6f %12s\n", p.name.c_str(), p.estimate, "-");
        }
        std::printf("  per-season log-likelihood:\n");
        for (const auto& [season, ll] : fit.seasonal_loglik)
            std::printf("  %-24s %12.4f\n", season.c_str(), ll);
    }
    print_failures(report.failures);
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "fit.json");
    out << epicast::fit_report_to_json(report).dump(2) << '\n';
    std::printf("wrote %s/fit.json\n", cfg.out_dir.c_str());
    return report.failures.empty() ? 0 : 2;
}

int cmd_forecast(const epicast::ExperimentConfig& cfg) {
    const epicast::EvaluationReport report = epicast::run_experiment(cfg);
    epicast::emit_forecasts(report, cfg.out_dir);
    std::printf("wrote fan chart quantiles and forecast.json for %zu model(s) to %s\n",
                report.models.size(), cfg.out_dir.c_str());
    print_failures(report.failures);
    return report.failures.empty() ? 0 : 2;
}

int cmd_evaluate(const epicast::ExperimentConfig& cfg) {
    const epicast::EvaluationReport report = epicast::run_experiment(cfg);
    epicast::emit_report(report, cfg.out_dir);
    std::printf("wrote evaluation report for %zu model(s) to %s\n", report.models.size(),
                cfg.out_dir.c_str());
    print_failures(report.failures);
    return report.failures.empty() ? 0 : 2;
}

int cmd_report(const std::string& dir) {
    const auto path = std::filesystem::path(dir) / "report.json";
    const epicast::EvaluationReport report = epicast::load_report(path.string());
    std::printf("mode: %s  seed: %llu\n\n", report.mode.c_str(),
                static_cast<unsigned long long>(report.seed));
    std::printf("%-20s %-16s %12s %8s\n", "model", "score", "mean", "n");
    for (const auto& m : report.models)
        for (std::size_t s = 0; s < m.score_names.size(); ++s)
            std::printf("%-20s %-16s %12.4f %8zu\n", m.name.c_str(), m.score_names[s].c_str(),
                        m.score_means[s], m.score_values[s].size());
    if (!report.tests.empty()) {
        std::printf("\n%-12s %-14s %-14s %-12s %10s %10s\n", "score", "model_a", "model_b", "method",
                    "statistic", "p");
        for (const auto& t : report.tests)
            std::printf("%-12s %-14s %-14s %-12s %10.4f %10.4f%s\n", t.score.c_str(), t.model_a.c_str(),
                        t.model_b.c_str(), t.method.c_str(), t.statistic, t.p_value,
                        t.degenerate ? "  (degenerate)" : "");
    }
    print_failures(report.failures);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forecasting and evaluation toolkit for surveillance count time series"};
    app.require_subcommand(1);

    CommonArgs fit_args, forecast_args, evaluate_args;
    CLI::App* fit = app.add_subcommand("fit", "fit the configured models on the training window");
    add_common(fit, fit_args);
    CLI::App* forecast = app.add_subcommand("forecast", "produce forecasts without scoring them");
    add_common(forecast, forecast_args);
    CLI::App* evaluate = app.add_subcommand("evaluate", "fit, forecast, score and compare models");
    add_common(evaluate, evaluate_args);
    std::string report_dir = "out";
    CLI::App* report = app.add_subcommand("report", "print a summary of an existing report directory");
    report->add_option("--out-dir", report_dir, "directory containing report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems are configuration errors
    }

    try {
        if (fit->parsed()) return cmd_fit(load_with_overrides(fit_args));
        if (forecast->parsed()) return cmd_forecast(load_with_overrides(forecast_args));
        if (evaluate->parsed()) return cmd_evaluate(load_with_overrides(evaluate_args));
        return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
