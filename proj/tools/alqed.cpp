#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "alqed/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kComputeError = 3, kIoError = 4 };

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 0;
    std::string preset;
    std::string ensemble;
};

alqed::ExperimentConfig resolve_config(const GlobalOptions& g, bool& paper_mode) {
    if (!g.preset.empty() && g.preset != "paper")
        throw alqed::ConfigError("--preset: unknown preset '" + g.preset + "' (available: paper)");
    paper_mode = g.preset == "paper";
    // built-in defaults describe the reference experiment; a config file overlays them
    alqed::ExperimentConfig config;
    if (!g.config_path.empty()) config = alqed::load_config_file(g.config_path, config);
    if (g.seed) config.disorder.seed = *g.seed;
    if (!g.out.empty()) config.output.directory = g.out;
    if (g.jobs > 0) config.jobs = g.jobs;
    config.validate();
    return config;
}

void print_simulate(const alqed::SimulateSummary& s) {
    std::printf("simulate: %s\n", s.directory.c_str());
    for (const auto& e : s.sigmas)
        std::printf("  sigma %-6s realizations %zu  resonances %zu (resolved %zu)  band %.3f nm\n",
                    alqed::format_double(e.sigma).c_str(), e.realizations, e.resonances, e.resolved, e.band_width_nm());
    if (s.reused_realizations) std::printf("  resumed: %zu realizations reused\n", s.reused_realizations);
    for (const auto& w : s.warnings) std::printf("  warning: %s\n", w.c_str());
}

void print_stats(const alqed::StatsSummary& s, bool paper_mode) {
    std::printf("stats: %s\n", s.directory.c_str());
    for (const auto& e : s.ensembles) {
        std::printf("  sigma %-6s var(s) = %.4g  95%% CI [%.4g, %.4g]  %s%s\n", alqed::format_double(e.sigma).c_str(),
                    e.verdict.variance, e.verdict.ci_low, e.verdict.ci_high,
                    e.verdict.localized ? "localized" : "not_localized", e.verdict.borderline ? " (borderline)" : "");
        if (paper_mode) std::printf("  reference variance %.1f (comparison only)\n", alqed::PaperReference::intensity_variance);
    }
}

void print_qed(const alqed::QedSummary& s) {
    std::printf("qed: %s\n", s.directory.c_str());
    std::printf("  beta %.4f  F_p %.3f  V <= %.3f um^3  L_mode %.2f um  Gamma(0)/Gamma(inf) %.2f\n", s.beta,
                s.purcell_measured, s.mode_volume_upper_um3, s.cavity_length_um, s.enhancement_ratio);
    std::printf("  QD/cavity crossing at %.2f K%s\n", s.crossing.crossing_temperature_k,
                s.crossing.in_range ? "" : " (outside the temperature grid)");
}

void print_fitdemo(const alqed::FitDemoSummary& s) {
    std::printf("fitdemo: %s\n", s.directory.c_str());
    std::printf("  rate cases %zu, failures %zu (rate %.3f)\n", s.cases, s.failures, s.failure_rate);
    std::printf("  beta true %.4f recovered %.4f %s\n", s.beta_true, s.beta_recovered, s.beta_passed ? "pass" : "FAIL");
    std::printf("  Q true %.0f recovered %.1f %s\n", s.q_true, s.q_recovered, s.q_passed ? "pass" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Disorder-localized cavity QED simulation and analysis toolkit"};
    app.set_version_flag("--version", std::string(alqed::kToolkitVersion));
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "INI configuration file (overlays the built-in defaults)");
    app.add_option("--seed", g.seed, "Master seed (overrides disorder.seed)");
    app.add_option("--out", g.out, "Output directory (overrides output.directory)");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--preset", g.preset, "Named preset; 'paper' echoes reference values in reports");

    auto* simulate = app.add_subcommand("simulate", "Simulate the disordered-waveguide ensemble");
    auto* stats = app.add_subcommand("stats", "Localization verdict from a stored ensemble");
    stats->add_option("--ensemble", g.ensemble, "Ensemble directory (default: <out>/simulate)");
    auto* qed = app.add_subcommand("qed", "Purcell, beta-factor and decay-rate analysis");
    auto* fitdemo = app.add_subcommand("fitdemo", "Synthesize-and-fit closure checks");
    auto* report = app.add_subcommand("report", "Run every stage and compare with reference values");
    for (auto* sub : {simulate, stats, qed, fitdemo, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        bool paper_mode = false;
        const auto config = resolve_config(g, paper_mode);
        const std::filesystem::path out = config.output.directory;
        if (simulate->parsed()) {
            print_simulate(alqed::cmd_simulate(config, out));
        } else if (stats->parsed()) {
            const std::filesystem::path ensemble = g.ensemble.empty() ? out / "simulate" : std::filesystem::path(g.ensemble);
            print_stats(alqed::cmd_stats(config, ensemble, out, paper_mode), paper_mode);
        } else if (qed->parsed()) {
            print_qed(alqed::cmd_qed(config, out, paper_mode));
        } else if (fitdemo->parsed()) {
            const auto s = alqed::cmd_fitdemo(config, out);
            print_fitdemo(s);
            if (s.threshold_exceeded) {
                std::fprintf(stderr, "error: fit failure rate %.3f exceeds threshold %.3f\n", s.failure_rate,
                             config.analysis.failure_threshold);
                return kComputeError;
            }
        } else if (report->parsed()) {
            const auto r = alqed::cmd_report(config, out, paper_mode);
            print_simulate(r.simulate);
            print_stats(r.stats, paper_mode);
            print_qed(r.qed);
            print_fitdemo(r.fitdemo);
            std::printf("report: %s\n", (out / "report" / "report.json").c_str());
            if (r.fitdemo.threshold_exceeded) {
                std::fprintf(stderr, "error: fit failure rate %.3f exceeds threshold\n", r.fitdemo.failure_rate);
                return kComputeError;
            }
        }
        return kOk;
    } catch (const alqed::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const alqed::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIoError;
    } catch (const alqed::FitFailure& e) {
        std::fprintf(stderr, "fit failure: %s\n%s\n", e.what(), e.diagnostics().c_str());
        return kComputeError;
    } catch (const alqed::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kComputeError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIoError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kComputeError;
    }
}
