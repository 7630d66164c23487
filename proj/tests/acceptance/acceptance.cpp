// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "alqed/pipeline.hpp"

using namespace alqed;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Options {
    int jobs = 4;
    fs::path workdir = "acceptance_runs";
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, f, a, b, c, d);
    return buffer;
}

ExperimentConfig preset(const std::string& name) {
    return load_config_file(std::string(ALQED_SOURCE_DIR) + "/presets/" + name + ".ini");
}

Outcome beta_golden(const Options&) {
    const double b = beta_factor(7.9, 0.5);
    return {std::abs(b - 0.9367) <= 0.0005, fmt("beta = %.5f", b)};
}

Outcome purcell_volume(const Options&) {
    const double v = invert_mode_volume(7.2, 4200.0, 950.0, 3.44);
    const CavityMode c{4200.0, v, 950.0, 3.44};
    const double back = purcell_peak(c);
    const double rel = std::abs(back - 7.2) / 7.2;
    return {v >= 0.85 && v <= 1.05 && rel <= 1e-12, fmt("V = %.4f um^3, round-trip error %.2e", v, rel)};
}

Outcome enhancement(const Options& o) {
    auto c = ExperimentConfig{};
    const auto s = cmd_qed(c, o.workdir / "c3", true);
    return {std::abs(s.enhancement_ratio - 15.8) <= 0.1, fmt("Gamma(0)/Gamma(inf) = %.3f", s.enhancement_ratio)};
}

Outcome cavity_extent(const Options&) {
    const ExperimentConfig c;
    const double l = cavity_length(1.0, c.qed.width_um, c.qed.height_um);
    return {std::abs(l - 25.0) <= 0.25, fmt("L = %.3f um", l)};
}

Outcome localization_criterion_behavior(const Options& o) {
    auto deep = preset("deep_localization");
    deep.jobs = o.jobs;
    const auto out = o.workdir / "c5_deep";
    fs::remove_all(out);
    const auto sim = cmd_simulate(deep, out);
    const auto st = cmd_stats(deep, sim.directory, out);
    const auto& d = st.ensembles.front().verdict;

    auto clean = preset("no_disorder");
    clean.jobs = o.jobs;
    const auto clean_out = o.workdir / "c5_clean";
    fs::remove_all(clean_out);
    const auto csim = cmd_simulate(clean, clean_out);
    const auto cst = cmd_stats(clean, csim.directory, clean_out);
    const auto& z = cst.ensembles.front().verdict;

    CounterRng rng(5, derive_stream(StreamPurpose::bootstrap, 99));
    std::vector<double> s(200000);
    for (auto& v : s) v = -std::log(1.0 - rng.uniform());
    const auto exp_stats = stats_from_samples(s);

    const bool ok = d.localized && d.variance > kLocalizationThreshold && z.variance < 0.1 && !z.localized &&
                    std::abs(exp_stats.variance - 1.0) <= 0.1;
    return {ok, fmt("var(sigma=0.06) = %.3f, var(sigma=0) = %.2e, var(exp) = %.4f", d.variance, z.variance,
                    exp_stats.variance)};
}

LengthEnsemble waveguide_ensemble(double length_um, double lambda, const DispersionModel& model,
                                  const ScatteringModel& s, int realizations, std::uint64_t seed) {
    WaveguideGeometry g;
    g.length_um = length_um;
    LengthEnsemble e{length_um, std::vector<double>(realizations)};
    detail::parallel_for(static_cast<std::size_t>(realizations), 4, [&](std::size_t r) {
        const auto real = generate_disorder(g, 0.06, seed, r);
        e.log_transmission[r] = solve_cascade(build_cells(g, real, model, s, lambda), false).log_transmission;
    });
    return e;
}

Outcome localization_scaling(const Options&) {
    const ExperimentConfig c;
    const auto model = c.dispersion_model();
    const auto s = c.scattering_model();

    std::vector<LengthEnsemble> ens;
    for (double L : {20.0, 40.0, 60.0, 80.0, 100.0}) ens.push_back(waveguide_ensemble(L, 980.0, model, s, 100, 11));
    const auto fit = localization_length(ens);

    // i.i.d. random-phase cells with R = 0.01: xi = a / R
    std::vector<LengthEnsemble> weak;
    for (std::size_t n : {100u, 200u, 400u, 600u, 800u}) {
        LengthEnsemble e{static_cast<double>(n) * 0.26, {}};
        for (std::size_t r = 0; r < 100; ++r) {
            CounterRng rng(3, derive_stream(StreamPurpose::cell_phase, n * 1000 + r));
            std::vector<CellScattering> stack;
            for (std::size_t j = 0; j < n; ++j)
                stack.push_back(CellScattering::make(0.01, 2 * std::numbers::pi * rng.uniform(),
                                                     2 * std::numbers::pi * rng.uniform(), 0.0));
            e.log_transmission.push_back(solve_cascade(stack, false).log_transmission);
        }
        weak.push_back(std::move(e));
    }
    const auto oracle = localization_length(weak);
    const double oracle_rel = std::abs(oracle.xi_um - 26.0) / 26.0;

    bool monotone = true;
    double previous = std::numeric_limits<double>::infinity();
    std::string xis;
    for (double lambda : {965.0, 970.0, 975.0, 980.0, 983.0}) {
        std::vector<LengthEnsemble> e;
        for (double L : {20.0, 50.0, 80.0}) e.push_back(waveguide_ensemble(L, lambda, model, s, 40, 12));
        const auto x = localization_length(e);
        monotone = monotone && !x.unbounded && x.xi_um < previous;
        previous = x.xi_um;
        xis += fmt(" %.1f", x.xi_um);
    }
    return {fit.r_squared >= 0.95 && oracle_rel <= 0.1 && monotone,
            fmt("r^2 = %.4f, xi(980) = %.2f um, oracle xi = %.2f um (a/R = 26)", fit.r_squared, fit.xi_um, oracle.xi_um) +
                ", xi(965..983) =" + xis};
}

Outcome transfer_invariants(const Options&) {
    CounterRng rng(17, derive_stream(StreamPurpose::disorder, 0));
    double worst_flux = 0.0, worst_recip = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 400.0);
        std::vector<CellScattering> stack;
        for (std::size_t j = 0; j < n; ++j)
            stack.push_back(CellScattering::make(0.9 * rng.uniform(), 2 * std::numbers::pi * rng.uniform(),
                                                 2 * std::numbers::pi * rng.uniform(), 0.0));
        const auto sol = solve_cascade(stack, false);
        worst_flux = std::max(worst_flux, std::abs(sol.transmission + sol.reflection - 1.0));
        worst_recip = std::max(worst_recip, std::abs(sol.transmission - sol.transmission_from_right));
    }
    return {worst_flux < 1e-9 && worst_recip < 1e-9, fmt("max |T+R-1| = %.2e, max |T_l - T_r| = %.2e", worst_flux, worst_recip)};
}

Outcome fit_closure(const Options& o) {
    ExperimentConfig c;
    c.analysis.rate_grid = {0.3, 0.5, 1.1, 2.0, 4.0, 8.0};
    c.analysis.seeds = 50;
    c.jobs = o.jobs;
    const auto s = cmd_fitdemo(c, o.workdir / "c8");
    const double pass_rate = 1.0 - s.failure_rate;
    const double q_rel = std::abs(s.q_recovered - 4200.0) / 4200.0;
    return {pass_rate >= 0.9 && q_rel <= 0.05,
            fmt("rate pass fraction %.3f over %.0f fits, Q = %.1f (%.2f%%)", pass_rate, static_cast<double>(s.cases),
                s.q_recovered, 100.0 * q_rel)};
}

Outcome determinism(const Options& o) {
    auto c = ExperimentConfig{};
    c.jobs = o.jobs;
    fs::remove_all(o.workdir / "c9_a");
    fs::remove_all(o.workdir / "c9_b");
    const auto a = cmd_simulate(c, o.workdir / "c9_a");
    c.jobs = 1;
    const auto b = cmd_simulate(c, o.workdir / "c9_b");
    auto files = [](const fs::path& d) {
        return RunManifest::from_json(read_json_file(d / "manifest.json"), "manifest").files;
    };
    const auto fa = files(a.directory), fb = files(b.directory);
    bool same = fa.size() == fb.size() && !fa.empty();
    for (const auto& [path, e] : fa) {
        const auto it = fb.find(path);
        same = same && it != fb.end() && it->second.sha256 == e.sha256;
        same = same && read_file(a.directory / path) == read_file(b.directory / path);
    }
    return {same && verify_manifest(a.directory).empty(),
            fmt("%.0f files compared (4 threads vs 1 thread)", static_cast<double>(fa.size()))};
}

Outcome statistics_invariances(const Options&) {
    CounterRng rng(23, derive_stream(StreamPurpose::spectrum_noise, 0));
    std::vector<SpectrumTrace> traces;
    for (std::uint64_t r = 0; r < 8; ++r)
        for (int x = 0; x < 30; ++x) {
            SpectrumTrace t{r, x + 0.5, {}, {}};
            for (int w = 0; w < 50; ++w) {
                t.wavelength_nm.push_back(970.0 + 0.1 * w);
                const double u = rng.uniform();
                t.intensity.push_back(std::pow(-std::log(1.0 - u), 2.0));
            }
            traces.push_back(std::move(t));
        }
    const WavelengthWindow window{970.0, 975.0};
    const auto a = normalize_intensity(traces, window, 1.0);
    auto scaled = traces;
    for (auto& t : scaled)
        for (auto& v : t.intensity) v *= 3.7e4;
    const auto b = normalize_intensity(scaled, window, 1.0);
    const double scale_rel = std::abs(a.variance - b.variance) / a.variance;
    const auto va = localization_criterion(a, 1, 200), vb = localization_criterion(b, 1, 200);

    auto again = traces;
    std::size_t i = 0;
    for (auto& t : again)
        for (auto& v : t.intensity) v = a.samples[i++];
    const auto twice = normalize_intensity(again, window, 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.samples.size(); ++k) worst = std::max(worst, std::abs(a.samples[k] - twice.samples[k]));
    return {scale_rel <= 1e-12 && va.localized == vb.localized && worst <= 1e-12,
            fmt("scale: relative variance change %.2e; idempotence: max change %.2e", scale_rel, worst)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"alqed acceptance run"};
    Options o;
    std::string workdir = o.workdir.string();
    app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--workdir", workdir, "Scratch directory for pipeline outputs");
    CLI11_PARSE(app, argc, argv);
    o.workdir = workdir;
    fs::create_directories(o.workdir);

    const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria{
        {"beta-factor golden number", beta_golden},
        {"Purcell / mode-volume consistency", purcell_volume},
        {"enhancement ratio", enhancement},
        {"cavity length", cavity_extent},
        {"localization criterion behavior", localization_criterion_behavior},
        {"localization-length scaling", localization_scaling},
        {"transfer-matrix invariants", transfer_invariants},
        {"fit-closure suite", fit_closure},
        {"determinism", determinism},
        {"statistics invariances", statistics_invariances},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = criteria[k].second(o);
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2zu %-36s %s (%.1f s)\n", r.passed ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    r.detail.c_str(), seconds);
        std::fflush(stdout);
        failures += r.passed ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
