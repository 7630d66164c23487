#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "alqed/decay.hpp"

using namespace alqed;

namespace {

const InstrumentResponse kIdeal{0.0, 0.0};
const InstrumentResponse kIrf{50.0, 0.15};

DecaySetup single_shot() {
    DecaySetup s;
    s.periodic = false;
    return s;
}

}  // namespace

TEST(ExpectedCounts, DeltaIrfMatchesAnalyticIntegral) {
    ExponentialMixture m;
    m.components = {{1.1, 0.02}};
    const auto s = single_shot();
    const double cycles = 1e6;
    const auto mu = expected_decay_counts(m, kIdeal, s, cycles);
    const double g = 1.1e-3;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double t1 = std::max(0.0, i * s.bin_ps - s.pulse_time_ps);
        const double t2 = std::max(0.0, (i + 1) * s.bin_ps - s.pulse_time_ps);
        const double expected = cycles * 0.02 * (std::exp(-g * t1) - std::exp(-g * t2));
        EXPECT_NEAR(mu[i], expected, 1e-12 * std::max(expected, 1e-300)) << i;
    }
}

TEST(ExpectedCounts, PeriodicPulsesPileUp) {
    ExponentialMixture m;
    m.components = {{0.3, 0.02}};
    DecaySetup s;  // periodic, window = period
    const double cycles = 1e6, g = 0.3e-3, period = s.repetition_period_ns * 1e3;
    const auto mu = expected_decay_counts(m, kIdeal, s, cycles);
    const double geometric = 1.0 / (1.0 - std::exp(-g * period));
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double a = i * s.bin_ps - s.pulse_time_ps, b = a + s.bin_ps;
        // contributions of this and all earlier pulses (shifted by whole periods)
        const double shift = a < 0.0 ? period : 0.0;
        const double expected = cycles * 0.02 * (std::exp(-g * (a + shift)) - std::exp(-g * (b + shift))) * geometric;
        EXPECT_NEAR(mu[i], expected, 1e-10 * expected) << i;
    }
}

TEST(ExpectedCounts, IrfMatchesNumericalConvolution) {
    ExponentialMixture m;
    m.components = {{7.9, 0.01}};
    const auto s = single_shot();
    const auto mu = expected_decay_counts(m, kIrf, s, 1.0);
    const double sigma = 50.0 / kFwhmPerSigma, g = 7.9e-3;
    // density of the IRF-convolved decay by direct quadrature
    auto density = [&](double t) {
        double acc = 0.0;
        const double h = 0.05;
        for (double u = 0.5 * h; u < 40.0 / g; u += h) {
            const double z = (t - u) / sigma;
            acc += g * std::exp(-g * u) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi)) * h;
        }
        return acc;
    };
    for (std::size_t i : {8u, 9u, 10u, 11u, 12u, 15u, 20u}) {
        double integral = 0.0;
        const double h = 0.5;
        for (double t = i * s.bin_ps + 0.5 * h; t < (i + 1) * s.bin_ps; t += h) integral += density(t - s.pulse_time_ps) * h;
        EXPECT_NEAR(mu[i], 0.01 * integral, 2e-4 * 0.01 * 50.0 * g) << i;
    }
}

TEST(ExpectedCounts, IrfDelaysAndBroadensThePeak) {
    ExponentialMixture m;
    m.components = {{7.9, 0.01}};
    DecaySetup s = single_shot();
    s.bin_ps = 5.0;
    const auto sharp = expected_decay_counts(m, kIdeal, s, 1e6);
    const auto smooth = expected_decay_counts(m, kIrf, s, 1e6);
    const auto argmax = [](const std::vector<double>& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
    EXPECT_GT(argmax(smooth), argmax(sharp));
    EXPECT_LT(*std::max_element(smooth.begin(), smooth.end()), *std::max_element(sharp.begin(), sharp.end()));
    // same number of photons either way
    EXPECT_NEAR(std::accumulate(smooth.begin(), smooth.end(), 0.0), std::accumulate(sharp.begin(), sharp.end(), 0.0), 1e-6 * 1e4);
}

TEST(ExpectedCounts, PhotonNumberConserved) {
    ExponentialMixture m;
    m.components = {{2.0, 0.01}, {0.9, 0.005}};
    m.background = 0.5;
    DecaySetup s = single_shot();
    s.window_ns = 60.0;
    const auto mu = expected_decay_counts(m, kIrf, s, 1e6);
    const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
    EXPECT_NEAR(total, 1e6 * 0.015 + 0.5 * static_cast<double>(s.bins()), 1e-6 * total);
}

TEST(Synthesis, BackgroundOnlyIsPoisson) {
    ExponentialMixture m;
    m.background = 20.0;
    DecaySetup s;
    s.window_ns = 500.0;
    s.repetition_period_ns = 500.0;
    const auto c = synthesize_decay(m, kIrf, 1e6, 50.0, 4, {s, false});
    double mean = 0.0, var = 0.0;
    for (double v : c.counts) mean += v;
    mean /= c.bins();
    for (double v : c.counts) var += (v - mean) * (v - mean);
    var /= c.bins() - 1;
    EXPECT_NEAR(mean, 20.0, 0.2);
    EXPECT_NEAR(var, 20.0, 1.0);
    for (double v : c.counts) EXPECT_EQ(v, std::floor(v));
}

TEST(Synthesis, SeededAndWrapFlag) {
    ExponentialMixture m;
    m.components = {{1.1, 0.01}};
    const auto a = synthesize_decay(m, kIrf, 1e5, 50.0, 9);
    const auto b = synthesize_decay(m, kIrf, 1e5, 50.0, 9);
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_FALSE(a.wrapped);
    DecaySetup s;
    s.window_ns = 20.0;
    EXPECT_TRUE(synthesize_decay(m, kIrf, 1e5, 50.0, 9, {s, false}).wrapped);
    EXPECT_THROW(synthesize_decay(m, kIrf, 0.0, 50.0, 9), InvalidParameter);
}

TEST(FitDecay, NoiselessSingleExponential) {
    ExponentialMixture m;
    m.components = {{1.1, 0.01}};
    m.background = 1.0;
    const auto c = synthesize_decay(m, kIrf, 1e6, 50.0, 0, {DecaySetup{}, true});
    const auto fit = fit_decay(c, kIrf, 1);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.components[0].rate_per_ns, 1.1, 1.1e-3);
    EXPECT_NEAR(fit.components[0].amplitude, 0.01, 1e-5);
    EXPECT_NEAR(fit.background, 1.0, 1e-3);
}

TEST(FitDecay, BiExponentialOnResonance) {
    ExponentialMixture m;
    m.components = {{7.9, 0.01}, {0.5, 0.001}};
    m.background = 1.0;
    const auto c = synthesize_decay(m, kIrf, 1e6, 50.0, 21);
    const auto fit = fit_decay(c, kIrf, 2);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.components[0].rate_per_ns, 7.9, 0.79);
    EXPECT_GT(fit.components[0].rate_error, 0.0);
    EXPECT_LT(fit.reduced_deviance, 1.5);
}

TEST(FitDecay, OverfittingSingleExponentialIsFlagged) {
    ExponentialMixture m;
    m.components = {{1.1, 0.01}};
    m.background = 1.0;
    const auto c = synthesize_decay(m, kIrf, 1e6, 50.0, 22);
    const auto fit = fit_decay(c, kIrf, 2);
    ASSERT_FALSE(fit.warnings.empty());
    const bool flagged = fit.components.size() == 1 || fit.warnings.front().find("zero") != std::string::npos ||
                         fit.warnings.front().find("degenerate") != std::string::npos;
    EXPECT_TRUE(flagged);
}

TEST(FitDecay, InvalidRequests) {
    ExponentialMixture m;
    m.components = {{1.1, 0.01}};
    const auto c = synthesize_decay(m, kIrf, 1e6, 50.0, 1);
    EXPECT_THROW(fit_decay(c, kIrf, 0), InvalidParameter);
    EXPECT_THROW(fit_decay(c, kIrf, 5), InvalidParameter);
    ExponentialMixture faint;
    faint.components = {{1.1, 1e-9}};
    const auto empty = synthesize_decay(faint, kIrf, 1e3, 50.0, 1);
    EXPECT_THROW(fit_decay(empty, kIrf, 1), InsufficientData);
}

namespace {

DecayFit fake_fit(std::vector<double> rates) {
    DecayFit f;
    f.converged = true;
    for (double r : rates) f.components.push_back({r, 0.01 * r, 0.01, 0.001});
    return f;
}

}  // namespace

TEST(ExtractRates, BetaFromFastestComponents) {
    const auto r = extract_rates(fake_fit({7.9, 0.5}), fake_fit({0.5}));
    EXPECT_NEAR(r.rates.beta, 0.937, 0.0005);
    EXPECT_NEAR(r.rates.gamma_cavity, 7.4, 1e-12);
    EXPECT_TRUE(r.warnings.empty());
    EXPECT_EQ(extract_rates(fake_fit({2.0}), fake_fit({2.0})).rates.beta, 0.0);
}

TEST(ExtractRates, SlowOffResonanceIsAnnotated) {
    const auto r = extract_rates(fake_fit({7.9}), fake_fit({0.05}), 0.1);
    ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(ExtractRates, PropagatesFailures) {
    auto bad = fake_fit({1.0});
    bad.converged = false;
    EXPECT_THROW(extract_rates(bad, fake_fit({0.5})), FitFailure);
    EXPECT_THROW(extract_rates(fake_fit({0.5}), fake_fit({1.0})), InconsistentRates);
}
