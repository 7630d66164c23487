#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "alqed/errors.hpp"
#include "alqed/least_squares.hpp"
#include "alqed/qed.hpp"
#include "alqed/rng.hpp"
#include "alqed/voigt.hpp"

namespace alqed {

/// Temporal (detector) and spectral (spectrograph) instrument widths.
/// A zero temporal width is an ideal detector.
struct InstrumentResponse {
    double temporal_fwhm_ps = 50.0;
    double spectral_fwhm_nm = 0.15;

    void validate() const {
        detail::require(temporal_fwhm_ps >= 0.0, "instrument: temporal FWHM must be non-negative");
        detail::require(spectral_fwhm_nm >= 0.0, "instrument: spectral FWHM must be non-negative");
    }
};

struct ExponentialComponent {
    double rate_per_ns = 1.0;
    double amplitude = 0.0;  // detected photons per excitation cycle
};

/// Sum of exponential decays plus a flat background (counts per bin).
struct ExponentialMixture {
    std::vector<ExponentialComponent> components;
    double background = 0.0;

    void validate() const {
        for (const auto& c : components) {
            detail::require(c.rate_per_ns > 0.0 && std::isfinite(c.rate_per_ns), "mixture: rates must be positive");
            detail::require(c.amplitude >= 0.0 && std::isfinite(c.amplitude), "mixture: amplitudes must be non-negative");
        }
        detail::require(background >= 0.0, "mixture: background must be non-negative");
    }

    void sort_fastest_first() {
        std::stable_sort(components.begin(), components.end(),
                         [](const ExponentialComponent& a, const ExponentialComponent& b) {
                             return a.rate_per_ns > b.rate_per_ns;
                         });
    }

    double total_amplitude() const {
        double s = 0.0;
        for (const auto& c : components) s += c.amplitude;
        return s;
    }
};

/// Photon-arrival histogram. Bin edges in ps; counts are Poisson draws, or
/// expected values when synthesized in expectation mode.
struct DecayCurve {
    std::vector<double> bin_edges_ps;
    std::vector<double> counts;
    double excitation_cycles = 0.0;
    double repetition_period_ns = 1000.0 / 75.0;
    bool expected_counts = false;
    bool wrapped = false;  // window longer than the repetition period

    std::size_t bins() const { return counts.size(); }
    double window_ns() const { return (bin_edges_ps.back() - bin_edges_ps.front()) * 1e-3; }
};

struct DecaySetup {
    double bin_ps = 50.0;
    double window_ns = 1000.0 / 75.0;
    double repetition_period_ns = 1000.0 / 75.0;
    double pulse_time_ps = 500.0;  // arrival of the excitation pulse (IRF centre)
    bool periodic = true;          // include tails of earlier (and later) pulses

    void validate() const {
        detail::require(bin_ps > 0.0, "decay: bin width must be positive");
        detail::require(window_ns > 0.0, "decay: time window must be positive");
        detail::require(repetition_period_ns > 0.0, "decay: repetition period must be positive");
    }

    std::size_t bins() const { return static_cast<std::size_t>(std::llround(window_ns * 1e3 / bin_ps)); }
};

namespace detail {

/// Scaled complementary error function exp(x^2) erfc(x) for x >= 0.
inline double erfcx_nonnegative(double x) {
    if (x < 26.0) return std::exp(x * x) * std::erfc(x);
    const double inv2 = 1.0 / (x * x);
    const double series = 1.0 - 0.5 * inv2 * (1.0 - 1.5 * inv2 * (1.0 - 2.5 * inv2 * (1.0 - 3.5 * inv2)));
    return series / (x * std::sqrt(std::numbers::pi));
}

/// Probability that a photon of a unit-area exponential (rate gamma, 1/ps)
/// convolved with a Gaussian (sigma, ps) arrives after time u (ps from the pulse).
inline double survival(double u, double gamma, double sigma) {
    if (sigma <= 0.0) return u <= 0.0 ? 1.0 : std::exp(-gamma * u);
    const double z = u / sigma;
    const double gaussian_tail = 0.5 * std::erfc(z / std::numbers::sqrt2);
    const double x = (gamma * sigma - z) / std::numbers::sqrt2;
    double exponential_part;
    if (x >= 0.0) {
        exponential_part = 0.5 * std::exp(-0.5 * z * z) * erfcx_nonnegative(x);
    } else {
        exponential_part = std::exp(-gamma * u + 0.5 * gamma * gamma * sigma * sigma) * 0.5 * std::erfc(x);
    }
    // S = 1 - Phi(z) + exp(...) Phi(z - gamma sigma)
    return gaussian_tail + exponential_part;
}

/// Probability of arrival in [u1, u2] for the exponential convolved with the IRF.
inline double bin_probability(double u1, double u2, double gamma, double sigma) {
    if (sigma <= 0.0) {
        if (u2 <= 0.0) return 0.0;
        const double start = std::max(u1, 0.0);
        return std::exp(-gamma * start) * -std::expm1(-gamma * (u2 - start));
    }
    if (u2 <= 0.0) {
        // before the pulse: use the cumulative side to avoid cancellation
        return (1.0 - survival(u2, gamma, sigma)) - (1.0 - survival(u1, gamma, sigma));
    }
    return survival(u1, gamma, sigma) - survival(u2, gamma, sigma);
}

}  // namespace detail

/// Expected counts per bin: cycles * sum_k A_k P_k(bin) + background, with
/// P_k the IRF-convolved exponential integrated over the bin (periodically
/// repeated pulses when setup.periodic).
inline std::vector<double> expected_decay_counts(const ExponentialMixture& mixture, const InstrumentResponse& irf,
                                                 const DecaySetup& setup, double cycles) {
    mixture.validate();
    irf.validate();
    setup.validate();
    const std::size_t bins = setup.bins();
    detail::require(bins >= 1, "decay: window shorter than one bin");
    const double sigma = irf.temporal_fwhm_ps / kFwhmPerSigma;
    const double period_ps = setup.repetition_period_ns * 1e3;
    const double window_ps = static_cast<double>(bins) * setup.bin_ps;
    std::vector<double> mu(bins, mixture.background);

    for (const auto& c : mixture.components) {
        if (c.amplitude == 0.0) continue;
        const double gamma = c.rate_per_ns * 1e-3;
        long first = 0, last = 0;
        if (setup.periodic) {
            // earlier pulses until their remaining tail is negligible
            const double tail_periods = 40.0 / (gamma * period_ps) + 1.0;
            first = -static_cast<long>(std::ceil(std::min(tail_periods, 1e6)));
            last = static_cast<long>(std::ceil((window_ps - setup.pulse_time_ps) / period_ps)) + 1;
        }
        for (long m = first; m <= last; ++m) {
            const double t0 = setup.pulse_time_ps + static_cast<double>(m) * period_ps;
            for (std::size_t i = 0; i < bins; ++i) {
                const double u1 = static_cast<double>(i) * setup.bin_ps - t0;
                const double u2 = u1 + setup.bin_ps;
                mu[i] += cycles * c.amplitude * detail::bin_probability(u1, u2, gamma, sigma);
            }
        }
    }
    return mu;
}

struct SynthesisOptions {
    DecaySetup setup;
    bool expectation_only = false;
};

/// Forward model of a time-correlated counting histogram: expected counts
/// from expected_decay_counts, then a Poisson draw per bin from the seeded
/// stream (skipped in expectation mode).
inline DecayCurve synthesize_decay(const ExponentialMixture& mixture, const InstrumentResponse& irf, double cycles,
                                   double bin_ps, std::uint64_t seed, SynthesisOptions options = {}) {
    detail::require(cycles > 0.0, "synthesize_decay: excitation cycles must be positive");
    options.setup.bin_ps = bin_ps;
    const auto mu = expected_decay_counts(mixture, irf, options.setup, cycles);

    DecayCurve curve;
    curve.excitation_cycles = cycles;
    curve.repetition_period_ns = options.setup.repetition_period_ns;
    curve.expected_counts = options.expectation_only;
    curve.wrapped = options.setup.window_ns > options.setup.repetition_period_ns * (1.0 + 1e-12);
    curve.bin_edges_ps.resize(mu.size() + 1);
    for (std::size_t i = 0; i <= mu.size(); ++i) curve.bin_edges_ps[i] = static_cast<double>(i) * bin_ps;
    if (options.expectation_only) {
        curve.counts = mu;
        return curve;
    }
    CounterRng rng(seed, derive_stream(StreamPurpose::photon_counting, 0));
    curve.counts.resize(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        std::poisson_distribution<long long> draw(mu[i]);
        curve.counts[i] = mu[i] > 0.0 ? static_cast<double>(draw(rng)) : 0.0;
    }
    return curve;
}

struct ComponentEstimate {
    double rate_per_ns = 0.0;
    double rate_error = 0.0;
    double amplitude = 0.0;
    double amplitude_error = 0.0;
};

struct DecayFit {
    std::vector<ComponentEstimate> components;  // fastest first
    double background = 0.0;
    double background_error = 0.0;
    double pulse_time_ps = 0.0;
    double log_likelihood = 0.0;  // Poisson, including the log(n!) term
    double deviance = 0.0;        // 2 (L_saturated - L)
    double reduced_deviance = 0.0;
    bool converged = false;
    int start_index = -1;
    std::vector<std::string> warnings;

    ExponentialMixture mixture() const {
        ExponentialMixture m;
        for (const auto& c : components) m.components.push_back({c.rate_per_ns, c.amplitude});
        m.background = background;
        return m;
    }
};

struct DecayFitOptions {
    bool fit_pulse_time = true;
    int starts = 4;
    double min_rate_per_ns = 0.05;
    double max_rate_per_ns = 40.0;
    double degenerate_tolerance = 0.05;  // relative rate difference for merging
    DecaySetup setup;                    // repetition period, periodicity and initial pulse time
};

namespace detail {

struct DecayParameterLayout {
    int components;
    bool pulse_time;
    Eigen::Index size() const { return 2 * components + 1 + (pulse_time ? 1 : 0); }
};

inline double poisson_log_likelihood(const std::vector<double>& counts, const std::vector<double>& mu) {
    double ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) ll += counts[i] * std::log(mu[i]) - mu[i] - std::lgamma(counts[i] + 1.0);
    return ll;
}

inline double poisson_deviance(const std::vector<double>& counts, const std::vector<double>& mu) {
    double d = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double n = counts[i];
        d += (n > 0.0 ? n * std::log(n / mu[i]) : 0.0) - (n - mu[i]);
    }
    return 2.0 * d;
}

inline DecayFit fit_decay_once(const DecayCurve& curve, const InstrumentResponse& irf, int n_components,
                               const DecayFitOptions& options) {
    const std::size_t bins = curve.bins();
    DecaySetup setup = options.setup;
    setup.bin_ps = curve.bin_edges_ps[1] - curve.bin_edges_ps[0];
    setup.window_ns = static_cast<double>(bins) * setup.bin_ps * 1e-3;
    setup.repetition_period_ns = curve.repetition_period_ns;
    const double cycles = curve.excitation_cycles;
    const DecayParameterLayout layout{n_components, options.fit_pulse_time};

    auto unpack = [&](const Eigen::VectorXd& p) {
        ExponentialMixture m;
        for (int k = 0; k < n_components; ++k) m.components.push_back({std::exp(p[k]), std::exp(p[n_components + k])});
        m.background = std::exp(p[2 * n_components]);
        DecaySetup s = setup;
        if (options.fit_pulse_time) s.pulse_time_ps = p[2 * n_components + 1];
        return std::make_pair(m, s);
    };
    auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& out) {
        auto [m, s] = unpack(p);
        for (const auto& c : m.components) {
            if (!std::isfinite(c.rate_per_ns) || !std::isfinite(c.amplitude)) {
                out.setConstant(std::numeric_limits<double>::quiet_NaN());
                return;
            }
        }
        const auto mu = expected_decay_counts(m, irf, s, cycles);
        for (std::size_t i = 0; i < bins; ++i) out[static_cast<Eigen::Index>(i)] = mu[i];
    };

    Eigen::VectorXd counts(static_cast<Eigen::Index>(bins));
    double total = 0.0;
    std::vector<double> sorted(curve.counts);
    for (std::size_t i = 0; i < bins; ++i) {
        counts[static_cast<Eigen::Index>(i)] = curve.counts[i];
        total += curve.counts[i];
    }
    std::sort(sorted.begin(), sorted.end());
    double floor_estimate = 0.0;
    const std::size_t low = std::max<std::size_t>(1, bins / 10);
    for (std::size_t i = 0; i < low; ++i) floor_estimate += sorted[i];
    floor_estimate = std::max(floor_estimate / static_cast<double>(low), 1e-3);
    const auto peak = static_cast<std::size_t>(std::max_element(curve.counts.begin(), curve.counts.end()) - curve.counts.begin());
    const double peak_time = (static_cast<double>(peak) + 0.5) * setup.bin_ps;
    const double signal = std::max(total - floor_estimate * static_cast<double>(bins), 1.0);

    const double window_rate = 2.0 / setup.window_ns;
    const double bin_rate = 0.5e3 / setup.bin_ps;
    const double r_lo = std::max(options.min_rate_per_ns, window_rate);
    const double r_hi = std::min(options.max_rate_per_ns, bin_rate);

    DecayFit best;
    best.log_likelihood = -std::numeric_limits<double>::infinity();
    std::string diagnostics;
    for (int s = 0; s < options.starts; ++s) {
        Eigen::VectorXd p0(layout.size());
        for (int k = 0; k < n_components; ++k) {
            const double position = (k + (s + 0.5) / options.starts) / n_components;
            p0[k] = std::log(r_hi) + position * (std::log(r_lo) - std::log(r_hi));
            p0[n_components + k] = std::log(signal / cycles / n_components);
        }
        p0[2 * n_components] = std::log(floor_estimate);
        if (options.fit_pulse_time) p0[2 * n_components + 1] = peak_time - 0.5 * setup.bin_ps;

        OptimizerOptions opt;
        opt.max_iterations = 400;
        opt.relative_tolerance = 1e-13;
        const auto result = poisson_maximum_likelihood(model, counts, p0, opt);
        if (!result.params.allFinite() || !std::isfinite(result.objective)) {
            diagnostics += "start " + std::to_string(s) + ": non-finite objective; ";
            continue;
        }
        if (!result.converged) diagnostics += "start " + std::to_string(s) + ": iteration limit; ";

        auto [m, st] = unpack(result.params);
        const auto mu = expected_decay_counts(m, irf, st, cycles);
        DecayFit fit;
        fit.converged = result.converged;
        fit.start_index = s;
        fit.log_likelihood = poisson_log_likelihood(curve.counts, mu);
        fit.deviance = poisson_deviance(curve.counts, mu);
        const double dof = std::max(1.0, static_cast<double>(bins) - static_cast<double>(layout.size()));
        fit.reduced_deviance = fit.deviance / dof;
        fit.background = m.background;
        fit.background_error = m.background * std::sqrt(std::max(0.0, result.covariance(2 * n_components, 2 * n_components)));
        fit.pulse_time_ps = st.pulse_time_ps;
        for (int k = 0; k < n_components; ++k) {
            ComponentEstimate c;
            c.rate_per_ns = m.components[static_cast<std::size_t>(k)].rate_per_ns;
            c.amplitude = m.components[static_cast<std::size_t>(k)].amplitude;
            c.rate_error = c.rate_per_ns * std::sqrt(std::max(0.0, result.covariance(k, k)));
            c.amplitude_error = c.amplitude * std::sqrt(std::max(0.0, result.covariance(n_components + k, n_components + k)));
            fit.components.push_back(c);
        }
        std::sort(fit.components.begin(), fit.components.end(),
                  [](const ComponentEstimate& a, const ComponentEstimate& b) { return a.rate_per_ns > b.rate_per_ns; });

        auto effective = [](const DecayFit& f) {
            int n = 0;
            for (const auto& c : f.components) n += c.amplitude > 2.0 * c.amplitude_error ? 1 : 0;
            return n;
        };
        const double tie = 1e-9 * std::max(1.0, std::abs(best.log_likelihood));
        const bool better = fit.log_likelihood > best.log_likelihood + tie ||
                            (std::abs(fit.log_likelihood - best.log_likelihood) <= tie && effective(fit) < effective(best));
        if (fit.converged && (!best.converged || better)) best = fit;
        else if (!best.converged && !fit.converged && better) best = fit;
    }
    if (best.start_index < 0 || !best.converged)
        throw FitFailure("fit_decay: no start converged", diagnostics);
    return best;
}

}  // namespace detail

/// Poisson maximum-likelihood fit of an IRF-convolved multi-exponential plus
/// flat background. Multi-start over a log-spaced rate grid; the best
/// likelihood wins (ties go to fewer significant components). Components whose
/// rates agree within the degenerate tolerance are merged by refitting with
/// one component fewer.
inline DecayFit fit_decay(const DecayCurve& curve, const InstrumentResponse& irf, int n_components,
                          DecayFitOptions options = {}) {
    if (n_components < 1 || n_components > 4) throw InvalidParameter("fit_decay: component count must lie in [1, 4]");
    irf.validate();
    detail::require(curve.bins() >= 2 && curve.bin_edges_ps.size() == curve.bins() + 1,
                    "fit_decay: malformed decay curve");
    detail::require(curve.excitation_cycles > 0.0, "fit_decay: excitation cycles must be positive");
    std::size_t informative = 0;
    for (double c : curve.counts) informative += c > 0.0 ? 1 : 0;
    if (informative < static_cast<std::size_t>(10 * n_components))
        throw InsufficientData("fit_decay: fewer than 10 informative bins per component");

    DecayFit fit = detail::fit_decay_once(curve, irf, n_components, options);
    for (std::size_t k = 1; k < fit.components.size(); ++k) {
        const double a = fit.components[k - 1].rate_per_ns, b = fit.components[k].rate_per_ns;
        if (std::abs(a - b) <= options.degenerate_tolerance * std::max(a, b)) {
            DecayFit merged = fit_decay(curve, irf, n_components - 1, options);
            merged.warnings.insert(merged.warnings.begin(), "degenerate components merged (rates within " +
                                                                std::to_string(options.degenerate_tolerance * 100.0) + "%)");
            return merged;
        }
    }
    for (std::size_t k = 0; k < fit.components.size(); ++k) {
        const auto& c = fit.components[k];
        if (!(c.amplitude > 2.0 * c.amplitude_error))
            fit.warnings.push_back("component " + std::to_string(k) + " amplitude consistent with zero");
    }
    return fit;
}

struct RateExtraction {
    DecayRates rates;
    std::vector<std::string> warnings;
};

/// Gamma_on and Gamma_off are the fastest components of the two fits; beta
/// follows from them. Off-resonance rates below the non-radiative floor are
/// annotated.
inline RateExtraction extract_rates(const DecayFit& on_resonance, const DecayFit& off_resonance,
                                    double nonradiative_floor = 0.0) {
    if (!on_resonance.converged || !off_resonance.converged)
        throw FitFailure("extract_rates: input fits did not converge", "");
    detail::require(!on_resonance.components.empty() && !off_resonance.components.empty(),
                    "extract_rates: fits without components");
    RateExtraction out;
    out.rates.gamma_on = on_resonance.components.front().rate_per_ns;
    out.rates.gamma_off = off_resonance.components.front().rate_per_ns;
    out.rates.beta = beta_factor(out.rates.gamma_on, out.rates.gamma_off);
    out.rates.gamma_cavity = out.rates.gamma_on - out.rates.gamma_off;
    if (out.rates.gamma_off < nonradiative_floor)
        out.warnings.push_back("off-resonance rate below the non-radiative floor");
    return out;
}

}  // namespace alqed
