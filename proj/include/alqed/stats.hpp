#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "alqed/errors.hpp"
#include "alqed/rng.hpp"
#include "alqed/transport.hpp"

namespace alqed {

/// Intensity versus wavelength recorded at one position of one disorder
/// realization.
struct SpectrumTrace {
    std::uint64_t realization = 0;
    double position_um = 0.0;
    std::vector<double> wavelength_nm;
    std::vector<double> intensity;
};

struct WavelengthWindow {
    double lower_nm = 968.0;
    double upper_nm = 981.0;

    bool contains(double wavelength) const { return wavelength >= lower_nm && wavelength <= upper_nm; }
};

enum class Normalization {
    pooled,          // one mean over every (position, wavelength) sample
    per_wavelength,  // separate mean for each wavelength
};

struct Histogram {
    std::vector<double> edges;
    std::vector<double> pdf;
    std::vector<std::size_t> counts;
    std::size_t underflow = 0;
    std::size_t overflow = 0;

    double bin_center(std::size_t k) const { return std::sqrt(edges[k] * edges[k + 1]); }
};

/// Logarithmic bins over [lower, upper]. The density is normalized over the
/// in-range samples; out-of-range samples are counted separately.
inline Histogram log_histogram(std::span<const double> samples, double lower = 1e-3, double upper = 1e2,
                               std::size_t bins = 40) {
    detail::require(lower > 0.0 && upper > lower && bins > 0, "log_histogram: invalid binning");
    Histogram h;
    h.edges.resize(bins + 1);
    const double ratio = std::log(upper / lower);
    for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lower * std::exp(ratio * static_cast<double>(k) / bins);
    h.edges.back() = upper;
    h.counts.assign(bins, 0);
    for (double s : samples) {
        if (s < lower) {
            ++h.underflow;
        } else if (s > upper) {
            ++h.overflow;
        } else {
            auto k = static_cast<std::size_t>(std::log(s / lower) / ratio * bins);
            k = std::min(k, bins - 1);
            // guard against rounding at the edges
            while (k > 0 && s < h.edges[k]) --k;
            while (k + 1 < bins && s >= h.edges[k + 1]) ++k;
            ++h.counts[k];
        }
    }
    const std::size_t in_range = samples.size() - h.underflow - h.overflow;
    h.pdf.assign(bins, 0.0);
    if (in_range > 0)
        for (std::size_t k = 0; k < bins; ++k)
            h.pdf[k] = static_cast<double>(h.counts[k]) / (static_cast<double>(in_range) * (h.edges[k + 1] - h.edges[k]));
    return h;
}

struct EnsembleStats {
    std::vector<double> samples;       // normalized intensity s = I / <I>
    std::vector<std::uint32_t> group;  // resampling unit of each sample, one per (realization, spatial bin)
    Histogram histogram;
    double mean = 0.0;
    double variance = 0.0;
    std::size_t sample_count = 0;
    WavelengthWindow window;
    double spatial_bin_um = 1.0;
};

/// Population mean and variance (two-pass, pairwise sums).
inline std::pair<double, double> mean_and_variance(std::span<const double> samples) {
    detail::require(!samples.empty(), "variance of an empty sample");
    const double n = static_cast<double>(samples.size());
    const double mean = detail::pairwise_sum(samples) / n;
    std::vector<double> dev(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) dev[i] = (samples[i] - mean) * (samples[i] - mean);
    return {mean, detail::pairwise_sum(dev) / n};
}

/// Statistics of already-normalized samples. Without explicit groups every
/// sample is its own resampling unit.
inline EnsembleStats stats_from_samples(std::vector<double> samples, std::vector<std::uint32_t> group = {},
                                        WavelengthWindow window = {}, double spatial_bin_um = 1.0) {
    EnsembleStats stats;
    auto [mean, var] = mean_and_variance(samples);
    if (group.empty()) {
        group.resize(samples.size());
        for (std::size_t i = 0; i < group.size(); ++i) group[i] = static_cast<std::uint32_t>(i);
    }
    detail::require(group.size() == samples.size(), "stats_from_samples: one group id per sample");
    stats.group = std::move(group);
    stats.samples = std::move(samples);
    stats.mean = mean;
    stats.variance = var;
    stats.sample_count = stats.samples.size();
    stats.histogram = log_histogram(stats.samples);
    stats.window = window;
    stats.spatial_bin_um = spatial_bin_um;
    return stats;
}

/// Bins traces spatially (summing the traces that fall into the same bin of
/// the same realization), keeps wavelengths inside the window and divides
/// by the ensemble mean intensity.
inline EnsembleStats normalize_intensity(std::span<const SpectrumTrace> traces, WavelengthWindow window,
                                         double spatial_bin_um, Normalization mode = Normalization::pooled) {
    detail::require(spatial_bin_um > 0.0, "normalize_intensity: spatial bin must be positive");
    detail::require(window.upper_nm >= window.lower_nm, "normalize_intensity: inverted wavelength window");

    // (realization, spatial bin) -> summed in-window intensities, in trace wavelength order
    std::map<std::pair<std::uint64_t, long>, std::vector<double>> binned;
    std::map<std::pair<std::uint64_t, long>, std::vector<double>> binned_wavelengths;
    for (const auto& trace : traces) {
        detail::require(trace.wavelength_nm.size() == trace.intensity.size(),
                        "normalize_intensity: trace grid and intensity sizes differ");
        const auto key = std::make_pair(trace.realization, static_cast<long>(std::floor(trace.position_um / spatial_bin_um)));
        std::vector<double> in_window, lambdas;
        for (std::size_t i = 0; i < trace.intensity.size(); ++i) {
            if (!window.contains(trace.wavelength_nm[i])) continue;
            detail::require(trace.intensity[i] >= 0.0 && std::isfinite(trace.intensity[i]),
                            "normalize_intensity: intensities must be finite and non-negative");
            in_window.push_back(trace.intensity[i]);
            lambdas.push_back(trace.wavelength_nm[i]);
        }
        auto [it, inserted] = binned.try_emplace(key, in_window);
        if (inserted) {
            binned_wavelengths[key] = lambdas;
        } else {
            detail::require(it->second.size() == in_window.size(),
                            "normalize_intensity: traces in one spatial bin use different wavelength grids");
            for (std::size_t i = 0; i < in_window.size(); ++i) it->second[i] += in_window[i];
        }
    }
    if (binned.size() < 2) throw InvalidParameter("normalize_intensity: need at least two spatial positions");

    std::vector<double> raw;
    std::vector<double> lambda_of_sample;
    std::vector<std::uint32_t> group;
    std::uint32_t next_group = 0;
    for (const auto& [key, values] : binned) {
        raw.insert(raw.end(), values.begin(), values.end());
        group.insert(group.end(), values.size(), next_group++);
        const auto& l = binned_wavelengths[key];
        lambda_of_sample.insert(lambda_of_sample.end(), l.begin(), l.end());
    }
    if (raw.empty()) throw InvalidParameter("normalize_intensity: no samples inside the wavelength window");

    std::vector<double> s(raw.size());
    if (mode == Normalization::pooled) {
        const double mean = detail::pairwise_sum(raw) / static_cast<double>(raw.size());
        detail::require(mean > 0.0, "normalize_intensity: mean intensity is zero");
        for (std::size_t i = 0; i < raw.size(); ++i) s[i] = raw[i] / mean;
    } else {
        std::map<double, std::vector<std::size_t>> by_lambda;
        for (std::size_t i = 0; i < raw.size(); ++i) by_lambda[lambda_of_sample[i]].push_back(i);
        for (const auto& [lambda, idx] : by_lambda) {
            std::vector<double> vals;
            for (auto i : idx) vals.push_back(raw[i]);
            const double mean = detail::pairwise_sum(vals) / static_cast<double>(vals.size());
            detail::require(mean > 0.0, "normalize_intensity: mean intensity is zero at some wavelength");
            for (auto i : idx) s[i] = raw[i] / mean;
        }
    }
    return stats_from_samples(std::move(s), std::move(group), window, spatial_bin_um);
}

/// Spatially binned traces of a simulated realization.
inline std::vector<SpectrumTrace> traces_from_transport(const TransportResult& result, std::uint64_t realization) {
    std::vector<SpectrumTrace> out(result.bin_center_um.size());
    for (std::size_t b = 0; b < out.size(); ++b) {
        out[b].realization = realization;
        out[b].position_um = result.bin_center_um[b];
        out[b].wavelength_nm = result.wavelength_nm;
        out[b].intensity.resize(result.wavelength_nm.size());
        for (std::size_t w = 0; w < result.wavelength_nm.size(); ++w)
            out[b].intensity[w] = result.binned_intensity[w][b];
    }
    return out;
}

/// Negative-exponential density of normalized speckle intensity (unit mean,
/// unit variance), the reference for non-localized waves.
inline double rayleigh_pdf(double s) {
    if (!(s >= 0.0)) throw InvalidParameter("rayleigh_pdf: normalized intensity must be non-negative");
    return std::exp(-s);
}

inline constexpr double kLocalizationThreshold = 7.0 / 3.0;

struct LocalizationVerdict {
    bool localized = false;
    bool borderline = false;
    double variance = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t sample_count = 0;
};

/// Localized iff var(s) > 7/3, with a percentile bootstrap 95% interval
/// (groups of samples drawn with replacement).
/// Borderline when |var - 7/3| is below the interval half-width.
inline LocalizationVerdict localization_criterion(const EnsembleStats& stats, std::uint64_t seed = 0,
                                                  std::size_t resamples = 1000) {
    const std::size_t n = stats.samples.size();
    if (n < 100) throw InsufficientData("localization_criterion: need at least 100 samples");
    detail::require(resamples >= 10, "localization_criterion: too few bootstrap resamples");

    LocalizationVerdict v;
    v.sample_count = n;
    v.variance = mean_and_variance(stats.samples).second;

    // resample whole groups; samples of one position are correlated
    std::map<std::uint32_t, std::size_t> slot;
    std::vector<double> sum, sum_sq, count;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = slot.try_emplace(stats.group[i], sum.size());
        if (inserted) {
            sum.push_back(0.0);
            sum_sq.push_back(0.0);
            count.push_back(0.0);
        }
        sum[it->second] += stats.samples[i];
        sum_sq[it->second] += stats.samples[i] * stats.samples[i];
        count[it->second] += 1.0;
    }
    const std::size_t groups = sum.size();
    CounterRng rng(seed, derive_stream(StreamPurpose::bootstrap, 0));
    std::vector<double> boot(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        double s1 = 0.0, s2 = 0.0, k = 0.0;
        for (std::size_t g = 0; g < groups; ++g) {
            const auto pick = static_cast<std::size_t>(rng() % groups);
            s1 += sum[pick];
            s2 += sum_sq[pick];
            k += count[pick];
        }
        const double m = s1 / k;
        boot[b] = std::max(0.0, s2 / k - m * m);
    }
    std::sort(boot.begin(), boot.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(resamples - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, resamples - 1);
        return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
    };
    v.ci_low = quantile(0.025);
    v.ci_high = quantile(0.975);

    // a variance equal to 7/3 up to rounding is not above the threshold
    const double tolerance = 1e-12 * kLocalizationThreshold;
    v.localized = v.variance > kLocalizationThreshold + tolerance;
    const double half_width = 0.5 * (v.ci_high - v.ci_low);
    v.borderline = std::abs(v.variance - kLocalizationThreshold) <= std::max(half_width, tolerance);
    return v;
}

}  // namespace alqed
