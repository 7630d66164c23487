#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "alqed/errors.hpp"
#include "alqed/least_squares.hpp"
#include "alqed/voigt.hpp"

namespace alqed {

/// One fitted spectral line. Widths are intrinsic (instrument removed).
struct PeakEstimate {
    double center_nm = 0.0;
    double fwhm_nm = 0.0;
    double q = 0.0;           // center / intrinsic FWHM
    double area = 0.0;        // integrated intensity x nm
    double center_error_nm = 0.0;
    double fwhm_error_nm = 0.0;
    bool unresolved = false;
};

struct SpectrumFit {
    std::vector<PeakEstimate> peaks;  // sorted by center wavelength
    double baseline = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Local maximum with its topographic prominence.
struct PeakCandidate {
    std::size_t index = 0;
    double height = 0.0;
    double prominence = 0.0;
    std::size_t left_base = 0;
    std::size_t right_base = 0;
    double width_nm = 0.0;  // interpolated full width at half prominence
};

namespace detail {

inline double half_width_crossing(std::span<const double> x, std::span<const double> y, std::size_t peak,
                                  double level, int direction) {
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(peak);
    const auto last = static_cast<std::ptrdiff_t>(y.size()) - 1;
    while (i + direction >= 0 && i + direction <= last && y[static_cast<std::size_t>(i + direction)] > level)
        i += direction;
    const std::ptrdiff_t j = i + direction;
    if (j < 0 || j > last) return x[static_cast<std::size_t>(i)];
    const double y0 = y[static_cast<std::size_t>(i)], y1 = y[static_cast<std::size_t>(j)];
    const double frac = (y0 - level) / (y0 - y1);
    return x[static_cast<std::size_t>(i)] + frac * (x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)]);
}

}  // namespace detail

/// Local maxima whose prominence is at least `min_prominence_ratio` of their
/// height above zero. Plateaus count once (leftmost sample).
inline std::vector<PeakCandidate> find_peak_candidates(std::span<const double> x, std::span<const double> y,
                                                       double min_prominence_ratio) {
    std::vector<PeakCandidate> out;
    const std::size_t n = y.size();
    if (n < 3) return out;
    const double top = *std::max_element(y.begin(), y.end());
    const double bottom = *std::min_element(y.begin(), y.end());
    if (!(top - bottom > 1e-12 * std::max(std::abs(top), 1e-300))) return out;

    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1])) continue;
        std::size_t k = i;
        while (k + 1 < n && y[k + 1] == y[i]) ++k;
        if (k + 1 >= n || !(y[k + 1] < y[i])) continue;

        // walk outward until a higher sample (or the edge); base = lowest point passed
        std::size_t l = i, left_base = i;
        while (l > 0 && y[l - 1] <= y[i]) {
            --l;
            if (y[l] < y[left_base]) left_base = l;
        }
        std::size_t r = k, right_base = k;
        while (r + 1 < n && y[r + 1] <= y[i]) {
            ++r;
            if (y[r] < y[right_base]) right_base = r;
        }
        const double base = std::max(y[left_base], y[right_base]);
        const double prominence = y[i] - base;
        if (prominence < min_prominence_ratio * std::abs(y[i]) || prominence <= 0.0) continue;

        PeakCandidate c;
        c.index = i;
        c.height = y[i];
        c.prominence = prominence;
        c.left_base = left_base;
        c.right_base = right_base;
        const double level = y[i] - 0.5 * prominence;
        c.width_nm = detail::half_width_crossing(x, y, i, level, +1) - detail::half_width_crossing(x, y, i, level, -1);
        out.push_back(c);
        i = k;
    }
    return out;
}

/// Simultaneous least-squares fit of `n_peaks` Voigt lines (free Lorentzian
/// width, Gaussian width fixed to the instrument FWHM) plus a constant
/// baseline. Q = center / intrinsic FWHM.
inline SpectrumFit fit_spectrum(std::span<const double> wavelength_nm, std::span<const double> intensity, int n_peaks,
                                double instrument_fwhm_nm) {
    detail::require(n_peaks >= 1, "fit_spectrum: need at least one peak");
    detail::require(wavelength_nm.size() == intensity.size(), "fit_spectrum: grid and trace sizes differ");
    detail::require(instrument_fwhm_nm >= 0.0, "fit_spectrum: instrument FWHM must be non-negative");
    const std::size_t n = wavelength_nm.size();
    detail::require(n >= static_cast<std::size_t>(3 * n_peaks + 2), "fit_spectrum: too few spectral samples");
    const double step = (wavelength_nm.back() - wavelength_nm.front()) / static_cast<double>(n - 1);
    detail::require(step > 0.0, "fit_spectrum: wavelength grid must be increasing");

    SpectrumFit fit;

    // starting values: the most prominent candidates
    auto candidates = find_peak_candidates(wavelength_nm, intensity, 0.0);
    std::sort(candidates.begin(), candidates.end(),
              [](const PeakCandidate& a, const PeakCandidate& b) { return a.prominence > b.prominence; });
    const bool blended = static_cast<int>(candidates.size()) < n_peaks;
    if (blended) fit.warnings.push_back("fewer local maxima than requested peaks");

    const double baseline0 = *std::min_element(intensity.begin(), intensity.end());
    const int params_per_peak = 3;
    Eigen::VectorXd p0(1 + params_per_peak * n_peaks);
    p0[0] = baseline0;
    for (int k = 0; k < n_peaks; ++k) {
        double center, width, height;
        if (k < static_cast<int>(candidates.size())) {
            center = wavelength_nm[candidates[static_cast<std::size_t>(k)].index];
            width = std::max(candidates[static_cast<std::size_t>(k)].width_nm, 2.0 * step);
            height = candidates[static_cast<std::size_t>(k)].prominence;
        } else {
            center = wavelength_nm.front() + (k + 0.5) * (wavelength_nm.back() - wavelength_nm.front()) / n_peaks;
            width = 10.0 * step;
            height = 0.1 * (intensity[n / 2] - baseline0 + 1e-12);
        }
        const double lorentz = std::max(lorentz_fwhm_from_voigt(width, instrument_fwhm_nm), 0.5 * step);
        const double area = std::max(height, 1e-300) / std::max(voigt(0.0, lorentz, instrument_fwhm_nm), 1e-300);
        p0[1 + params_per_peak * k] = center;
        p0[2 + params_per_peak * k] = std::log(lorentz);
        p0[3 + params_per_peak * k] = std::log(area);
    }

    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < n; ++i) {
            double model = p[0];
            for (int k = 0; k < n_peaks; ++k) {
                const double c = p[1 + params_per_peak * k];
                const double w = std::exp(p[2 + params_per_peak * k]);
                const double a = std::exp(p[3 + params_per_peak * k]);
                model += a * voigt(wavelength_nm[i] - c, w, instrument_fwhm_nm);
            }
            r[static_cast<Eigen::Index>(i)] = model - intensity[i];
        }
    };

    OptimizerOptions options;
    options.relative_tolerance = 1e-15;
    const auto result = levenberg_marquardt(residual, p0, static_cast<Eigen::Index>(n), options);
    fit.converged = result.converged;
    fit.baseline = result.params[0];
    fit.residual_rms = std::sqrt(2.0 * result.objective / static_cast<double>(n));

    for (int k = 0; k < n_peaks; ++k) {
        const Eigen::Index ic = 1 + params_per_peak * k;
        PeakEstimate peak;
        peak.center_nm = result.params[ic];
        peak.fwhm_nm = std::exp(result.params[ic + 1]);
        peak.area = std::exp(result.params[ic + 2]);
        peak.q = peak.center_nm / peak.fwhm_nm;
        peak.center_error_nm = std::sqrt(std::max(0.0, result.covariance(ic, ic)));
        peak.fwhm_error_nm = peak.fwhm_nm * std::sqrt(std::max(0.0, result.covariance(ic + 1, ic + 1)));
        // the observed line cannot be narrower than a couple of samples
        if (voigt_fwhm(peak.fwhm_nm, instrument_fwhm_nm) < step || blended) peak.unresolved = true;
        fit.peaks.push_back(peak);
    }
    std::sort(fit.peaks.begin(), fit.peaks.end(),
              [](const PeakEstimate& a, const PeakEstimate& b) { return a.center_nm < b.center_nm; });
    for (std::size_t k = 1; k < fit.peaks.size(); ++k) {
        if (fit.peaks[k].center_nm - fit.peaks[k - 1].center_nm < 0.5 * instrument_fwhm_nm) {
            fit.peaks[k].unresolved = fit.peaks[k - 1].unresolved = true;
            fit.warnings.push_back("peaks closer than half the instrument FWHM are unresolved");
        }
    }
    if (!fit.converged) fit.warnings.push_back("least-squares iteration limit reached");
    return fit;
}

}  // namespace alqed
