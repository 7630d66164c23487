#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace alqed {

inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

namespace detail {

// Weideman's rational expansion of the Faddeeva function, N = 32 terms.
struct WeidemanCoefficients {
    static constexpr int kTerms = 32;
    std::array<double, kTerms> a{};  // a[n-1] multiplies Z^(n-1)
    double scale = 0.0;

    WeidemanCoefficients() {
        constexpr int m = 2 * kTerms;
        scale = std::sqrt(kTerms / std::numbers::sqrt2);
        std::array<double, 2 * m> f{};
        for (int k = -m + 1; k <= m - 1; ++k) {
            const double t = scale * std::tan(0.5 * k * std::numbers::pi / m);
            f[static_cast<std::size_t>(k + m)] = std::exp(-t * t) * (scale * scale + t * t);
        }
        for (int n = 1; n <= kTerms; ++n) {
            double sum = 0.0;
            for (int k = -m + 1; k <= m - 1; ++k)
                sum += f[static_cast<std::size_t>(k + m)] * std::cos(std::numbers::pi * n * k / m);
            a[static_cast<std::size_t>(n - 1)] = sum / (2.0 * m);
        }
    }
};

inline const WeidemanCoefficients& weideman() {
    static const WeidemanCoefficients coefficients;
    return coefficients;
}

}  // namespace detail

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz), for Im z >= 0.
inline std::complex<double> faddeeva(std::complex<double> z) {
    const auto& c = detail::weideman();
    const std::complex<double> i(0.0, 1.0);
    const std::complex<double> denom = c.scale - i * z;
    const std::complex<double> zz = (c.scale + i * z) / denom;
    std::complex<double> p = 0.0;
    for (int n = detail::WeidemanCoefficients::kTerms - 1; n >= 0; --n) p = p * zz + c.a[static_cast<std::size_t>(n)];
    return 2.0 * p / (denom * denom) + (1.0 / std::sqrt(std::numbers::pi)) / denom;
}

/// Unit-area Lorentzian with full width at half maximum fwhm.
inline double lorentzian(double x, double fwhm) {
    const double hwhm = 0.5 * fwhm;
    return hwhm / (std::numbers::pi * (x * x + hwhm * hwhm));
}

/// Unit-area Gaussian with full width at half maximum fwhm.
inline double gaussian(double x, double fwhm) {
    const double sigma = fwhm / kFwhmPerSigma;
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Unit-area Voigt profile: Lorentzian (intrinsic) convolved with Gaussian
/// (instrument). A zero Gaussian width reduces to the Lorentzian.
inline double voigt(double x, double lorentz_fwhm, double gauss_fwhm) {
    if (gauss_fwhm <= 1e-9 * lorentz_fwhm) return lorentzian(x, lorentz_fwhm);
    if (lorentz_fwhm <= 0.0) return gaussian(x, gauss_fwhm);
    const double sigma = gauss_fwhm / kFwhmPerSigma;
    const double norm = sigma * std::numbers::sqrt2;
    const std::complex<double> z(x / norm, 0.5 * lorentz_fwhm / norm);
    return faddeeva(z).real() / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Olivero-Longbothum approximation of the Voigt FWHM.
inline double voigt_fwhm(double lorentz_fwhm, double gauss_fwhm) {
    return 0.5346 * lorentz_fwhm + std::sqrt(0.2166 * lorentz_fwhm * lorentz_fwhm + gauss_fwhm * gauss_fwhm);
}

/// Inverse of voigt_fwhm in the Lorentzian width; used for fit starting values.
inline double lorentz_fwhm_from_voigt(double voigt_width, double gauss_fwhm) {
    if (voigt_width <= gauss_fwhm) return 0.05 * voigt_width;
    const double qa = 0.5346 * 0.5346 - 0.2166;
    const double qb = -2.0 * 0.5346 * voigt_width;
    const double qc = voigt_width * voigt_width - gauss_fwhm * gauss_fwhm;
    return (-qb - std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
}

}  // namespace alqed
