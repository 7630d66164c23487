#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "alqed/errors.hpp"

namespace alqed {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

/// Angular frequency (rad/s) of a vacuum wavelength in nm.
inline double angular_frequency(double wavelength_nm) {
    return 2.0 * std::numbers::pi * kSpeedOfLight / (wavelength_nm * 1e-9);
}

/// Quadratic band-edge dispersion of the guided mode,
///     omega(k) = omega_c + A (k - pi/a)^2,  k <= pi/a,
/// so the guided band is omega >= omega_c (wavelengths below the cutoff).
/// curvature is A in m^2 rad/s.
struct DispersionModel {
    double cutoff_wavelength_nm = 985.0;
    double curvature = 2.6;
    double ng_clamp = 80.0;

    void validate() const {
        detail::require(cutoff_wavelength_nm > 0.0, "dispersion: cutoff wavelength must be positive");
        detail::require(curvature > 0.0, "dispersion: curvature must be positive");
        detail::require(ng_clamp >= 1.0, "dispersion: group-index clamp must be >= 1");
    }

    double cutoff_frequency() const { return angular_frequency(cutoff_wavelength_nm); }

    /// Model whose group index equals ng_target at (cutoff - offset_nm).
    static DispersionModel calibrated(double cutoff_nm, double offset_nm, double ng_target, double clamp) {
        detail::require(offset_nm > 0.0 && offset_nm < cutoff_nm, "dispersion: calibration offset out of range");
        detail::require(ng_target > 0.0, "dispersion: calibration group index must be positive");
        const double detuning = angular_frequency(cutoff_nm - offset_nm) - angular_frequency(cutoff_nm);
        DispersionModel m;
        m.cutoff_wavelength_nm = cutoff_nm;
        m.curvature = kSpeedOfLight * kSpeedOfLight / (4.0 * ng_target * ng_target * detuning);
        m.ng_clamp = clamp;
        m.validate();
        return m;
    }
};

namespace detail {

inline double band_offset(const DispersionModel& model, double wavelength_nm) {
    detail::require(wavelength_nm > 0.0, "dispersion: wavelength must be positive");
    const double offset = angular_frequency(wavelength_nm) - model.cutoff_frequency();
    // the cutoff itself belongs to the guided band (clamped group index)
    if (offset < 0.0 && wavelength_nm > model.cutoff_wavelength_nm)
        throw BandGapError("wavelength beyond the waveguide cutoff: no guided mode");
    return std::max(offset, 0.0);
}

}  // namespace detail

/// Group index n_g = c / (d omega / dk) = c / (2 sqrt(A (omega - omega_c))),
/// clamped at the model's ng_clamp as omega approaches the cutoff.
inline double group_index(const DispersionModel& model, double wavelength_nm) {
    model.validate();
    const double offset = detail::band_offset(model, wavelength_nm);
    if (offset == 0.0) return model.ng_clamp;
    const double ng = kSpeedOfLight / (2.0 * std::sqrt(model.curvature * offset));
    return std::min(ng, model.ng_clamp);
}

/// Bloch wavenumber (1/m) of the guided mode, pi/a - sqrt((omega - omega_c)/A).
inline double bloch_wavenumber(const DispersionModel& model, double wavelength_nm, double lattice_constant_nm) {
    const double offset = detail::band_offset(model, wavelength_nm);
    return std::numbers::pi / (lattice_constant_nm * 1e-9) - std::sqrt(offset / model.curvature);
}

}  // namespace alqed
