#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "alqed/dispersion.hpp"
#include "alqed/errors.hpp"

namespace alqed {

/// Localized cavity mode. Volume in µm^3, wavelength in nm.
struct CavityMode {
    double q = 4200.0;
    double volume_um3 = 1.0;
    double wavelength_nm = 950.0;
    double refractive_index = 3.44;

    void validate() const {
        detail::require(q > 0.0, "cavity: Q must be positive");
        detail::require(volume_um3 > 0.0, "cavity: mode volume must be positive");
        detail::require(wavelength_nm > 0.0, "cavity: wavelength must be positive");
        detail::require(refractive_index > 0.0, "cavity: refractive index must be positive");
    }
};

/// Quantum-dot emitter. gamma_homogeneous is the decay rate in a homogeneous
/// medium (1/ns); dipole_overlap is |d . f(r_q)|^2 / |d|^2.
struct QdEmitter {
    double wavelength_nm = 950.0;
    double dipole_overlap = 1.0;
    double gamma_homogeneous = 1.1;

    void validate() const {
        detail::require(wavelength_nm > 0.0, "emitter: wavelength must be positive");
        detail::require(dipole_overlap >= 0.0 && dipole_overlap <= 1.0, "emitter: dipole overlap must lie in [0, 1]");
        detail::require(gamma_homogeneous > 0.0, "emitter: homogeneous decay rate must be positive");
    }
};

/// Peak Purcell factor 3 Q (lambda/n)^3 / (4 pi^2 V).
inline double purcell_peak(const CavityMode& cavity) {
    cavity.validate();
    const double reduced = cavity.wavelength_nm * 1e-3 / cavity.refractive_index;  // µm
    return 3.0 * cavity.q * reduced * reduced * reduced / (4.0 * std::numbers::pi * std::numbers::pi * cavity.volume_um3);
}

/// Lorentzian detuning factor 1 / (1 + 4 Q^2 (omega_q/omega - 1)^2) with exact
/// frequencies (omega_q / omega = lambda_c / lambda_q).
inline double detuning_factor(double q, double cavity_wavelength_nm, double emitter_wavelength_nm) {
    const double x = cavity_wavelength_nm / emitter_wavelength_nm - 1.0;
    return 1.0 / (1.0 + 4.0 * q * q * x * x);
}

/// Purcell factor of an emitter at its own wavelength.
inline double purcell_factor(const CavityMode& cavity, const QdEmitter& emitter) {
    emitter.validate();
    return purcell_peak(cavity) * emitter.dipole_overlap *
           detuning_factor(cavity.q, cavity.wavelength_nm, emitter.wavelength_nm);
}

/// Upper bound on the mode volume (µm^3) from a measured Purcell factor,
/// assuming zero detuning and perfect dipole overlap.
inline double invert_mode_volume(double purcell, double q, double wavelength_nm, double refractive_index) {
    if (!(purcell > 0.0)) throw InvalidParameter("invert_mode_volume: Purcell factor must be positive");
    detail::require(q > 0.0 && wavelength_nm > 0.0 && refractive_index > 0.0,
                    "invert_mode_volume: Q, wavelength and index must be positive");
    const double reduced = wavelength_nm * 1e-3 / refractive_index;
    return 3.0 * q * reduced * reduced * reduced / (4.0 * std::numbers::pi * std::numbers::pi * purcell);
}

/// Separable mode extent: V = width * height * length.
struct ModeExtent {
    double width_um = 1.3;
    double height_um = 0.0308;
    double length_um = 0.0;

    double volume_um3() const { return width_um * height_um * length_um; }
};

/// Length of the mode along the waveguide, V / (W_eff H_eff).
inline double cavity_length(double volume_um3, double width_um, double height_um) {
    if (!(width_um > 0.0) || !(height_um > 0.0))
        throw InvalidParameter("cavity_length: effective width and height must be positive");
    detail::require(volume_um3 > 0.0, "cavity_length: mode volume must be positive");
    return volume_um3 / (width_um * height_um);
}

inline ModeExtent mode_extent(double volume_um3, double width_um, double height_um) {
    return {width_um, height_um, cavity_length(volume_um3, width_um, height_um)};
}

/// beta = (Gamma_on - Gamma_off) / Gamma_on.
inline double beta_factor(double gamma_on, double gamma_off) {
    if (!(gamma_on > 0.0)) throw InvalidParameter("beta_factor: on-resonance rate must be positive");
    if (!(gamma_off >= 0.0)) throw InvalidParameter("beta_factor: off-resonance rate must be non-negative");
    if (gamma_off > gamma_on) throw InconsistentRates("beta_factor: off-resonance rate exceeds on-resonance rate");
    return (gamma_on - gamma_off) / gamma_on;
}

struct DecayRates {
    double gamma_on = 0.0;
    double gamma_off = 0.0;
    double gamma_cavity = 0.0;  // Gamma, decay into the localized mode
    double gamma_rad = 0.0;
    double gamma_nr = 0.0;
    double beta = 0.0;
};

/// Rates that do not involve the localized cavities. The waveguide term
/// scales with the group index, gamma_wg0 * n_g(lambda_q) / ng_reference;
/// without a dispersion model it is constant.
struct BackgroundModel {
    double gamma_nonradiative = 0.1;
    double gamma_radiation = 0.2;
    double gamma_waveguide = 0.2;
    double ng_reference = 1.0;
    std::optional<DispersionModel> dispersion;

    void validate() const {
        detail::require(gamma_nonradiative >= 0.0 && gamma_radiation >= 0.0 && gamma_waveguide >= 0.0,
                        "background: rates must be non-negative");
        detail::require(ng_reference > 0.0, "background: reference group index must be positive");
    }

    double waveguide_rate(double wavelength_nm) const {
        if (!dispersion) return gamma_waveguide;
        return gamma_waveguide * group_index(*dispersion, wavelength_nm) / ng_reference;
    }

    double total(double wavelength_nm) const {
        return gamma_nonradiative + gamma_radiation + waveguide_rate(wavelength_nm);
    }
};

struct DecayRatePoint {
    double detuning_nm = 0.0;
    double emitter_wavelength_nm = 0.0;
    double gamma_total = 0.0;
    double gamma_nonradiative = 0.0;
    double gamma_radiation = 0.0;
    double gamma_waveguide = 0.0;
    std::vector<double> gamma_cavity;  // one entry per cavity
};

/// Gamma(Delta) = gamma_nr + gamma_rad + gamma_wg(lambda_q) + sum_c Gamma_hom F_p,c(lambda_q),
/// with lambda_q = reference_wavelength_nm + Delta. Cavities add incoherently.
inline std::vector<DecayRatePoint> decay_rate_vs_detuning(std::span<const CavityMode> cavities, const QdEmitter& emitter,
                                                          const BackgroundModel& background,
                                                          double reference_wavelength_nm,
                                                          std::span<const double> detuning_nm) {
    background.validate();
    emitter.validate();
    for (const auto& c : cavities) c.validate();
    std::vector<DecayRatePoint> out;
    out.reserve(detuning_nm.size());
    for (double delta : detuning_nm) {
        DecayRatePoint p;
        p.detuning_nm = delta;
        p.emitter_wavelength_nm = reference_wavelength_nm + delta;
        detail::require(p.emitter_wavelength_nm > 0.0, "decay_rate_vs_detuning: emitter wavelength must be positive");
        p.gamma_nonradiative = background.gamma_nonradiative;
        p.gamma_radiation = background.gamma_radiation;
        p.gamma_waveguide = background.waveguide_rate(p.emitter_wavelength_nm);
        p.gamma_total = p.gamma_nonradiative + p.gamma_radiation + p.gamma_waveguide;
        QdEmitter shifted = emitter;
        shifted.wavelength_nm = p.emitter_wavelength_nm;
        for (const auto& c : cavities) {
            const double g = emitter.gamma_homogeneous * purcell_factor(c, shifted);
            p.gamma_cavity.push_back(g);
            p.gamma_total += g;
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// Gamma(0) / Gamma(|Delta| -> infinity): the on-resonance rate over the
/// background rate at the same emitter wavelength.
inline double enhancement_ratio(std::span<const CavityMode> cavities, const QdEmitter& emitter,
                                const BackgroundModel& background, double reference_wavelength_nm) {
    const double zero = 0.0;
    const auto on = decay_rate_vs_detuning(cavities, emitter, background, reference_wavelength_nm, {&zero, 1});
    const auto off = decay_rate_vs_detuning({}, emitter, background, reference_wavelength_nm, {&zero, 1});
    return on.front().gamma_total / off.front().gamma_total;
}

}  // namespace alqed
