#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "alqed/errors.hpp"
#include "alqed/format.hpp"
#include "alqed/rng.hpp"

namespace alqed {

/// W1 photonic-crystal waveguide in a triangular lattice of air holes.
/// Lengths in nm except the waveguide length (µm).
struct WaveguideGeometry {
    double lattice_constant_nm = 260.0;
    double hole_radius_nm = 78.0;
    double membrane_thickness_nm = 150.0;
    double length_um = 100.0;
    int rows_perturbed = 3;  // on each side of the line defect
    double refractive_index = 3.44;

    void validate() const {
        detail::require(lattice_constant_nm > 0.0, "geometry: lattice constant must be positive");
        detail::require(hole_radius_nm > 0.0 && hole_radius_nm < lattice_constant_nm / 2.0,
                        "geometry: hole radius must lie in (0, a/2)");
        detail::require(membrane_thickness_nm > 0.0, "geometry: membrane thickness must be positive");
        detail::require(length_um > 0.0, "geometry: length must be positive");
        detail::require(rows_perturbed >= 1, "geometry: at least one perturbed row per side");
        detail::require(refractive_index >= 1.0, "geometry: refractive index must be >= 1");
        detail::require(cell_count() >= 1, "geometry: waveguide shorter than one unit cell");
    }

    /// Unit cells along the waveguide, round(L / a).
    long cell_count() const {
        return std::lround(length_um * 1000.0 / lattice_constant_nm);
    }

    int holes_per_cell() const { return 2 * rows_perturbed; }

    double lattice_constant_um() const { return lattice_constant_nm * 1e-3; }
};

struct Displacement {
    double dx_nm = 0.0;
    double dy_nm = 0.0;
};

/// Ideal position and lattice bookkeeping of a perturbed hole.
struct HoleSite {
    long cell = 0;
    int row = 0;  // signed row number, +-1 are the rows adjacent to the line defect
    double x_nm = 0.0;
    double y_nm = 0.0;
};

/// Hole index layout: hole = cell * holes_per_cell + slot, with slots ordered
/// rows -n..-1, +1..+n.
inline HoleSite hole_site(const WaveguideGeometry& geom, long hole_index) {
    const int per_cell = geom.holes_per_cell();
    const long cell = hole_index / per_cell;
    const int slot = static_cast<int>(hole_index % per_cell);
    const int row = slot < geom.rows_perturbed ? slot - geom.rows_perturbed : slot - geom.rows_perturbed + 1;
    const double a = geom.lattice_constant_nm;
    const double shift = (std::abs(row) % 2 == 1) ? 0.5 * a : 0.0;
    return {cell, row, cell * a + shift, row * a * std::sqrt(3.0) / 2.0};
}

struct DisorderRealization {
    double sigma_fraction = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t realization_index = 0;
    std::vector<Displacement> displacements;  // one per perturbed hole
    bool beyond_reference_range = false;      // sigma above the 6% fabricated range

    /// Per-axis RMS displacement in nm.
    double rms_per_axis_nm() const {
        if (displacements.empty()) return 0.0;
        double sum = 0.0;
        for (const auto& d : displacements) sum += d.dx_nm * d.dx_nm + d.dy_nm * d.dy_nm;
        return std::sqrt(sum / (2.0 * static_cast<double>(displacements.size())));
    }
};

inline constexpr double kReferenceSigmaMax = 0.06;

/// Independent Gaussian displacement per axis for every perturbed hole, with
/// standard deviation sigma_fraction * a. Realizations with distinct indices
/// draw from independent streams of the same seed.
inline DisorderRealization generate_disorder(const WaveguideGeometry& geom, double sigma_fraction,
                                             std::uint64_t seed, std::uint64_t realization_index = 0) {
    geom.validate();
    if (!(sigma_fraction >= 0.0) || !std::isfinite(sigma_fraction))
        throw InvalidParameter("generate_disorder: sigma must be a non-negative number");

    DisorderRealization out;
    out.sigma_fraction = sigma_fraction;
    out.seed = seed;
    out.realization_index = realization_index;
    out.beyond_reference_range = sigma_fraction > kReferenceSigmaMax;

    const long holes = geom.cell_count() * geom.holes_per_cell();
    out.displacements.resize(static_cast<std::size_t>(holes));
    if (sigma_fraction == 0.0) return out;

    const double scale = sigma_fraction * geom.lattice_constant_nm;
    CounterRng rng(seed, derive_stream(StreamPurpose::disorder, realization_index));
    for (auto& d : out.displacements) {
        const double u1 = rng.uniform_open_closed();
        const double u2 = rng.uniform();
        auto [z1, z2] = box_muller(u1, u2);
        d.dx_nm = scale * z1;
        d.dy_nm = scale * z2;
    }
    return out;
}

/// CSV export: '#' metadata lines followed by
/// hole_index,row,ideal_x_nm,ideal_y_nm,dx_nm,dy_nm.
inline void write_disorder_csv(std::ostream& os, const WaveguideGeometry& geom,
                               const DisorderRealization& realization) {
    os << "# lattice_constant_nm=" << format_double(geom.lattice_constant_nm) << '\n'
       << "# hole_radius_nm=" << format_double(geom.hole_radius_nm) << '\n'
       << "# sigma_fraction=" << format_double(realization.sigma_fraction) << '\n'
       << "# seed=" << realization.seed << '\n'
       << "# realization_index=" << realization.realization_index << '\n';
    if (realization.beyond_reference_range) os << "# warning=sigma_beyond_reference_range\n";
    os << "hole_index,row,ideal_x_nm,ideal_y_nm,dx_nm,dy_nm\n";
    for (std::size_t i = 0; i < realization.displacements.size(); ++i) {
        const auto site = hole_site(geom, static_cast<long>(i));
        const auto& d = realization.displacements[i];
        os << i << ',' << site.row << ',' << format_double(site.x_nm) << ',' << format_double(site.y_nm)
           << ',' << format_double(d.dx_nm) << ',' << format_double(d.dy_nm) << '\n';
    }
}

}  // namespace alqed
