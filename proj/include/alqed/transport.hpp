#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "alqed/dispersion.hpp"
#include "alqed/errors.hpp"
#include "alqed/geometry.hpp"
#include "alqed/rng.hpp"
#include "alqed/spectral_fit.hpp"

namespace alqed {

using Complex = std::complex<double>;

/// 2x2 transfer matrix acting on (right-going, left-going) amplitudes.
struct Transfer2 {
    Complex m11{1.0}, m12{0.0}, m21{0.0}, m22{1.0};

    friend Transfer2 operator*(const Transfer2& a, const Transfer2& b) {
        return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
    }

    Complex determinant() const { return m11 * m22 - m12 * m21; }
};

/// Disorder-to-backscatter mapping of the reduced 1D model:
/// R_j = kappa * sigma_eff_j^2 * n_g^exponent, clamped below 1.
struct ScatteringModel {
    double kappa = 0.0079;
    double backscatter_exponent = 2.0;
    double loss_per_cell = 0.0;  // intensity fraction lost per cell (out-of-plane leakage)

    void validate() const {
        detail::require(kappa >= 0.0, "scattering: kappa must be non-negative");
        detail::require(backscatter_exponent >= 0.0, "scattering: exponent must be non-negative");
        detail::require(loss_per_cell >= 0.0 && loss_per_cell < 1.0, "scattering: loss per cell must lie in [0, 1)");
    }

    /// kappa for which i.i.d. cells at (sigma, n_g) give localization length
    /// xi_um, using <ln T> = N ln(1 - R) for random-phase cells.
    static double calibrate_kappa(double lattice_constant_nm, double sigma_fraction, double group_index, double xi_um,
                                  double exponent = 2.0) {
        detail::require(sigma_fraction > 0.0 && group_index > 0.0 && xi_um > 0.0,
                        "calibrate_kappa: sigma, group index and target length must be positive");
        const double reflectance = -std::expm1(-lattice_constant_nm * 1e-3 / xi_um);
        return reflectance / (sigma_fraction * sigma_fraction * std::pow(group_index, exponent));
    }
};

inline constexpr double kMaxCellReflectance = 1.0 - 1e-12;

/// Scattering amplitudes of one unit cell: a thin reciprocal scatterer
/// followed by propagation over one lattice period.
struct CellScattering {
    Complex r;        // reflection for incidence from the left
    Complex r_back;   // reflection for incidence from the right
    Complex t;        // transmission (identical in both directions)
    double loss = 0;  // alpha_cell
    Transfer2 transfer;

    static CellScattering make(double reflectance, double scatter_phase, double propagation_phase, double loss) {
        detail::require(reflectance >= 0.0 && reflectance < 1.0, "cell reflectance must lie in [0, 1)");
        detail::require(loss >= 0.0 && loss < 1.0, "cell loss must lie in [0, 1)");
        const Complex i(0.0, 1.0);
        const double ts = std::sqrt(1.0 - reflectance);
        const Complex rs = i * std::sqrt(reflectance) * std::exp(i * scatter_phase);
        const Complex rs_back = i * std::sqrt(reflectance) * std::exp(-i * scatter_phase);
        const Transfer2 scatterer{ts - rs * rs_back / ts, rs_back / ts, -rs / ts, 1.0 / ts};
        const double gain = std::sqrt(1.0 - loss);
        const Complex forward = gain * std::exp(i * propagation_phase);
        const Transfer2 propagate{forward, 0.0, 0.0, 1.0 / forward};

        CellScattering cell;
        cell.transfer = propagate * scatterer;
        cell.loss = loss;
        const Complex m22 = cell.transfer.m22;
        cell.t = cell.transfer.determinant() / m22;
        cell.r = -cell.transfer.m21 / m22;
        cell.r_back = cell.transfer.m12 / m22;
        return cell;
    }
};

/// Wavelength-independent disorder content of each cell.
struct CellDisorder {
    double sigma_eff_sq = 0.0;  // mean per-axis squared displacement / a^2
    double phase = 0.0;         // scatterer phase in [0, 2 pi)
};

inline std::vector<CellDisorder> cell_disorder(const WaveguideGeometry& geom, const DisorderRealization& realization) {
    geom.validate();
    const long cells = geom.cell_count();
    const int per_cell = geom.holes_per_cell();
    detail::require(realization.displacements.size() == static_cast<std::size_t>(cells * per_cell),
                    "cell_disorder: realization does not match the geometry");
    const double a2 = geom.lattice_constant_nm * geom.lattice_constant_nm;
    std::vector<CellDisorder> out(static_cast<std::size_t>(cells));
    CounterRng phases(realization.seed, derive_stream(StreamPurpose::cell_phase, realization.realization_index));
    for (long c = 0; c < cells; ++c) {
        double sum = 0.0;
        for (int h = 0; h < per_cell; ++h) {
            const auto& d = realization.displacements[static_cast<std::size_t>(c * per_cell + h)];
            sum += d.dx_nm * d.dx_nm + d.dy_nm * d.dy_nm;
        }
        auto& cell = out[static_cast<std::size_t>(c)];
        cell.sigma_eff_sq = sum / (2.0 * per_cell * a2);
        cell.phase = 2.0 * std::numbers::pi * phases.uniform();
    }
    return out;
}

inline double cell_reflectance(const ScatteringModel& scattering, double sigma_eff_sq, double group_idx) {
    const double r = scattering.kappa * sigma_eff_sq * std::pow(group_idx, scattering.backscatter_exponent);
    return std::clamp(r, 0.0, kMaxCellReflectance);
}

/// Per-cell scattering at one wavelength from precomputed cell disorder.
inline std::vector<CellScattering> build_cells(std::span<const CellDisorder> disorder, const WaveguideGeometry& geom,
                                               const DispersionModel& model, const ScatteringModel& scattering,
                                               double wavelength_nm) {
    scattering.validate();
    const double ng = group_index(model, wavelength_nm);
    const double phase = bloch_wavenumber(model, wavelength_nm, geom.lattice_constant_nm) * geom.lattice_constant_nm * 1e-9;
    std::vector<CellScattering> cells;
    cells.reserve(disorder.size());
    for (const auto& d : disorder)
        cells.push_back(CellScattering::make(cell_reflectance(scattering, d.sigma_eff_sq, ng), d.phase, phase,
                                             scattering.loss_per_cell));
    return cells;
}

inline std::vector<CellScattering> build_cells(const WaveguideGeometry& geom, const DisorderRealization& realization,
                                               const DispersionModel& model, const ScatteringModel& scattering,
                                               double wavelength_nm) {
    const auto disorder = cell_disorder(geom, realization);
    return build_cells(disorder, geom, model, scattering, wavelength_nm);
}

/// Scattering solution of a cell stack at one wavelength.
struct CascadeSolution {
    double transmission = 0.0;             // left incidence
    double log_transmission = 0.0;         // ln T, finite even when T underflows
    double reflection = 0.0;
    double loss = 0.0;                     // sum of per-cell flux drops
    double transmission_from_right = 0.0;
    std::vector<double> boundary_intensity;  // |a+|^2 + |a-|^2 at boundaries 0..N, incident flux 1
};

namespace detail {

inline constexpr double kRenormThreshold = 1e150;

struct ScaledVector {
    Complex forward, backward;
    double log_scale = 0.0;

    void renormalize() {
        const double mag = std::max(std::abs(forward), std::abs(backward));
        if (mag > kRenormThreshold) {
            forward /= mag;
            backward /= mag;
            log_scale += std::log(mag);
        }
    }
};

}  // namespace detail

/// Cascades the cell transfer matrices. Left incidence is solved by
/// back-propagating the purely outgoing right-side state; right incidence by
/// forward propagation from the left. Amplitudes are rescaled whenever they
/// exceed 1e150, with the scale tracked in log form.
inline CascadeSolution solve_cascade(std::span<const CellScattering> cells, bool keep_profile = true) {
    detail::require(!cells.empty(), "solve_cascade: need at least one cell");
    const std::size_t n = cells.size();
    std::vector<detail::ScaledVector> states(n + 1);
    states[n] = {Complex(1.0), Complex(0.0), 0.0};
    for (std::size_t j = n; j-- > 0;) {
        const Transfer2& m = cells[j].transfer;
        const Complex det = m.determinant();
        const auto& next = states[j + 1];
        detail::ScaledVector v{(m.m22 * next.forward - m.m12 * next.backward) / det,
                               (-m.m21 * next.forward + m.m11 * next.backward) / det, next.log_scale};
        v.renormalize();
        states[j] = v;
    }

    CascadeSolution sol;
    const auto& in = states[0];
    const double log_incident = std::log(std::abs(in.forward)) + in.log_scale;
    sol.log_transmission = -2.0 * log_incident;
    sol.transmission = std::exp(sol.log_transmission);
    sol.reflection = std::norm(in.backward / in.forward);

    double previous_flux = 0.0;
    if (keep_profile) sol.boundary_intensity.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const auto& s = states[j];
        const double factor = std::exp(2.0 * (s.log_scale - log_incident));
        const double forward = std::norm(s.forward) * factor;
        const double backward = std::norm(s.backward) * factor;
        if (keep_profile) sol.boundary_intensity[j] = forward + backward;
        const double flux = forward - backward;
        if (j > 0) sol.loss += previous_flux - flux;
        previous_flux = flux;
    }

    detail::ScaledVector v{Complex(0.0), Complex(1.0), 0.0};
    for (std::size_t j = 0; j < n; ++j) {
        const Transfer2& m = cells[j].transfer;
        detail::ScaledVector w{m.m11 * v.forward + m.m12 * v.backward, m.m21 * v.forward + m.m22 * v.backward,
                               v.log_scale};
        w.renormalize();
        v = w;
    }
    sol.transmission_from_right = std::exp(-2.0 * (std::log(std::abs(v.backward)) + v.log_scale));
    return sol;
}

/// A localized-mode resonance detected in a simulated spectrum.
struct ModeResonance {
    double center_nm = 0.0;
    double q = 0.0;
    double fwhm_nm = 0.0;
    double peak_intensity = 0.0;
    double centroid_um = 0.0;
    double extent_um = 0.0;  // participation length of the intensity profile
    bool resolved = true;
};

struct TransportResult {
    std::vector<double> wavelength_nm;
    std::vector<double> transmission;
    std::vector<double> log_transmission;
    std::vector<double> reflection;
    std::vector<double> loss;
    std::vector<double> mean_intensity;                // spatial average of the cell intensity per wavelength
    std::vector<double> cell_position_um;              // cell centres
    std::vector<std::vector<double>> cell_intensity;   // [wavelength][cell]
    std::vector<double> bin_center_um;
    std::vector<std::vector<double>> binned_intensity; // [wavelength][spatial bin]
    std::vector<ModeResonance> resonances;
};

struct TransportOptions {
    double spatial_bin_um = 1.0;
    bool detect_resonances = true;
    double instrument_fwhm_nm = 0.0;  // the simulated spectra carry no instrument broadening
    double min_prominence_ratio = 0.5;
};

inline std::vector<ModeResonance> find_resonances(const TransportResult& result, double instrument_fwhm_nm,
                                                  double min_prominence_ratio = 0.5);

/// Transmission and intensity spectra on `wavelength_grid`, with
/// `cells_at(wavelength)` supplying the cell stack at each wavelength.
/// `cell_length_um` places cells along the waveguide for binning.
template <class CellsAt>
TransportResult transmission_spectrum(CellsAt&& cells_at, std::span<const double> wavelength_grid,
                                      double cell_length_um, const TransportOptions& options = {}) {
    detail::require(!wavelength_grid.empty(), "transmission_spectrum: empty wavelength grid");
    detail::require(cell_length_um > 0.0 && options.spatial_bin_um > 0.0,
                    "transmission_spectrum: cell length and spatial bin must be positive");
    TransportResult result;
    result.wavelength_nm.assign(wavelength_grid.begin(), wavelength_grid.end());

    std::vector<std::size_t> bin_of_cell;
    for (double lambda : wavelength_grid) {
        const std::vector<CellScattering> cells = cells_at(lambda);
        const auto sol = solve_cascade(cells, true);
        const std::size_t n = cells.size();
        if (result.cell_position_um.empty()) {
            result.cell_position_um.resize(n);
            bin_of_cell.resize(n);
            std::size_t bins = 0;
            for (std::size_t j = 0; j < n; ++j) {
                result.cell_position_um[j] = (static_cast<double>(j) + 0.5) * cell_length_um;
                bin_of_cell[j] = static_cast<std::size_t>(std::floor(result.cell_position_um[j] / options.spatial_bin_um));
                bins = std::max(bins, bin_of_cell[j] + 1);
            }
            result.bin_center_um.resize(bins);
            for (std::size_t b = 0; b < bins; ++b)
                result.bin_center_um[b] = (static_cast<double>(b) + 0.5) * options.spatial_bin_um;
        }
        detail::require(n == result.cell_position_um.size(), "transmission_spectrum: cell count changed with wavelength");

        // intensity of cell j is taken at its left boundary
        std::vector<double> cell_i(sol.boundary_intensity.begin(), sol.boundary_intensity.begin() + static_cast<std::ptrdiff_t>(n));
        std::vector<double> sum(result.bin_center_um.size(), 0.0), count(result.bin_center_um.size(), 0.0);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            sum[bin_of_cell[j]] += cell_i[j];
            count[bin_of_cell[j]] += 1.0;
            total += cell_i[j];
        }
        for (std::size_t b = 0; b < sum.size(); ++b) sum[b] = count[b] > 0.0 ? sum[b] / count[b] : 0.0;

        result.transmission.push_back(sol.transmission);
        result.log_transmission.push_back(sol.log_transmission);
        result.reflection.push_back(sol.reflection);
        result.loss.push_back(sol.loss);
        result.mean_intensity.push_back(total / static_cast<double>(n));
        result.cell_intensity.push_back(std::move(cell_i));
        result.binned_intensity.push_back(std::move(sum));
    }
    if (options.detect_resonances)
        result.resonances = find_resonances(result, options.instrument_fwhm_nm, options.min_prominence_ratio);
    return result;
}

/// Fixed (wavelength-independent) stack.
inline TransportResult transmission_spectrum(std::span<const CellScattering> cells, std::span<const double> wavelength_grid,
                                             double cell_length_um, const TransportOptions& options = {}) {
    const std::vector<CellScattering> stack(cells.begin(), cells.end());
    return transmission_spectrum([&](double) { return stack; }, wavelength_grid, cell_length_um, options);
}

/// Full disordered-waveguide spectrum for one realization.
inline TransportResult simulate_waveguide(const WaveguideGeometry& geom, const DisorderRealization& realization,
                                          const DispersionModel& model, const ScatteringModel& scattering,
                                          std::span<const double> wavelength_grid, const TransportOptions& options = {}) {
    const auto disorder = cell_disorder(geom, realization);
    return transmission_spectrum(
        [&](double lambda) { return build_cells(disorder, geom, model, scattering, lambda); }, wavelength_grid,
        geom.lattice_constant_um(), options);
}

/// Resonances of the spatially averaged intensity spectrum. Each peak is
/// fitted with a single Voigt line (Gaussian width = instrument FWHM) on the
/// samples between its bases; peaks spanning fewer than two grid steps are
/// reported unresolved with Q set to the grid-limited lower bound.
inline std::vector<ModeResonance> find_resonances(const TransportResult& result, double instrument_fwhm_nm,
                                                  double min_prominence_ratio) {
    detail::require(instrument_fwhm_nm >= 0.0, "find_resonances: instrument FWHM must be non-negative");
    std::vector<ModeResonance> out;
    const auto& x = result.wavelength_nm;
    const auto& y = result.mean_intensity;
    if (x.size() < 5) return out;
    const double step = (x.back() - x.front()) / static_cast<double>(x.size() - 1);

    for (const auto& cand : find_peak_candidates(x, y, min_prominence_ratio)) {
        ModeResonance mode;
        mode.peak_intensity = cand.height;
        const double observed = cand.width_nm;
        if (observed < 2.0 * step) {
            mode.resolved = false;
            mode.center_nm = x[cand.index];
            mode.fwhm_nm = step;
            mode.q = mode.center_nm / step;
        } else {
            const double half_window = std::max(3.0 * observed, 6.0 * step);
            std::size_t lo = cand.index, hi = cand.index;
            while (lo > 0 && x[cand.index] - x[lo - 1] <= half_window && lo > cand.left_base) --lo;
            while (hi + 1 < x.size() && x[hi + 1] - x[cand.index] <= half_window && hi < cand.right_base) ++hi;
            if (hi - lo + 1 < 7) {
                lo = cand.index >= 3 ? cand.index - 3 : 0;
                hi = std::min(x.size() - 1, cand.index + 3);
            }
            const std::span<const double> xs(x.data() + lo, hi - lo + 1);
            const std::span<const double> ys(y.data() + lo, hi - lo + 1);
            try {
                const auto fit = fit_spectrum(xs, ys, 1, instrument_fwhm_nm);
                const auto& p = fit.peaks.front();
                if (fit.converged && p.center_nm >= xs.front() && p.center_nm <= xs.back()) {
                    mode.center_nm = p.center_nm;
                    mode.fwhm_nm = p.fwhm_nm;
                    mode.q = p.q;
                    mode.resolved = !p.unresolved;
                } else {
                    mode.center_nm = x[cand.index];
                    mode.fwhm_nm = lorentz_fwhm_from_voigt(observed, instrument_fwhm_nm);
                    mode.q = mode.center_nm / mode.fwhm_nm;
                }
            } catch (const InvalidParameter&) {
                mode.center_nm = x[cand.index];
                mode.fwhm_nm = observed;
                mode.q = mode.center_nm / observed;
            }
        }
        const auto& profile = result.cell_intensity[cand.index];
        double w = 0.0, wx = 0.0, w2 = 0.0;
        for (std::size_t j = 0; j < profile.size(); ++j) {
            w += profile[j];
            wx += profile[j] * result.cell_position_um[j];
            w2 += profile[j] * profile[j];
        }
        const double cell_length = result.cell_position_um.size() > 1
                                       ? result.cell_position_um[1] - result.cell_position_um[0]
                                       : 2.0 * result.cell_position_um[0];
        mode.centroid_um = w > 0.0 ? wx / w : 0.0;
        mode.extent_um = w2 > 0.0 ? w * w / w2 * cell_length : 0.0;
        out.push_back(mode);
    }
    return out;
}

/// ln T samples of an ensemble at one waveguide length.
struct LengthEnsemble {
    double length_um = 0.0;
    std::vector<double> log_transmission;
};

struct LocalizationLength {
    double xi_um = std::numeric_limits<double>::infinity();
    double standard_error_um = std::numeric_limits<double>::infinity();
    double slope_per_um = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    bool unbounded = true;
    std::vector<double> mean_log_transmission;  // per input length
};

namespace detail {

/// Pairwise (cascade) summation; result independent of evaluation schedule.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace detail

/// Localization length from the linear fit <ln T> = c - L / xi.
inline LocalizationLength localization_length(std::span<const LengthEnsemble> ensembles) {
    std::vector<double> lengths;
    for (const auto& e : ensembles) {
        if (e.log_transmission.size() < 20)
            throw InvalidParameter("localization_length: need at least 20 realizations per length");
        if (std::find(lengths.begin(), lengths.end(), e.length_um) == lengths.end()) lengths.push_back(e.length_um);
    }
    if (lengths.size() < 2) throw InvalidParameter("localization_length: need at least two distinct lengths");

    LocalizationLength out;
    const std::size_t m = ensembles.size();
    std::vector<double> xs(m), ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = ensembles[i].length_um;
        ys[i] = detail::pairwise_sum(ensembles[i].log_transmission) / static_cast<double>(ensembles[i].log_transmission.size());
    }
    out.mean_log_transmission = ys;
    const double mx = detail::pairwise_sum(xs) / m, my = detail::pairwise_sum(ys) / m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    out.slope_per_um = sxy / sxx;
    out.intercept = my - out.slope_per_um * mx;
    out.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    // a flat fit (no decay within rounding) is treated as unbounded
    if (out.slope_per_um >= -1e-12) return out;

    out.unbounded = false;
    out.xi_um = -1.0 / out.slope_per_um;
    // slope error propagated from the standard error of each ensemble mean
    double slope_var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& samples = ensembles[i].log_transmission;
        double ss = 0.0;
        for (double v : samples) ss += (v - ys[i]) * (v - ys[i]);
        const double k = static_cast<double>(samples.size());
        const double mean_var = ss / (k - 1.0) / k;
        slope_var += (xs[i] - mx) * (xs[i] - mx) * mean_var;
    }
    slope_var /= sxx * sxx;
    out.standard_error_um = std::sqrt(slope_var) / (out.slope_per_um * out.slope_per_um);
    return out;
}

}  // namespace alqed
