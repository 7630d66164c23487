#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alqed/decay.hpp"
#include "alqed/dispersion.hpp"
#include "alqed/errors.hpp"
#include "alqed/format.hpp"
#include "alqed/geometry.hpp"
#include "alqed/qed.hpp"
#include "alqed/stats.hpp"
#include "alqed/transport.hpp"
#include "alqed/tuning.hpp"

namespace alqed {

inline constexpr const char* kToolkitVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

struct DisorderConfig {
    std::vector<double> sigma{0.03};
    int realizations = 20;
    std::uint64_t seed = 2010;
};

struct DispersionConfig {
    double cutoff_nm = 985.0;
    std::optional<double> curvature;  // empty = calibrate from the two values below
    double calibration_offset_nm = 5.0;
    double calibration_group_index = 30.0;
    double group_index_clamp = 80.0;
};

struct TransportConfig {
    std::optional<double> kappa;  // empty = calibrate to calibration_xi_um
    double calibration_xi_um = 10.0;
    double calibration_sigma = 0.06;
    double calibration_group_index = 30.0;
    double backscatter_exponent = 2.0;
    double loss_per_cell = 0.0;
    double wavelength_start_nm = 965.0;
    double wavelength_stop_nm = 984.0;
    double wavelength_step_nm = 0.02;
    double spatial_bin_um = 1.0;
};

struct StatisticsConfig {
    double window_start_nm = 968.0;
    double window_stop_nm = 981.0;
    double spatial_bin_um = 1.0;
    Normalization normalization = Normalization::pooled;
    int bootstrap_resamples = 1000;
};

struct ExtraCavity {
    double detuning_nm = 0.0;
    double q = 0.0;
    double volume_um3 = 0.0;
};

struct QedConfig {
    double cavity_wavelength_nm = 950.0;
    double q = 4200.0;
    double mode_volume_um3 = 1.0;
    double dipole_overlap = 1.0;
    double gamma_homogeneous = 1.1;
    double gamma_on = 7.9;
    double gamma_off = 0.5;
    double gamma_nonradiative = 0.1;
    double gamma_radiation = 0.2;
    double gamma_waveguide = 0.2;
    std::optional<double> ng_reference;  // empty = n_g at the cavity wavelength
    double width_um = 1.3;
    double height_um = 0.0308;
    double detuning_start_nm = -10.0;
    double detuning_stop_nm = 10.0;
    double detuning_step_nm = 0.02;
    std::vector<ExtraCavity> extra_cavities;
};

struct AnalysisConfig {
    double irf_temporal_ps = 50.0;
    double irf_spectral_nm = 0.15;
    double repetition_rate_mhz = 75.0;
    double bin_ps = 50.0;
    double cycles = 1e6;
    int components = 2;
    std::vector<double> rate_grid{0.3, 0.5, 1.1, 2.0, 4.0, 7.9};
    int seeds = 10;
    double amplitude = 0.01;   // detected photons per cycle of the fast component
    double background = 1.0;   // counts per bin
    double slow_rate = 0.5;    // residual component of the on-resonance curve
    double slow_fraction = 0.1;
    double rate_tolerance = 0.1;
    double failure_threshold = 0.1;
    bool noiseless = false;
    double spectral_q = 4200.0;
    double spectral_wavelength_nm = 950.0;
    double spectral_step_nm = 0.01;
    double spectral_noise = 0.01;  // relative Gaussian noise on the synthetic spectrum
    double spectral_tolerance = 0.05;
    double beta_tolerance = 0.02;
};

struct OutputConfig {
    std::string directory = "alqed_out";
    std::vector<std::string> formats{"csv", "json"};
};

/// Every parameter of an end-to-end run. Default values reproduce the
/// experiment being modelled (the "paper" preset).
struct ExperimentConfig {
    WaveguideGeometry geometry;
    DisorderConfig disorder;
    DispersionConfig dispersion;
    TransportConfig transport;
    StatisticsConfig statistics;
    QedConfig qed;
    TuningModel tuning;
    double tuning_start_k = 10.0;
    double tuning_stop_k = 60.0;
    double tuning_step_k = 5.0;
    AnalysisConfig analysis;
    OutputConfig output;
    int jobs = 1;

    DispersionModel dispersion_model() const {
        if (dispersion.curvature) {
            DispersionModel m{dispersion.cutoff_nm, *dispersion.curvature, dispersion.group_index_clamp};
            m.validate();
            return m;
        }
        return DispersionModel::calibrated(dispersion.cutoff_nm, dispersion.calibration_offset_nm,
                                           dispersion.calibration_group_index, dispersion.group_index_clamp);
    }

    ScatteringModel scattering_model() const {
        ScatteringModel s;
        s.backscatter_exponent = transport.backscatter_exponent;
        s.loss_per_cell = transport.loss_per_cell;
        s.kappa = transport.kappa ? *transport.kappa
                                  : ScatteringModel::calibrate_kappa(geometry.lattice_constant_nm, transport.calibration_sigma,
                                                                     transport.calibration_group_index,
                                                                     transport.calibration_xi_um,
                                                                     transport.backscatter_exponent);
        s.validate();
        return s;
    }

    std::vector<double> wavelength_grid() const {
        return make_grid(transport.wavelength_start_nm, transport.wavelength_stop_nm, transport.wavelength_step_nm);
    }

    std::vector<double> detuning_grid() const {
        return make_grid(qed.detuning_start_nm, qed.detuning_stop_nm, qed.detuning_step_nm);
    }

    CavityMode primary_cavity() const {
        return {qed.q, qed.mode_volume_um3, qed.cavity_wavelength_nm, geometry.refractive_index};
    }

    std::vector<CavityMode> cavities() const {
        std::vector<CavityMode> out{primary_cavity()};
        for (const auto& e : qed.extra_cavities)
            out.push_back({e.q, e.volume_um3, qed.cavity_wavelength_nm + e.detuning_nm, geometry.refractive_index});
        return out;
    }

    QdEmitter emitter() const { return {qed.cavity_wavelength_nm, qed.dipole_overlap, qed.gamma_homogeneous}; }

    BackgroundModel background_model() const {
        BackgroundModel b;
        b.gamma_nonradiative = qed.gamma_nonradiative;
        b.gamma_radiation = qed.gamma_radiation;
        b.gamma_waveguide = qed.gamma_waveguide;
        b.dispersion = dispersion_model();
        b.ng_reference = qed.ng_reference ? *qed.ng_reference : group_index(*b.dispersion, qed.cavity_wavelength_nm);
        return b;
    }

    InstrumentResponse instrument() const { return {analysis.irf_temporal_ps, analysis.irf_spectral_nm}; }

    static std::vector<double> make_grid(double start, double stop, double step) {
        std::vector<double> out;
        const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
        return out;
    }

    /// Fail-fast check of every block; collects all field-level problems.
    void validate() const;

    /// Canonical INI text (fixed key order, shortest round-trip numbers).
    std::string to_ini() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty() || !std::isfinite(value))
        throw ConfigError(key + ": expected a number, got '" + t + "'");
    return value;
}

inline std::int64_t parse_integer(const std::string& key, const std::string& text) {
    const double v = parse_double(key, text);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return static_cast<std::int64_t>(v);
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(key + ": expected a non-negative integer, got '" + t + "'");
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + t + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
    return out;
}

inline std::optional<double> parse_auto(const std::string& key, const std::string& text) {
    if (trim(text) == "auto") return std::nullopt;
    return parse_double(key, text);
}

inline std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + format_double(values[i]);
    return out;
}

inline std::string auto_or(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

/// Key table: section.key -> (setter, getter).
struct ConfigField {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
    using C = ExperimentConfig;
    static const std::vector<std::pair<std::string, ConfigField>> fields = [] {
        std::vector<std::pair<std::string, ConfigField>> f;
        auto number = [&f](const std::string& key, auto member) {
            f.push_back({key, {[key, member](C& c, const std::string& v) { member(c) = parse_double(key, v); },
                               [member](const C& c) { return format_double(member(const_cast<C&>(c))); }}});
        };
        auto optional_number = [&f](const std::string& key, auto member) {
            f.push_back({key, {[key, member](C& c, const std::string& v) { member(c) = parse_auto(key, v); },
                               [member](const C& c) { return auto_or(member(const_cast<C&>(c))); }}});
        };
        auto integer = [&f](const std::string& key, auto member) {
            f.push_back({key, {[key, member](C& c, const std::string& v) {
                                   member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_integer(key, v));
                               },
                               [member](const C& c) { return std::to_string(member(const_cast<C&>(c))); }}});
        };
        auto list = [&f](const std::string& key, auto member) {
            f.push_back({key, {[key, member](C& c, const std::string& v) { member(c) = parse_double_list(key, v); },
                               [member](const C& c) { return join(member(const_cast<C&>(c))); }}});
        };

        number("geometry.lattice_constant_nm", [](C& c) -> double& { return c.geometry.lattice_constant_nm; });
        number("geometry.hole_radius_nm", [](C& c) -> double& { return c.geometry.hole_radius_nm; });
        number("geometry.membrane_thickness_nm", [](C& c) -> double& { return c.geometry.membrane_thickness_nm; });
        number("geometry.length_um", [](C& c) -> double& { return c.geometry.length_um; });
        number("geometry.refractive_index", [](C& c) -> double& { return c.geometry.refractive_index; });
        integer("geometry.rows_perturbed", [](C& c) -> int& { return c.geometry.rows_perturbed; });

        list("disorder.sigma", [](C& c) -> std::vector<double>& { return c.disorder.sigma; });
        integer("disorder.realizations", [](C& c) -> int& { return c.disorder.realizations; });
        f.push_back({"disorder.seed",
                     {[](C& c, const std::string& v) { c.disorder.seed = parse_unsigned("disorder.seed", v); },
                      [](const C& c) { return std::to_string(c.disorder.seed); }}});

        number("dispersion.cutoff_nm", [](C& c) -> double& { return c.dispersion.cutoff_nm; });
        optional_number("dispersion.curvature", [](C& c) -> std::optional<double>& { return c.dispersion.curvature; });
        number("dispersion.calibration_offset_nm", [](C& c) -> double& { return c.dispersion.calibration_offset_nm; });
        number("dispersion.calibration_group_index", [](C& c) -> double& { return c.dispersion.calibration_group_index; });
        number("dispersion.group_index_clamp", [](C& c) -> double& { return c.dispersion.group_index_clamp; });

        optional_number("transport.kappa", [](C& c) -> std::optional<double>& { return c.transport.kappa; });
        number("transport.calibration_xi_um", [](C& c) -> double& { return c.transport.calibration_xi_um; });
        number("transport.calibration_sigma", [](C& c) -> double& { return c.transport.calibration_sigma; });
        number("transport.calibration_group_index", [](C& c) -> double& { return c.transport.calibration_group_index; });
        number("transport.backscatter_exponent", [](C& c) -> double& { return c.transport.backscatter_exponent; });
        number("transport.loss_per_cell", [](C& c) -> double& { return c.transport.loss_per_cell; });
        number("transport.wavelength_start_nm", [](C& c) -> double& { return c.transport.wavelength_start_nm; });
        number("transport.wavelength_stop_nm", [](C& c) -> double& { return c.transport.wavelength_stop_nm; });
        number("transport.wavelength_step_nm", [](C& c) -> double& { return c.transport.wavelength_step_nm; });
        number("transport.spatial_bin_um", [](C& c) -> double& { return c.transport.spatial_bin_um; });

        number("statistics.window_start_nm", [](C& c) -> double& { return c.statistics.window_start_nm; });
        number("statistics.window_stop_nm", [](C& c) -> double& { return c.statistics.window_stop_nm; });
        number("statistics.spatial_bin_um", [](C& c) -> double& { return c.statistics.spatial_bin_um; });
        f.push_back({"statistics.normalization",
                     {[](C& c, const std::string& v) {
                          const auto t = trim(v);
                          if (t == "pooled") c.statistics.normalization = Normalization::pooled;
                          else if (t == "per_wavelength") c.statistics.normalization = Normalization::per_wavelength;
                          else throw ConfigError("statistics.normalization: expected pooled or per_wavelength, got '" + t + "'");
                      },
                      [](const C& c) {
                          return std::string(c.statistics.normalization == Normalization::pooled ? "pooled" : "per_wavelength");
                      }}});
        integer("statistics.bootstrap_resamples", [](C& c) -> int& { return c.statistics.bootstrap_resamples; });

        number("qed.cavity_wavelength_nm", [](C& c) -> double& { return c.qed.cavity_wavelength_nm; });
        number("qed.q", [](C& c) -> double& { return c.qed.q; });
        number("qed.mode_volume_um3", [](C& c) -> double& { return c.qed.mode_volume_um3; });
        number("qed.dipole_overlap", [](C& c) -> double& { return c.qed.dipole_overlap; });
        number("qed.gamma_homogeneous", [](C& c) -> double& { return c.qed.gamma_homogeneous; });
        number("qed.gamma_on", [](C& c) -> double& { return c.qed.gamma_on; });
        number("qed.gamma_off", [](C& c) -> double& { return c.qed.gamma_off; });
        number("qed.gamma_nonradiative", [](C& c) -> double& { return c.qed.gamma_nonradiative; });
        number("qed.gamma_radiation", [](C& c) -> double& { return c.qed.gamma_radiation; });
        number("qed.gamma_waveguide", [](C& c) -> double& { return c.qed.gamma_waveguide; });
        optional_number("qed.ng_reference", [](C& c) -> std::optional<double>& { return c.qed.ng_reference; });
        number("qed.width_um", [](C& c) -> double& { return c.qed.width_um; });
        number("qed.height_um", [](C& c) -> double& { return c.qed.height_um; });
        number("qed.detuning_start_nm", [](C& c) -> double& { return c.qed.detuning_start_nm; });
        number("qed.detuning_stop_nm", [](C& c) -> double& { return c.qed.detuning_stop_nm; });
        number("qed.detuning_step_nm", [](C& c) -> double& { return c.qed.detuning_step_nm; });
        // extra cavities as three parallel lists
        f.push_back({"qed.extra_cavity_detuning_nm",
                     {[](C& c, const std::string& v) {
                          const auto d = parse_double_list("qed.extra_cavity_detuning_nm", v);
                          c.qed.extra_cavities.resize(d.size());
                          for (std::size_t i = 0; i < d.size(); ++i) c.qed.extra_cavities[i].detuning_nm = d[i];
                      },
                      [](const C& c) {
                          std::vector<double> d;
                          for (const auto& e : c.qed.extra_cavities) d.push_back(e.detuning_nm);
                          return join(d);
                      }}});
        f.push_back({"qed.extra_cavity_q",
                     {[](C& c, const std::string& v) {
                          const auto d = parse_double_list("qed.extra_cavity_q", v);
                          if (d.size() != c.qed.extra_cavities.size())
                              throw ConfigError("qed.extra_cavity_q: one value per extra cavity detuning required");
                          for (std::size_t i = 0; i < d.size(); ++i) c.qed.extra_cavities[i].q = d[i];
                      },
                      [](const C& c) {
                          std::vector<double> d;
                          for (const auto& e : c.qed.extra_cavities) d.push_back(e.q);
                          return join(d);
                      }}});
        f.push_back({"qed.extra_cavity_volume_um3",
                     {[](C& c, const std::string& v) {
                          const auto d = parse_double_list("qed.extra_cavity_volume_um3", v);
                          if (d.size() != c.qed.extra_cavities.size())
                              throw ConfigError("qed.extra_cavity_volume_um3: one value per extra cavity detuning required");
                          for (std::size_t i = 0; i < d.size(); ++i) c.qed.extra_cavities[i].volume_um3 = d[i];
                      },
                      [](const C& c) {
                          std::vector<double> d;
                          for (const auto& e : c.qed.extra_cavities) d.push_back(e.volume_um3);
                          return join(d);
                      }}});

        number("tuning.reference_temperature_k", [](C& c) -> double& { return c.tuning.reference_temperature_k; });
        number("tuning.qd_wavelength_nm", [](C& c) -> double& { return c.tuning.qd.wavelength_nm; });
        number("tuning.qd_slope_nm_per_k", [](C& c) -> double& { return c.tuning.qd.slope_nm_per_k; });
        number("tuning.cavity_wavelength_nm", [](C& c) -> double& { return c.tuning.cavity.wavelength_nm; });
        number("tuning.cavity_slope_nm_per_k", [](C& c) -> double& { return c.tuning.cavity.slope_nm_per_k; });
        number("tuning.temperature_start_k", [](C& c) -> double& { return c.tuning_start_k; });
        number("tuning.temperature_stop_k", [](C& c) -> double& { return c.tuning_stop_k; });
        number("tuning.temperature_step_k", [](C& c) -> double& { return c.tuning_step_k; });

        number("analysis.irf_temporal_ps", [](C& c) -> double& { return c.analysis.irf_temporal_ps; });
        number("analysis.irf_spectral_nm", [](C& c) -> double& { return c.analysis.irf_spectral_nm; });
        number("analysis.repetition_rate_mhz", [](C& c) -> double& { return c.analysis.repetition_rate_mhz; });
        number("analysis.bin_ps", [](C& c) -> double& { return c.analysis.bin_ps; });
        number("analysis.cycles", [](C& c) -> double& { return c.analysis.cycles; });
        integer("analysis.components", [](C& c) -> int& { return c.analysis.components; });
        list("analysis.rate_grid", [](C& c) -> std::vector<double>& { return c.analysis.rate_grid; });
        integer("analysis.seeds", [](C& c) -> int& { return c.analysis.seeds; });
        number("analysis.amplitude", [](C& c) -> double& { return c.analysis.amplitude; });
        number("analysis.background", [](C& c) -> double& { return c.analysis.background; });
        number("analysis.slow_rate", [](C& c) -> double& { return c.analysis.slow_rate; });
        number("analysis.slow_fraction", [](C& c) -> double& { return c.analysis.slow_fraction; });
        number("analysis.rate_tolerance", [](C& c) -> double& { return c.analysis.rate_tolerance; });
        number("analysis.failure_threshold", [](C& c) -> double& { return c.analysis.failure_threshold; });
        f.push_back({"analysis.noiseless",
                     {[](C& c, const std::string& v) { c.analysis.noiseless = parse_bool("analysis.noiseless", v); },
                      [](const C& c) { return std::string(c.analysis.noiseless ? "true" : "false"); }}});
        number("analysis.spectral_q", [](C& c) -> double& { return c.analysis.spectral_q; });
        number("analysis.spectral_wavelength_nm", [](C& c) -> double& { return c.analysis.spectral_wavelength_nm; });
        number("analysis.spectral_step_nm", [](C& c) -> double& { return c.analysis.spectral_step_nm; });
        number("analysis.spectral_noise", [](C& c) -> double& { return c.analysis.spectral_noise; });
        number("analysis.spectral_tolerance", [](C& c) -> double& { return c.analysis.spectral_tolerance; });
        number("analysis.beta_tolerance", [](C& c) -> double& { return c.analysis.beta_tolerance; });

        f.push_back({"output.directory", {[](C& c, const std::string& v) { c.output.directory = trim(v); },
                                          [](const C& c) { return c.output.directory; }}});
        f.push_back({"output.formats",
                     {[](C& c, const std::string& v) {
                          c.output.formats = split_list(v);
                          for (const auto& fmt : c.output.formats)
                              if (fmt != "csv" && fmt != "json")
                                  throw ConfigError("output.formats: unknown format '" + fmt + "' (csv, json)");
                      },
                      [](const C& c) {
                          std::string out;
                          for (std::size_t i = 0; i < c.output.formats.size(); ++i) out += (i ? ", " : "") + c.output.formats[i];
                          return out;
                      }}});
        return f;
    }();
    return fields;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&problems](bool ok, const std::string& message) {
        if (!ok) problems.push_back(message);
    };
    auto guarded = [&problems](const std::string& field, const auto& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.push_back(field + ": " + e.what());
        }
    };

    guarded("geometry", [&] { geometry.validate(); });
    check(!disorder.sigma.empty(), "disorder.sigma: at least one value required");
    for (double s : disorder.sigma) check(s >= 0.0, "disorder.sigma: values must be non-negative");
    check(disorder.realizations >= 1, "disorder.realizations: must be >= 1");
    guarded("dispersion", [&] { (void)dispersion_model(); });
    guarded("transport", [&] { (void)scattering_model(); });
    check(transport.wavelength_step_nm > 0.0, "transport.wavelength_step_nm: must be positive");
    check(transport.wavelength_stop_nm >= transport.wavelength_start_nm, "transport.wavelength_stop_nm: must be >= start");
    check(transport.wavelength_stop_nm <= dispersion.cutoff_nm,
          "transport.wavelength_stop_nm: must not exceed the dispersion cutoff (no guided mode beyond it)");
    check(transport.wavelength_start_nm > 0.0, "transport.wavelength_start_nm: must be positive");
    check(transport.spatial_bin_um > 0.0, "transport.spatial_bin_um: must be positive");
    check(statistics.window_stop_nm >= statistics.window_start_nm, "statistics.window_stop_nm: must be >= start");
    check(statistics.spatial_bin_um > 0.0, "statistics.spatial_bin_um: must be positive");
    check(statistics.bootstrap_resamples >= 10, "statistics.bootstrap_resamples: must be >= 10");

    guarded("qed", [&] {
        for (const auto& c : cavities()) c.validate();
        emitter().validate();
        background_model().validate();
    });
    check(qed.gamma_on > 0.0, "qed.gamma_on: must be positive");
    check(qed.gamma_off >= 0.0 && qed.gamma_off <= qed.gamma_on, "qed.gamma_off: must lie in [0, gamma_on]");
    check(qed.width_um > 0.0, "qed.width_um: must be positive");
    check(qed.height_um > 0.0, "qed.height_um: must be positive");
    check(qed.detuning_step_nm > 0.0, "qed.detuning_step_nm: must be positive");
    check(qed.detuning_stop_nm >= qed.detuning_start_nm, "qed.detuning_stop_nm: must be >= start");
    check(qed.cavity_wavelength_nm + qed.detuning_stop_nm <= dispersion.cutoff_nm,
          "qed.detuning_stop_nm: emitter wavelength would pass the dispersion cutoff");
    for (const auto& e : qed.extra_cavities) check(e.q > 0.0 && e.volume_um3 > 0.0, "qed.extra_cavity_*: Q and volume must be positive");

    check(tuning.qd.slope_nm_per_k != tuning.cavity.slope_nm_per_k, "tuning: QD and cavity slopes must differ");
    check(tuning.cavity.slope_nm_per_k > 0.0 && tuning.qd.slope_nm_per_k > tuning.cavity.slope_nm_per_k,
          "tuning: QD slope must exceed the cavity slope, both positive");
    check(tuning_step_k > 0.0 && tuning_stop_k >= tuning_start_k, "tuning.temperature_*: invalid temperature grid");

    guarded("analysis", [&] { instrument().validate(); });
    check(analysis.repetition_rate_mhz > 0.0, "analysis.repetition_rate_mhz: must be positive");
    check(analysis.bin_ps > 0.0, "analysis.bin_ps: must be positive");
    check(analysis.cycles > 0.0, "analysis.cycles: must be positive");
    check(analysis.components >= 1 && analysis.components <= 4, "analysis.components: must lie in [1, 4]");
    check(!analysis.rate_grid.empty(), "analysis.rate_grid: at least one rate required");
    for (double r : analysis.rate_grid) check(r > 0.0, "analysis.rate_grid: rates must be positive");
    check(analysis.seeds >= 1, "analysis.seeds: must be >= 1");
    check(analysis.amplitude > 0.0, "analysis.amplitude: must be positive");
    check(analysis.background >= 0.0, "analysis.background: must be non-negative");
    check(analysis.slow_rate > 0.0 && analysis.slow_fraction >= 0.0, "analysis.slow_*: invalid residual component");
    check(analysis.rate_tolerance > 0.0, "analysis.rate_tolerance: must be positive");
    check(analysis.failure_threshold >= 0.0 && analysis.failure_threshold <= 1.0,
          "analysis.failure_threshold: must lie in [0, 1]");
    check(analysis.spectral_q > 0.0 && analysis.spectral_wavelength_nm > 0.0 && analysis.spectral_step_nm > 0.0,
          "analysis.spectral_*: must be positive");
    check(analysis.spectral_noise >= 0.0, "analysis.spectral_noise: must be non-negative");
    check(analysis.spectral_tolerance > 0.0 && analysis.beta_tolerance > 0.0, "analysis.*_tolerance: must be positive");
    check(!output.directory.empty(), "output.directory: must not be empty");
    check(jobs >= 1, "jobs: must be >= 1");

    if (!problems.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& p : problems) message += "\n  " + p;
        throw ConfigError(message);
    }
}

inline std::string ExperimentConfig::to_ini() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [key, field] : detail::config_fields()) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) os << '\n';
            os << '[' << sec << "]\n";
            section = sec;
        }
        const std::string value = field.get(*this);
        os << key.substr(dot + 1) << (value.empty() ? " =" : " = " + value) << '\n';
    }
    return os.str();
}

/// Applies INI text on top of `base`. Unknown sections or keys are errors.
inline ExperimentConfig apply_config_text(ExperimentConfig base, const std::string& text, const std::string& origin = "config") {
    boost::property_tree::ptree tree;
    std::istringstream is(text);
    try {
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
    }
    std::map<std::string, const detail::ConfigField*> lookup;
    for (const auto& [key, field] : detail::config_fields()) lookup[key] = &field;

    std::vector<std::string> unknown;
    // extra cavity lists depend on the detuning list being applied first
    std::vector<std::pair<std::string, std::string>> deferred;
    for (const auto& [section, children] : tree) {
        if (children.empty() && !children.data().empty()) {
            unknown.push_back(section + " (keys must live inside a [section])");
            continue;
        }
        for (const auto& [key, value] : children) {
            const std::string full = section + "." + key;
            const auto it = lookup.find(full);
            if (it == lookup.end()) {
                unknown.push_back(full);
                continue;
            }
            if (full == "qed.extra_cavity_q" || full == "qed.extra_cavity_volume_um3") {
                deferred.emplace_back(full, value.data());
                continue;
            }
            it->second->set(base, value.data());
        }
    }
    if (!unknown.empty()) {
        std::string message = origin + ": unknown configuration keys:";
        for (const auto& u : unknown) message += " " + u;
        throw ConfigError(message);
    }
    for (const auto& [full, value] : deferred) lookup[full]->set(base, value);
    return base;
}

inline ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open configuration file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return apply_config_text(std::move(base), buffer.str(), path);
}

}  // namespace alqed
