#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "alqed/errors.hpp"

namespace alqed {

/// Spectral line shifting linearly with temperature.
struct TunableLine {
    double wavelength_nm = 950.0;  // at the reference temperature
    double slope_nm_per_k = 0.01;

    double at(double temperature_k, double reference_k) const {
        return wavelength_nm + slope_nm_per_k * (temperature_k - reference_k);
    }
};

/// QD and cavity lines versus temperature. QD lines tune faster than the
/// cavity, which is what lets a QD cross a localized mode.
struct TuningModel {
    TunableLine qd{949.5, 0.05};
    TunableLine cavity{950.0, 0.01};
    double reference_temperature_k = 10.0;
};

struct TuningRow {
    double temperature_k = 0.0;
    double qd_nm = 0.0;
    double cavity_nm = 0.0;
    double detuning_nm = 0.0;  // qd - cavity
};

struct CrossingResult {
    double crossing_temperature_k = 0.0;
    bool in_range = false;
    std::vector<TuningRow> table;
};

/// Temperature at which the two lines meet, and the detuning table on
/// [t_min, t_max] with step t_step. A crossing outside the range is reported
/// with in_range = false.
inline CrossingResult temperature_crossing(const TuningModel& model, double t_min, double t_max, double t_step) {
    const double relative = model.qd.slope_nm_per_k - model.cavity.slope_nm_per_k;
    if (relative == 0.0) throw InvalidParameter("temperature_crossing: parallel tuning lines never cross");
    detail::require(t_max >= t_min && t_step > 0.0, "temperature_crossing: invalid temperature grid");

    CrossingResult out;
    out.crossing_temperature_k =
        model.reference_temperature_k + (model.cavity.wavelength_nm - model.qd.wavelength_nm) / relative;
    out.in_range = out.crossing_temperature_k >= t_min && out.crossing_temperature_k <= t_max;
    const auto steps = static_cast<long>(std::floor((t_max - t_min) / t_step + 1e-9));
    for (long i = 0; i <= steps; ++i) {
        const double t = t_min + static_cast<double>(i) * t_step;
        TuningRow row{t, model.qd.at(t, model.reference_temperature_k), model.cavity.at(t, model.reference_temperature_k), 0.0};
        row.detuning_nm = row.qd_nm - row.cavity_nm;
        out.table.push_back(row);
    }
    return out;
}

}  // namespace alqed
