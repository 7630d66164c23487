#include <gtest/gtest.h>

#include <cmath>

#include "alqed/dispersion.hpp"

using namespace alqed;

namespace {

// wavelength whose offset from the cutoff frequency is `offset` rad/s
double wavelength_at_offset(const DispersionModel& m, double offset) {
    return 2.0 * std::numbers::pi * kSpeedOfLight / (m.cutoff_frequency() + offset) * 1e9;
}

}  // namespace

TEST(GroupIndex, QuadruplingDetuningHalvesGroupIndex) {
    DispersionModel m{985.0, 2.5, 1e6};
    for (double offset : {1e11, 1e12, 5e12}) {
        const double ng1 = group_index(m, wavelength_at_offset(m, offset));
        const double ng4 = group_index(m, wavelength_at_offset(m, 4.0 * offset));
        EXPECT_NEAR(ng1 / ng4, 2.0, 1e-6);
    }
}

TEST(GroupIndex, ClampAtCutoff) {
    DispersionModel m{985.0, 2.5, 80.0};
    EXPECT_EQ(group_index(m, 985.0), 80.0);
    EXPECT_EQ(group_index(m, 984.9999999), 80.0);
}

TEST(GroupIndex, BeyondCutoffIsBandGap) {
    DispersionModel m{985.0, 2.5, 80.0};
    EXPECT_THROW(group_index(m, 985.01), BandGapError);
    EXPECT_THROW(bloch_wavenumber(m, 990.0, 260.0), BandGapError);
}

TEST(GroupIndex, CalibrationReproducesSlowLightScale) {
    const auto m = DispersionModel::calibrated(985.0, 5.0, 30.0, 80.0);
    EXPECT_NEAR(group_index(m, 980.0), 30.0, 1e-9);
    EXPECT_NEAR(group_index(m, 965.0), 15.0, 0.15);
}

TEST(GroupIndex, MonotoneTowardCutoff) {
    const auto m = DispersionModel::calibrated(985.0, 5.0, 30.0, 80.0);
    double previous = 0.0;
    for (double lambda = 940.0; lambda <= 985.0; lambda += 0.5) {
        const double ng = group_index(m, lambda);
        EXPECT_GT(ng, 0.0);
        EXPECT_GE(ng, previous);
        previous = ng;
    }
}

TEST(GroupIndex, MatchesNumericalDerivative) {
    const auto m = DispersionModel::calibrated(985.0, 5.0, 30.0, 80.0);
    const double a = 260.0;
    const double l = 975.0;
    const double dl = 1e-4;
    const double dk = bloch_wavenumber(m, l + dl, a) - bloch_wavenumber(m, l - dl, a);
    const double dw = angular_frequency(l + dl) - angular_frequency(l - dl);
    // k grows toward the band edge while omega falls, so only the magnitude is compared
    EXPECT_NEAR(std::abs(kSpeedOfLight * dk / dw), group_index(m, l), 1e-4 * group_index(m, l));
}

TEST(GroupIndex, InvalidModel) {
    EXPECT_THROW(group_index(DispersionModel{985.0, -1.0, 80.0}, 970.0), InvalidParameter);
    EXPECT_THROW(DispersionModel::calibrated(985.0, 0.0, 30.0, 80.0), InvalidParameter);
}
