#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "alqed/qed.hpp"

using namespace alqed;

TEST(Purcell, ReferenceCavity) {
    const CavityMode c{4200.0, 0.93, 950.0, 3.44};
    const QdEmitter e{950.0, 1.0, 1.1};
    EXPECT_NEAR(purcell_factor(c, e), 7.2, 0.02 * 7.2);
}

TEST(Purcell, HalfWidthDetuningHalves) {
    const CavityMode c{4200.0, 1.0, 950.0, 3.44};
    // omega_q / omega - 1 = lambda_c / lambda_q - 1 = 1 / (2Q)
    const double lambda_q = 950.0 / (1.0 + 1.0 / (2.0 * 4200.0));
    EXPECT_NEAR(purcell_factor(c, {lambda_q, 1.0, 1.1}), 0.5 * purcell_peak(c), 1e-12 * purcell_peak(c));
}

TEST(Purcell, OrthogonalDipole) {
    const CavityMode c{4200.0, 1.0, 950.0, 3.44};
    for (double l : {948.0, 950.0, 951.0}) EXPECT_EQ(purcell_factor(c, {l, 0.0, 1.1}), 0.0);
}

TEST(Purcell, InvalidInputs) {
    EXPECT_THROW(purcell_peak({4200.0, 0.0, 950.0, 3.44}), InvalidParameter);
    EXPECT_THROW(purcell_factor({4200.0, 1.0, 950.0, 3.44}, {950.0, 1.5, 1.1}), InvalidParameter);
}

TEST(ModeVolume, InvertsMeasuredPurcell) {
    EXPECT_NEAR(invert_mode_volume(7.2, 4200.0, 950.0, 3.44), 0.93, 0.02 * 0.93);
}

TEST(ModeVolume, RoundTrip) {
    for (double v : {0.3, 0.93, 1.0, 4.0}) {
        const CavityMode c{4200.0, v, 950.0, 3.44};
        const double fp = purcell_factor(c, {950.0, 1.0, 1.1});
        EXPECT_NEAR(invert_mode_volume(fp, 4200.0, 950.0, 3.44), v, 1e-12 * v);
    }
}

TEST(ModeVolume, LinearInQ) {
    EXPECT_NEAR(invert_mode_volume(7.2, 8400.0, 950.0, 3.44), 2.0 * invert_mode_volume(7.2, 4200.0, 950.0, 3.44), 1e-12);
}

TEST(ModeVolume, RejectsNonPositivePurcell) {
    EXPECT_THROW(invert_mode_volume(0.0, 4200.0, 950.0, 3.44), InvalidParameter);
    EXPECT_THROW(invert_mode_volume(-1.0, 4200.0, 950.0, 3.44), InvalidParameter);
}

TEST(CavityLength, ReferenceExtent) {
    EXPECT_NEAR(cavity_length(1.0, 1.3, 0.0308), 25.0, 0.25);
}

TEST(CavityLength, RoundTripAndLinearity) {
    const auto e = mode_extent(0.8, 1.3, 0.0308);
    EXPECT_NEAR(e.volume_um3(), 0.8, 1e-15);
    EXPECT_NEAR(cavity_length(0.5, 1.3, 0.0308), 0.5 * cavity_length(1.0, 1.3, 0.0308), 1e-12);
    EXPECT_THROW(cavity_length(1.0, 0.0, 0.0308), InvalidParameter);
    EXPECT_THROW(cavity_length(1.0, 1.3, -1.0), InvalidParameter);
}

TEST(Beta, ReferenceRates) {
    EXPECT_NEAR(beta_factor(7.9, 0.5), 0.9367, 0.0005);
    EXPECT_EQ(beta_factor(2.0, 2.0), 0.0);
    EXPECT_EQ(beta_factor(2.0, 0.0), 1.0);
    EXPECT_THROW(beta_factor(0.5, 7.9), InconsistentRates);
    EXPECT_THROW(beta_factor(0.0, 0.0), InvalidParameter);
}

namespace {

BackgroundModel reference_background() {
    BackgroundModel b;
    b.dispersion = DispersionModel::calibrated(985.0, 5.0, 30.0, 80.0);
    b.ng_reference = group_index(*b.dispersion, 950.0);
    return b;
}

}  // namespace

TEST(DecayCurve, ReferenceEnhancement) {
    const std::vector<CavityMode> cav{{4200.0, 1.0, 950.0, 3.44}};
    const QdEmitter e{950.0, 1.0, 1.1};
    const auto bg = reference_background();
    const double zero = 0.0;
    const auto p = decay_rate_vs_detuning(cav, e, bg, 950.0, {&zero, 1});
    EXPECT_NEAR(p[0].gamma_total - p[0].gamma_cavity[0], 0.5, 1e-12);
    EXPECT_NEAR(enhancement_ratio(cav, e, bg, 950.0), 15.8, 0.1);
}

TEST(DecayCurve, FlatWithoutCavities) {
    BackgroundModel bg;  // no dispersion: constant waveguide rate
    const std::vector<double> d{-5.0, 0.0, 5.0};
    for (const auto& p : decay_rate_vs_detuning({}, QdEmitter{}, bg, 950.0, d)) EXPECT_DOUBLE_EQ(p.gamma_total, 0.5);
}

TEST(DecayCurve, SecondCavityGivesLocalMaximum) {
    const std::vector<CavityMode> cav{{4200.0, 1.0, 950.0, 3.44}, {4200.0, 1.0, 946.0, 3.44}};
    std::vector<double> d;
    for (int i = -1000; i <= 1000; ++i) d.push_back(0.01 * i);
    const auto curve = decay_rate_vs_detuning(cav, QdEmitter{}, reference_background(), 950.0, d);
    std::vector<double> maxima;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i)
        if (curve[i].gamma_total > curve[i - 1].gamma_total && curve[i].gamma_total >= curve[i + 1].gamma_total)
            maxima.push_back(curve[i].detuning_nm);
    ASSERT_EQ(maxima.size(), 2u);
    EXPECT_NEAR(maxima[0], -4.0, 0.011);
    EXPECT_NEAR(maxima[1], 0.0, 0.011);
}

TEST(DecayCurve, CavityRatesAddIncoherently) {
    const CavityMode a{4200.0, 1.0, 950.0, 3.44}, b{3000.0, 0.7, 949.0, 3.44};
    const std::vector<CavityMode> both{a, b}, only_a{a}, only_b{b};
    BackgroundModel bg;
    const std::vector<double> d{-2.0, -1.0, -0.3, 0.0, 0.7};
    const auto ab = decay_rate_vs_detuning(both, QdEmitter{}, bg, 950.0, d);
    const auto pa = decay_rate_vs_detuning(only_a, QdEmitter{}, bg, 950.0, d);
    const auto pb = decay_rate_vs_detuning(only_b, QdEmitter{}, bg, 950.0, d);
    for (std::size_t i = 0; i < d.size(); ++i)
        EXPECT_NEAR(ab[i].gamma_total, pa[i].gamma_total + pb[i].gamma_total - bg.total(950.0 + d[i]), 1e-12);
}

TEST(DecayCurve, BeyondCutoffPropagatesBandGap) {
    const std::vector<double> d{40.0};
    EXPECT_THROW(decay_rate_vs_detuning({}, QdEmitter{}, reference_background(), 950.0, d), BandGapError);
}
