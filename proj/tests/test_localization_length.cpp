#include <gtest/gtest.h>

#include <numbers>
#include <vector>

#include "alqed/transport.hpp"

using namespace alqed;

namespace {

LengthEnsemble iid_ensemble(std::size_t cells, double reflectance, std::size_t realizations, std::uint64_t seed) {
    LengthEnsemble e;
    e.length_um = static_cast<double>(cells) * 0.26;
    for (std::size_t r = 0; r < realizations; ++r) {
        CounterRng rng(seed, derive_stream(StreamPurpose::cell_phase, cells * 100000 + r));
        std::vector<CellScattering> stack;
        for (std::size_t j = 0; j < cells; ++j)
            stack.push_back(CellScattering::make(reflectance, 2 * std::numbers::pi * rng.uniform(),
                                                 2 * std::numbers::pi * rng.uniform(), 0.0));
        e.log_transmission.push_back(solve_cascade(stack, false).log_transmission);
    }
    return e;
}

}  // namespace

TEST(LocalizationLength, WeakScatteringOracle) {
    // <ln T> ~ -N R for weak random-phase cells, so xi = a / R
    std::vector<LengthEnsemble> ens;
    for (std::size_t n : {100u, 200u, 400u, 600u, 800u}) ens.push_back(iid_ensemble(n, 0.01, 100, 4));
    const auto xi = localization_length(ens);
    EXPECT_FALSE(xi.unbounded);
    EXPECT_NEAR(xi.xi_um, 26.0, 2.6);
    EXPECT_GE(xi.r_squared, 0.95);
    EXPECT_GT(xi.standard_error_um, 0.0);
    EXPECT_LT(xi.standard_error_um, 0.1 * xi.xi_um);
}

TEST(LocalizationLength, TransparentStackIsUnbounded) {
    std::vector<LengthEnsemble> ens;
    for (double L : {10.0, 20.0}) ens.push_back({L, std::vector<double>(20, 0.0)});
    const auto xi = localization_length(ens);
    EXPECT_TRUE(xi.unbounded);
    EXPECT_TRUE(std::isinf(xi.xi_um));
}

TEST(LocalizationLength, InsufficientEnsembles) {
    std::vector<LengthEnsemble> one{{10.0, std::vector<double>(50, -1.0)}};
    EXPECT_THROW(localization_length(one), InvalidParameter);
    std::vector<LengthEnsemble> small{{10.0, std::vector<double>(5, -1.0)}, {20.0, std::vector<double>(5, -2.0)}};
    EXPECT_THROW(localization_length(small), InvalidParameter);
}

TEST(LocalizationLength, ShortensTowardCutoff) {
    const auto model = DispersionModel::calibrated(985.0, 5.0, 30.0, 80.0);
    ScatteringModel s;
    s.kappa = ScatteringModel::calibrate_kappa(260.0, 0.06, 30.0, 10.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {965.0, 972.0, 978.0, 982.0}) {
        std::vector<LengthEnsemble> ens;
        for (double L : {20.0, 50.0, 80.0}) {
            WaveguideGeometry g;
            g.length_um = L;
            LengthEnsemble e{L, {}};
            for (int r = 0; r < 30; ++r) {
                const auto real = generate_disorder(g, 0.06, 77, r);
                e.log_transmission.push_back(solve_cascade(build_cells(g, real, model, s, lambda), false).log_transmission);
            }
            ens.push_back(std::move(e));
        }
        const auto xi = localization_length(ens);
        ASSERT_FALSE(xi.unbounded);
        EXPECT_LT(xi.xi_um, previous) << lambda;
        previous = xi.xi_um;
    }
}

TEST(LocalizationLength, CalibrationPointGivesTargetLength) {
    const auto model = DispersionModel::calibrated(985.0, 5.0, 30.0, 80.0);
    ScatteringModel s;
    s.kappa = ScatteringModel::calibrate_kappa(260.0, 0.06, 30.0, 10.0);
    std::vector<LengthEnsemble> ens;
    for (double L : {20.0, 40.0, 60.0}) {
        WaveguideGeometry g;
        g.length_um = L;
        LengthEnsemble e{L, {}};
        for (int r = 0; r < 60; ++r) {
            const auto real = generate_disorder(g, 0.06, 78, r);
            e.log_transmission.push_back(solve_cascade(build_cells(g, real, model, s, 980.0), false).log_transmission);
        }
        ens.push_back(std::move(e));
    }
    const auto xi = localization_length(ens);
    EXPECT_NEAR(xi.xi_um, 10.0, 2.0);
}
