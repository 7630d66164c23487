#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "alqed/rng.hpp"
#include "alqed/spectral_fit.hpp"

using namespace alqed;

namespace {

struct Line {
    double center, fwhm, area;
};

void synthesize(const std::vector<Line>& lines, double gauss, double lo, double hi, double step, std::vector<double>& x,
                std::vector<double>& y, double baseline = 0.0) {
    x.clear();
    y.clear();
    const auto n = static_cast<long>(std::llround((hi - lo) / step));
    for (long i = 0; i <= n; ++i) {
        const double xi = lo + step * static_cast<double>(i);
        double v = baseline;
        for (const auto& l : lines) v += l.area * voigt(xi - l.center, l.fwhm, gauss);
        x.push_back(xi);
        y.push_back(v);
    }
}

}  // namespace

TEST(SpectrumFit, ExactRecoveryWithoutNoise) {
    std::vector<double> x, y;
    synthesize({{950.0, 950.0 / 4200.0, 2.0}}, 0.0, 948.0, 952.0, 0.005, x, y, 0.1);
    const auto fit = fit_spectrum(x, y, 1, 0.0);
    ASSERT_TRUE(fit.converged);
    const auto& p = fit.peaks.front();
    EXPECT_NEAR(p.center_nm, 950.0, 950.0 * 1e-6);
    EXPECT_NEAR(p.fwhm_nm / (950.0 / 4200.0), 1.0, 1e-6);
    EXPECT_NEAR(p.area / 2.0, 1.0, 1e-6);
    EXPECT_NEAR(p.q / 4200.0, 1.0, 1e-6);
    EXPECT_NEAR(fit.baseline, 0.1, 1e-6);
}

TEST(SpectrumFit, DeconvolvesInstrumentWidth) {
    std::vector<double> x, y;
    synthesize({{950.0, 950.0 / 4200.0, 1.0}}, 0.15, 947.0, 953.0, 0.01, x, y);
    GaussianSource noise(CounterRng(3, derive_stream(StreamPurpose::spectrum_noise, 0)));
    const double peak = *std::max_element(y.begin(), y.end());
    for (auto& v : y) v += 0.01 * peak * noise();
    const auto fit = fit_spectrum(x, y, 1, 0.15);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.peaks.front().q, 4200.0, 0.05 * 4200.0);
    EXPECT_FALSE(fit.peaks.front().unresolved);
}

TEST(SpectrumFit, TwoSeparatedPeaks) {
    std::vector<double> x, y;
    const double step = 0.01;
    synthesize({{949.0, 0.2, 1.0}, {951.2, 0.3, 0.7}}, 0.15, 946.0, 954.0, step, x, y);
    const auto fit = fit_spectrum(x, y, 2, 0.15);
    ASSERT_EQ(fit.peaks.size(), 2u);
    EXPECT_NEAR(fit.peaks[0].center_nm, 949.0, step);
    EXPECT_NEAR(fit.peaks[1].center_nm, 951.2, step);
    EXPECT_FALSE(fit.peaks[0].unresolved);
    EXPECT_FALSE(fit.peaks[1].unresolved);
}

TEST(SpectrumFit, OverlappingPeaksFlaggedUnresolved) {
    std::vector<double> x, y;
    synthesize({{950.0, 0.2, 1.0}, {950.05, 0.2, 1.0}}, 0.15, 947.0, 953.0, 0.01, x, y);
    const auto fit = fit_spectrum(x, y, 2, 0.15);
    ASSERT_EQ(fit.peaks.size(), 2u);
    EXPECT_TRUE(fit.peaks[0].unresolved || fit.peaks[1].unresolved);
}

TEST(SpectrumFit, InvalidInput) {
    std::vector<double> x{1.0, 2.0, 3.0}, y{1.0, 2.0, 1.0};
    EXPECT_THROW(fit_spectrum(x, y, 0, 0.0), InvalidParameter);
    EXPECT_THROW(fit_spectrum(x, y, 1, 0.0), InvalidParameter);  // too few samples
    std::vector<double> y2{1.0, 2.0};
    EXPECT_THROW(fit_spectrum(x, y2, 1, 0.0), InvalidParameter);
}

TEST(PeakCandidates, FlatAndSingle) {
    std::vector<double> x{0, 1, 2, 3, 4}, flat{1, 1, 1, 1, 1}, single{0, 1, 3, 1, 0};
    EXPECT_TRUE(find_peak_candidates(x, flat, 0.0).empty());
    const auto c = find_peak_candidates(x, single, 0.5);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].index, 2u);
    EXPECT_DOUBLE_EQ(c[0].prominence, 3.0);
}
