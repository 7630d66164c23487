#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "alqed/rng.hpp"

using namespace alqed;

TEST(BoxMuller, UnitRadiusGivesOrigin) {
    auto [z1, z2] = box_muller(1.0, 0.0);
    EXPECT_EQ(z1, 0.0);
    EXPECT_EQ(z2, 0.0);
}

TEST(BoxMuller, KnownPoint) {
    auto [z1, z2] = box_muller(std::exp(-2.0), 0.0);
    EXPECT_NEAR(z1, 2.0, 1e-15);
    EXPECT_NEAR(z2, 0.0, 1e-15);
}

TEST(BoxMuller, RejectsZeroAndOutOfRange) {
    EXPECT_THROW(box_muller(0.0, 0.5), InvalidParameter);
    EXPECT_THROW(box_muller(1.5, 0.5), InvalidParameter);
    EXPECT_THROW(box_muller(0.5, 1.0), InvalidParameter);
    EXPECT_THROW(box_muller(std::nan(""), 0.5), InvalidParameter);
}

TEST(BoxMuller, MomentsOfAMillionPairs) {
    CounterRng rng(123, derive_stream(StreamPurpose::disorder, 0));
    const int n = 1'000'000;
    double s1[2] = {0, 0}, s2[2] = {0, 0}, s3[2] = {0, 0}, s4[2] = {0, 0}, cross = 0;
    for (int i = 0; i < n; ++i) {
        auto [a, b] = box_muller(rng.uniform_open_closed(), rng.uniform());
        const double z[2] = {a, b};
        for (int k = 0; k < 2; ++k) {
            s1[k] += z[k];
            s2[k] += z[k] * z[k];
            s3[k] += z[k] * z[k] * z[k];
            s4[k] += z[k] * z[k] * z[k] * z[k];
        }
        cross += a * b;
    }
    for (int k = 0; k < 2; ++k) {
        const double mean = s1[k] / n;
        const double var = s2[k] / n - mean * mean;
        EXPECT_LT(std::abs(mean), 0.01);
        EXPECT_NEAR(var, 1.0, 0.01);
        EXPECT_LT(std::abs(s3[k] / n), 0.05);          // skewness
        EXPECT_NEAR(s4[k] / n, 3.0, 0.05);             // kurtosis
    }
    EXPECT_LT(std::abs(cross / n), 0.01);
}

TEST(CounterRng, Reproducible) {
    CounterRng a(7, 3), b(7, 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(CounterRng, StreamsDiffer) {
    CounterRng a(7, derive_stream(StreamPurpose::disorder, 0));
    CounterRng b(7, derive_stream(StreamPurpose::disorder, 1));
    CounterRng c(7, derive_stream(StreamPurpose::bootstrap, 0));
    int equal_ab = 0, equal_ac = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a(), y = b(), z = c();
        equal_ab += x == y;
        equal_ac += x == z;
    }
    EXPECT_EQ(equal_ab, 0);
    EXPECT_EQ(equal_ac, 0);
}

TEST(CounterRng, UniformRanges) {
    CounterRng rng(1, 1);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform_open_closed();
        EXPECT_GT(u, 0.0);
        EXPECT_LE(u, 1.0);
        const double v = rng.uniform();
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}
