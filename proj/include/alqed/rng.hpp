#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>

#include "alqed/errors.hpp"

namespace alqed {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Named purposes for stream derivation, so two consumers of the same seed
/// never share a sequence.
enum class StreamPurpose : std::uint64_t {
    disorder = 1,
    cell_phase = 2,
    bootstrap = 3,
    photon_counting = 4,
    spectrum_noise = 5,
    rate_draw = 6,
};

/// Stream id for a (purpose, index) pair.
constexpr std::uint64_t derive_stream(StreamPurpose purpose, std::uint64_t index) noexcept {
    return mix64(static_cast<std::uint64_t>(purpose) * 0xD1B54A32D192ED03ULL ^ mix64(index));
}

/// Counter-based generator: the n-th output is a pure function of
/// (seed, stream, n). Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform on (0, 1].
    double uniform_open_closed() noexcept {
        return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Box-Muller transform of u1 in (0, 1], u2 in [0, 1) to two independent
/// standard normal deviates.
inline std::pair<double, double> box_muller(double u1, double u2) {
    if (!(u1 > 0.0 && u1 <= 1.0)) throw InvalidParameter("box_muller: u1 must lie in (0, 1]");
    if (!(u2 >= 0.0 && u2 < 1.0)) throw InvalidParameter("box_muller: u2 must lie in [0, 1)");
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Normal deviates drawn pairwise through box_muller.
class GaussianSource {
public:
    explicit GaussianSource(CounterRng rng) : rng_(rng) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.uniform_open_closed();
        const double u2 = rng_.uniform();
        auto [z1, z2] = box_muller(u1, u2);
        spare_ = z2;
        has_spare_ = true;
        return z1;
    }

private:
    CounterRng rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace alqed
