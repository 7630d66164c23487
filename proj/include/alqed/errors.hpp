#pragma once

#include <stdexcept>
#include <string>

namespace alqed {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside the domain of the operation.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// The requested wavelength lies beyond the waveguide cutoff (no guided mode).
class BandGapError : public Error {
public:
    using Error::Error;
};

/// Not enough samples for a statistical estimate.
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// Decay rates contradict each other (e.g. off-resonance faster than on-resonance).
class InconsistentRates : public Error {
public:
    using Error::Error;
};

/// Iterative fit did not converge after all restarts.
class FitFailure : public Error {
public:
    FitFailure(const std::string& what, std::string diagnostics)
        : Error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

/// Configuration text is malformed or a value is out of domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A file could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidParameter(message);
}

}  // namespace detail
}  // namespace alqed
