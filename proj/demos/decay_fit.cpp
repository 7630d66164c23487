// Synthetic on/off resonance decay curves, fitted back to a beta factor.
#include <cstdio>

#include "alqed/decay.hpp"

int main() {
    const alqed::InstrumentResponse irf{50.0, 0.15};
    alqed::ExponentialMixture on, off;
    on.components = {{7.9, 0.01}, {0.5, 0.001}};
    on.background = 1.0;
    off.components = {{0.5, 0.01}};
    off.background = 1.0;

    const auto on_curve = alqed::synthesize_decay(on, irf, 1e6, 50.0, 1);
    const auto off_curve = alqed::synthesize_decay(off, irf, 1e6, 50.0, 2);
    const auto on_fit = alqed::fit_decay(on_curve, irf, 2);
    const auto off_fit = alqed::fit_decay(off_curve, irf, 1);

    for (const auto& c : on_fit.components)
        std::printf("on : rate %.3f +- %.3f /ns\n", c.rate_per_ns, c.rate_error);
    std::printf("off: rate %.3f +- %.3f /ns\n", off_fit.components[0].rate_per_ns, off_fit.components[0].rate_error);
    const auto rates = alqed::extract_rates(on_fit, off_fit, 0.1);
    std::printf("beta = %.3f\n", rates.rates.beta);
}
