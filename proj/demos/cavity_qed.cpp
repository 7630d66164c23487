// Purcell factor, beta factor and the decay rate versus detuning.
#include <cstdio>
#include <vector>

#include "alqed/qed.hpp"

int main() {
    const alqed::CavityMode cavity{4200.0, 1.0, 950.0, 3.44};
    const alqed::QdEmitter qd{950.0, 1.0, 1.1};

    std::printf("peak Purcell factor        %.3f\n", alqed::purcell_peak(cavity));
    std::printf("beta(7.9, 0.5)             %.4f\n", alqed::beta_factor(7.9, 0.5));
    std::printf("V upper bound from F_p=7.2 %.3f um^3\n", alqed::invert_mode_volume(7.2, 4200.0, 950.0, 3.44));
    std::printf("mode length                %.2f um\n", alqed::cavity_length(1.0, 1.3, 0.0308));

    alqed::BackgroundModel background;
    background.ng_reference = 1.0;
    const std::vector<alqed::CavityMode> cavities{cavity};
    const std::vector<double> detunings{-1.0, -0.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.5, 1.0};
    std::printf("\ndetuning_nm  gamma_per_ns\n");
    for (const auto& p : alqed::decay_rate_vs_detuning(cavities, qd, background, 950.0, detunings))
        std::printf("%8.2f     %.4f\n", p.detuning_nm, p.gamma_total);
}
