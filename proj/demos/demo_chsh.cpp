// Minimal walkthrough: prepare an isotropic state, optimize CHSH settings by
// see-saw, and print the resulting behavior's functional value.
#include <cstdio>

#include "netrand/functionals.hpp"
#include "netrand/seesaw.hpp"

int main() {
    using namespace netrand;
    for (double alpha : {0.5, 1.0 / std::sqrt(2.0), 0.9, 1.0}) {
        QuantumState state = isotropic_state(alpha);
        auto res = seesaw_optimize(state, chsh(), 20, 1e-10, 1);
        Behavior b = born_behavior(state, res.settings);
        std::printf("alpha = %.4f  CHSH = %.6f  (local bound 2, Tsirelson %.6f)\n", alpha,
                    eval_functional(chsh(), b), 2.0 * std::sqrt(2.0));
    }
    return 0;
}
