#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "netrand/functionals.hpp"
#include "netrand/quantum.hpp"
#include "netrand/rng.hpp"

namespace netrand {

// One dichotomic observable per input per party.
using MeasurementSettings = std::vector<std::vector<DichotomicObservable>>;

struct SeesawResult {
    MeasurementSettings settings;
    double value = 0.0;
    bool converged = false;
    int sweeps = 0;
    std::vector<double> sweep_values;  // value after each sweep (nondecreasing)
};

// Functional value on a state for explicit settings.
inline double eval_on_state(const CorrelatorFunctional& f, const QuantumState& state,
                            const MeasurementSettings& settings) {
    double v = 0.0;
    for (const auto& t : f.terms) {
        std::vector<Matrix> ops;
        for (int k = 0; k < state.num_subsystems(); ++k) ops.push_back(identity(state.dims()[k]));
        for (auto [p, x] : t.party_inputs) ops[p] = settings[p][x].operator_matrix();
        v += t.weight * (tensor_all(ops) * state.matrix()).trace().real();
    }
    return v;
}

namespace detail {

// Conditional correlation operator for (party, input): the 2x2 Hermitian K
// with I = Tr[O_{party,input} K] + const for the current other settings.
inline Matrix conditional_operator(const CorrelatorFunctional& f, const QuantumState& state,
                                   const MeasurementSettings& settings, int party, int input) {
    Matrix k = Matrix::Zero(2, 2);
    std::vector<int> drop;
    for (int q = 0; q < state.num_subsystems(); ++q)
        if (q != party) drop.push_back(q);
    for (const auto& t : f.terms) {
        bool references = false;
        for (auto [p, x] : t.party_inputs) references |= (p == party && x == input);
        if (!references) continue;
        std::vector<Matrix> ops;
        for (int q = 0; q < state.num_subsystems(); ++q) ops.push_back(identity(state.dims()[q]));
        for (auto [p, x] : t.party_inputs)
            if (p != party) ops[p] = settings[p][x].operator_matrix();
        // term = w * Tr[O_{party,input} * Tr_rest[rho (M (x) I_party)]]
        k += t.weight * partial_trace_matrix(state.matrix() * tensor_all(ops), state.dims(), drop);
    }
    return k;
}

} // namespace detail

// Alternating per-party optimization of measurement settings.  Each update
// replaces one observable by the sign decomposition of its conditional
// correlation operator (for traceless qubit observables: the normalized
// Bloch vector of the traceless part), so the value never decreases.
// Best result over `restarts` random initializations; an optional warm start
// is tried as restart 0.
inline SeesawResult seesaw_optimize(const QuantumState& state, const CorrelatorFunctional& f,
                                    int restarts, double tol, std::uint64_t seed,
                                    std::optional<MeasurementSettings> warm_start = std::nullopt,
                                    int max_sweeps = 500) {
    f.check();
    if (f.scenario.num_parties() != state.num_subsystems())
        throw std::invalid_argument("seesaw_optimize: state dims do not match scenario parties");
    for (int d : state.dims())
        if (d != 2) throw std::invalid_argument("seesaw_optimize: qubit parties only");

    Rng root(seed);
    SeesawResult best;
    best.value = -std::numeric_limits<double>::infinity();

    int total = restarts + (warm_start ? 1 : 0);
    for (int r = 0; r < total; ++r) {
        MeasurementSettings settings;
        if (warm_start && r == 0) {
            settings = *warm_start;
        } else {
            Rng rng = root.split(static_cast<std::uint64_t>(r));
            for (int p = 0; p < f.scenario.num_parties(); ++p) {
                std::vector<DichotomicObservable> per_party;
                for (int x = 0; x < f.scenario.inputs[p]; ++x) {
                    double z = 2.0 * rng.uniform01() - 1.0;
                    double phi = 2.0 * M_PI * rng.uniform01();
                    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
                    per_party.push_back(
                        DichotomicObservable{Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), z)});
                }
                settings.push_back(std::move(per_party));
            }
        }

        double value = eval_on_state(f, state, settings);
        SeesawResult run;
        bool converged = false;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            for (int p = 0; p < f.scenario.num_parties(); ++p) {
                for (int x = 0; x < f.scenario.inputs[p]; ++x) {
                    Matrix k = detail::conditional_operator(f, state, settings, p, x);
                    Eigen::Vector3d g((k * pauli_x()).trace().real(),
                                      (k * pauli_y()).trace().real(),
                                      (k * pauli_z()).trace().real());
                    // Degenerate conditional operator: keep the previous observable.
                    if (g.norm() > 1e-14) settings[p][x].bloch = g / g.norm();
                }
            }
            double next = eval_on_state(f, state, settings);
            run.sweep_values.push_back(next);
            run.sweeps = sweep + 1;
            if (next - value < tol) {
                value = std::max(value, next);
                converged = true;
                break;
            }
            value = next;
        }
        run.settings = settings;
        run.value = value;
        run.converged = converged;
        if (value > best.value) best = std::move(run);
    }
    return best;
}

} // namespace netrand
