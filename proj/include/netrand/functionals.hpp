#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "netrand/behavior.hpp"

namespace netrand {

// One signed term of a correlator functional: a weight times the correlator
// over a party subset at fixed inputs.
struct FunctionalTerm {
    std::vector<std::pair<int, int>> party_inputs;  // (party, input), parties strictly increasing
    double weight = 0.0;
};

// Signed-weight linear functional over full and marginal correlators.
struct CorrelatorFunctional {
    Scenario scenario;
    std::vector<FunctionalTerm> terms;

    double weight_norm() const {
        double w = 0.0;
        for (const auto& t : terms) w += std::abs(t.weight);
        return w;
    }

    void check() const {
        scenario.check();
        if (terms.empty()) throw std::invalid_argument("CorrelatorFunctional: no terms");
        for (const auto& t : terms) {
            if (t.party_inputs.empty())
                throw std::invalid_argument("CorrelatorFunctional: empty term");
            int prev = -1;
            for (auto [p, x] : t.party_inputs) {
                if (p <= prev || p >= scenario.num_parties() || x < 0 || x >= scenario.inputs[p])
                    throw std::invalid_argument("CorrelatorFunctional: bad term reference");
                prev = p;
            }
        }
    }
};

inline double eval_functional(const CorrelatorFunctional& f, const Behavior& b) {
    if (!(f.scenario == b.scenario()))
        throw std::invalid_argument("eval_functional: scenario mismatch");
    double v = 0.0;
    for (const auto& t : f.terms) v += t.weight * correlator(b, t.party_inputs);
    return v;
}

// CHSH in the convention S = <A0B0> + <A0B1> + <A1B1> - <A1B0> <= 2.
inline CorrelatorFunctional chsh() {
    CorrelatorFunctional f;
    f.scenario = chsh_scenario();
    f.terms = {
        {{{0, 0}, {1, 0}}, 1.0},
        {{{0, 0}, {1, 1}}, 1.0},
        {{{0, 1}, {1, 1}}, 1.0},
        {{{0, 1}, {1, 0}}, -1.0},
    };
    return f;
}

// Chained inequality with n settings per side, local bound 2n - 2:
// sum_k <A_k B_k> + <A_{k+1} B_k>, with the wrap-around term negated.
// The input labeling is this library's convention.
inline CorrelatorFunctional chained(int n) {
    if (n < 2) throw std::invalid_argument("chained: n must be >= 2");
    CorrelatorFunctional f;
    f.scenario = chained_scenario(n);
    for (int k = 0; k < n; ++k) {
        f.terms.push_back({{{0, k}, {1, k}}, 1.0});
        int k1 = (k + 1) % n;
        f.terms.push_back({{{0, k1}, {1, k}}, k1 == 0 ? -1.0 : 1.0});
    }
    return f;
}

// Broadcast inequality for the (A:3, B1:2, B2:2) scenario: eight unit-weight
// tripartite correlators plus two weight-2 bipartite ones, local bound 4.
inline CorrelatorFunctional broadcast_functional() {
    CorrelatorFunctional f;
    f.scenario = broadcast_scenario();
    auto t3 = [](int x, int y1, int y2, double w) {
        return FunctionalTerm{{{0, x}, {1, y1}, {2, y2}}, w};
    };
    f.terms = {
        t3(0, 0, 0, 1.0),  t3(0, 1, 1, 1.0),  t3(1, 1, 1, 1.0),  t3(1, 0, 0, -1.0),
        t3(0, 0, 1, 1.0),  t3(0, 1, 0, 1.0),  t3(1, 0, 1, 1.0),  t3(1, 1, 0, -1.0),
        {{{0, 2}, {1, 0}}, -2.0},
        {{{0, 2}, {1, 1}}, 2.0},
    };
    return f;
}

// ---- Functional -> nonlocal game -----------------------------------------

// A nonlocal game derived from a correlator functional: joint inputs drawn
// with probability proportional to |weight|; a round is won when the product
// of the referenced +/-1 outcomes matches the weight's sign.  The affine map
// omega = (I + W) / (2W) links the functional value to the winning
// probability, with W the total absolute weight.
struct GameSpec {
    Scenario scenario;
    struct Round {
        std::vector<int> inputs;                       // full joint input tuple
        std::vector<int> referenced;                   // parties whose outcomes matter
        int required_sign = 1;                         // +1 or -1
        double probability = 0.0;
    };
    std::vector<Round> rounds;
    double weight_norm = 0.0;  // W

    double omega_from_value(double value) const { return (value + weight_norm) / (2.0 * weight_norm); }
    double value_from_omega(double omega) const { return omega * 2.0 * weight_norm - weight_norm; }

    bool win(std::size_t round_idx, const std::vector<int>& outcomes) const {
        int sign = 1;
        for (int p : rounds[round_idx].referenced)
            if (outcomes[p] & 1) sign = -sign;
        return sign == rounds[round_idx].required_sign;
    }

    // Winning probability of a behavior under the game's input distribution.
    double score(const Behavior& b) const {
        double omega = 0.0;
        for (std::size_t r = 0; r < rounds.size(); ++r) {
            const auto& round = rounds[r];
            for (const auto& o : all_outcome_tuples(scenario))
                if (win(r, o)) omega += round.probability * b.at(round.inputs, o);
        }
        return omega;
    }
};

// Unreferenced parties get input 0; their outcomes do not affect the win
// predicate.  Requires dichotomic outcomes throughout.
inline GameSpec functional_to_game(const CorrelatorFunctional& f) {
    f.check();
    for (int o : f.scenario.outputs)
        if (o != 2) throw std::invalid_argument("functional_to_game: outcomes must be dichotomic");
    double w = f.weight_norm();
    if (w <= 0.0) throw std::invalid_argument("functional_to_game: zero-weight functional");
    GameSpec g;
    g.scenario = f.scenario;
    g.weight_norm = w;
    for (const auto& t : f.terms) {
        GameSpec::Round r;
        r.inputs.assign(f.scenario.num_parties(), 0);
        for (auto [p, x] : t.party_inputs) {
            r.inputs[p] = x;
            r.referenced.push_back(p);
        }
        r.required_sign = t.weight >= 0 ? 1 : -1;
        r.probability = std::abs(t.weight) / w;
        g.rounds.push_back(std::move(r));
    }
    return g;
}

// ---- Plain-text serialization ---------------------------------------------
// One line per term: "weight party:input party:input ...", party names
// A, B1, B2 (or P0, P1, ... beyond three parties).

inline std::string party_name(const Scenario& s, int p) {
    if (s.num_parties() <= 3) {
        static const char* names3[] = {"A", "B1", "B2"};
        static const char* names2[] = {"A", "B"};
        return s.num_parties() == 3 ? names3[p] : names2[p];
    }
    return "P" + std::to_string(p);
}

inline void write_functional(std::ostream& os, const CorrelatorFunctional& f) {
    for (const auto& t : f.terms) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", t.weight);
        os << buf;
        for (auto [p, x] : t.party_inputs) os << ' ' << party_name(f.scenario, p) << ':' << x;
        os << '\n';
    }
}

inline CorrelatorFunctional read_functional(std::istream& is, const Scenario& s) {
    CorrelatorFunctional f;
    f.scenario = s;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        FunctionalTerm t;
        ls >> t.weight;
        if (!ls) throw std::runtime_error("functional: bad weight in '" + line + "'");
        std::string tok;
        while (ls >> tok) {
            auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("functional: bad token '" + tok + "'");
            std::string pname = tok.substr(0, colon);
            int input = std::stoi(tok.substr(colon + 1));
            int party = -1;
            for (int p = 0; p < s.num_parties(); ++p)
                if (party_name(s, p) == pname) party = p;
            if (party < 0) throw std::runtime_error("functional: unknown party '" + pname + "'");
            t.party_inputs.emplace_back(party, input);
        }
        f.terms.push_back(std::move(t));
    }
    f.check();
    return f;
}

} // namespace netrand
