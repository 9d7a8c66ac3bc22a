#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "netrand/functionals.hpp"
#include "netrand/seesaw.hpp"

using namespace netrand;

// Deterministic behavior: every party always outputs `outcome`.
static Behavior constant_behavior(const Scenario& s, int outcome) {
    Behavior b(s);
    for (const auto& in : all_input_tuples(s)) {
        std::vector<int> out(s.num_parties(), outcome);
        b.at(in, out) = 1.0;
    }
    return b;
}

static Behavior uniform_behavior(const Scenario& s) {
    Behavior b(s);
    double p = 1.0 / s.num_outcome_tuples();
    for (auto& x : b.table()) x = p;
    return b;
}

TEST_CASE("broadcast functional structure and evaluation") {
    CorrelatorFunctional f = broadcast_functional();
    CHECK(f.terms.size() == 10);
    CHECK(f.weight_norm() == 12.0);

    // All correlators are +1 on the all-zeros deterministic behavior:
    // 1+1+1-1+1+1+1-1-2+2 = 4.
    Behavior plus = constant_behavior(broadcast_scenario(), 0);
    CHECK(eval_functional(f, plus) == 4.0);

    // CHSH vanishes on the uniform behavior.
    CHECK(eval_functional(chsh(), uniform_behavior(chsh_scenario())) == 0.0);

    CHECK_THROWS_AS(eval_functional(chsh(), plus), std::invalid_argument);
}

TEST_CASE("chained functional") {
    CHECK_THROWS_AS(chained(1), std::invalid_argument);
    CorrelatorFunctional c3 = chained(3);
    CHECK(c3.terms.size() == 6);
    CHECK(c3.weight_norm() == 6.0);
    // All-zeros behavior: every correlator is +1, so the value is n-1 terms
    // positive... 2n - 2 comes from the vertex maximum, checked in the
    // locality suite; here just linearity and scenario wiring.
    Behavior u = uniform_behavior(chained_scenario(3));
    CHECK(eval_functional(c3, u) == 0.0);
}

TEST_CASE("eval_functional is linear") {
    Rng rng(5);
    Scenario s = broadcast_scenario();
    auto random_behavior = [&]() {
        Behavior b(s);
        for (int ii = 0; ii < s.num_input_tuples(); ++ii) {
            double tot = 0.0;
            std::vector<double> v(s.num_outcome_tuples());
            for (auto& x : v) { x = rng.uniform01() + 1e-3; tot += x; }
            for (int oo = 0; oo < s.num_outcome_tuples(); ++oo)
                b.table()[ii * s.num_outcome_tuples() + oo] = v[oo] / tot;
        }
        return b;
    };
    CorrelatorFunctional f = broadcast_functional();
    for (int t = 0; t < 5; ++t) {
        Behavior p = random_behavior(), q = random_behavior();
        double lam = rng.uniform01();
        Behavior mix(s);
        for (std::size_t i = 0; i < mix.table().size(); ++i)
            mix.table()[i] = lam * p.table()[i] + (1.0 - lam) * q.table()[i];
        CHECK(eval_functional(f, mix) ==
              Catch::Approx(lam * eval_functional(f, p) + (1.0 - lam) * eval_functional(f, q))
                  .margin(1e-12));
    }
}

TEST_CASE("functional to game affine identity") {
    CorrelatorFunctional bf = broadcast_functional();
    GameSpec g = functional_to_game(bf);
    CHECK(g.weight_norm == 12.0);
    CHECK(g.omega_from_value(4.0) == Catch::Approx(2.0 / 3.0).margin(1e-15));

    GameSpec gc = functional_to_game(chsh());
    CHECK(gc.weight_norm == 4.0);
    CHECK(gc.omega_from_value(2.0 * std::sqrt(2.0)) ==
          Catch::Approx((2.0 + std::sqrt(2.0)) / 4.0).margin(1e-15));

    CHECK(gc.score(uniform_behavior(chsh_scenario())) == Catch::Approx(0.5).margin(1e-15));

    // omega(behavior) == (I + W) / (2W) for arbitrary tables.
    Rng rng(17);
    for (int t = 0; t < 10; ++t) {
        Behavior b(broadcast_scenario());
        for (int ii = 0; ii < b.scenario().num_input_tuples(); ++ii) {
            double tot = 0.0;
            std::vector<double> v(8);
            for (auto& x : v) { x = rng.uniform01(); tot += x; }
            for (int oo = 0; oo < 8; ++oo) b.table()[ii * 8 + oo] = v[oo] / tot;
        }
        double omega = g.score(b);
        double value = eval_functional(bf, b);
        CHECK(omega == Catch::Approx(g.omega_from_value(value)).margin(1e-12));
    }

    CorrelatorFunctional zero = chsh();
    for (auto& t : zero.terms) t.weight = 0.0;
    CHECK_THROWS_AS(functional_to_game(zero), std::invalid_argument);
}

TEST_CASE("reduction to CHSH when Bob1 is trivial") {
    // With Bob1 outputting +1 on both inputs, the broadcast value equals
    // twice the CHSH value of the (A, B2) marginal; the A2 bracket cancels.
    Rng rng(23);
    Scenario s = broadcast_scenario();
    for (int trial = 0; trial < 8; ++trial) {
        // Random local bipartite (A3,B2)-behavior q as a mixture of
        // deterministic boxes, lifted to the broadcast scenario with b1 = 0.
        std::vector<double> qa(3 * 2), qb(2 * 2);
        Behavior b(s);
        for (int mix = 0; mix < 6; ++mix) {
            std::vector<int> fa(3), fb(2);
            for (auto& v : fa) v = static_cast<int>(rng.uniform_index(2));
            for (auto& v : fb) v = static_cast<int>(rng.uniform_index(2));
            double w = 1.0 / 6.0;
            for (const auto& in : all_input_tuples(s)) {
                std::vector<int> out = {fa[in[0]], 0, fb[in[2]]};
                b.at(in, out) += w;
            }
        }
        double lhs = eval_functional(broadcast_functional(), b);

        Behavior m = marginalize(b, {0, 2});
        CorrelatorFunctional chsh_on_marginal;
        chsh_on_marginal.scenario = m.scenario();
        chsh_on_marginal.terms = {{{{0, 0}, {1, 0}}, 1.0},
                                  {{{0, 0}, {1, 1}}, 1.0},
                                  {{{0, 1}, {1, 1}}, 1.0},
                                  {{{0, 1}, {1, 0}}, -1.0}};
        double rhs = 2.0 * eval_functional(chsh_on_marginal, m);
        double bracket = -2.0 * correlator(b, {{0, 2}, {1, 0}}) + 2.0 * correlator(b, {{0, 2}, {1, 1}});
        CHECK(bracket == Catch::Approx(0.0).margin(1e-12));
        CHECK(lhs == Catch::Approx(rhs + bracket).margin(1e-12));
    }
}

TEST_CASE("seesaw reaches the Tsirelson value on the singlet") {
    auto res = seesaw_optimize(isotropic_state(1.0), chsh(), 20, 1e-12, 42);
    CHECK(res.converged);
    CHECK(res.value == Catch::Approx(2.0 * std::sqrt(2.0)).margin(1e-6));
    // Per-sweep values never decrease.
    for (std::size_t i = 1; i < res.sweep_values.size(); ++i)
        CHECK(res.sweep_values[i] >= res.sweep_values[i - 1] - 1e-12);
}

TEST_CASE("seesaw on the broadcast functional") {
    IsometryChannel copy;
    // Below the activation threshold there is no violation.
    QuantumState low = broadcast_apply(isotropic_state(0.5), copy, 1);
    auto res_low = seesaw_optimize(low, broadcast_functional(), 30, 1e-11, 7);
    CHECK(res_low.value <= 4.0 + 1e-6);

    // At alpha = 1 the violation has margin >= 1; the converged value is a
    // regression anchor (4*sqrt(3) for the copy channel with optimal settings).
    QuantumState top = broadcast_apply(isotropic_state(1.0), copy, 1);
    auto res_top = seesaw_optimize(top, broadcast_functional(), 30, 1e-11, 7);
    CHECK(res_top.value > 5.0);
    CHECK(res_top.value == Catch::Approx(4.0 * std::sqrt(3.0)).margin(1e-6));
}

TEST_CASE("functional text serialization round trip") {
    CorrelatorFunctional f = broadcast_functional();
    std::ostringstream os;
    write_functional(os, f);
    std::istringstream is(os.str());
    CorrelatorFunctional back = read_functional(is, f.scenario);
    REQUIRE(back.terms.size() == f.terms.size());
    for (std::size_t i = 0; i < f.terms.size(); ++i) {
        CHECK(back.terms[i].weight == f.terms[i].weight);
        CHECK(back.terms[i].party_inputs == f.terms[i].party_inputs);
    }
    std::istringstream bad("1.0 Q:0");
    CHECK_THROWS(read_functional(bad, f.scenario));
}
