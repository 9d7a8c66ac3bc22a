#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "netrand/behavior.hpp"

using namespace netrand;

using Settings = std::vector<std::vector<DichotomicObservable>>;

static Settings zz_settings(int parties, int inputs) {
    Settings s;
    for (int p = 0; p < parties; ++p) {
        std::vector<DichotomicObservable> per;
        for (int x = 0; x < inputs; ++x) per.push_back(observable_from_bloch(0.0, 0.0));
        s.push_back(per);
    }
    return s;
}

TEST_CASE("born rule on the maximally mixed tripartite state") {
    QuantumState mm(Matrix::Identity(8, 8) / 8.0, {2, 2, 2});
    Settings s = zz_settings(3, 2);
    s[0].push_back(observable_from_bloch(1.0, 0.3));  // Alice gets a third setting
    Behavior b = born_behavior(mm, s);
    for (double p : b.table()) CHECK(p == Catch::Approx(1.0 / 8.0).margin(1e-14));
}

TEST_CASE("born rule perfect correlations of Phi+ under Z,Z") {
    Behavior b = born_behavior(phi_plus(), zz_settings(2, 1));
    CHECK(b.at({0, 0}, {0, 0}) == Catch::Approx(0.5).margin(1e-14));
    CHECK(b.at({0, 0}, {1, 1}) == Catch::Approx(0.5).margin(1e-14));
    CHECK(b.at({0, 0}, {0, 1}) == Catch::Approx(0.0).margin(1e-14));
    CHECK(b.at({0, 0}, {1, 0}) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("born correlators match the closed form cos(angle difference)") {
    // Observables in the x-z plane on Phi+ give <A B> = cos(ta - tb); the
    // CHSH-optimal angles then sum to 2*sqrt(2).
    auto obs = [](double theta) { return observable_from_vector(
        Eigen::Vector3d(std::sin(theta), 0.0, std::cos(theta))); };
    Settings s = {{obs(0.0), obs(M_PI / 2.0)}, {obs(-M_PI / 4.0), obs(M_PI / 4.0)}};
    Behavior b = born_behavior(phi_plus(), s);
    double ta[2] = {0.0, M_PI / 2.0}, tb[2] = {-M_PI / 4.0, M_PI / 4.0};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            CHECK(correlator(b, {{0, x}, {1, y}}) ==
                  Catch::Approx(std::cos(ta[x] - tb[y])).margin(1e-12));
    double chsh_value = correlator(b, {{0, 0}, {1, 0}}) + correlator(b, {{0, 0}, {1, 1}}) +
                        correlator(b, {{0, 1}, {1, 1}}) - correlator(b, {{0, 1}, {1, 0}});
    CHECK(chsh_value == Catch::Approx(2.0 * std::sqrt(2.0)).margin(1e-9));
}

TEST_CASE("validation accepts Born behaviors and reports injected violations") {
    QuantumState ghz = broadcast_apply(isotropic_state(0.8), IsometryChannel{}, 1);
    Settings s = zz_settings(3, 2);
    s[0].push_back(observable_from_bloch(0.7, 0.1));
    Behavior b = born_behavior(ghz, s);
    auto rep = validate_behavior(b);
    CHECK(rep.normalization_residual <= 1e-12);
    CHECK(rep.negativity <= 1e-12);
    CHECK(rep.no_signaling_residual <= 1e-12);

    // One perturbed entry shows up as a normalization residual of that size.
    Behavior pert = b;
    pert.table()[3] += 1e-3;
    CHECK(validate_behavior(pert).normalization_residual == Catch::Approx(1e-3).margin(1e-12));

    // A table whose Bob1 marginal depends on y2 fails no-signaling by the
    // injected amount: shift each cell by +/- delta/2 on the y2 = 1 slice, so
    // the (a,b1)-marginal over b2 moves by exactly delta.
    double delta = 2e-3;
    Behavior sig(broadcast_scenario());
    for (const auto& in : all_input_tuples(sig.scenario())) {
        for (const auto& out : all_outcome_tuples(sig.scenario())) {
            double p = 1.0 / 8.0;
            if (in[2] == 1) p += (out[1] == 0 ? delta : -delta) / 2.0;
            sig.at(in, out) = p;
        }
    }
    CHECK(validate_behavior(sig).no_signaling_residual == Catch::Approx(delta).margin(1e-12));
}

TEST_CASE("marginals") {
    QuantumState mm(Matrix::Identity(8, 8) / 8.0, {2, 2, 2});
    Settings s = zz_settings(3, 2);
    s[0].push_back(observable_from_bloch(0.4, 0.0));
    Behavior b = born_behavior(mm, s);
    Behavior m = marginalize(b, {0, 1});
    for (double p : m.table()) CHECK(p == Catch::Approx(0.25).margin(1e-13));

    // GHZ-type marginal to (A, B1) under Z,Z keeps the perfect correlation.
    QuantumState ghz = broadcast_apply(phi_plus(), IsometryChannel{}, 1);
    Behavior gb = born_behavior(ghz, zz_settings(3, 2));
    Behavior gm = marginalize(gb, {0, 1});
    CHECK(gm.at({0, 0}, {0, 0}) == Catch::Approx(0.5).margin(1e-12));
    CHECK(gm.at({0, 0}, {1, 1}) == Catch::Approx(0.5).margin(1e-12));
    CHECK(gm.at({0, 0}, {0, 1}) == Catch::Approx(0.0).margin(1e-12));

    // Product behavior: marginal equals the product of single-party marginals.
    Matrix qa(2, 2), qb(2, 2);
    qa << 0.7, 0.1, 0.1, 0.3;
    qb << 0.6, Complex(0.0, 0.2), Complex(0.0, -0.2), 0.4;
    QuantumState prod(kron(qa, qb), {2, 2});
    Settings s2 = {{observable_from_bloch(0.3, 0.2), observable_from_bloch(1.2, 2.0)},
                   {observable_from_bloch(0.9, 1.0), observable_from_bloch(2.0, 0.5)}};
    Behavior pb = born_behavior(prod, s2);
    Behavior ma = marginalize(pb, {0}), mb = marginalize(pb, {1});
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int bo = 0; bo < 2; ++bo)
                    CHECK(pb.at({x, y}, {a, bo}) ==
                          Catch::Approx(ma.at({x}, {a}) * mb.at({y}, {bo})).margin(1e-12));

    // Marginalization is idempotent.
    Behavior mm2 = marginalize(gm, {0, 1});
    for (std::size_t i = 0; i < gm.table().size(); ++i)
        CHECK(mm2.table()[i] == Catch::Approx(gm.table()[i]).margin(1e-14));

    // Signaling behaviors are rejected.
    Behavior sig(chsh_scenario());
    for (const auto& in : all_input_tuples(sig.scenario()))
        for (const auto& out : all_outcome_tuples(sig.scenario()))
            sig.at(in, out) = (in[1] == 1 && out[0] == 0) ? 0.5
                              : (in[1] == 1 && out[0] == 1) ? 0.0
                                                            : 0.25;
    CHECK_THROWS_AS(marginalize(sig, {0}), std::runtime_error);
}

TEST_CASE("behaviors from counts") {
    Scenario s = chsh_scenario();
    int cells = s.num_input_tuples() * s.num_outcome_tuples();

    // Equal counts give the uniform behavior.
    CountsTable eq(s, std::vector<std::uint64_t>(cells, 37));
    auto [uni, boots] = behavior_from_counts(eq, 3, 5);
    for (double p : uni.table()) CHECK(p == Catch::Approx(0.25).margin(1e-15));
    for (const auto& rb : boots) {
        auto rep = validate_behavior(rb);
        CHECK(rep.normalization_residual <= 1e-12);
        CHECK(rep.negativity <= 0.0);
    }

    // A single populated cell per input is a deterministic behavior.
    std::vector<std::uint64_t> det(cells, 0);
    for (int ii = 0; ii < s.num_input_tuples(); ++ii) det[ii * 4 + 2] = 1000;
    auto [db, dboots] = behavior_from_counts(CountsTable(s, det), 0, 1);
    for (int ii = 0; ii < s.num_input_tuples(); ++ii)
        CHECK(db.table()[ii * 4 + 2] == Catch::Approx(1.0));

    // Empty input combinations are rejected.
    std::vector<std::uint64_t> empty(cells, 0);
    CHECK_THROWS_AS(behavior_from_counts(CountsTable(s, empty), 0, 1),
                    std::invalid_argument);

    // Resample means sit within 3 sigma of the point estimate cell by cell.
    std::vector<std::uint64_t> c(cells);
    Rng rng(99);
    for (auto& x : c) x = 40 + rng.uniform_index(40);
    CountsTable table(s, c);
    auto [point, rs] = behavior_from_counts(table, 10000, 123);
    for (int ii = 0; ii < s.num_input_tuples(); ++ii) {
        double total = 0.0;
        for (int oo = 0; oo < 4; ++oo) total += static_cast<double>(c[ii * 4 + oo]);
        for (int oo = 0; oo < 4; ++oo) {
            double mean = 0.0;
            for (const auto& rb : rs) mean += rb.table()[ii * 4 + oo];
            mean /= static_cast<double>(rs.size());
            double pt = point.table()[ii * 4 + oo];
            double sigma = std::sqrt(pt * (1.0 - pt) / total + 1e-12) / std::sqrt(10000.0) *
                           std::sqrt(total);  // per-cell spread / sqrt(draws)
            // Poisson cell spread ~ sqrt(count)/total; resample-mean spread shrinks by sqrt(N).
            double cell_sigma =
                std::sqrt(static_cast<double>(c[ii * 4 + oo])) / total / std::sqrt(10000.0);
            (void)sigma;
            CHECK(std::abs(mean - pt) <= 3.0 * cell_sigma + 3e-4);
        }
    }
}

TEST_CASE("collins-gisin coordinates reconstruct no-signaling behaviors") {
    QuantumState ghz = broadcast_apply(isotropic_state(0.7), IsometryChannel{}, 1);
    Settings s = zz_settings(3, 2);
    s[0].push_back(observable_from_bloch(1.1, 0.6));
    s[1][1] = observable_from_bloch(0.8, 0.0);
    Behavior b = born_behavior(ghz, s);

    auto idx = cg_indices(b.scenario());
    CHECK(idx.size() == 35);  // (1+3)(1+2)(1+2) - 1
    std::vector<double> cg;
    for (const auto& ci : idx) cg.push_back(cg_value(b, ci));
    Behavior back = behavior_from_cg(b.scenario(), cg);
    for (std::size_t i = 0; i < b.table().size(); ++i)
        CHECK(back.table()[i] == Catch::Approx(b.table()[i]).margin(1e-11));

    // Projection of an already-NS behavior is (numerically) the identity.
    auto proj = project_to_no_signaling(b);
    CHECK(proj.residual < 1e-10);
    for (std::size_t i = 0; i < idx.size(); ++i)
        CHECK(proj.cg[i] == Catch::Approx(cg[i]).margin(1e-10));
}

TEST_CASE("behavior CSV round trip") {
    QuantumState ghz = broadcast_apply(isotropic_state(0.64), IsometryChannel{}, 1);
    Settings s = zz_settings(3, 2);
    s[0].push_back(observable_from_bloch(0.2, 0.9));
    Behavior b = born_behavior(ghz, s);
    std::ostringstream os;
    write_behavior_csv(os, b);
    std::istringstream is(os.str());
    Behavior back = read_behavior_csv(is, b.scenario());
    for (std::size_t i = 0; i < b.table().size(); ++i)
        CHECK(back.table()[i] == b.table()[i]);

    std::istringstream empty("");
    CHECK_THROWS(read_behavior_csv(empty, b.scenario()));
}
