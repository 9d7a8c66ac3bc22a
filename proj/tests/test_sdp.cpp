#include <catch2/catch_amalgamated.hpp>

#include "netrand/ipm.hpp"
#include "netrand/rng.hpp"

using namespace netrand;

// Helpers to build programs tersely.
static ConicEntry E(int blk, int r, int c, double v) {
    return ConicEntry{blk, std::min(r, c), std::max(r, c), v};
}

TEST_CASE("one-dimensional toy: minimize x subject to x >= 1") {
    ConicProgram p;
    p.blocks = {BlockSpec{1, false}};
    p.c = {1.0};
    p.f0 = {E(0, 0, 0, 1.0)};
    p.fi = {{E(0, 0, 0, 1.0)}};
    Solution s = solve(p);
    REQUIRE(s.status == Solution::Status::optimal);
    CHECK(s.free_objective == Catch::Approx(1.0).margin(1e-7));
    CHECK(s.conic_objective == Catch::Approx(1.0).margin(1e-7));
    CHECK(s.free_vars[0] == Catch::Approx(1.0).margin(1e-6));
    CHECK(verify_solution(p, s).passes(1e-6));
}

TEST_CASE("largest eigenvalue via trace-one constraint") {
    Rng rng(12);
    for (int trial = 0; trial < 3; ++trial) {
        const int d = 6;
        Eigen::MatrixXd Msym(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Msym(i, j) = rng.uniform01() - 0.5;
        Msym = 0.5 * (Msym + Msym.transpose()).eval();

        ConicProgram p;
        p.blocks = {BlockSpec{d, false}};
        p.c = {1.0};
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                if (Msym(i, j) != 0.0) p.f0.push_back(E(0, i, j, Msym(i, j)));
        std::vector<ConicEntry> eye;
        for (int i = 0; i < d; ++i) eye.push_back(E(0, i, i, 1.0));
        p.fi = {eye};

        Solution s = solve(p);
        REQUIRE(s.status == Solution::Status::optimal);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Msym, Eigen::EigenvaluesOnly);
        double lmax = es.eigenvalues().maxCoeff();
        CHECK(s.conic_objective == Catch::Approx(lmax).margin(1e-6));
        CHECK(s.free_objective == Catch::Approx(lmax).margin(1e-6));
        CHECK(verify_solution(p, s).passes(1e-5));
    }
}

// Programs built backwards from strictly feasible primal-dual points: both
// objectives must meet within tolerance.
TEST_CASE("random strictly feasible programs close the gap") {
    Rng rng(77);
    for (int trial = 0; trial < 4; ++trial) {
        const int d = 5, m = 4;
        ConicProgram p;
        p.blocks = {BlockSpec{d, false}};
        // Random constraint matrices.
        for (int k = 0; k < m; ++k) {
            std::vector<ConicEntry> fk;
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j)
                    if (rng.uniform01() < 0.5) fk.push_back(E(0, i, j, rng.uniform01() - 0.5));
            if (fk.empty()) fk.push_back(E(0, k % d, k % d, 1.0));
            p.fi.push_back(fk);
        }
        // Strictly feasible conic point Y0 and free point x0 with slack S0.
        Eigen::MatrixXd Y0 = Eigen::MatrixXd::Identity(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Y0(i, j) += 0.1 * (rng.uniform01() - 0.5);
        Y0 = (0.5 * (Y0 + Y0.transpose()) + Eigen::MatrixXd::Identity(d, d)).eval();
        std::vector<Eigen::MatrixXd> yblocks = {Y0};
        for (int k = 0; k < m; ++k) p.c.push_back(sparse_inner(p.fi[k], yblocks));

        Eigen::MatrixXd S0 = Eigen::MatrixXd::Identity(d, d);
        Eigen::VectorXd x0(m);
        for (int k = 0; k < m; ++k) x0(k) = rng.uniform01() - 0.5;
        Eigen::MatrixXd F0d = -S0;
        for (int k = 0; k < m; ++k) {
            std::vector<Eigen::MatrixXd> fk = densify(p, p.fi[k]);
            F0d += x0(k) * fk[0];
        }
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                if (F0d(i, j) != 0.0) p.f0.push_back(E(0, i, j, F0d(i, j)));

        Solution s = solve(p);
        REQUIRE(s.status == Solution::Status::optimal);
        CHECK(std::abs(s.conic_objective - s.free_objective) <=
              1e-7 * (1.0 + std::abs(s.conic_objective)));
        auto rep = verify_solution(p, s);
        CHECK(rep.equality_residual <= 1e-6);
        CHECK(rep.conic_min_eig >= -1e-8);
        CHECK(rep.slack_min_eig >= -1e-8);
    }
}

TEST_CASE("diagonal blocks model interval constraints") {
    // LMI diag(x - 1, 2 - x) >= 0 restricts x to [1, 2].
    ConicProgram p;
    p.blocks = {BlockSpec{2, true}};
    p.c = {1.0};
    p.f0 = {E(0, 0, 0, 1.0), E(0, 1, 1, -2.0)};
    p.fi = {{E(0, 0, 0, 1.0), E(0, 1, 1, -1.0)}};
    Solution s = solve(p);
    REQUIRE(s.status == Solution::Status::optimal);
    CHECK(s.free_vars[0] == Catch::Approx(1.0).margin(1e-6));

    ConicProgram pmax = p;
    pmax.c = {-1.0};
    Solution smax = solve(pmax);
    REQUIRE(smax.status == Solution::Status::optimal);
    CHECK(smax.free_vars[0] == Catch::Approx(2.0).margin(1e-6));
}

TEST_CASE("statuses: infeasible and unbounded") {
    // Statuses describe the free (LMI) side.  diag(x - 1, -x - 1) >= 0 asks
    // for x >= 1 and x <= -1 at once: infeasible.
    ConicProgram p;
    p.blocks = {BlockSpec{2, true}};
    p.c = {1.0};
    p.f0 = {E(0, 0, 0, 1.0), E(0, 1, 1, 1.0)};
    p.fi = {{E(0, 0, 0, 1.0), E(0, 1, 1, -1.0)}};
    Solution s = solve(p);
    CHECK(s.status == Solution::Status::infeasible);

    // min -x with x >= 0 as the only restriction: unbounded below.
    ConicProgram q;
    q.blocks = {BlockSpec{1, false}};
    q.c = {-1.0};
    q.f0 = {};
    q.fi = {{E(0, 0, 0, 1.0)}};
    Solution su = solve(q);
    CHECK(su.status == Solution::Status::unbounded);
}

TEST_CASE("solver is scale-equivariant and deterministic") {
    ConicProgram p;
    p.blocks = {BlockSpec{3, false}};
    p.c = {1.0};
    p.f0 = {E(0, 0, 0, 0.7), E(0, 0, 1, -0.2), E(0, 1, 1, 0.4), E(0, 2, 2, 1.1),
            E(0, 1, 2, 0.3)};
    std::vector<ConicEntry> eye = {E(0, 0, 0, 1.0), E(0, 1, 1, 1.0), E(0, 2, 2, 1.0)};
    p.fi = {eye};
    Solution s1 = solve(p);
    REQUIRE(s1.status == Solution::Status::optimal);

    ConicProgram p2 = p;
    for (auto& v : p2.c) v *= 3.5;
    Solution s2 = solve(p2);
    REQUIRE(s2.status == Solution::Status::optimal);
    CHECK(s2.free_objective == Catch::Approx(3.5 * s1.free_objective).margin(1e-6));

    Solution s3 = solve(p);
    CHECK(s3.iterations == s1.iterations);
    CHECK(s3.free_objective == s1.free_objective);  // bitwise deterministic
    CHECK(s3.conic_objective == s1.conic_objective);
}

TEST_CASE("verify_solution flags tampered points") {
    ConicProgram p;
    p.blocks = {BlockSpec{2, false}};
    p.c = {1.0};
    p.f0 = {E(0, 0, 0, 1.0), E(0, 1, 1, 0.5)};
    p.fi = {{E(0, 0, 0, 1.0), E(0, 1, 1, 1.0)}};
    Solution s = solve(p);
    REQUIRE(s.status == Solution::Status::optimal);
    REQUIRE(verify_solution(p, s).passes(1e-6));

    Solution bad = s;
    bad.free_vars[0] += 1e-3;
    auto rep = verify_solution(p, bad);
    CHECK(rep.gap >= 5e-4);

    Solution bady = s;
    bady.conic_blocks[0](0, 0) += 1e-3;
    auto rep2 = verify_solution(p, bady);
    CHECK(rep2.equality_residual == Catch::Approx(1e-3).margin(1e-9));

    // Hand-built infeasible point: explicit negative eigenvalue in Y.
    Solution neg = s;
    neg.conic_blocks[0] << 1.0, 2.0, 2.0, 1.0;
    CHECK(verify_solution(p, neg).conic_min_eig < -0.5);
}

TEST_CASE("preprocessing removes dependent rows and flags inconsistency") {
    ConicProgram p;
    p.blocks = {BlockSpec{2, false}};
    std::vector<ConicEntry> eye = {E(0, 0, 0, 1.0), E(0, 1, 1, 1.0)};
    std::vector<ConicEntry> eye2 = {E(0, 0, 0, 2.0), E(0, 1, 1, 2.0)};
    p.c = {1.0, 2.0};
    p.fi = {eye, eye2};  // same row twice (scaled): consistent
    p.f0 = {E(0, 0, 0, 0.3), E(0, 1, 1, -0.1)};
    Solution s = solve(p);
    REQUIRE(s.status == Solution::Status::optimal);
    CHECK(s.note.find("removed 1") != std::string::npos);

    ConicProgram bad = p;
    bad.c = {1.0, 3.0};  // mismatched cost on a dependent row
    Solution sb = solve(bad);
    CHECK(sb.status == Solution::Status::unbounded);
}

TEST_CASE("sdpa emission round trips byte for byte") {
    ConicProgram p;
    p.blocks = {BlockSpec{2, false}, BlockSpec{2, true}};
    p.c = {1.0, -0.25};
    p.f0 = {E(0, 0, 0, 1.0), E(0, 0, 1, -0.5), E(1, 1, 1, 0.125)};
    p.fi = {{E(0, 0, 0, 1.0), E(1, 0, 0, 1.0)}, {E(0, 1, 1, 1.0), E(1, 1, 1, -1.0)}};
    std::string text = emit_sdpa(p);
    ConicProgram q = parse_sdpa(text);
    CHECK(emit_sdpa(q) == text);

    // A hand-written reference file for the 1-constraint 1-block toy problem.
    ConicProgram toy;
    toy.blocks = {BlockSpec{1, false}};
    toy.c = {1.0};
    toy.f0 = {E(0, 0, 0, 1.0)};
    toy.fi = {{E(0, 0, 0, 1.0)}};
    const char* reference =
        "1\n"
        "1\n"
        "1\n"
        "1\n"
        "0 1 1 1 1\n"
        "1 1 1 1 1\n";
    CHECK(emit_sdpa(toy) == reference);
    ConicProgram parsed = parse_sdpa(reference);
    Solution s = solve(parsed);
    CHECK(s.free_objective == Catch::Approx(1.0).margin(1e-7));

    CHECK_THROWS_WITH(parse_sdpa("1\n1\n1\n1\n0 1 1 oops 1\n"),
                      Catch::Matchers::ContainsSubstring("line 5"));
}

TEST_CASE("sdpa solver output parsing") {
    const char* output =
        "phase.value  = pdOPT\n"
        "   objValPrimal = +1.0000000e+00\n"
        "   objValDual   = +9.9999990e-01\n"
        "xVec = \n"
        "{+1.000000e+00, -2.500000e-01}\n";
    ExternalSolution sol = parse_sdpa_solution(output);
    CHECK(sol.phase == "pdOPT");
    CHECK(sol.primal_objective == Catch::Approx(1.0));
    CHECK(sol.dual_objective == Catch::Approx(0.9999999));
    REQUIRE(sol.x.size() == 2);
    CHECK(sol.x[1] == Catch::Approx(-0.25));

    CHECK_THROWS(parse_sdpa_solution("no recognizable content"));
}
