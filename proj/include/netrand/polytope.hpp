#pragma once

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "netrand/behavior.hpp"
#include "netrand/functionals.hpp"
#include "netrand/simplex.hpp"

namespace netrand {

// A finite set of extremal behaviors with a canonical (lexicographic on the
// flattened table) ordering, so decomposition weights are reproducible.
struct VertexSet {
    Scenario scenario;
    std::vector<Behavior> vertices;

    void sort_canonically() {
        std::sort(vertices.begin(), vertices.end(), [](const Behavior& a, const Behavior& b) {
            return a.table() < b.table();
        });
    }
};

// All deterministic local vertices of a scenario: every product of
// per-party input->output response functions.
inline VertexSet deterministic_vertices(const Scenario& s) {
    s.check();
    VertexSet out{s, {}};
    int n = s.num_parties();
    std::vector<int> strategy_count(n);
    long total = 1;
    for (int p = 0; p < n; ++p) {
        long cnt = 1;
        for (int x = 0; x < s.inputs[p]; ++x) cnt *= s.outputs[p];
        strategy_count[p] = static_cast<int>(cnt);
        total *= cnt;
    }
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        std::vector<std::vector<int>> response(n);  // response[p][x]
        for (int p = n - 1; p >= 0; --p) {
            int si = static_cast<int>(rem % strategy_count[p]);
            rem /= strategy_count[p];
            std::vector<int> map(s.inputs[p]);
            for (int x = s.inputs[p] - 1; x >= 0; --x) {
                map[x] = si % s.outputs[p];
                si /= s.outputs[p];
            }
            response[p] = map;
        }
        Behavior b(s);
        for (const auto& in : all_input_tuples(s)) {
            std::vector<int> o(n);
            for (int p = 0; p < n; ++p) o[p] = response[p][in[p]];
            b.at(in, o) = 1.0;
        }
        out.vertices.push_back(std::move(b));
    }
    out.sort_canonically();
    return out;
}

// All 24 extreme points of the 2-party / 2-input / 2-output no-signaling
// polytope: 16 deterministic vertices plus the 8 PR-box relabelings
// p(b1 b2 | y1 y2) = 1/2 when b1 xor b2 = y1 y2 xor (r y1 xor s y2 xor t).
inline VertexSet ns_vertices_222() {
    Scenario s{{2, 2}, {2, 2}};
    VertexSet out = deterministic_vertices(s);
    for (int r = 0; r < 2; ++r)
        for (int t2 = 0; t2 < 2; ++t2)
            for (int u = 0; u < 2; ++u) {
                Behavior b(s);
                for (const auto& in : all_input_tuples(s))
                    for (const auto& o : all_outcome_tuples(s)) {
                        int target = (in[0] & in[1]) ^ (r & in[0]) ^ (t2 & in[1]) ^ u;
                        if ((o[0] ^ o[1]) == target) b.at(in, o) = 0.5;
                    }
                out.vertices.push_back(std::move(b));
            }
    out.scenario = s;
    out.sort_canonically();
    return out;
}

// Extremal broadcast-local behaviors for the (A:3, B1:2, B2:2) scenario:
// products of a deterministic Alice strategy with a no-signaling extreme
// point shared by the Bobs.  Restricting Alice's response to deterministic
// strategies loses no generality because p(a|x,lambda) enters the
// decomposition linearly, so stochastic responses are convex mixtures of
// deterministic ones under a refined lambda.
inline VertexSet broadcast_local_vertices(const Scenario& scenario) {
    if (!(scenario == broadcast_scenario()))
        throw std::invalid_argument("broadcast_local_vertices: unsupported scenario shape");
    VertexSet bobs = ns_vertices_222();
    VertexSet out{scenario, {}};
    for (int strat = 0; strat < 8; ++strat) {
        std::vector<int> alice = {(strat >> 2) & 1, (strat >> 1) & 1, strat & 1};
        for (const auto& v : bobs.vertices) {
            Behavior b(scenario);
            for (const auto& in : all_input_tuples(scenario))
                for (const auto& o : all_outcome_tuples(scenario))
                    if (o[0] == alice[in[0]])
                        b.at(in, o) = v.at({in[1], in[2]}, {o[1], o[2]});
            out.vertices.push_back(std::move(b));
        }
    }
    out.sort_canonically();
    return out;
}

// Maximum of a functional over a vertex set.
inline double local_bound(const CorrelatorFunctional& f, const VertexSet& vs) {
    if (vs.vertices.empty()) throw std::invalid_argument("local_bound: empty vertex set");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : vs.vertices) best = std::max(best, eval_functional(f, v));
    return best;
}

// Membership test result.  Inside: convex weights over the canonical vertex
// order.  Outside: a separating functional over table cells (Farkas
// certificate) with its vertex maximum and the violation by the behavior.
struct LpResult {
    bool inside = false;
    double slack = 0.0;                     // optimal L-infinity reconstruction error
    std::vector<double> weights;            // when inside
    std::vector<double> functional;         // when outside: table-cell coefficients
    double functional_bound = 0.0;          // max over vertices
    double functional_violation = 0.0;      // f(behavior) - bound
    int lp_iterations = 0;
};

// Feasibility LP:  min t  s.t.  |(V w - p)_j| <= t,  sum w = 1,  w >= 0.
// Inside iff the optimal slack t* <= tol; otherwise the LP dual supplies the
// separating functional.
inline LpResult membership_lp(const Behavior& behavior, const VertexSet& vs, double tol = 1e-8) {
    if (!(behavior.scenario() == vs.scenario))
        throw std::invalid_argument("membership_lp: scenario mismatch");
    const int nv = static_cast<int>(vs.vertices.size());
    const int nj = static_cast<int>(behavior.table().size());
    if (nv == 0) throw std::invalid_argument("membership_lp: empty vertex set");

    // Columns: w (nv), t (1), s+ (nj), s- (nj).
    const int ncols = nv + 1 + 2 * nj;
    const int nrows = 2 * nj + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nrows, ncols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nrows);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(ncols);
    c(nv) = 1.0;
    for (int j = 0; j < nj; ++j) {
        for (int v = 0; v < nv; ++v) {
            A(j, v) = vs.vertices[v].table()[j];
            A(nj + j, v) = -vs.vertices[v].table()[j];
        }
        A(j, nv) = -1.0;
        A(nj + j, nv) = -1.0;
        A(j, nv + 1 + j) = 1.0;
        A(nj + j, nv + 1 + nj + j) = 1.0;
        b(j) = behavior.table()[j];
        b(nj + j) = -behavior.table()[j];
    }
    A.row(2 * nj).head(nv).setOnes();
    b(2 * nj) = 1.0;

    SimplexResult lp = simplex_solve(A, b, c);
    if (lp.status != SimplexResult::Status::optimal)
        throw std::runtime_error("membership_lp: LP solver returned non-optimal status");

    LpResult out;
    out.lp_iterations = lp.iterations;
    out.slack = lp.objective;
    if (lp.objective <= tol) {
        out.inside = true;
        out.weights.resize(nv);
        double sum = 0.0;
        for (int v = 0; v < nv; ++v) { out.weights[v] = std::max(0.0, lp.x(v)); sum += out.weights[v]; }
        for (auto& w : out.weights) w /= sum;
        return out;
    }

    // Separating functional f = y1 - y2 from the row duals; its vertex
    // maximum is recomputed explicitly so the certificate stands on its own.
    out.inside = false;
    out.functional.resize(nj);
    for (int j = 0; j < nj; ++j) out.functional[j] = lp.dual(j) - lp.dual(nj + j);
    double fmax = std::abs(out.functional[0]);
    for (double x : out.functional) fmax = std::max(fmax, std::abs(x));
    if (fmax > 0)
        for (auto& x : out.functional) x /= fmax;
    double bound = -std::numeric_limits<double>::infinity();
    for (const auto& v : vs.vertices) {
        double val = 0.0;
        for (int j = 0; j < nj; ++j) val += out.functional[j] * v.table()[j];
        bound = std::max(bound, val);
    }
    double fval = 0.0;
    for (int j = 0; j < nj; ++j) fval += out.functional[j] * behavior.table()[j];
    out.functional_bound = bound;
    out.functional_violation = fval - bound;
    return out;
}

// CSV export of a vertex set (one row per vertex, flattened table).
inline void write_vertices_csv(std::ostream& os, const VertexSet& vs) {
    os << "vertex";
    for (std::size_t j = 0; j < vs.vertices.front().table().size(); ++j) os << ",p" << j;
    os << '\n';
    for (std::size_t v = 0; v < vs.vertices.size(); ++v) {
        os << v;
        for (double x : vs.vertices[v].table()) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            os << ',' << buf;
        }
        os << '\n';
    }
}

} // namespace netrand
