#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "netrand/quantum.hpp"
#include "netrand/rng.hpp"

namespace netrand {

// Measurement scenario: per-party input and output counts, parties ordered.
struct Scenario {
    std::vector<int> inputs;
    std::vector<int> outputs;

    int num_parties() const { return static_cast<int>(inputs.size()); }
    int num_input_tuples() const {
        int n = 1;
        for (int x : inputs) n *= x;
        return n;
    }
    int num_outcome_tuples() const {
        int n = 1;
        for (int o : outputs) n *= o;
        return n;
    }
    bool operator==(const Scenario& o) const { return inputs == o.inputs && outputs == o.outputs; }

    void check() const {
        if (inputs.size() != outputs.size() || inputs.empty())
            throw std::invalid_argument("Scenario: party count mismatch");
        for (std::size_t k = 0; k < inputs.size(); ++k)
            if (inputs[k] < 1 || outputs[k] < 1)
                throw std::invalid_argument("Scenario: counts must be >= 1");
    }
};

// Alice with three settings broadcast to two Bobs with two settings each.
inline Scenario broadcast_scenario() { return Scenario{{3, 2, 2}, {2, 2, 2}}; }
inline Scenario chsh_scenario() { return Scenario{{2, 2}, {2, 2}}; }
inline Scenario chained_scenario(int n) { return Scenario{{n, n}, {2, 2}}; }

// Conditional probability table p(outcomes | inputs).  Flattening is fixed:
// input multi-index outer, outcome multi-index inner, both lexicographic in
// party order.  SDP and LP assembly depend on this layout.
class Behavior {
public:
    Behavior(Scenario scenario, std::vector<double> table)
        : scenario_(std::move(scenario)), table_(std::move(table)) {
        scenario_.check();
        if (static_cast<int>(table_.size()) !=
            scenario_.num_input_tuples() * scenario_.num_outcome_tuples())
            throw std::invalid_argument("Behavior: table size mismatch");
    }

    explicit Behavior(Scenario scenario)
        : Behavior(scenario, std::vector<double>(
                       static_cast<std::size_t>(scenario.num_input_tuples()) *
                           scenario.num_outcome_tuples(),
                       0.0)) {}

    const Scenario& scenario() const { return scenario_; }
    const std::vector<double>& table() const { return table_; }
    std::vector<double>& table() { return table_; }

    int index(const std::vector<int>& in, const std::vector<int>& out) const {
        int ii = 0, oi = 0;
        for (int k = 0; k < scenario_.num_parties(); ++k) {
            ii = ii * scenario_.inputs[k] + in[k];
            oi = oi * scenario_.outputs[k] + out[k];
        }
        return ii * scenario_.num_outcome_tuples() + oi;
    }
    double at(const std::vector<int>& in, const std::vector<int>& out) const {
        return table_[index(in, out)];
    }
    double& at(const std::vector<int>& in, const std::vector<int>& out) {
        return table_[index(in, out)];
    }

private:
    Scenario scenario_;
    std::vector<double> table_;
};

namespace detail {

inline std::vector<int> unravel_mixed(int idx, const std::vector<int>& radices) {
    std::vector<int> mi(radices.size());
    for (int k = static_cast<int>(radices.size()) - 1; k >= 0; --k) {
        mi[k] = idx % radices[k];
        idx /= radices[k];
    }
    return mi;
}

} // namespace detail

// Iterate all input tuples (lexicographic).
inline std::vector<std::vector<int>> all_input_tuples(const Scenario& s) {
    std::vector<std::vector<int>> out;
    for (int i = 0; i < s.num_input_tuples(); ++i)
        out.push_back(detail::unravel_mixed(i, s.inputs));
    return out;
}

inline std::vector<std::vector<int>> all_outcome_tuples(const Scenario& s) {
    std::vector<std::vector<int>> out;
    for (int i = 0; i < s.num_outcome_tuples(); ++i)
        out.push_back(detail::unravel_mixed(i, s.outputs));
    return out;
}

// Born-rule behavior: p(o|x) = Tr[(P_o1 (x) ... (x) P_on) rho], one observable
// per input per party.  Parties must be qubits in this toolkit.
inline Behavior born_behavior(const QuantumState& state,
                              const std::vector<std::vector<DichotomicObservable>>& settings) {
    int parties = static_cast<int>(settings.size());
    if (parties != state.num_subsystems())
        throw std::invalid_argument("born_behavior: party count does not match state dims");
    Scenario s;
    for (const auto& per_party : settings) {
        if (per_party.empty()) throw std::invalid_argument("born_behavior: party without settings");
        s.inputs.push_back(static_cast<int>(per_party.size()));
        s.outputs.push_back(2);
    }
    for (int k = 0; k < parties; ++k)
        if (state.dims()[k] != 2)
            throw std::invalid_argument("born_behavior: non-qubit subsystem");

    Behavior b(s);
    for (const auto& in : all_input_tuples(s)) {
        for (const auto& out : all_outcome_tuples(s)) {
            std::vector<Matrix> ops;
            for (int k = 0; k < parties; ++k)
                ops.push_back(settings[k][in[k]].projector(out[k]));
            b.at(in, out) = (tensor_all(ops) * state.matrix()).trace().real();
        }
    }
    return b;
}

// Validation report: normalization, negativity, and no-signaling residuals.
struct ValidationReport {
    double normalization_residual = 0.0;  // max |sum_o p(o|x) - 1|
    double negativity = 0.0;              // max(0, -min entry)
    double no_signaling_residual = 0.0;   // max marginal change under remote input change
    bool passes(double tol) const {
        return normalization_residual <= tol && negativity <= tol && no_signaling_residual <= tol;
    }
};

inline ValidationReport validate_behavior(const Behavior& b, double tol = 1e-9) {
    (void)tol;
    const Scenario& s = b.scenario();
    ValidationReport rep;
    for (const auto& in : all_input_tuples(s)) {
        double sum = 0.0;
        for (const auto& out : all_outcome_tuples(s)) {
            double p = b.at(in, out);
            rep.negativity = std::max(rep.negativity, -p);
            sum += p;
        }
        rep.normalization_residual = std::max(rep.normalization_residual, std::abs(sum - 1.0));
    }
    // For each party: its removal-marginal must not depend on that party's input.
    for (int k = 0; k < s.num_parties(); ++k) {
        Scenario rest{s.inputs, s.outputs};
        rest.inputs.erase(rest.inputs.begin() + k);
        rest.outputs.erase(rest.outputs.begin() + k);
        for (const auto& rin : all_input_tuples(rest)) {
            for (const auto& rout : all_outcome_tuples(rest)) {
                double ref = 0.0;
                for (int xk = 0; xk < s.inputs[k]; ++xk) {
                    std::vector<int> in(rin), out(rout);
                    in.insert(in.begin() + k, xk);
                    double m = 0.0;
                    for (int ok = 0; ok < s.outputs[k]; ++ok) {
                        out.insert(out.begin() + k, ok);
                        m += b.at(in, out);
                        out.erase(out.begin() + k);
                    }
                    if (xk == 0) ref = m;
                    else rep.no_signaling_residual = std::max(rep.no_signaling_residual, std::abs(m - ref));
                }
            }
        }
    }
    return rep;
}

// Marginal behavior over a party subset.  Requires no-signaling (validated
// first); dropped parties are summed out at their input-0 slice.
inline Behavior marginalize(const Behavior& b, const std::vector<int>& keep, double ns_tol = 1e-8) {
    auto rep = validate_behavior(b);
    if (rep.no_signaling_residual > ns_tol)
        throw std::runtime_error("marginalize: behavior signals; marginal ill-defined");
    const Scenario& s = b.scenario();
    std::vector<int> keep_sorted(keep);
    std::sort(keep_sorted.begin(), keep_sorted.end());
    Scenario ms;
    for (int k : keep_sorted) {
        if (k < 0 || k >= s.num_parties()) throw std::invalid_argument("marginalize: bad party");
        ms.inputs.push_back(s.inputs[k]);
        ms.outputs.push_back(s.outputs[k]);
    }
    std::vector<bool> kept(s.num_parties(), false);
    for (int k : keep_sorted) kept[k] = true;

    Behavior out(ms);
    for (const auto& min : all_input_tuples(ms)) {
        std::vector<int> in(s.num_parties(), 0);
        for (std::size_t i = 0; i < keep_sorted.size(); ++i) in[keep_sorted[i]] = min[i];
        for (const auto& mout : all_outcome_tuples(ms)) {
            double sum = 0.0;
            for (const auto& o : all_outcome_tuples(s)) {
                bool match = true;
                for (std::size_t i = 0; i < keep_sorted.size(); ++i)
                    if (o[keep_sorted[i]] != mout[i]) { match = false; break; }
                if (match) sum += b.at(in, o);
            }
            out.at(min, mout) = sum;
        }
    }
    return out;
}

// Expectation of the product of +/-1 outcomes (outcome o -> (-1)^o) over the
// referenced parties at the given inputs; unreferenced parties are summed out
// with their inputs on the lexicographically first slice.
inline double correlator(const Behavior& b, const std::vector<std::pair<int, int>>& party_inputs) {
    const Scenario& s = b.scenario();
    std::vector<int> in(s.num_parties(), 0);
    std::vector<bool> referenced(s.num_parties(), false);
    for (auto [party, input] : party_inputs) {
        if (party < 0 || party >= s.num_parties() || input < 0 || input >= s.inputs[party])
            throw std::invalid_argument("correlator: reference out of range");
        in[party] = input;
        referenced[party] = true;
    }
    double sum = 0.0;
    for (const auto& o : all_outcome_tuples(s)) {
        int sign = 1;
        for (int k = 0; k < s.num_parties(); ++k)
            if (referenced[k] && (o[k] & 1)) sign = -sign;
        sum += sign * b.at(in, o);
    }
    return sum;
}

// ---- Collins-Gisin coordinates (binary outcomes) ------------------------
//
// A no-signaling behavior with binary outcomes is parametrized by the
// "all parties in S output 0" marginals over every nonempty party subset S
// and every input assignment on S.  These coordinates are what the moment
// constraints of the certification SDP pin.

struct CgIndex {
    std::vector<int> parties;  // sorted subset
    std::vector<int> inputs;   // one input per listed party
};

inline std::vector<CgIndex> cg_indices(const Scenario& s) {
    std::vector<CgIndex> out;
    int n = s.num_parties();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> parties;
        for (int k = 0; k < n; ++k)
            if (mask & (1 << k)) parties.push_back(k);
        std::vector<int> radices;
        for (int k : parties) radices.push_back(s.inputs[k]);
        int total = 1;
        for (int r : radices) total *= r;
        for (int i = 0; i < total; ++i)
            out.push_back(CgIndex{parties, detail::unravel_mixed(i, radices)});
    }
    return out;
}

// P(all parties in S output 0 | inputs), summed from the table with
// unreferenced inputs on slice 0 (well-defined for no-signaling tables).
inline double cg_value(const Behavior& b, const CgIndex& ci) {
    const Scenario& s = b.scenario();
    std::vector<int> in(s.num_parties(), 0);
    for (std::size_t i = 0; i < ci.parties.size(); ++i) in[ci.parties[i]] = ci.inputs[i];
    double sum = 0.0;
    for (const auto& o : all_outcome_tuples(s)) {
        bool all_zero = true;
        for (int k : ci.parties)
            if (o[k] != 0) { all_zero = false; break; }
        if (all_zero) sum += b.at(in, o);
    }
    return sum;
}

// Rebuild a table from CG coordinates by inclusion-exclusion:
// p(o|x) = sum_{U subset of ones(o)} (-1)^|U| E_{zeros(o) + U}(x).
inline Behavior behavior_from_cg(const Scenario& s, const std::vector<double>& cg) {
    auto idx = cg_indices(s);
    if (cg.size() != idx.size()) throw std::invalid_argument("behavior_from_cg: size mismatch");
    Behavior out(s);
    auto find_cg = [&](const std::vector<int>& parties, const std::vector<int>& ins) -> double {
        if (parties.empty()) return 1.0;
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i].parties == parties && idx[i].inputs == ins) return cg[i];
        throw std::logic_error("behavior_from_cg: missing coordinate");
    };
    for (const auto& in : all_input_tuples(s)) {
        for (const auto& o : all_outcome_tuples(s)) {
            std::vector<int> zeros, ones;
            for (int k = 0; k < s.num_parties(); ++k)
                (o[k] == 0 ? zeros : ones).push_back(k);
            double p = 0.0;
            for (int um = 0; um < (1 << ones.size()); ++um) {
                std::vector<int> parties = zeros;
                int bits = 0;
                for (std::size_t t = 0; t < ones.size(); ++t)
                    if (um & (1 << t)) { parties.push_back(ones[t]); ++bits; }
                std::sort(parties.begin(), parties.end());
                std::vector<int> ins;
                for (int k : parties) ins.push_back(in[k]);
                p += (bits % 2 == 0 ? 1.0 : -1.0) * find_cg(parties, ins);
            }
            out.at(in, o) = p;
        }
    }
    return out;
}

// Least-squares projection of a table onto the no-signaling affine subspace,
// returned as CG coordinates together with the projection residual.
struct NsProjection {
    std::vector<double> cg;
    double residual = 0.0;
};

inline NsProjection project_to_no_signaling(const Behavior& b) {
    const Scenario& s = b.scenario();
    auto idx = cg_indices(s);
    int ncg = static_cast<int>(idx.size());
    int nt = static_cast<int>(b.table().size());
    // table = t0 + T g ; build columns by finite differences of behavior_from_cg.
    std::vector<double> zero(ncg, 0.0);
    Behavior base = behavior_from_cg(s, zero);
    Eigen::MatrixXd T(nt, ncg);
    for (int j = 0; j < ncg; ++j) {
        std::vector<double> e(ncg, 0.0);
        e[j] = 1.0;
        Behavior col = behavior_from_cg(s, e);
        for (int i = 0; i < nt; ++i) T(i, j) = col.table()[i] - base.table()[i];
    }
    Eigen::VectorXd rhs(nt);
    for (int i = 0; i < nt; ++i) rhs(i) = b.table()[i] - base.table()[i];
    Eigen::VectorXd g = T.colPivHouseholderQr().solve(rhs);
    NsProjection out;
    out.cg.assign(g.data(), g.data() + ncg);
    out.residual = (T * g - rhs).norm();
    return out;
}

// ---- Counted data --------------------------------------------------------

// Integer event counts per (inputs, outcomes) cell, Poisson-distributed in
// the experiment; layout matches Behavior.
class CountsTable {
public:
    CountsTable(Scenario scenario, std::vector<std::uint64_t> counts)
        : scenario_(std::move(scenario)), counts_(std::move(counts)) {
        scenario_.check();
        if (static_cast<int>(counts_.size()) !=
            scenario_.num_input_tuples() * scenario_.num_outcome_tuples())
            throw std::invalid_argument("CountsTable: size mismatch");
    }
    const Scenario& scenario() const { return scenario_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::vector<std::uint64_t>& counts() { return counts_; }

private:
    Scenario scenario_;
    std::vector<std::uint64_t> counts_;
};

// Maximum-likelihood frequencies plus Poissonian bootstrap resamples (each
// cell redrawn Poisson with mean equal to the observed count, renormalized).
inline std::pair<Behavior, std::vector<Behavior>> behavior_from_counts(const CountsTable& counts,
                                                                       int resamples,
                                                                       std::uint64_t seed) {
    const Scenario& s = counts.scenario();
    int no = s.num_outcome_tuples();
    Behavior point(s);
    for (int ii = 0; ii < s.num_input_tuples(); ++ii) {
        double total = 0.0;
        for (int oo = 0; oo < no; ++oo) total += static_cast<double>(counts.counts()[ii * no + oo]);
        if (total <= 0.0)
            throw std::invalid_argument("behavior_from_counts: empty input combination");
        for (int oo = 0; oo < no; ++oo)
            point.table()[ii * no + oo] = static_cast<double>(counts.counts()[ii * no + oo]) / total;
    }
    std::vector<Behavior> boot;
    Rng root(seed);
    for (int r = 0; r < resamples; ++r) {
        Rng rng = root.split(static_cast<std::uint64_t>(r));
        Behavior rb(s);
        for (int ii = 0; ii < s.num_input_tuples(); ++ii) {
            double total = 0.0;
            std::vector<double> draw(no);
            for (int oo = 0; oo < no; ++oo) {
                draw[oo] = static_cast<double>(
                    rng.poisson(static_cast<double>(counts.counts()[ii * no + oo])));
                total += draw[oo];
            }
            if (total <= 0.0) { draw.assign(no, 1.0); total = no; }
            for (int oo = 0; oo < no; ++oo) rb.table()[ii * no + oo] = draw[oo] / total;
        }
        boot.push_back(std::move(rb));
    }
    return {point, boot};
}

// ---- CSV interchange ------------------------------------------------------
// Columns: x,y1,y2,a,b1,b2,p for behaviors and ...,count for counts; one
// input column and one outcome column per party in scenario order.

inline std::string behavior_csv_header(const Scenario& s) {
    static const char* in_names[] = {"x", "y1", "y2", "y3"};
    static const char* out_names[] = {"a", "b1", "b2", "b3"};
    std::string h;
    for (int k = 0; k < s.num_parties(); ++k) { h += in_names[k]; h += ','; }
    for (int k = 0; k < s.num_parties(); ++k) { h += out_names[k]; h += ','; }
    return h;
}

inline void write_behavior_csv(std::ostream& os, const Behavior& b) {
    const Scenario& s = b.scenario();
    os << behavior_csv_header(s) << "p\n";
    for (const auto& in : all_input_tuples(s)) {
        for (const auto& out : all_outcome_tuples(s)) {
            for (int v : in) os << v << ',';
            for (int v : out) os << v << ',';
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", b.at(in, out));
            os << buf << '\n';
        }
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else if (c != '\r') cur += c;
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

inline Behavior read_behavior_csv(std::istream& is, const Scenario& s) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("behavior csv: empty file");
    Behavior b(s);
    std::vector<bool> seen(b.table().size(), false);
    int np = s.num_parties();
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (static_cast<int>(f.size()) != 2 * np + 1)
            throw std::runtime_error("behavior csv: bad field count at line " + std::to_string(lineno));
        std::vector<int> in(np), out(np);
        for (int k = 0; k < np; ++k) in[k] = std::stoi(f[k]);
        for (int k = 0; k < np; ++k) out[k] = std::stoi(f[np + k]);
        for (int k = 0; k < np; ++k)
            if (in[k] < 0 || in[k] >= s.inputs[k] || out[k] < 0 || out[k] >= s.outputs[k])
                throw std::runtime_error("behavior csv: index out of range at line " +
                                         std::to_string(lineno));
        int idx = b.index(in, out);
        b.table()[idx] = std::stod(f[2 * np]);
        seen[idx] = true;
    }
    for (bool x : seen)
        if (!x) throw std::runtime_error("behavior csv: missing cells");
    return b;
}

inline CountsTable read_counts_csv(std::istream& is, const Scenario& s) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("counts csv: empty file");
    CountsTable t(s, std::vector<std::uint64_t>(
                         static_cast<std::size_t>(s.num_input_tuples()) * s.num_outcome_tuples(), 0));
    Behavior ref(s);  // index helper
    int np = s.num_parties();
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (static_cast<int>(f.size()) != 2 * np + 1)
            throw std::runtime_error("counts csv: bad field count at line " + std::to_string(lineno));
        std::vector<int> in(np), out(np);
        for (int k = 0; k < np; ++k) in[k] = std::stoi(f[k]);
        for (int k = 0; k < np; ++k) out[k] = std::stoi(f[np + k]);
        long long c = std::stoll(f[2 * np]);
        if (c < 0) throw std::runtime_error("counts csv: negative count at line " + std::to_string(lineno));
        t.counts()[ref.index(in, out)] = static_cast<std::uint64_t>(c);
    }
    return t;
}

} // namespace netrand
