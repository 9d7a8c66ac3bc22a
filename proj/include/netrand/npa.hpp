#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "netrand/behavior.hpp"
#include "netrand/conic.hpp"
#include "netrand/functionals.hpp"
#include "netrand/ipm.hpp"

namespace netrand {

// ---- Operator algebra -------------------------------------------------------
//
// Words over projector symbols for the certification scenario: the
// measurement parties (qubit stations) plus an adversary party with a single
// measurement whose outcomes enumerate the guess tuples.  Only non-redundant
// outcomes carry symbols; the last outcome of each input is eliminated
// against normalization when expressions are expanded.

struct NpaScenario {
    Scenario measurement;
    int eve_outcomes = 0;  // 0: no adversary party

    int num_parties() const { return measurement.num_parties() + (eve_outcomes > 0 ? 1 : 0); }
    int eve_party() const { return measurement.num_parties(); }

    void check() const {
        measurement.check();
        if (eve_outcomes == 1 || eve_outcomes < 0)
            throw std::invalid_argument("NpaScenario: eve_outcomes must be 0 or >= 2");
        for (int o : measurement.outputs)
            if (o != 2)
                throw std::invalid_argument("NpaScenario: dichotomic measurement parties only");
    }
};

struct OperatorSymbol {
    std::uint8_t party = 0;
    std::uint8_t input = 0;
    std::uint8_t outcome = 0;

    bool operator==(const OperatorSymbol& o) const {
        return party == o.party && input == o.input && outcome == o.outcome;
    }
};

using Word = std::vector<OperatorSymbol>;

struct CanonicalWord {
    Word word;
    bool zero = false;
};

// Cross-party commutation (stable sort by party), projector idempotence, and
// same-input orthogonality, applied to a fixed point.
inline CanonicalWord canonicalize_word(Word w) {
    std::stable_sort(w.begin(), w.end(), [](const OperatorSymbol& a, const OperatorSymbol& b) {
        return a.party < b.party;
    });
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            if (w[i].party != w[i + 1].party || w[i].input != w[i + 1].input) continue;
            if (w[i].outcome != w[i + 1].outcome) return {Word{}, true};  // orthogonal
            w.erase(w.begin() + static_cast<long>(i) + 1);                // idempotent
            changed = true;
            break;
        }
    }
    return {std::move(w), false};
}

inline CanonicalWord multiply(const Word& a, const Word& b) {
    Word w = a;
    w.insert(w.end(), b.begin(), b.end());
    return canonicalize_word(std::move(w));
}

inline Word adjoint_word(const Word& w) {
    Word r(w.rbegin(), w.rend());
    auto c = canonicalize_word(std::move(r));
    return c.word;  // reversal of a nonzero canonical word stays nonzero
}

// Byte-string moment key; a moment and its adjoint share a variable (the
// relaxation is over the real part), so the class key is the lesser of the
// two serializations.
inline std::string word_key(const Word& w) {
    std::string k;
    k.reserve(w.size() * 3);
    for (const auto& s : w) {
        k.push_back(static_cast<char>(s.party));
        k.push_back(static_cast<char>(s.input));
        k.push_back(static_cast<char>(s.outcome));
    }
    return k;
}

inline std::string moment_key(const Word& w) {
    std::string a = word_key(w);
    std::string b = word_key(adjoint_word(w));
    return std::min(a, b);
}

inline std::string word_to_string(const NpaScenario& sc, const Word& w) {
    if (w.empty()) return "1";
    std::string out;
    for (const auto& s : w) {
        if (!out.empty()) out += '.';
        if (s.party == sc.eve_party() && sc.eve_outcomes > 0)
            out += "E" + std::to_string(s.outcome);
        else
            out += party_name(sc.measurement, s.party) + "(" + std::to_string(s.outcome) + "|" +
                   std::to_string(s.input) + ")";
    }
    return out;
}

// All non-redundant projector symbols of the scenario.
inline std::vector<OperatorSymbol> scenario_symbols(const NpaScenario& sc) {
    sc.check();
    std::vector<OperatorSymbol> out;
    for (int p = 0; p < sc.measurement.num_parties(); ++p)
        for (int x = 0; x < sc.measurement.inputs[p]; ++x)
            for (int o = 0; o + 1 < sc.measurement.outputs[p]; ++o)
                out.push_back({static_cast<std::uint8_t>(p), static_cast<std::uint8_t>(x),
                               static_cast<std::uint8_t>(o)});
    if (sc.eve_outcomes > 0)
        for (int e = 0; e + 1 < sc.eve_outcomes; ++e)
            out.push_back({static_cast<std::uint8_t>(sc.eve_party()), 0,
                           static_cast<std::uint8_t>(e)});
    return out;
}

// ---- Hierarchy descriptor ---------------------------------------------------
//
// "<k>"            : all words of length <= k
// "+onesym"        : plus all products with at most one symbol per party
// "+<letters>"     : plus products with exactly one symbol per party over the
//                    listed party groups (A = Alice, B = every Bob, E = Eve);
//                    a repeated letter picks that many distinct group members
// "local"          : alias for "2+onesym"
struct HierarchyLevel {
    int base_length = 2;
    bool one_per_party = false;
    std::vector<std::vector<int>> patterns;  // explicit party subsets
    std::string text = "local";

    static HierarchyLevel parse(const std::string& spec, const NpaScenario& sc);
    std::string to_string() const { return text; }
};

inline HierarchyLevel HierarchyLevel::parse(const std::string& spec, const NpaScenario& sc) {
    HierarchyLevel lvl;
    lvl.text = spec;
    std::string body = spec;
    if (body == "local") body = "2+onesym";
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : body) {
        if (c == '+') { tokens.push_back(cur); cur.clear(); }
        else if (!std::isspace(static_cast<unsigned char>(c))) cur += c;
    }
    tokens.push_back(cur);
    if (tokens.empty() || tokens[0].empty())
        throw std::invalid_argument("hierarchy level: missing base length in '" + spec + "'");
    lvl.base_length = std::stoi(tokens[0]);
    if (lvl.base_length < 1)
        throw std::invalid_argument("hierarchy level: base length must be >= 1");
    lvl.one_per_party = false;
    lvl.patterns.clear();
    for (std::size_t t = 1; t < tokens.size(); ++t) {
        const std::string& tok = tokens[t];
        if (tok == "onesym") { lvl.one_per_party = true; continue; }
        // Letter groups: A -> party 0; B -> all remaining measurement
        // parties; E -> the adversary.
        std::map<char, std::vector<int>> groups;
        groups['A'] = {0};
        groups['B'] = {};
        for (int p = 1; p < sc.measurement.num_parties(); ++p) groups['B'].push_back(p);
        if (sc.eve_outcomes > 0) groups['E'] = {sc.eve_party()};
        std::map<char, int> want;
        for (char c : tok) {
            char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (!groups.count(u) || groups[u].empty())
                throw std::invalid_argument("hierarchy level: unknown party letter '" +
                                            std::string(1, c) + "'");
            want[u] += 1;
        }
        // All subsets taking `want[g]` distinct parties from each group.
        std::vector<std::vector<int>> subsets = {{}};
        for (auto& [g, count] : want) {
            const auto& members = groups[g];
            if (count > static_cast<int>(members.size()))
                throw std::invalid_argument("hierarchy level: pattern '" + tok +
                                            "' asks for more parties than exist");
            std::vector<std::vector<int>> chosen;
            std::vector<int> pick(count);
            // enumerate count-subsets of members
            std::vector<int> idx(count);
            for (int i = 0; i < count; ++i) idx[i] = i;
            while (true) {
                std::vector<int> sel;
                for (int i : idx) sel.push_back(members[i]);
                chosen.push_back(sel);
                int i = count - 1;
                while (i >= 0 && idx[i] == static_cast<int>(members.size()) - count + i) --i;
                if (i < 0) break;
                ++idx[i];
                for (int j = i + 1; j < count; ++j) idx[j] = idx[j - 1] + 1;
            }
            std::vector<std::vector<int>> next;
            for (const auto& base : subsets)
                for (const auto& sel : chosen) {
                    auto merged = base;
                    merged.insert(merged.end(), sel.begin(), sel.end());
                    next.push_back(merged);
                }
            subsets = std::move(next);
        }
        for (auto& s : subsets) {
            std::sort(s.begin(), s.end());
            lvl.patterns.push_back(s);
        }
    }
    return lvl;
}

// ---- Monomial generation ----------------------------------------------------

inline std::vector<Word> generate_monomials(const NpaScenario& sc, const HierarchyLevel& level) {
    auto symbols = scenario_symbols(sc);
    std::set<std::string> seen;
    std::vector<Word> out;
    auto add = [&](const Word& w) {
        std::string k = word_key(w);
        if (seen.insert(k).second) out.push_back(w);
    };
    add(Word{});

    // Base: breadth-first products up to the requested length.
    std::vector<Word> frontier = {Word{}};
    for (int len = 1; len <= level.base_length; ++len) {
        std::vector<Word> next;
        std::set<std::string> next_seen;
        for (const auto& w : frontier)
            for (const auto& s : symbols) {
                auto c = multiply(w, Word{s});
                if (c.zero || static_cast<int>(c.word.size()) != len) continue;
                if (next_seen.insert(word_key(c.word)).second) next.push_back(c.word);
            }
        for (const auto& w : next) add(w);
        frontier = std::move(next);
    }

    // Products with at most one symbol per party over the given subsets.
    auto add_subset_products = [&](const std::vector<int>& parties) {
        std::vector<std::vector<OperatorSymbol>> choices;
        for (int p : parties) {
            std::vector<OperatorSymbol> per;
            for (const auto& s : symbols)
                if (s.party == p) per.push_back(s);
            if (per.empty()) return;
            choices.push_back(per);
        }
        std::vector<Word> acc = {Word{}};
        for (const auto& per : choices) {
            std::vector<Word> next;
            for (const auto& w : acc)
                for (const auto& s : per) {
                    Word e = w;
                    e.push_back(s);
                    next.push_back(e);
                }
            acc = std::move(next);
        }
        for (auto& w : acc)
            if (!w.empty()) add(canonicalize_word(w).word);
    };
    if (level.one_per_party) {
        int np = sc.num_parties();
        for (int mask = 1; mask < (1 << np); ++mask) {
            std::vector<int> parties;
            for (int p = 0; p < np; ++p)
                if (mask & (1 << p)) parties.push_back(p);
            add_subset_products(parties);
        }
    }
    for (const auto& pattern : level.patterns) add_subset_products(pattern);

    std::sort(out.begin(), out.end(), [](const Word& a, const Word& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return word_key(a) < word_key(b);
    });
    return out;
}

// ---- Linear expressions over moments ---------------------------------------

// A linear combination of canonical-word moments (keyed) plus a constant.
struct MomentExpr {
    double constant = 0.0;
    std::map<std::string, double> coeffs;  // moment key -> coefficient
    std::map<std::string, Word> examples;  // one representative word per key

    void add(const Word& w, double c) {
        if (c == 0.0) return;
        if (w.empty()) { constant += c; return; }
        std::string k = moment_key(w);
        coeffs[k] += c;
        examples.emplace(k, w);
    }
};

// Projector for an arbitrary outcome, with the last outcome expanded against
// normalization: P_last = 1 - sum_others.
struct OperatorPoly {
    std::vector<std::pair<Word, double>> terms;
};

inline OperatorPoly projector_poly(const NpaScenario& sc, int party, int input, int outcome) {
    int outs = party == sc.eve_party() && sc.eve_outcomes > 0 ? sc.eve_outcomes
                                                              : sc.measurement.outputs[party];
    OperatorPoly p;
    if (outcome < outs - 1) {
        p.terms.push_back({Word{{static_cast<std::uint8_t>(party), static_cast<std::uint8_t>(input),
                                 static_cast<std::uint8_t>(outcome)}},
                           1.0});
    } else {
        p.terms.push_back({Word{}, 1.0});
        for (int o = 0; o + 1 < outs; ++o)
            p.terms.push_back({Word{{static_cast<std::uint8_t>(party),
                                     static_cast<std::uint8_t>(input),
                                     static_cast<std::uint8_t>(o)}},
                               -1.0});
    }
    return p;
}

inline OperatorPoly poly_product(const OperatorPoly& a, const OperatorPoly& b) {
    OperatorPoly out;
    for (const auto& [wa, ca] : a.terms)
        for (const auto& [wb, cb] : b.terms) {
            auto c = multiply(wa, wb);
            if (!c.zero) out.terms.push_back({c.word, ca * cb});
        }
    return out;
}

// ---- Problem assembly -------------------------------------------------------

enum class GuessTarget { one_party = 1, two_party = 2, three_party = 3 };

struct NpaConstraint {
    enum class Kind { none, functional, behavior } kind = Kind::none;
    const CorrelatorFunctional* functional = nullptr;
    double functional_value = 0.0;
    const Behavior* behavior = nullptr;
};

struct MomentClassInfo {
    std::string key;
    Word rep;
    std::vector<std::pair<int, int>> positions;  // upper-triangle entries
    int variable = -1;                           // free-variable index, or -1
    bool pinned = false;
    double pinned_value = 0.0;
};

struct NpaProblem {
    NpaScenario scenario;
    HierarchyLevel level;
    std::vector<int> target_inputs;  // one per measurement party (unused ones 0)
    GuessTarget target = GuessTarget::two_party;
    std::vector<Word> monomials;
    std::vector<MomentClassInfo> classes;             // all classes
    std::unordered_map<std::string, int> class_of;    // key -> index into classes
    ConicProgram program;
    double objective_constant = 0.0;
    std::string constraint_kind = "none";
    double ns_projection_residual = 0.0;
    // Eq.-6-style equality handled by eliminating one moment variable.
    bool eliminated = false;
    std::string eliminated_key;
    double elim_rhs = 0.0, elim_pivot = 1.0;
    std::vector<std::pair<int, double>> elim_coeffs;  // free-variable index -> coefficient
};

namespace npa_detail {

// The guessing objective: sum over guess tuples e of the moment of
// (product of target-outcome projectors at the target inputs) * E_e.
inline MomentExpr target_expression(const NpaScenario& sc, GuessTarget target,
                                    const std::vector<int>& target_inputs) {
    int nparties = static_cast<int>(target);
    if (nparties > sc.measurement.num_parties())
        throw std::invalid_argument("target_expression: more target parties than parties");
    if (sc.eve_outcomes != (1 << nparties))
        throw std::invalid_argument("target_expression: eve_outcomes must be 2^target_parties");
    MomentExpr expr;
    for (int e = 0; e < sc.eve_outcomes; ++e) {
        OperatorPoly acc;
        acc.terms.push_back({Word{}, 1.0});
        for (int p = 0; p < nparties; ++p) {
            int outcome = (e >> (nparties - 1 - p)) & 1;
            acc = poly_product(acc, projector_poly(sc, p, target_inputs[p], outcome));
        }
        acc = poly_product(acc, projector_poly(sc, sc.eve_party(), 0, e));
        for (const auto& [w, c] : acc.terms) expr.add(w, c);
    }
    return expr;
}

// Correlator functional as a moment expression (observables 2P0 - 1).
inline MomentExpr functional_expression(const NpaScenario& sc, const CorrelatorFunctional& f) {
    MomentExpr expr;
    for (const auto& t : f.terms) {
        OperatorPoly acc;
        acc.terms.push_back({Word{}, t.weight});
        for (auto [party, input] : t.party_inputs) {
            OperatorPoly obs;
            obs.terms.push_back({Word{}, -1.0});
            obs.terms.push_back({Word{{static_cast<std::uint8_t>(party),
                                       static_cast<std::uint8_t>(input), 0}},
                                 2.0});
            acc = poly_product(acc, obs);
        }
        for (const auto& [w, c] : acc.terms) expr.add(w, c);
    }
    return expr;
}

// Collins-Gisin pin words for the measurement parties.
inline std::vector<std::pair<CgIndex, Word>> cg_words(const NpaScenario& sc) {
    std::vector<std::pair<CgIndex, Word>> out;
    for (const auto& ci : cg_indices(sc.measurement)) {
        Word w;
        for (std::size_t i = 0; i < ci.parties.size(); ++i)
            w.push_back({static_cast<std::uint8_t>(ci.parties[i]),
                         static_cast<std::uint8_t>(ci.inputs[i]), 0});
        out.push_back({ci, w});
    }
    return out;
}

} // namespace npa_detail

// Compile a guessing-probability problem into the canonical conic form.  The
// monomial basis is the requested level augmented with the Collins-Gisin
// words and the objective words, so that the observed-statistics constraints
// and the objective are always expressible and the two constraint modes share
// one basis at equal level.
inline NpaProblem assemble_sdp(const NpaScenario& sc, GuessTarget target,
                               const std::vector<int>& target_inputs, const NpaConstraint& constraint,
                               const HierarchyLevel& level, double ns_accept_tol = 5e-3) {
    sc.check();
    if (static_cast<int>(target_inputs.size()) != sc.measurement.num_parties())
        throw std::invalid_argument("assemble_sdp: target_inputs size mismatch");
    for (int p = 0; p < sc.measurement.num_parties(); ++p)
        if (target_inputs[p] < 0 || target_inputs[p] >= sc.measurement.inputs[p])
            throw std::invalid_argument("assemble_sdp: target input out of range");

    NpaProblem prob;
    prob.scenario = sc;
    prob.level = level;
    prob.target = target;
    prob.target_inputs = target_inputs;

    MomentExpr objective = npa_detail::target_expression(sc, target, target_inputs);

    // Behavior pins (Eq.-7 mode): Collins-Gisin coordinates of the observed
    // table after least-squares projection onto the no-signaling subspace.
    std::vector<std::pair<CgIndex, Word>> pins = npa_detail::cg_words(sc);
    std::vector<double> pin_values;
    if (constraint.kind == NpaConstraint::Kind::behavior) {
        if (!constraint.behavior) throw std::invalid_argument("assemble_sdp: missing behavior");
        if (!(constraint.behavior->scenario() == sc.measurement))
            throw std::invalid_argument("assemble_sdp: behavior scenario mismatch");
        auto rep = validate_behavior(*constraint.behavior);
        if (rep.normalization_residual > ns_accept_tol || rep.negativity > ns_accept_tol ||
            rep.no_signaling_residual > ns_accept_tol)
            throw std::invalid_argument("assemble_sdp: behavior fails validation at tolerance");
        auto proj = project_to_no_signaling(*constraint.behavior);
        prob.ns_projection_residual = proj.residual;
        pin_values = proj.cg;
        prob.constraint_kind = "behavior";
    }

    MomentExpr functional_expr;
    if (constraint.kind == NpaConstraint::Kind::functional) {
        if (!constraint.functional) throw std::invalid_argument("assemble_sdp: missing functional");
        if (!(constraint.functional->scenario == sc.measurement))
            throw std::invalid_argument("assemble_sdp: functional scenario mismatch");
        double w = constraint.functional->weight_norm();
        if (std::abs(constraint.functional_value) > w)
            throw std::domain_error("assemble_sdp: functional value outside [-W, W]");
        functional_expr = npa_detail::functional_expression(sc, *constraint.functional);
        prob.constraint_kind = "functional";
    }

    // Monomial basis with augmentation.
    prob.monomials = generate_monomials(sc, level);
    {
        std::set<std::string> have;
        for (const auto& w : prob.monomials) have.insert(word_key(w));
        auto ensure = [&](const Word& w) {
            if (w.empty()) return;
            if (have.insert(word_key(w)).second) prob.monomials.push_back(w);
        };
        for (const auto& [k, c] : objective.coeffs) ensure(objective.examples.at(k));
        for (const auto& [ci, w] : pins) ensure(w);
        std::sort(prob.monomials.begin(), prob.monomials.end(), [](const Word& a, const Word& b) {
            if (a.size() != b.size()) return a.size() < b.size();
            return word_key(a) < word_key(b);
        });
    }

    // Moment matrix classes: shared variables via canonical equivalence.
    const int d = static_cast<int>(prob.monomials.size());
    std::vector<Word> adjoints;
    adjoints.reserve(d);
    for (const auto& w : prob.monomials) adjoints.push_back(adjoint_word(w));
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            auto c = multiply(adjoints[i], prob.monomials[j]);
            if (c.zero) continue;  // structurally zero entry
            std::string key = moment_key(c.word);
            auto it = prob.class_of.find(key);
            if (it == prob.class_of.end()) {
                prob.class_of.emplace(key, static_cast<int>(prob.classes.size()));
                prob.classes.push_back(MomentClassInfo{key, c.word, {{i, j}}, -1, false, 0.0});
            } else {
                prob.classes[it->second].positions.push_back({i, j});
            }
        }
    }

    // Pin the identity and, in behavior mode, the CG moments.
    auto pin_class = [&](const std::string& key, double value) {
        auto it = prob.class_of.find(key);
        if (it == prob.class_of.end()) return false;
        prob.classes[it->second].pinned = true;
        prob.classes[it->second].pinned_value = value;
        return true;
    };
    pin_class(moment_key(Word{}), 1.0);
    if (constraint.kind == NpaConstraint::Kind::behavior) {
        for (std::size_t k = 0; k < pins.size(); ++k) {
            if (!pin_class(moment_key(pins[k].second), pin_values[k]))
                throw std::logic_error("assemble_sdp: augmented basis lost a pin word");
        }
    }

    // Assign free-variable indices.
    int nvars = 0;
    for (auto& cls : prob.classes)
        if (!cls.pinned) cls.variable = nvars++;

    // Conic program: Gamma(x) = sum x_v F_v - F_0  >= 0.
    prob.program.blocks = {BlockSpec{d, false}};
    prob.program.c.assign(nvars, 0.0);
    prob.program.fi.assign(nvars, {});
    for (const auto& cls : prob.classes) {
        if (cls.pinned) {
            if (cls.pinned_value != 0.0)
                for (auto [i, j] : cls.positions)
                    prob.program.f0.push_back(ConicEntry{0, i, j, -cls.pinned_value});
        } else {
            for (auto [i, j] : cls.positions)
                prob.program.fi[cls.variable].push_back(ConicEntry{0, i, j, 1.0});
        }
    }

    // Objective: p_guess = kappa0 + sum coef * moment.  The free side
    // minimizes c'x, so c = -coef on free classes.
    prob.objective_constant = objective.constant;
    for (const auto& [key, coef] : objective.coeffs) {
        auto it = prob.class_of.find(key);
        if (it == prob.class_of.end())
            throw std::logic_error("assemble_sdp: objective word missing from basis");
        const auto& cls = prob.classes[it->second];
        if (cls.pinned) prob.objective_constant += coef * cls.pinned_value;
        else prob.program.c[cls.variable] -= coef;
    }

    // Functional equality (Eq.-6 mode) by exact variable elimination.
    if (constraint.kind == NpaConstraint::Kind::functional) {
        double rhs = constraint.functional_value - functional_expr.constant;
        std::vector<std::pair<int, double>> coeffs;  // free-variable index -> coeff
        int pivot_var = -1;
        double pivot_coef = 0.0;
        std::string pivot_key;
        for (const auto& [key, coef] : functional_expr.coeffs) {
            auto it = prob.class_of.find(key);
            if (it == prob.class_of.end())
                throw std::logic_error("assemble_sdp: functional word missing from basis");
            const auto& cls = prob.classes[it->second];
            if (cls.pinned) { rhs -= coef * cls.pinned_value; continue; }
            coeffs.push_back({cls.variable, coef});
            if (std::abs(coef) > std::abs(pivot_coef)) {
                pivot_coef = coef;
                pivot_var = cls.variable;
                pivot_key = key;
            }
        }
        if (pivot_var < 0)
            throw std::logic_error("assemble_sdp: functional constraint has no free moment");
        // x_pivot = (rhs - sum_{v != pivot} g_v x_v) / g_pivot
        prob.eliminated = true;
        prob.eliminated_key = pivot_key;
        prob.elim_rhs = rhs;
        prob.elim_pivot = pivot_coef;
        for (const auto& [var, g] : coeffs)
            if (var != pivot_var) prob.elim_coeffs.push_back({var, g});

        std::vector<ConicEntry> fpivot = prob.program.fi[pivot_var];
        double cpivot = prob.program.c[pivot_var];
        // Fold the pivot into F_0 and the remaining columns.
        for (const auto& e : fpivot)
            prob.program.f0.push_back(ConicEntry{e.block, e.row, e.col,
                                                 -e.value * rhs / pivot_coef});
        prob.objective_constant += -cpivot * rhs / pivot_coef;  // c = -coef convention
        for (const auto& [var, g] : coeffs) {
            if (var == pivot_var) continue;
            double factor = g / pivot_coef;
            for (const auto& e : fpivot)
                prob.program.fi[var].push_back(
                    ConicEntry{e.block, e.row, e.col, -factor * e.value});
            prob.program.c[var] -= factor * cpivot;
        }
        // Drop the pivot column.
        prob.program.fi.erase(prob.program.fi.begin() + pivot_var);
        prob.program.c.erase(prob.program.c.begin() + pivot_var);
        for (auto& cls : prob.classes)
            if (cls.variable > pivot_var) --cls.variable;
            else if (cls.variable == pivot_var) cls.variable = -2;  // eliminated marker
        for (auto& [var, g] : prob.elim_coeffs)
            if (var > pivot_var) --var;
    }

    prob.program.check();
    return prob;
}

// ---- Solving ----------------------------------------------------------------

struct PguessResult {
    double pguess = 1.0;        // upper bound, clamped to [0, 1]
    double hmin_bits = 0.0;     // -log2(pguess)
    double raw_objective = 1.0; // unclamped kappa0 - <F_0, Y>
    double bound_margin = 0.0;  // residual-driven slack added on flagged solves
    Solution::Status status = Solution::Status::stalled;
    double gap = 0.0;
    double equality_residual = 0.0;
    int iterations = 0;
    std::string note;
    Solution solution;

    bool converged() const { return status == Solution::Status::optimal; }
};

// Upper bound on the guessing probability from the compiled program.  The
// bound is read off the conic-side objective (weak duality makes any
// conic-feasible value an upper bound for the moment maximization), then
// clamped to [0,1] since a guessing probability cannot exceed 1.
//
// Constraint data sitting exactly on the boundary of the feasible region
// (maximal violations, pure-state statistics) can exhaust double precision;
// such solves are retried once in long double before being reported as
// non-optimal.
inline PguessResult pguess_bound(const NpaProblem& prob, const SolverConfig& config = {}) {
    PguessResult out;
    Solution sol = solve(prob.program, config);
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.note = sol.note;
    out.gap = sol.duality_gap;
    out.equality_residual = sol.primal_residual;
    out.raw_objective = prob.objective_constant - sol.conic_objective;
    out.solution = std::move(sol);
    if (out.status == Solution::Status::infeasible ||
        out.status == Solution::Status::unbounded) {
        out.pguess = 1.0;  // flagged, no bound to report
        out.hmin_bits = 0.0;
        return out;
    }
    if (out.status == Solution::Status::stalled) {
        // Best-effort bound from the near-feasible conic iterate, inflated by
        // the worst-case effect of its equality residuals on weak duality.
        // Flagged via status; callers needing certified bounds must check.
        double x_norm = 1.0;
        for (double v : out.solution.free_vars) x_norm += std::abs(v);
        out.bound_margin = out.equality_residual * x_norm + out.gap;
        out.pguess = std::min(1.0, std::max(out.raw_objective + out.bound_margin, 1e-300));
        out.hmin_bits = -std::log2(out.pguess);
        return out;
    }
    out.pguess = std::min(1.0, std::max(out.raw_objective, 1e-300));
    out.hmin_bits = -std::log2(out.pguess);
    return out;
}

// Recover the moment vector (free variables plus the eliminated one).
inline std::unordered_map<std::string, double> recover_moments(const NpaProblem& prob,
                                                               const Solution& sol) {
    std::unordered_map<std::string, double> out;
    for (const auto& cls : prob.classes) {
        if (cls.pinned) out[cls.key] = cls.pinned_value;
        else if (cls.variable >= 0) out[cls.key] = sol.free_vars[cls.variable];
    }
    if (prob.eliminated) {
        double v = prob.elim_rhs;
        for (const auto& [var, g] : prob.elim_coeffs) {
            if (var < 0) continue;
            auto key_of_var = [&]() -> const std::string* {
                for (const auto& cls : prob.classes)
                    if (cls.variable == var) return &cls.key;
                return nullptr;
            };
            const std::string* k = key_of_var();
            if (k) v -= g * out[*k];
        }
        out[prob.eliminated_key] = v / prob.elim_pivot;
    }
    return out;
}

} // namespace netrand
