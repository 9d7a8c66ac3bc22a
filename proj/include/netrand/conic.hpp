#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace netrand {

// Canonical block-diagonal conic program in SDPA data form.  One data set
// describes the primal-dual pair
//
//   free side :  min_x   c'x          s.t.  sum_i x_i F_i - F_0  in cone
//   conic side:  max_Y  <F_0, Y>      s.t.  <F_i, Y> = c_i,   Y  in cone
//
// where the cone is a product of PSD blocks and a nonnegative diagonal
// block.  The moment-matrix compiler emits programs on this form with the
// free variables x playing the role of the moments.
struct BlockSpec {
    int size = 0;
    bool diagonal = false;  // nonnegative orthant, stored/emitted diagonally
};

struct ConicEntry {
    int block = 0;
    int row = 0;  // row <= col; symmetric counterpart implied
    int col = 0;
    double value = 0.0;
};

struct ConicProgram {
    std::vector<BlockSpec> blocks;
    std::vector<double> c;                          // length m
    std::vector<ConicEntry> f0;                     // F_0
    std::vector<std::vector<ConicEntry>> fi;        // F_1 .. F_m

    int num_constraints() const { return static_cast<int>(c.size()); }

    void check() const {
        if (fi.size() != c.size()) throw std::invalid_argument("ConicProgram: |F_i| != |c|");
        auto check_entry = [&](const ConicEntry& e) {
            if (e.block < 0 || e.block >= static_cast<int>(blocks.size()) || e.row > e.col ||
                e.row < 0 || e.col >= blocks[e.block].size)
                throw std::invalid_argument("ConicProgram: entry out of range");
            if (blocks[e.block].diagonal && e.row != e.col)
                throw std::invalid_argument("ConicProgram: off-diagonal entry in diagonal block");
        };
        for (const auto& e : f0) check_entry(e);
        for (const auto& row : fi)
            for (const auto& e : row) check_entry(e);
    }
};

// Dense symmetric matrices per block from a sparse entry list.
inline std::vector<Eigen::MatrixXd> densify(const ConicProgram& p,
                                            const std::vector<ConicEntry>& entries) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& blk : p.blocks) out.push_back(Eigen::MatrixXd::Zero(blk.size, blk.size));
    for (const auto& e : entries) {
        out[e.block](e.row, e.col) += e.value;
        if (e.row != e.col) out[e.block](e.col, e.row) += e.value;
    }
    return out;
}

inline double block_inner(const std::vector<Eigen::MatrixXd>& a,
                          const std::vector<Eigen::MatrixXd>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k].cwiseProduct(b[k])).sum();
    return s;
}

// <entries, Y> without densifying the sparse side.
inline double sparse_inner(const std::vector<ConicEntry>& entries,
                           const std::vector<Eigen::MatrixXd>& y) {
    double s = 0.0;
    for (const auto& e : entries)
        s += e.value * (e.row == e.col ? y[e.block](e.row, e.row)
                                       : 2.0 * y[e.block](e.row, e.col));
    return s;
}

// Solver outcome.  The conic-side blocks are the PSD variable Y, the free
// variables are the LMI-side x, and the slack blocks hold sum x_i F_i - F_0.
struct Solution {
    enum class Status { optimal, infeasible, unbounded, stalled };
    Status status = Status::stalled;
    std::vector<Eigen::MatrixXd> conic_blocks;
    std::vector<Eigen::MatrixXd> slack_blocks;
    std::vector<double> free_vars;
    double conic_objective = 0.0;
    double free_objective = 0.0;
    double duality_gap = 0.0;
    double primal_residual = 0.0;  // max |<F_i, Y> - c_i|
    double dual_residual = 0.0;    // residual of the slack identity
    double quality = 1.0;          // max of the relative residual/gap metrics
    int iterations = 0;
    double mu = 0.0;
    std::string note;
};

inline const char* status_name(Solution::Status s) {
    switch (s) {
        case Solution::Status::optimal: return "optimal";
        case Solution::Status::infeasible: return "infeasible";
        case Solution::Status::unbounded: return "unbounded";
        default: return "stalled";
    }
}

// Independent post-hoc verification: recomputes feasibility residuals, cone
// membership, the duality gap, and complementary slackness from the program
// data alone.
struct VerifyReport {
    double equality_residual = 0.0;     // max_i |<F_i,Y> - c_i|
    double conic_min_eig = 0.0;         // min over Y blocks
    double slack_min_eig = 0.0;         // min over S blocks
    double slack_identity_residual = 0.0;  // ||sum x F - F_0 - S||_max
    double gap = 0.0;                   // |<F_0,Y> - c'x|
    double complementarity = 0.0;       // |<Y, S>|
    bool passes(double tol) const {
        return equality_residual <= tol && conic_min_eig >= -tol && slack_min_eig >= -tol &&
               slack_identity_residual <= tol && gap <= tol && complementarity <= tol;
    }
};

inline VerifyReport verify_solution(const ConicProgram& p, const Solution& sol) {
    VerifyReport rep;
    for (int i = 0; i < p.num_constraints(); ++i)
        rep.equality_residual = std::max(
            rep.equality_residual, std::abs(sparse_inner(p.fi[i], sol.conic_blocks) - p.c[i]));
    auto min_eig = [](const std::vector<Eigen::MatrixXd>& blocks) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks) {
            if (b.size() == 0) continue;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
            m = std::min(m, es.eigenvalues().minCoeff());
        }
        return std::isfinite(m) ? m : 0.0;
    };
    rep.conic_min_eig = min_eig(sol.conic_blocks);
    // Rebuild the slack from scratch.
    std::vector<Eigen::MatrixXd> slack = densify(p, p.f0);
    for (auto& blk : slack) blk = -blk;
    for (int i = 0; i < p.num_constraints(); ++i)
        for (const auto& e : p.fi[i]) {
            slack[e.block](e.row, e.col) += sol.free_vars[i] * e.value;
            if (e.row != e.col) slack[e.block](e.col, e.row) += sol.free_vars[i] * e.value;
        }
    rep.slack_min_eig = min_eig(slack);
    double idres = 0.0, comp = 0.0;
    for (std::size_t k = 0; k < slack.size(); ++k) {
        if (!sol.slack_blocks.empty())
            idres = std::max(idres, (slack[k] - sol.slack_blocks[k]).cwiseAbs().maxCoeff());
        comp += (slack[k].cwiseProduct(sol.conic_blocks[k])).sum();
    }
    rep.slack_identity_residual = idres;
    rep.complementarity = std::abs(comp);
    double f0y = sparse_inner(p.f0, sol.conic_blocks);
    double cx = 0.0;
    for (int i = 0; i < p.num_constraints(); ++i) cx += p.c[i] * sol.free_vars[i];
    rep.gap = std::abs(f0y - cx);
    return rep;
}

// ---- SDPA sparse format (.dat-s) ------------------------------------------
// m / nblocks / block sizes (negative = diagonal) / objective / entries
// "k block i j value" with k = 0 for F_0, 1-based indices, upper triangle.

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip
    return std::string(buf, res.ptr);
}

} // namespace detail

inline std::string emit_sdpa(const ConicProgram& p) {
    p.check();
    std::string out;
    out += std::to_string(p.num_constraints()) + "\n";
    out += std::to_string(p.blocks.size()) + "\n";
    for (std::size_t k = 0; k < p.blocks.size(); ++k) {
        if (k) out += ' ';
        out += std::to_string(p.blocks[k].diagonal ? -p.blocks[k].size : p.blocks[k].size);
    }
    out += "\n";
    for (int i = 0; i < p.num_constraints(); ++i) {
        if (i) out += ' ';
        out += detail::format_double(p.c[i]);
    }
    out += "\n";
    auto emit_entries = [&](int k, const std::vector<ConicEntry>& entries) {
        for (const auto& e : entries) {
            if (e.value == 0.0) continue;
            out += std::to_string(k) + " " + std::to_string(e.block + 1) + " " +
                   std::to_string(e.row + 1) + " " + std::to_string(e.col + 1) + " " +
                   detail::format_double(e.value) + "\n";
        }
    };
    emit_entries(0, p.f0);
    for (int i = 0; i < p.num_constraints(); ++i) emit_entries(i + 1, p.fi[i]);
    return out;
}

inline ConicProgram parse_sdpa(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto next_data_line = [&]() -> std::string {
        while (std::getline(is, line)) {
            ++lineno;
            std::size_t pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos) continue;
            if (line[pos] == '*' || line[pos] == '"') continue;
            return line;
        }
        throw std::runtime_error("sdpa parse: unexpected end of file at line " +
                                 std::to_string(lineno));
    };
    ConicProgram p;
    int m = 0, nblocks = 0;
    {
        std::istringstream ls(next_data_line());
        if (!(ls >> m) || m < 0)
            throw std::runtime_error("sdpa parse: bad constraint count at line " +
                                     std::to_string(lineno));
    }
    {
        std::istringstream ls(next_data_line());
        if (!(ls >> nblocks) || nblocks <= 0)
            throw std::runtime_error("sdpa parse: bad block count at line " + std::to_string(lineno));
    }
    {
        std::istringstream ls(next_data_line());
        for (int k = 0; k < nblocks; ++k) {
            int sz;
            char c;
            // Tolerate separators like (), {} and commas used by some writers.
            while (ls >> std::ws && ls.peek() != EOF &&
                   !(std::isdigit(ls.peek()) || ls.peek() == '-' || ls.peek() == '+'))
                ls >> c;
            if (!(ls >> sz) || sz == 0)
                throw std::runtime_error("sdpa parse: bad block size at line " +
                                         std::to_string(lineno));
            p.blocks.push_back(BlockSpec{std::abs(sz), sz < 0});
        }
    }
    {
        std::istringstream ls(next_data_line());
        for (int i = 0; i < m; ++i) {
            double v;
            char c;
            while (ls >> std::ws && ls.peek() != EOF &&
                   !(std::isdigit(ls.peek()) || ls.peek() == '-' || ls.peek() == '+' ||
                     ls.peek() == '.'))
                ls >> c;
            if (!(ls >> v))
                throw std::runtime_error("sdpa parse: bad objective entry at line " +
                                         std::to_string(lineno));
            p.c.push_back(v);
        }
    }
    p.fi.assign(m, {});
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos) continue;
        if (line[pos] == '*' || line[pos] == '"') continue;
        std::istringstream ls(line);
        int k, blk, i, j;
        double v;
        if (!(ls >> k >> blk >> i >> j >> v))
            throw std::runtime_error("sdpa parse: bad entry at line " + std::to_string(lineno));
        if (k < 0 || k > m || blk < 1 || blk > nblocks)
            throw std::runtime_error("sdpa parse: entry index out of range at line " +
                                     std::to_string(lineno));
        ConicEntry e{blk - 1, std::min(i, j) - 1, std::max(i, j) - 1, v};
        if (e.row < 0 || e.col >= p.blocks[e.block].size)
            throw std::runtime_error("sdpa parse: matrix index out of range at line " +
                                     std::to_string(lineno));
        if (k == 0) p.f0.push_back(e);
        else p.fi[k - 1].push_back(e);
    }
    p.check();
    return p;
}

// Parse the objective/variable section of an SDPA solver's output file; used
// by the optional file-bridge backend for cross-checking the embedded solver.
struct ExternalSolution {
    std::string phase;      // e.g. pdOPT
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    std::vector<double> x;  // free variables (xVec)
};

inline ExternalSolution parse_sdpa_solution(const std::string& text) {
    ExternalSolution sol;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool saw_any = false;
    while (std::getline(is, line)) {
        ++lineno;
        auto grab_value = [&](const char* key, double& target) {
            auto pos = line.find(key);
            if (pos == std::string::npos) return;
            auto eq = line.find('=', pos);
            if (eq == std::string::npos)
                throw std::runtime_error("sdpa solution parse: missing '=' at line " +
                                         std::to_string(lineno));
            target = std::stod(line.substr(eq + 1));
            saw_any = true;
        };
        grab_value("objValPrimal", sol.primal_objective);
        grab_value("objValDual", sol.dual_objective);
        if (line.find("phase.value") != std::string::npos) {
            auto eq = line.find('=');
            if (eq != std::string::npos) {
                sol.phase = line.substr(eq + 1);
                while (!sol.phase.empty() && (sol.phase.front() == ' ')) sol.phase.erase(0, 1);
                while (!sol.phase.empty() && (sol.phase.back() == '\r' || sol.phase.back() == ' '))
                    sol.phase.pop_back();
                saw_any = true;
            }
        }
        if (line.find("xVec") != std::string::npos) {
            std::string buf = line;
            while (buf.find('}') == std::string::npos && std::getline(is, line)) {
                ++lineno;
                buf += line;
            }
            auto lb = buf.find('{');
            auto rb = buf.rfind('}');
            if (lb == std::string::npos || rb == std::string::npos || rb < lb)
                throw std::runtime_error("sdpa solution parse: malformed xVec at line " +
                                         std::to_string(lineno));
            std::string body = buf.substr(lb + 1, rb - lb - 1);
            for (auto& ch : body)
                if (ch == ',' || ch == '{' || ch == '}') ch = ' ';
            std::istringstream vs(body);
            double v;
            while (vs >> v) sol.x.push_back(v);
            saw_any = true;
        }
    }
    if (!saw_any)
        throw std::runtime_error("sdpa solution parse: no recognizable fields (line 1)");
    return sol;
}

} // namespace netrand
