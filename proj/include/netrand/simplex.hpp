#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <vector>

namespace netrand {

// Dense two-phase primal simplex with Bland's anti-cycling rule, for the
// small well-scaled problems produced by the locality tests (at most a few
// hundred rows/columns of 0, +-1, +-1/2 data).

struct SimplexResult {
    enum class Status { optimal, infeasible, unbounded };
    Status status = Status::optimal;
    Eigen::VectorXd x;          // primal solution (original columns)
    Eigen::VectorXd dual;       // row duals y = c_B' * B^{-1}
    double objective = 0.0;
    int iterations = 0;
};

namespace detail {

// One simplex phase on tableau T = [B^{-1}A | B^{-1}b] with costs `cost`.
// `allowed` masks columns permitted to enter.  Returns false on unbounded.
inline bool simplex_iterate(Eigen::MatrixXd& T, std::vector<int>& basis,
                            const Eigen::VectorXd& cost, const std::vector<bool>& allowed,
                            int& iterations, int max_iterations) {
    const int m = static_cast<int>(T.rows());
    const int n = static_cast<int>(T.cols()) - 1;
    const double tol = 1e-9;
    while (true) {
        if (++iterations > max_iterations)
            throw std::runtime_error("simplex: iteration limit exceeded");
        // Reduced costs via the dual of the current basis.
        Eigen::VectorXd cb(m);
        for (int i = 0; i < m; ++i) cb(i) = cost(basis[i]);
        // Entering: lowest-index column with negative reduced cost (Bland).
        int enter = -1;
        for (int j = 0; j < n; ++j) {
            if (!allowed[j]) continue;
            bool basic = false;
            for (int i = 0; i < m; ++i) basic |= (basis[i] == j);
            if (basic) continue;
            double rc = cost(j) - cb.dot(T.col(j));
            if (rc < -tol) { enter = j; break; }
        }
        if (enter < 0) return true;  // optimal
        // Leaving: min ratio, ties by lowest basis variable index (Bland).
        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            double a = T(i, enter);
            if (a > tol) {
                double ratio = T(i, n) / a;
                if (ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 && (leave < 0 || basis[i] < basis[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) return false;  // unbounded
        // Pivot.
        T.row(leave) /= T(leave, enter);
        for (int i = 0; i < m; ++i) {
            if (i == leave) continue;
            double f = T(i, enter);
            if (f != 0.0) T.row(i) -= f * T.row(leave);
        }
        basis[leave] = enter;
    }
}

} // namespace detail

// Solve min c'x s.t. Ax = b, x >= 0.
inline SimplexResult simplex_solve(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                                   const Eigen::VectorXd& c, int max_iterations = 200000) {
    const int m = static_cast<int>(A_in.rows());
    const int n = static_cast<int>(A_in.cols());
    Eigen::MatrixXd A = A_in;
    Eigen::VectorXd b = b_in;
    for (int i = 0; i < m; ++i)
        if (b(i) < 0) { A.row(i) = -A.row(i); b(i) = -b(i); }

    // Phase 1 tableau with artificial columns.
    Eigen::MatrixXd T(m, n + m + 1);
    T.block(0, 0, m, n) = A;
    T.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
    T.col(n + m) = b;
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;

    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(n + m);
    cost1.tail(m).setOnes();
    std::vector<bool> allow_all(n + m, true);
    SimplexResult res;
    res.iterations = 0;
    if (!detail::simplex_iterate(T, basis, cost1, allow_all, res.iterations, max_iterations))
        throw std::runtime_error("simplex: phase 1 unbounded (cannot happen)");

    double phase1 = 0.0;
    for (int i = 0; i < m; ++i)
        if (basis[i] >= n) phase1 += T(i, n + m);
    if (phase1 > 1e-7) {
        res.status = SimplexResult::Status::infeasible;
        return res;
    }

    // Phase 2: artificials may linger basic at zero but must not enter.
    Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(n + m);
    cost2.head(n) = c;
    std::vector<bool> allowed(n + m, false);
    for (int j = 0; j < n; ++j) allowed[j] = true;
    if (!detail::simplex_iterate(T, basis, cost2, allowed, res.iterations, max_iterations)) {
        res.status = SimplexResult::Status::unbounded;
        return res;
    }

    res.status = SimplexResult::Status::optimal;
    res.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) res.x(basis[i]) = T(i, n + m);
    res.objective = c.dot(res.x);

    // Row duals from the artificial block: y' = c_B' B^{-1}; columns n..n+m of
    // the tableau hold B^{-1} (up to the phase-1 row sign flips).
    Eigen::VectorXd cb(m);
    for (int i = 0; i < m; ++i) cb(i) = cost2(basis[i]);
    Eigen::VectorXd y = T.block(0, n, m, m).transpose() * cb;
    for (int i = 0; i < m; ++i)
        if (b_in(i) < 0) y(i) = -y(i);
    res.dual = y;
    return res;
}

} // namespace netrand
