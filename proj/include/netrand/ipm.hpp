#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>
#include <vector>

#include "netrand/conic.hpp"

namespace netrand {

struct SolverConfig {
    double gap_tol = 1e-8;
    double feas_tol = 1e-8;
    int max_iterations = 200;
    double step_fraction = 0.99;  // fraction of the distance to the cone boundary
    bool preprocess = true;       // remove linearly dependent equality rows
    double rank_tol = 1e-10;      // threshold for the rank-revealing factorization
    bool high_precision = false;  // run the iteration in long double
    bool verbose = false;
};

// ---- Preprocessing ---------------------------------------------------------

// Rank filter over the constraint rows <F_i, .>: Gram matrix plus pivoted
// Cholesky.  Dependent rows are checked for objective-coefficient consistency
// and removed; an inconsistent dependent row gives the free side an
// LMI-neutral direction of strictly decreasing objective (unbounded).
struct PreprocessResult {
    std::vector<int> kept;     // indices into the original constraints
    std::vector<int> removed;  // dependent rows
    bool inconsistent = false;
    int inconsistent_row = -1;
};

inline PreprocessResult preprocess_rank_filter(const ConicProgram& p, double tol) {
    const int m = p.num_constraints();
    PreprocessResult out;
    auto row_dot = [&](const std::vector<ConicEntry>& a, const std::vector<ConicEntry>& b) {
        double s = 0.0;
        for (const auto& ea : a)
            for (const auto& eb : b) {
                if (ea.block != eb.block || ea.row != eb.row || ea.col != eb.col) continue;
                s += ea.value * eb.value * (ea.row == ea.col ? 1.0 : 2.0);
            }
        return s;
    };
    // Fast path: structurally disjoint supports mean the Gram is diagonal.
    bool disjoint = true;
    {
        std::vector<std::tuple<int, int, int, int>> keys;  // block,row,col,constraint
        for (int i = 0; i < m; ++i)
            for (const auto& e : p.fi[i]) keys.emplace_back(e.block, e.row, e.col, i);
        std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) <
                   std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
        });
        for (std::size_t k = 1; k < keys.size(); ++k)
            if (std::get<0>(keys[k]) == std::get<0>(keys[k - 1]) &&
                std::get<1>(keys[k]) == std::get<1>(keys[k - 1]) &&
                std::get<2>(keys[k]) == std::get<2>(keys[k - 1]) &&
                std::get<3>(keys[k]) != std::get<3>(keys[k - 1])) {
                disjoint = false;
                break;
            }
    }
    if (disjoint) {
        for (int i = 0; i < m; ++i) {
            if (row_dot(p.fi[i], p.fi[i]) > tol * tol) out.kept.push_back(i);
            else if (std::abs(p.c[i]) > tol) { out.inconsistent = true; out.inconsistent_row = i; }
            else out.removed.push_back(i);
        }
        return out;
    }

    Eigen::MatrixXd G(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) G(i, j) = G(j, i) = row_dot(p.fi[i], p.fi[j]);
    double scale = std::max(G.diagonal().maxCoeff(), 1.0);
    // The Gram squares the row spectrum, so the effective pivot threshold is
    // max(tol^2, roundoff).
    double pivot_tol = scale * std::max(tol * tol, 64.0 * std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    std::vector<int> piv(m);
    for (int i = 0; i < m; ++i) piv[i] = i;
    Eigen::VectorXd diag = G.diagonal();
    int rank = 0;
    for (int k = 0; k < m; ++k) {
        int best = k;
        for (int i = k + 1; i < m; ++i)
            if (diag(piv[i]) > diag(piv[best])) best = i;
        std::swap(piv[k], piv[best]);
        double d = diag(piv[k]);
        if (d <= pivot_tol) break;
        double root = std::sqrt(d);
        for (int i = k; i < m; ++i) {
            double v = G(piv[i], piv[k]);
            for (int t = 0; t < k; ++t) v -= L(piv[i], t) * L(piv[k], t);
            L(piv[i], k) = v / root;
        }
        for (int i = k + 1; i < m; ++i) diag(piv[i]) -= L(piv[i], k) * L(piv[i], k);
        ++rank;
    }
    std::vector<bool> is_kept(m, false);
    for (int k = 0; k < rank; ++k) is_kept[piv[k]] = true;
    for (int i = 0; i < m; ++i) (is_kept[i] ? out.kept : out.removed).push_back(i);
    if (!out.removed.empty()) {
        Eigen::MatrixXd Lk(rank, rank);
        for (int a = 0; a < rank; ++a)
            for (int t = 0; t < rank; ++t) Lk(a, t) = L(piv[a], t);
        for (int r : out.removed) {
            Eigen::VectorXd g(rank), ck(rank);
            for (int a = 0; a < rank; ++a) {
                g(a) = G(r, piv[a]);
                ck(a) = p.c[piv[a]];
            }
            Eigen::VectorXd alpha = Lk.transpose().triangularView<Eigen::Upper>().solve(
                Lk.triangularView<Eigen::Lower>().solve(g));
            double expected = alpha.dot(ck);
            if (std::abs(expected - p.c[r]) > 1e-7 * (1.0 + std::abs(p.c[r]))) {
                out.inconsistent = true;
                out.inconsistent_row = r;
                return out;
            }
        }
    }
    return out;
}

// ---- Primal-dual interior-point solver -------------------------------------
//
// Homogeneous self-dual embedding of the pair described in conic.hpp, solved
// by a Mehrotra predictor-corrector with Nesterov-Todd scaling on dense
// blocks.  Internally the conic side is the (minimization) primal
//   min <C, X>  s.t.  <A_i, X> = b_i,  X psd,   C = -F_0, A_i = F_i, b = c,
// so an optimal internal dual vector y maps to free variables x = -y.
// Status convention follows the free (LMI) side: `infeasible` means no x
// satisfies sum x_i F_i - F_0 in cone; `unbounded` means the free objective
// decreases without bound (equivalently: conic-side equalities infeasible).
//
// The iteration is generic over the scalar so that knife-edge instances
// (equality data exactly on the boundary of the feasible region, as at
// maximal Bell violations) can be re-run in long double for extra headroom.

namespace ipm_detail {

template <typename Real>
struct Types {
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
    using Blocks = std::vector<Mat>;
};

template <typename Real>
typename Types<Real>::Blocks zeros_like(const ConicProgram& p) {
    using Mat = typename Types<Real>::Mat;
    typename Types<Real>::Blocks out;
    for (const auto& b : p.blocks) out.push_back(Mat::Zero(b.size, b.size));
    return out;
}

template <typename Real>
typename Types<Real>::Blocks identity_like(const ConicProgram& p) {
    using Mat = typename Types<Real>::Mat;
    typename Types<Real>::Blocks out;
    for (const auto& b : p.blocks) out.push_back(Mat::Identity(b.size, b.size));
    return out;
}

template <typename Real>
void axpy(typename Types<Real>::Blocks& y, Real a, const typename Types<Real>::Blocks& x) {
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

template <typename Real>
Real inner(const typename Types<Real>::Blocks& a, const typename Types<Real>::Blocks& b) {
    Real s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k].cwiseProduct(b[k])).sum();
    return s;
}

template <typename Real>
Real max_abs(const typename Types<Real>::Blocks& a) {
    Real s = 0;
    for (const auto& m : a)
        if (m.size()) s = std::max(s, m.cwiseAbs().maxCoeff());
    return s;
}

template <typename Real>
void symmetrize(typename Types<Real>::Blocks& a) {
    for (auto& m : a) m = (Real(0.5) * (m + m.transpose())).eval();
}

// Per-block Nesterov-Todd scaling: the symmetric PD w with w S w = X, its
// square roots, and lambda = w^{-1/2} X w^{-1/2} with its eigensystem.
template <typename Real>
struct Scaling {
    typename Types<Real>::Mat w, w_half, w_half_inv;
    typename Types<Real>::Mat lam, lam_vecs;
    typename Types<Real>::Vec lam_vals;
};

template <typename Real>
Scaling<Real> nt_scaling(const typename Types<Real>::Mat& X, const typename Types<Real>::Mat& S) {
    using Mat = typename Types<Real>::Mat;
    using Vec = typename Types<Real>::Vec;
    const Real floor = std::numeric_limits<Real>::min() * Real(1e4);
    Eigen::LLT<Mat> lltX(X);
    Mat Lx;
    if (lltX.info() == Eigen::Success) {
        Lx = lltX.matrixL();
    } else {
        Mat Xr = X + std::numeric_limits<Real>::epsilon() * X.trace() *
                         Mat::Identity(X.rows(), X.cols());
        Lx = Eigen::LLT<Mat>(Xr).matrixL();
    }
    Mat MM = Lx.transpose() * S * Lx;
    MM = (Real(0.5) * (MM + MM.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(MM);
    Vec d = es.eigenvalues().cwiseMax(floor);
    Mat U = es.eigenvectors();
    Scaling<Real> sc;
    sc.w = Lx * U * d.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose() * Lx.transpose();
    sc.w = (Real(0.5) * (sc.w + sc.w.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> ew(sc.w);
    Vec dw = ew.eigenvalues().cwiseMax(floor);
    sc.w_half = ew.eigenvectors() * dw.cwiseSqrt().asDiagonal() * ew.eigenvectors().transpose();
    sc.w_half_inv =
        ew.eigenvectors() * dw.cwiseSqrt().cwiseInverse().asDiagonal() * ew.eigenvectors().transpose();
    sc.lam = sc.w_half_inv * X * sc.w_half_inv;
    sc.lam = (Real(0.5) * (sc.lam + sc.lam.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> el(sc.lam);
    sc.lam_vals = el.eigenvalues();
    sc.lam_vecs = el.eigenvectors();
    return sc;
}

// Largest step a with lam + a D staying psd, in lambda's eigenbasis.
template <typename Real>
Real boundary_step(const Scaling<Real>& sc, const typename Types<Real>::Mat& D) {
    using Mat = typename Types<Real>::Mat;
    const Real floor = std::numeric_limits<Real>::min() * Real(1e4);
    auto inv_sqrt = sc.lam_vals.cwiseMax(floor).cwiseSqrt().cwiseInverse().eval();
    Mat E = inv_sqrt.asDiagonal() * (sc.lam_vecs.transpose() * D * sc.lam_vecs) *
            inv_sqrt.asDiagonal();
    E = (Real(0.5) * (E + E.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(E, Eigen::EigenvaluesOnly);
    Real mn = es.eigenvalues().minCoeff();
    return mn >= -floor ? std::numeric_limits<Real>::infinity() : Real(-1) / mn;
}

// Solve (lam V + V lam)/2 = R in lambda's eigenbasis.
template <typename Real>
typename Types<Real>::Mat lyapunov_solve(const Scaling<Real>& sc,
                                         const typename Types<Real>::Mat& R) {
    using Mat = typename Types<Real>::Mat;
    const Real floor = std::numeric_limits<Real>::min() * Real(1e4);
    Mat Rt = sc.lam_vecs.transpose() * R * sc.lam_vecs;
    for (Eigen::Index i = 0; i < Rt.rows(); ++i)
        for (Eigen::Index j = 0; j < Rt.cols(); ++j)
            Rt(i, j) = Real(2) * Rt(i, j) / std::max(sc.lam_vals(i) + sc.lam_vals(j), floor);
    return sc.lam_vecs * Rt * sc.lam_vecs.transpose();
}

// embedded = true  : homogeneous self-dual embedding (default; detects
//                    infeasible and unbounded problems via tau/kappa).
// embedded = false : plain infeasible-start path following with tau = 1 and
//                    kappa = 0 frozen; no certificates, but much better
//                    behaved on feasible problems whose data sits exactly on
//                    the boundary (where the embedding has no tau > 0
//                    solution and tau collapses).
template <typename Real>
Solution solve_impl(const ConicProgram& program_in, const SolverConfig& config, bool embedded) {
    using Mat = typename Types<Real>::Mat;
    using Vec = typename Types<Real>::Vec;
    using Blocks = typename Types<Real>::Blocks;

    // Preprocessing on the double-precision data.
    ConicProgram program = program_in;
    std::vector<int> kept_map;
    PreprocessResult pre;
    if (config.preprocess) {
        pre = preprocess_rank_filter(program_in, config.rank_tol);
        if (pre.inconsistent) {
            Solution sol;
            sol.status = Solution::Status::unbounded;
            sol.note = "dependent constraint row " + std::to_string(pre.inconsistent_row) +
                       " has inconsistent objective coefficient";
            sol.free_vars.assign(program_in.num_constraints(), 0.0);
            sol.conic_blocks = zeros_like<double>(program_in);
            sol.slack_blocks = zeros_like<double>(program_in);
            return sol;
        }
        if (!pre.removed.empty()) {
            ConicProgram reduced;
            reduced.blocks = program.blocks;
            reduced.f0 = program.f0;
            for (int i : pre.kept) {
                reduced.c.push_back(program.c[i]);
                reduced.fi.push_back(program.fi[i]);
            }
            program = std::move(reduced);
            kept_map = pre.kept;
        }
    }

    const int m = program.num_constraints();
    if (m == 0) throw std::invalid_argument("solve: program has no constraints");
    const std::size_t nblocks = program.blocks.size();

    Blocks C(nblocks);
    {
        auto cd = densify(program, program.f0);
        for (std::size_t k = 0; k < nblocks; ++k) C[k] = (-cd[k]).template cast<Real>();
    }
    Vec b(m);
    for (int i = 0; i < m; ++i) b(i) = Real(program.c[i]);

    struct BlockEntry {
        int constraint, row, col;
        Real value;
    };
    std::vector<std::vector<BlockEntry>> by_block(nblocks);
    for (int i = 0; i < m; ++i)
        for (const auto& e : program.fi[i])
            by_block[e.block].push_back(BlockEntry{i, e.row, e.col, Real(e.value)});

    auto apply_A = [&](const Blocks& Z) {
        Vec out = Vec::Zero(m);
        for (int i = 0; i < m; ++i) {
            Real s = 0;
            for (const auto& e : program.fi[i])
                s += Real(e.value) * (e.row == e.col ? Z[e.block](e.row, e.row)
                                                     : Real(2) * Z[e.block](e.row, e.col));
            out(i) = s;
        }
        return out;
    };
    auto apply_At = [&](const Vec& y) {
        Blocks out = zeros_like<Real>(program);
        for (int i = 0; i < m; ++i)
            for (const auto& e : program.fi[i]) {
                out[e.block](e.row, e.col) += y(i) * Real(e.value);
                if (e.row != e.col) out[e.block](e.col, e.row) += y(i) * Real(e.value);
            }
        return out;
    };

    Real nu = 0;
    for (const auto& blk : program.blocks) nu += blk.size;

    Blocks X = identity_like<Real>(program), S = identity_like<Real>(program);
    Vec y = Vec::Zero(m);
    Real tau = 1, kappa = embedded ? Real(1) : Real(0);
    const Real nu_bar = nu + (embedded ? Real(1) : Real(0));

    const Real bnorm = Real(1) + b.cwiseAbs().maxCoeff();
    const Real cnorm = Real(1) + max_abs<Real>(C);

    Solution sol;
    sol.conic_blocks = zeros_like<double>(program_in);
    sol.slack_blocks = zeros_like<double>(program_in);
    sol.free_vars.assign(program_in.num_constraints(), 0.0);

    // Best de-homogenized iterate seen so far (returned on stall).
    struct Snapshot {
        Blocks X, S;
        Vec y;
        Real tau = 1, kappa = 1;
        Real metric = std::numeric_limits<Real>::infinity();
        Real mu = 0;
        int iter = 0;
    } best;

    auto fill_solution = [&](const Blocks& Xf, const Blocks& Sf, const Vec& yf, Real tauf,
                             Real muf, int iter) {
        sol.iterations = iter;
        sol.mu = static_cast<double>(muf);
        for (std::size_t k = 0; k < nblocks; ++k) {
            sol.conic_blocks[k] = (Xf[k] / tauf).template cast<double>();
            sol.slack_blocks[k] = (Sf[k] / tauf).template cast<double>();
        }
        Vec xfree = -yf / tauf;
        if (kept_map.empty()) {
            for (int i = 0; i < m; ++i) sol.free_vars[i] = static_cast<double>(xfree(i));
        } else {
            for (int i = 0; i < m; ++i) sol.free_vars[kept_map[i]] = static_cast<double>(xfree(i));
        }
        sol.conic_objective = sparse_inner(program_in.f0, sol.conic_blocks);
        sol.free_objective = 0.0;
        for (int i = 0; i < program_in.num_constraints(); ++i)
            sol.free_objective += program_in.c[i] * sol.free_vars[i];
        sol.duality_gap = std::abs(sol.conic_objective - sol.free_objective);
        double pres = 0.0;
        for (int i = 0; i < program_in.num_constraints(); ++i)
            pres = std::max(pres, std::abs(sparse_inner(program_in.fi[i], sol.conic_blocks) -
                                           program_in.c[i]));
        sol.primal_residual = pres;
        Blocks rd = apply_At(yf);
        axpy<Real>(rd, Real(1), Sf);
        axpy<Real>(rd, -tauf, C);
        sol.dual_residual = static_cast<double>(max_abs<Real>(rd) / tauf);
        sol.quality = std::max(
            {sol.primal_residual / static_cast<double>(bnorm),
             sol.dual_residual / static_cast<double>(cnorm),
             sol.duality_gap / (1.0 + std::abs(sol.conic_objective) + std::abs(sol.free_objective))});
        if (!pre.removed.empty())
            sol.note = "preprocess removed " + std::to_string(pre.removed.size()) +
                       " dependent constraint rows";
    };

    int tiny_steps = 0;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        Vec rp = apply_A(X) - b * tau;
        Blocks rd = apply_At(y);
        axpy<Real>(rd, Real(1), S);
        axpy<Real>(rd, -tau, C);
        Real rg = inner<Real>(C, X) - b.dot(y) + kappa;
        Real mu = (inner<Real>(X, S) + tau * kappa) / nu_bar;

        Real objp = inner<Real>(C, X) / tau, objd = b.dot(y) / tau;
        Real pres = (apply_A(X) / tau - b).cwiseAbs().maxCoeff() / bnorm;
        Real dres = max_abs<Real>(rd) / tau / cnorm;
        Real cgap = inner<Real>(X, S) / (tau * tau) / (Real(1) + std::abs(objp) + std::abs(objd));
        Real ogap = std::abs(objp - objd) / (Real(1) + std::abs(objp) + std::abs(objd));
        Real metric = std::max({pres, dres, std::min(cgap, ogap)});
        if (config.verbose)
            std::fprintf(stderr,
                         "iter %3d  mu %9.2e  pres %9.2e  dres %9.2e  cgap %9.2e  ogap %9.2e  "
                         "tau %9.2e\n",
                         iter, (double)mu, (double)pres, (double)dres, (double)cgap, (double)ogap,
                         (double)tau);

        if (metric < best.metric) {
            best = Snapshot{X, S, y, tau, kappa, metric, mu, iter};
        }

        if (pres <= Real(config.feas_tol) && dres <= Real(config.feas_tol) &&
            std::min(cgap, ogap) <= Real(config.gap_tol)) {
            fill_solution(X, S, y, tau, mu, iter);
            sol.status = Solution::Status::optimal;
            return sol;
        }

        if (embedded && tau < Real(1e-10) * std::max(Real(1), kappa)) {
            Real by = b.dot(y);
            Real cx = inner<Real>(C, X);
            Blocks cert = apply_At(y);
            axpy<Real>(cert, Real(1), S);
            Real cert_res = max_abs<Real>(cert) / std::max(std::abs(by), Real(1e-300));
            sol.iterations = iter;
            sol.mu = static_cast<double>(mu);
            if (cx < Real(-1e-12)) {
                sol.status = Solution::Status::infeasible;
                sol.note = "free-side LMI infeasible (improving-ray certificate from X)";
            } else if (by > Real(1e-12) && cert_res < Real(1e-6)) {
                sol.status = Solution::Status::unbounded;
                sol.note = "free side unbounded below (conic-side equalities infeasible)";
            } else {
                sol.status = Solution::Status::stalled;
                sol.note = "tau collapsed without a clean certificate";
            }
            return sol;
        }

        std::vector<Scaling<Real>> sc(nblocks);
        for (std::size_t k = 0; k < nblocks; ++k) sc[k] = nt_scaling<Real>(X[k], S[k]);

        auto apply_G = [&](const Blocks& Z) {
            Blocks out(nblocks);
            for (std::size_t k = 0; k < nblocks; ++k) {
                out[k] = sc[k].w * Z[k] * sc[k].w;
                out[k] = (Real(0.5) * (out[k] + out[k].transpose())).eval();
            }
            return out;
        };

        // Schur complement M = A o G o A* assembled from the sparse entries;
        // (w E_pq w) reduces to products of w's entries.
        Mat M = Mat::Zero(m, m);
        for (std::size_t kb = 0; kb < nblocks; ++kb) {
            const auto& list = by_block[kb];
            const Mat& w = sc[kb].w;
            for (std::size_t a = 0; a < list.size(); ++a) {
                const auto& ea = list[a];
                for (std::size_t bb = a; bb < list.size(); ++bb) {
                    const auto& eb = list[bb];
                    Real kpq;
                    bool da = ea.row == ea.col, db = eb.row == eb.col;
                    if (da && db) kpq = w(ea.row, eb.row) * w(ea.row, eb.row);
                    else if (da) kpq = Real(2) * w(ea.row, eb.row) * w(ea.row, eb.col);
                    else if (db) kpq = Real(2) * w(ea.row, eb.row) * w(ea.col, eb.row);
                    else
                        kpq = Real(2) * (w(ea.row, eb.row) * w(ea.col, eb.col) +
                                         w(ea.row, eb.col) * w(ea.col, eb.row));
                    Real contrib = ea.value * eb.value * kpq;
                    // Distinct entries of one constraint appear twice in the
                    // ordered double sum behind <A_i, w A_i w>.
                    if (a != bb && ea.constraint == eb.constraint) contrib *= 2;
                    if (ea.constraint <= eb.constraint) M(ea.constraint, eb.constraint) += contrib;
                    else M(eb.constraint, ea.constraint) += contrib;
                }
            }
        }
        M = M.template selfadjointView<Eigen::Upper>();

        Eigen::LLT<Mat> llt(M);
        Real reg = std::numeric_limits<Real>::epsilon() * (Real(1) + M.diagonal().maxCoeff());
        while (llt.info() != Eigen::Success && reg < Real(1e-4)) {
            Mat Mr = M + reg * Mat::Identity(m, m);
            llt.compute(Mr);
            reg *= 100;
        }
        if (llt.info() != Eigen::Success) {
            fill_solution(best.X, best.S, best.y, best.tau, best.mu, iter);
            sol.status = Solution::Status::stalled;
            sol.note = "Schur complement factorization failed";
            return sol;
        }
        auto msolve = [&](const Vec& rhs) {
            Vec v = llt.solve(rhs);
            v += llt.solve(rhs - M * v);
            return v;
        };

        Blocks GC = apply_G(C);
        Vec h = apply_A(GC) + b;
        Vec z2 = embedded ? msolve(h) : Vec::Zero(m);
        Real cgc = inner<Real>(C, GC);
        Blocks Grd = apply_G(rd);

        struct Direction {
            Blocks dX, dS, dXs, dSs;
            Vec dy;
            Real dtau = 0, dkappa = 0;
        };
        auto newton = [&](Real eta, const Blocks& Vc, Real rc_tk) {
            Direction d;
            Blocks tmp = Vc;
            axpy<Real>(tmp, eta, Grd);
            Vec q = -eta * rp - apply_A(tmp);
            Vec z1 = msolve(q);
            Real dtau = 0;
            if (embedded) {
                Real rs = -eta * rg - inner<Real>(C, tmp) - rc_tk / tau;
                Vec h2b = h - Real(2) * b;
                Real denom = h2b.dot(z2) - cgc - kappa / tau;
                dtau = std::abs(denom) > Real(1e-300) ? (rs - h2b.dot(z1)) / denom : Real(0);
            }
            d.dtau = dtau;
            d.dy = z1 + dtau * z2;
            d.dS = apply_At(d.dy);
            for (auto& blk : d.dS) blk = -blk;
            axpy<Real>(d.dS, dtau, C);
            axpy<Real>(d.dS, -eta, rd);
            symmetrize<Real>(d.dS);
            Blocks GdS = apply_G(d.dS);
            d.dX = Vc;
            axpy<Real>(d.dX, Real(-1), GdS);
            symmetrize<Real>(d.dX);
            d.dkappa = embedded ? (rc_tk - kappa * dtau) / tau : Real(0);
            d.dXs.resize(nblocks);
            d.dSs.resize(nblocks);
            for (std::size_t k = 0; k < nblocks; ++k) {
                d.dXs[k] = sc[k].w_half_inv * d.dX[k] * sc[k].w_half_inv;
                d.dXs[k] = (Real(0.5) * (d.dXs[k] + d.dXs[k].transpose())).eval();
                d.dSs[k] = sc[k].w_half * d.dS[k] * sc[k].w_half;
                d.dSs[k] = (Real(0.5) * (d.dSs[k] + d.dSs[k].transpose())).eval();
            }
            return d;
        };

        auto max_step = [&](const Direction& d) {
            Real a = std::numeric_limits<Real>::infinity();
            for (std::size_t k = 0; k < nblocks; ++k) {
                a = std::min(a, boundary_step<Real>(sc[k], d.dXs[k]));
                a = std::min(a, boundary_step<Real>(sc[k], d.dSs[k]));
            }
            if (d.dtau < 0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        Blocks Vc_aff(nblocks);
        for (std::size_t k = 0; k < nblocks; ++k) Vc_aff[k] = -X[k];
        Direction aff = newton(Real(1), Vc_aff, -tau * kappa);
        Real a_aff = std::min(Real(1), Real(config.step_fraction) * max_step(aff));

        Real mu_aff;
        {
            Blocks Xa = X, Sa = S;
            axpy<Real>(Xa, a_aff, aff.dX);
            axpy<Real>(Sa, a_aff, aff.dS);
            mu_aff = (inner<Real>(Xa, Sa) + (tau + a_aff * aff.dtau) * (kappa + a_aff * aff.dkappa)) /
                     nu_bar;
        }
        // Mehrotra exponent-3 heuristic with a mild centering floor when the
        // predictor makes little progress.
        Real sigma = std::pow(std::max(mu_aff / mu, Real(0)), Real(3));
        if (a_aff < Real(0.2)) sigma = std::max(sigma, Real(0.5));
        sigma = std::min(std::max(sigma, Real(1e-10)), Real(1) - Real(1e-10));

        Blocks Vc(nblocks);
        for (std::size_t k = 0; k < nblocks; ++k) {
            Mat corr = Real(0.5) * (aff.dXs[k] * aff.dSs[k] + aff.dSs[k] * aff.dXs[k]);
            Mat Rc = sigma * mu * Mat::Identity(X[k].rows(), X[k].cols()) - sc[k].lam * sc[k].lam -
                     corr;
            Mat V = lyapunov_solve<Real>(sc[k], Rc);
            Vc[k] = sc[k].w_half * V * sc[k].w_half;
            Vc[k] = (Real(0.5) * (Vc[k] + Vc[k].transpose())).eval();
        }
        Real rc_tk = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        Direction dir = newton(Real(1) - sigma, Vc, rc_tk);
        Real alpha = std::min(Real(1), Real(config.step_fraction) * max_step(dir));

        if (alpha < Real(1e-8)) {
            if (++tiny_steps >= 3) {
                fill_solution(best.X, best.S, best.y, best.tau, best.mu, iter);
                sol.status = Solution::Status::stalled;
                sol.note = "step length collapsed";
                return sol;
            }
        } else {
            tiny_steps = 0;
        }

        axpy<Real>(X, alpha, dir.dX);
        axpy<Real>(S, alpha, dir.dS);
        y += alpha * dir.dy;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        symmetrize<Real>(X);
        symmetrize<Real>(S);
    }

    fill_solution(best.X, best.S, best.y, best.tau, best.mu, config.max_iterations);
    sol.status = Solution::Status::stalled;
    sol.note = "iteration limit reached";
    return sol;
}

} // namespace ipm_detail

// Solve with the self-dual embedding; on a stall (boundary-feasible data),
// fall back to the plain path-following iteration, in long double if needed,
// and return the best iterate found.  Certificate statuses come only from
// the embedded passes.
inline Solution solve(const ConicProgram& program, const SolverConfig& config = {}) {
    program.check();
    if (config.high_precision) {
        Solution s = ipm_detail::solve_impl<long double>(program, config, true);
        if (s.status != Solution::Status::stalled) return s;
        Solution p = ipm_detail::solve_impl<long double>(program, config, false);
        if (p.status == Solution::Status::optimal || p.quality < s.quality) {
            p.note += (p.note.empty() ? "" : "; ");
            p.note += "plain-mode fallback";
            return p;
        }
        return s;
    }
    Solution s = ipm_detail::solve_impl<double>(program, config, true);
    if (s.status != Solution::Status::stalled) return s;
    Solution p = ipm_detail::solve_impl<double>(program, config, false);
    if (p.status == Solution::Status::optimal) {
        p.note += "; plain-mode fallback";
        return p;
    }
    SolverConfig hp = config;
    hp.high_precision = true;
    Solution q = ipm_detail::solve_impl<long double>(program, hp, false);
    if (q.status == Solution::Status::optimal) {
        q.note += "; plain-mode long-double fallback";
        return q;
    }
    Solution* best = &s;
    if (p.quality < best->quality) best = &p;
    if (q.quality < best->quality) best = &q;
    return *best;
}

} // namespace netrand
