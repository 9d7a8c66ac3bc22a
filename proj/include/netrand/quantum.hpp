#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace netrand {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Tolerances for algebraic identities and for eigenvalue assertions on
// dense double-precision algebra over systems of dimension <= 8.
inline constexpr double kAlgebraTol = 1e-10;
inline constexpr double kEigTol = 1e-8;

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Matrix identity(int d) { return Matrix::Identity(d, d); }

// Hermitian eigendecomposition with a fixed tie-breaking convention:
// eigenvalues ascending, each eigenvector's first nonzero component made
// real positive so that repeated runs produce identical bases.
struct HermitianEig {
    Eigen::VectorXd values;
    Matrix vectors;
};

inline HermitianEig hermitian_eig(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: eigensolver failed");
    HermitianEig out{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
        for (Eigen::Index r = 0; r < out.vectors.rows(); ++r) {
            Complex v = out.vectors(r, c);
            if (std::abs(v) > 1e-12) {
                out.vectors.col(c) *= std::conj(v) / std::abs(v);
                break;
            }
        }
    }
    return out;
}

// Density matrix on a tensor product of finite subsystems.  The dims list
// records the subsystem dimensions in tensor order; the matrix is stored in
// the computational basis with the leftmost subsystem most significant.
class QuantumState {
public:
    QuantumState(Matrix matrix, std::vector<int> dims)
        : matrix_(std::move(matrix)), dims_(std::move(dims)) {
        int d = 1;
        for (int x : dims_) {
            if (x < 1) throw std::invalid_argument("QuantumState: bad subsystem dim");
            d *= x;
        }
        if (matrix_.rows() != d || matrix_.cols() != d)
            throw std::invalid_argument("QuantumState: dims do not match matrix size");
    }

    const Matrix& matrix() const { return matrix_; }
    const std::vector<int>& dims() const { return dims_; }
    int dim() const { return static_cast<int>(matrix_.rows()); }
    int num_subsystems() const { return static_cast<int>(dims_.size()); }

    // Hermiticity, unit trace and positivity within tolerance.
    void validate(double tol = kAlgebraTol) const {
        if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw std::runtime_error("QuantumState: not Hermitian");
        if (std::abs(matrix_.trace().real() - 1.0) > tol || std::abs(matrix_.trace().imag()) > tol)
            throw std::runtime_error("QuantumState: trace != 1");
        Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol)
            throw std::runtime_error("QuantumState: negative eigenvalue");
    }

private:
    Matrix matrix_;
    std::vector<int> dims_;
};

namespace detail {

// Row/column index <-> multi-index over subsystem dims.
inline std::vector<int> unravel(int idx, const std::vector<int>& dims) {
    std::vector<int> mi(dims.size());
    for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
        mi[k] = idx % dims[k];
        idx /= dims[k];
    }
    return mi;
}

inline int ravel(const std::vector<int>& mi, const std::vector<int>& dims) {
    int idx = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) idx = idx * dims[k] + mi[k];
    return idx;
}

} // namespace detail

// Trace out the subsystems listed in `drop` (indices into dims); matrix-level
// core shared by states and operator contractions.
inline Matrix partial_trace_matrix(const Matrix& m, const std::vector<int>& dims,
                                   const std::vector<int>& drop) {
    std::vector<bool> dropped(dims.size(), false);
    for (int k : drop) {
        if (k < 0 || k >= static_cast<int>(dims.size()))
            throw std::invalid_argument("partial_trace: subsystem out of range");
        dropped[k] = true;
    }
    std::vector<int> kept_dims;
    for (std::size_t k = 0; k < dims.size(); ++k)
        if (!dropped[k]) kept_dims.push_back(dims[k]);
    if (kept_dims.empty()) kept_dims.push_back(1);

    int dk = 1;
    for (int x : kept_dims) dk *= x;
    Matrix out = Matrix::Zero(dk, dk);
    int d = static_cast<int>(m.rows());
    for (int i = 0; i < d; ++i) {
        auto mi = detail::unravel(i, dims);
        for (int j = 0; j < d; ++j) {
            auto mj = detail::unravel(j, dims);
            bool diag = true;
            for (std::size_t k = 0; k < dims.size(); ++k)
                if (dropped[k] && mi[k] != mj[k]) { diag = false; break; }
            if (!diag) continue;
            std::vector<int> ri, rj;
            for (std::size_t k = 0; k < dims.size(); ++k)
                if (!dropped[k]) { ri.push_back(mi[k]); rj.push_back(mj[k]); }
            if (ri.empty()) { ri.push_back(0); rj.push_back(0); }
            out(detail::ravel(ri, kept_dims), detail::ravel(rj, kept_dims)) += m(i, j);
        }
    }
    return out;
}

inline QuantumState partial_trace(const QuantumState& state, const std::vector<int>& drop) {
    const auto& dims = state.dims();
    std::vector<int> kept_dims;
    std::vector<bool> dropped(dims.size(), false);
    for (int k : drop) dropped[k] = true;
    for (std::size_t k = 0; k < dims.size(); ++k)
        if (!dropped[k]) kept_dims.push_back(dims[k]);
    if (kept_dims.empty()) kept_dims.push_back(1);
    return QuantumState(partial_trace_matrix(state.matrix(), dims, drop), kept_dims);
}

// Embed an operator acting on one subsystem into the full space.
inline Matrix embed(const Matrix& op, int subsystem, const std::vector<int>& dims) {
    if (subsystem < 0 || subsystem >= static_cast<int>(dims.size()))
        throw std::invalid_argument("embed: subsystem out of range");
    if (op.rows() != dims[subsystem])
        throw std::invalid_argument("embed: operator dim mismatch");
    Matrix out = Matrix::Identity(1, 1);
    for (std::size_t k = 0; k < dims.size(); ++k)
        out = kron(out, static_cast<int>(k) == subsystem ? op : identity(dims[k]));
    return out;
}

// Tensor product of per-subsystem operators (one per subsystem, in order).
inline Matrix tensor_all(const std::vector<Matrix>& ops) {
    Matrix out = Matrix::Identity(1, 1);
    for (const auto& op : ops) out = kron(out, op);
    return out;
}

inline Matrix pauli_x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix pauli_y() { Matrix m(2, 2); m << 0, Complex(0, -1), Complex(0, 1), 0; return m; }
inline Matrix pauli_z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }

// A +/-1-valued qubit observable defined by a unit Bloch vector, together
// with its outcome projectors (outcome 0 <-> eigenvalue +1, 1 <-> -1).
struct DichotomicObservable {
    Eigen::Vector3d bloch;

    Matrix operator_matrix() const {
        return bloch.x() * pauli_x() + bloch.y() * pauli_y() + bloch.z() * pauli_z();
    }
    Matrix projector(int outcome) const {
        double sign = outcome == 0 ? 1.0 : -1.0;
        return 0.5 * (identity(2) + sign * operator_matrix());
    }
};

// Observable sin(theta)cos(phi) X + sin(theta)sin(phi) Y + cos(theta) Z.
inline DichotomicObservable observable_from_bloch(double theta, double phi) {
    Eigen::Vector3d n(std::sin(theta) * std::cos(phi),
                      std::sin(theta) * std::sin(phi),
                      std::cos(theta));
    return DichotomicObservable{n};
}

inline DichotomicObservable observable_from_vector(const Eigen::Vector3d& v) {
    double n = v.norm();
    if (n < 1e-300) throw std::invalid_argument("observable_from_vector: zero vector");
    return DichotomicObservable{v / n};
}

// Maximally entangled two-qubit state (|00> + |11>)/sqrt(2).
inline QuantumState phi_plus() {
    Vector v = Vector::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    return QuantumState(v * v.adjoint(), {2, 2});
}

// Isotropic family alpha |Phi+><Phi+| + (1 - alpha) I/4 on two qubits.
inline QuantumState isotropic_state(double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::domain_error("isotropic_state: alpha outside [0, 1]");
    Matrix m = alpha * phi_plus().matrix() + (1.0 - alpha) * Matrix::Identity(4, 4) / 4.0;
    return QuantumState(m, {2, 2});
}

// alpha * state + (1 - alpha) * (I/2 on `subsystem` (x) reduced state elsewhere).
inline QuantumState depolarize_local(const QuantumState& state, double alpha, int subsystem) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::domain_error("depolarize_local: alpha outside [0, 1]");
    if (subsystem < 0 || subsystem >= state.num_subsystems())
        throw std::invalid_argument("depolarize_local: subsystem out of range");
    if (state.dims()[subsystem] != 2)
        throw std::invalid_argument("depolarize_local: subsystem is not a qubit");

    QuantumState rest = partial_trace(state, {subsystem});
    // Reassemble with I/2 in the depolarized slot, preserving tensor order.
    const auto& dims = state.dims();
    int d = state.dim();
    Matrix mixed = Matrix::Zero(d, d);
    std::vector<int> rest_dims = rest.dims();
    for (int i = 0; i < d; ++i) {
        auto mi = detail::unravel(i, dims);
        for (int j = 0; j < d; ++j) {
            auto mj = detail::unravel(j, dims);
            if (mi[subsystem] != mj[subsystem]) continue;
            std::vector<int> ri, rj;
            for (std::size_t k = 0; k < dims.size(); ++k)
                if (static_cast<int>(k) != subsystem) { ri.push_back(mi[k]); rj.push_back(mj[k]); }
            if (ri.empty()) { ri.push_back(0); rj.push_back(0); }
            mixed(i, j) = 0.5 * rest.matrix()(detail::ravel(ri, rest_dims), detail::ravel(rj, rest_dims));
        }
    }
    return QuantumState(alpha * state.matrix() + (1.0 - alpha) * mixed, dims);
}

// Broadcast channel: an isometry that copies one subsystem in the
// computational basis (|0> -> |00>, |1> -> |11>), optionally preceded by a
// single-qubit pre-rotation.  The optimal rotation for a given functional is
// found by the see-saw optimizer rather than fixed here.
struct IsometryChannel {
    Matrix pre_rotation = identity(2);

    Matrix isometry() const {
        Matrix v = Matrix::Zero(4, 2);
        v(0, 0) = 1.0;  // |0> -> |00>
        v(3, 1) = 1.0;  // |1> -> |11>
        Matrix out = v * pre_rotation;
        if (((out.adjoint() * out) - identity(2)).cwiseAbs().maxCoeff() > kAlgebraTol)
            throw std::runtime_error("IsometryChannel: V'V != I (pre-rotation not unitary?)");
        return out;
    }
};

// Apply the broadcast isometry to `subsystem`, splitting it into two qubits.
inline QuantumState broadcast_apply(const QuantumState& state, const IsometryChannel& channel,
                                    int subsystem) {
    if (subsystem < 0 || subsystem >= state.num_subsystems())
        throw std::invalid_argument("broadcast_apply: subsystem out of range");
    if (state.dims()[subsystem] != 2)
        throw std::invalid_argument("broadcast_apply: channel input dim mismatch");

    const auto& dims = state.dims();
    Matrix v_local = channel.isometry();
    // Build V = I_before (x) v (x) I_after by index bookkeeping.
    std::vector<int> out_dims;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (static_cast<int>(k) == subsystem) { out_dims.push_back(2); out_dims.push_back(2); }
        else out_dims.push_back(dims[k]);
    }
    int din = state.dim();
    int dout = din * 2;
    Matrix v_full = Matrix::Zero(dout, din);
    for (int i = 0; i < din; ++i) {
        auto mi = detail::unravel(i, dims);
        for (int b = 0; b < 4; ++b) {
            Complex amp = v_local(b, mi[subsystem]);
            if (amp == Complex(0, 0)) continue;
            std::vector<int> mo;
            for (std::size_t k = 0; k < dims.size(); ++k) {
                if (static_cast<int>(k) == subsystem) { mo.push_back(b / 2); mo.push_back(b % 2); }
                else mo.push_back(mi[k]);
            }
            v_full(detail::ravel(mo, out_dims), i) += amp;
        }
    }
    return QuantumState(v_full * state.matrix() * v_full.adjoint(), out_dims);
}

// Minimum eigenvalue of the partial transpose across the given bipartition.
// `transpose_side` lists the subsystems to transpose.
inline double partial_transpose_min_eig(const QuantumState& state, std::vector<int> transpose_side) {
    const auto& dims = state.dims();
    std::vector<bool> flip(dims.size(), false);
    if (transpose_side.empty() || transpose_side.size() >= dims.size())
        throw std::invalid_argument("partial_transpose_min_eig: invalid bipartition");
    for (int k : transpose_side) {
        if (k < 0 || k >= state.num_subsystems())
            throw std::invalid_argument("partial_transpose_min_eig: invalid bipartition");
        flip[k] = true;
    }
    int d = state.dim();
    Matrix out(d, d);
    for (int i = 0; i < d; ++i) {
        auto mi = detail::unravel(i, dims);
        for (int j = 0; j < d; ++j) {
            auto mj = detail::unravel(j, dims);
            std::vector<int> ri = mi, rj = mj;
            for (std::size_t k = 0; k < dims.size(); ++k)
                if (flip[k]) std::swap(ri[k], rj[k]);
            out(detail::ravel(ri, dims), detail::ravel(rj, dims)) = state.matrix()(i, j);
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(out, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace netrand
