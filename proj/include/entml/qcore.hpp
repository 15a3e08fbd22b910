#pragma once

// Dense complex linear algebra for 2- and 3-qubit systems: Pauli strings,
// pure and mixed states, partial transpose, and a cyclic Jacobi eigensolver
// for Hermitian matrices. Dimensions never exceed 8 (64 for test fixtures),
// so everything is stored densely and row-major.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "entml/error.hpp"

namespace entml {

using Complex = std::complex<double>;

class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, Complex{0.0, 0.0}) {
        require(rows >= 1 && cols >= 1, "ComplexMatrix: dimensions must be >= 1");
    }
    ComplexMatrix(std::size_t rows, std::size_t cols, std::initializer_list<Complex> values)
        : ComplexMatrix(rows, cols) {
        require(values.size() == rows * cols, "ComplexMatrix: initializer size mismatch");
        std::copy(values.begin(), values.end(), data_.begin());
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }

    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const Complex> data() const { return data_; }
    std::span<Complex> data() { return data_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    Complex trace() const {
        Complex t{0.0, 0.0};
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::norm(z);
        return std::sqrt(s);
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require(rows_ == o.rows_ && cols_ == o.cols_, "ComplexMatrix: shape mismatch in +=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require(rows_ == o.rows_ && cols_ == o.cols_, "ComplexMatrix: shape mismatch in -=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    ComplexMatrix& operator*=(Complex s) {
        for (auto& z : data_) z *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
    friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        require(a.cols_ == b.rows_, "ComplexMatrix: shape mismatch in product");
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex{0.0, 0.0}) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
            }
        return out;
    }

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

    double max_abs_diff(const ComplexMatrix& o) const {
        require(rows_ == o.rows_ && cols_ == o.cols_, "ComplexMatrix: shape mismatch");
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - o.data_[i]));
        return m;
    }

    // Largest |A - A^dagger| entry.
    double hermiticity_defect() const {
        if (!is_square()) return INFINITY;
        double m = 0.0;
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = r; c < cols_; ++c)
                m = std::max(m, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    return out;
}

inline bool is_power_of_two_dim(std::size_t dim) { return dim >= 2 && (dim & (dim - 1)) == 0; }

inline std::size_t qubit_count(std::size_t dim) {
    require(is_power_of_two_dim(dim), "dimension is not a power of two");
    std::size_t n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// Pauli strings

// Indices (i_1, ..., i_N), i_n in {0,1,2,3}; 0 is the identity. Qubit 1 is the
// leftmost tensor factor and the most significant bit of the state index.
class PauliString {
public:
    PauliString() = default;
    PauliString(std::initializer_list<int> idx) : PauliString(std::vector<int>(idx)) {}
    explicit PauliString(std::vector<int> idx) : indices_(std::move(idx)) {
        require(!indices_.empty() && indices_.size() <= 8, "PauliString: length must be in [1, 8]");
        for (int i : indices_) require(i >= 0 && i <= 3, "PauliString: index outside {0,1,2,3}");
    }

    std::size_t size() const { return indices_.size(); }
    int operator[](std::size_t n) const { return indices_[n]; }
    const std::vector<int>& indices() const { return indices_; }
    bool is_identity() const {
        return std::all_of(indices_.begin(), indices_.end(), [](int i) { return i == 0; });
    }

    // Letters I, X, Y, Z in tensor order, e.g. "XZ" for sigma_1 (x) sigma_3.
    std::string label() const {
        static constexpr char letters[] = {'I', 'X', 'Y', 'Z'};
        std::string s;
        for (int i : indices_) s.push_back(letters[i]);
        return s;
    }

    friend bool operator==(const PauliString&, const PauliString&) = default;

private:
    std::vector<int> indices_;
};

inline ComplexMatrix single_pauli(int index) {
    const Complex i{0.0, 1.0};
    switch (index) {
    case 0: return ComplexMatrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    case 1: return ComplexMatrix(2, 2, {0.0, 1.0, 1.0, 0.0});
    case 2: return ComplexMatrix(2, 2, {0.0, -i, i, 0.0});
    case 3: return ComplexMatrix(2, 2, {1.0, 0.0, 0.0, -1.0});
    default: throw ValidationError("single_pauli: index outside {0,1,2,3}");
    }
}

inline ComplexMatrix pauli_matrix(const PauliString& s) {
    require(s.size() >= 1, "pauli_matrix: empty string");
    ComplexMatrix m = single_pauli(s[0]);
    for (std::size_t n = 1; n < s.size(); ++n) m = kron(m, single_pauli(s[n]));
    return m;
}

// ---------------------------------------------------------------------------
// States

class PureState {
public:
    static constexpr double kNormTolerance = 1e-12;

    PureState() = default;
    explicit PureState(std::vector<Complex> amplitudes) : amp_(std::move(amplitudes)) {
        require(is_power_of_two_dim(amp_.size()), "PureState: dimension must be 2^N");
        const double n2 = squared_norm(amp_);
        if (std::abs(n2 - 1.0) > kNormTolerance) {
            std::ostringstream os;
            os << "PureState: squared norm " << n2 << " differs from 1";
            throw ValidationError(os.str());
        }
    }

    // Rescales to unit norm; rejects vectors whose norm is below 1e-12.
    static PureState normalized(std::vector<Complex> v) {
        const double n = std::sqrt(squared_norm(v));
        if (!(n > 1e-12)) throw NumericalError("PureState::normalized: norm below 1e-12");
        for (auto& z : v) z /= n;
        return PureState(std::move(v));
    }

    static PureState basis(std::size_t dim, std::size_t index) {
        require(index < dim, "PureState::basis: index out of range");
        std::vector<Complex> v(dim, 0.0);
        v[index] = 1.0;
        return PureState(std::move(v));
    }

    std::size_t dim() const { return amp_.size(); }
    std::size_t num_qubits() const { return qubit_count(amp_.size()); }
    const Complex& operator[](std::size_t i) const { return amp_[i]; }
    const std::vector<Complex>& amplitudes() const { return amp_; }

    static double squared_norm(const std::vector<Complex>& v) {
        double s = 0.0;
        for (const auto& z : v) s += std::norm(z);
        return s;
    }

private:
    std::vector<Complex> amp_;
};

inline Complex inner(const PureState& a, const PureState& b) {
    require(a.dim() == b.dim(), "inner: dimension mismatch");
    Complex s{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double overlap(const PureState& a, const PureState& b) { return std::norm(inner(a, b)); }

inline ComplexMatrix projector(const PureState& psi) {
    ComplexMatrix p(psi.dim(), psi.dim());
    for (std::size_t r = 0; r < psi.dim(); ++r)
        for (std::size_t c = 0; c < psi.dim(); ++c) p(r, c) = psi[r] * std::conj(psi[c]);
    return p;
}

inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& h, double tol = 1e-12);

class DensityMatrix {
public:
    static constexpr double kHermitianTolerance = 1e-12;
    static constexpr double kTraceTolerance = 1e-12;
    static constexpr double kPsdTolerance = -1e-10;

    DensityMatrix() = default;
    explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) { validate(); }

    static DensityMatrix from_pure(const PureState& psi) { return DensityMatrix(projector(psi), Trusted{}); }

    static DensityMatrix maximally_mixed(std::size_t dim) {
        ComplexMatrix m = ComplexMatrix::identity(dim);
        m *= 1.0 / static_cast<double>(dim);
        return DensityMatrix(std::move(m), Trusted{});
    }

    // Convex combination of valid states; weights must be a probability vector.
    static DensityMatrix mixture(std::span<const DensityMatrix> states, std::span<const double> weights) {
        require(!states.empty() && states.size() == weights.size(), "DensityMatrix::mixture: size mismatch");
        double total = 0.0;
        for (double w : weights) {
            require(w >= 0.0, "DensityMatrix::mixture: negative weight");
            total += w;
        }
        require(std::abs(total - 1.0) < 1e-12, "DensityMatrix::mixture: weights must sum to 1");
        ComplexMatrix acc(states[0].dim(), states[0].dim());
        for (std::size_t k = 0; k < states.size(); ++k) {
            require(states[k].dim() == acc.rows(), "DensityMatrix::mixture: dimension mismatch");
            acc += states[k].matrix() * Complex{weights[k], 0.0};
        }
        return DensityMatrix(std::move(acc), Trusted{});
    }

    std::size_t dim() const { return m_.rows(); }
    std::size_t num_qubits() const { return qubit_count(m_.rows()); }
    const ComplexMatrix& matrix() const { return m_; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

    double purity() const {
        double s = 0.0;
        for (const auto& z : m_.data()) s += std::norm(z);
        return s;
    }

    double min_eigenvalue() const { return hermitian_eigenvalues(m_).front(); }

private:
    struct Trusted {};
    DensityMatrix(ComplexMatrix m, Trusted) : m_(std::move(m)) {}

    void validate() const {
        require(m_.is_square() && is_power_of_two_dim(m_.rows()), "DensityMatrix: must be 2^N x 2^N");
        require(m_.hermiticity_defect() <= kHermitianTolerance, "DensityMatrix: not Hermitian");
        const Complex t = m_.trace();
        require(std::abs(t.real() - 1.0) <= kTraceTolerance && std::abs(t.imag()) <= kTraceTolerance,
                "DensityMatrix: trace differs from 1");
        const double lmin = hermitian_eigenvalues(m_).front();
        if (lmin < kPsdTolerance) {
            std::ostringstream os;
            os << "DensityMatrix: minimum eigenvalue " << lmin << " below " << kPsdTolerance;
            throw ValidationError(os.str());
        }
    }

    ComplexMatrix m_;
};

// ---------------------------------------------------------------------------
// Eigenvalues

// Cyclic complex Jacobi sweeps. Each rotation zeroes one off-diagonal pair:
// a diagonal phase makes the pivot real, then a real Givens rotation of the
// standard symmetric Jacobi method annihilates it.
inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& h, double tol) {
    constexpr int kMaxSweeps = 100;
    require(h.is_square(), "hermitian_eigenvalues: matrix must be square");
    if (h.hermiticity_defect() > std::max(tol, 1e-12))
        throw ValidationError("hermitian_eigenvalues: matrix is not Hermitian within tolerance");

    const std::size_t n = h.rows();
    ComplexMatrix a = h;
    for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (r != c) s += std::norm(a(r, c));
        return std::sqrt(s);
    };

    int sweep = 0;
    for (; sweep < kMaxSweeps && off_norm() >= tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double b = std::abs(apq);
                if (b == 0.0) continue;
                const Complex phase = std::conj(apq) / b; // e^{-i phi}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * b);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // G = diag(1, e^{-i phi}) * [[c, s], [-s, c]] restricted to (p, q).
                const Complex gpp = c, gpq = s, gqp = -s * phase, gqq = c * phase;
                for (std::size_t r = 0; r < n; ++r) {
                    const Complex arp = a(r, p), arq = a(r, q);
                    a(r, p) = arp * gpp + arq * gqp;
                    a(r, q) = arp * gpq + arq * gqq;
                }
                for (std::size_t col = 0; col < n; ++col) {
                    const Complex apc = a(p, col), aqc = a(q, col);
                    a(p, col) = std::conj(gpp) * apc + std::conj(gqp) * aqc;
                    a(q, col) = std::conj(gpq) * apc + std::conj(gqq) * aqc;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
            }
    }
    if (off_norm() >= tol) throw NumericalError("hermitian_eigenvalues: no convergence after 100 sweeps");

    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i).real();
    std::sort(ev.begin(), ev.end());
    return ev;
}

// ---------------------------------------------------------------------------
// Two-qubit separability

// (id (x) T) for subsystem 1, (T (x) id) for subsystem 0, on a 4x4 matrix.
inline ComplexMatrix partial_transpose(const ComplexMatrix& rho, std::size_t subsystem) {
    require(rho.rows() == 4 && rho.cols() == 4, "partial_transpose: two-qubit (4x4) input required");
    require(subsystem <= 1, "partial_transpose: subsystem must be 0 or 1");
    ComplexMatrix out(4, 4);
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t c = 0; c < 2; ++c)
                for (std::size_t d = 0; d < 2; ++d) {
                    // rho(ab, cd) with a,c on qubit 0 and b,d on qubit 1
                    const Complex v = rho(2 * a + b, 2 * c + d);
                    if (subsystem == 1)
                        out(2 * a + d, 2 * c + b) = v;
                    else
                        out(2 * c + b, 2 * a + d) = v;
                }
    return out;
}

inline ComplexMatrix partial_transpose(const DensityMatrix& rho, std::size_t subsystem = 1) {
    return partial_transpose(rho.matrix(), subsystem);
}

inline double ppt_min_eigenvalue(const DensityMatrix& rho) {
    return hermitian_eigenvalues(partial_transpose(rho, 1)).front();
}

inline bool is_ppt(const DensityMatrix& rho) {
    return ppt_min_eigenvalue(rho) >= DensityMatrix::kPsdTolerance;
}

// ---------------------------------------------------------------------------
// Reduced states

// Single-qubit reduced density matrix of `keep` (0-based, qubit 0 leftmost).
inline ComplexMatrix reduced_single_qubit(const PureState& psi, std::size_t keep) {
    const std::size_t n = psi.num_qubits();
    require(keep < n, "reduced_single_qubit: qubit index out of range");
    const std::size_t bit = n - 1 - keep;
    ComplexMatrix r(2, 2);
    for (std::size_t i = 0; i < psi.dim(); ++i) {
        if ((i >> bit) & 1U) continue;
        const std::size_t j = i | (std::size_t{1} << bit);
        r(0, 0) += std::norm(psi[i]);
        r(1, 1) += std::norm(psi[j]);
        r(0, 1) += psi[i] * std::conj(psi[j]);
    }
    r(1, 0) = std::conj(r(0, 1));
    return r;
}

inline double purity_of(const ComplexMatrix& m) {
    double s = 0.0;
    for (const auto& z : m.data()) s += std::norm(z);
    return s;
}

// tr(rho_keep^2) for a two-qubit pure state.
inline double reduced_purity(const PureState& psi, std::size_t keep) {
    require(psi.dim() == 4, "reduced_purity: two-qubit pure state required");
    return purity_of(reduced_single_qubit(psi, keep));
}

// Applies a 2x2 operator to qubit `target` of an N-qubit amplitude vector.
inline std::vector<Complex> apply_single_qubit(const ComplexMatrix& op, std::size_t target,
                                               std::vector<Complex> amp) {
    require(op.rows() == 2 && op.cols() == 2, "apply_single_qubit: 2x2 operator required");
    const std::size_t n = qubit_count(amp.size());
    require(target < n, "apply_single_qubit: target out of range");
    const std::size_t bit = n - 1 - target;
    for (std::size_t i = 0; i < amp.size(); ++i) {
        if ((i >> bit) & 1U) continue;
        const std::size_t j = i | (std::size_t{1} << bit);
        const Complex a0 = amp[i], a1 = amp[j];
        amp[i] = op(0, 0) * a0 + op(0, 1) * a1;
        amp[j] = op(1, 0) * a0 + op(1, 1) * a1;
    }
    return amp;
}

inline Complex det2(const ComplexMatrix& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

// ---------------------------------------------------------------------------
// Canonical representatives

inline PureState zero_state(std::size_t num_qubits) { return PureState::basis(std::size_t{1} << num_qubits, 0); }

// (|00> + |11>) / sqrt(2)
inline PureState bell_state() {
    const double h = 1.0 / std::sqrt(2.0);
    return PureState({h, 0.0, 0.0, h});
}

// (|000> + |111>) / sqrt(2)
inline PureState ghz_state() {
    const double h = 1.0 / std::sqrt(2.0);
    std::vector<Complex> v(8, 0.0);
    v[0] = h;
    v[7] = h;
    return PureState(std::move(v));
}

// (|001> + |010> + |100>) / sqrt(3)
inline PureState w_state() {
    const double t = 1.0 / std::sqrt(3.0);
    std::vector<Complex> v(8, 0.0);
    v[1] = t;
    v[2] = t;
    v[4] = t;
    return PureState(std::move(v));
}

} // namespace entml
