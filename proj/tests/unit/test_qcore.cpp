#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "entml/qcore.hpp"
#include "entml/random.hpp"

using namespace entml;

namespace {

ComplexMatrix random_single_qubit_state(Rng& rng) {
    std::vector<Complex> v(2);
    for (auto& a : v) a = Complex{standard_normal(rng), standard_normal(rng)};
    return projector(PureState::normalized(v));
}

DensityMatrix werner(double p) {
    ComplexMatrix m = projector(bell_state()) * Complex{p, 0.0};
    for (std::size_t i = 0; i < 4; ++i) m(i, i) += (1.0 - p) / 4.0;
    return DensityMatrix(m);
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

} // namespace

TEST(PauliMatrix, SingleQubitZ) {
    const auto z = pauli_matrix(PauliString{3});
    EXPECT_EQ(z(0, 0), Complex(1.0, 0.0));
    EXPECT_EQ(z(1, 1), Complex(-1.0, 0.0));
    EXPECT_EQ(z(0, 1), Complex(0.0, 0.0));
}

TEST(PauliMatrix, IdentityString) {
    EXPECT_EQ(max_abs_diff(pauli_matrix(PauliString{0, 0}), ComplexMatrix::identity(4)), 0.0);
}

TEST(PauliMatrix, XXIsAntidiagonalOnes) {
    const auto xx = pauli_matrix(PauliString{1, 1});
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(xx(r, c), Complex(r + c == 3 ? 1.0 : 0.0, 0.0));
}

TEST(PauliMatrix, EveryStringSquaresToIdentity) {
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                const auto p = pauli_matrix(PauliString{a, b, c});
                EXPECT_LT(max_abs_diff(p * p, ComplexMatrix::identity(8)), 1e-15);
                EXPECT_LT(max_abs_diff(p, p.adjoint()), 1e-15);
            }
}

TEST(PauliMatrix, RejectsBadIndex) { EXPECT_THROW(PauliString({0, 4}), ValidationError); }

TEST(HermitianEigenvalues, Diagonal) {
    ComplexMatrix m(4, 4);
    for (std::size_t i = 0; i < 4; ++i) m(i, i) = 0.1 * static_cast<double>(i + 1);
    const auto ev = hermitian_eigenvalues(m);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ev[i], 0.1 * static_cast<double>(i + 1), 1e-14);
}

TEST(HermitianEigenvalues, XX) {
    const auto ev = hermitian_eigenvalues(pauli_matrix(PauliString{1, 1}));
    const std::vector<double> want{-1, -1, 1, 1};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ev[i], want[i], 1e-12);
}

TEST(HermitianEigenvalues, BellPartialTranspose) {
    const auto ev = hermitian_eigenvalues(partial_transpose(DensityMatrix::from_pure(bell_state())));
    const std::vector<double> want{-0.5, 0.5, 0.5, 0.5};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ev[i], want[i], 1e-12);
}

TEST(HermitianEigenvalues, TraceAndSortingOnRandomMatrices) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = trial % 2 ? 8 : 4;
        ComplexMatrix g(n, n);
        for (auto& z : g.data()) z = Complex{standard_normal(rng), standard_normal(rng)};
        const ComplexMatrix h = g + g.adjoint();
        const auto ev = hermitian_eigenvalues(h);
        double s = 0.0;
        for (double e : ev) s += e;
        EXPECT_NEAR(s, h.trace().real(), 1e-9);
        EXPECT_TRUE(std::is_sorted(ev.begin(), ev.end()));
    }
}

TEST(HermitianEigenvalues, RejectsNonHermitian) {
    ComplexMatrix m(2, 2, {0.0, 1.0, 0.0, 0.0});
    EXPECT_THROW(hermitian_eigenvalues(m), ValidationError);
}

TEST(DensityMatrix, RejectsInvalid) {
    EXPECT_THROW(DensityMatrix(ComplexMatrix(2, 2, {0.5, 0.0, 0.0, 0.6})), ValidationError);  // trace
    EXPECT_THROW(DensityMatrix(ComplexMatrix(2, 2, {1.5, 0.0, 0.0, -0.5})), ValidationError); // not PSD
    EXPECT_THROW(DensityMatrix(ComplexMatrix(2, 2, {0.5, 0.1, 0.0, 0.5})), ValidationError);  // not Hermitian
}

TEST(PureState, RejectsUnnormalized) {
    EXPECT_THROW(PureState(std::vector<Complex>{1.0, 1.0}), ValidationError);
    EXPECT_NO_THROW(PureState::normalized({1.0, 1.0}));
}

TEST(PartialTranspose, MaximallyMixedFixed) {
    const auto mm = DensityMatrix::maximally_mixed(4);
    EXPECT_EQ(max_abs_diff(partial_transpose(mm), mm.matrix()), 0.0);
}

TEST(PartialTranspose, InvolutionAndTrace) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        ComplexMatrix g(4, 4);
        for (auto& z : g.data()) z = Complex{standard_normal(rng), standard_normal(rng)};
        ComplexMatrix r = g * g.adjoint();
        r *= 1.0 / r.trace().real();
        const DensityMatrix rho(r);
        for (std::size_t sub : {0u, 1u}) {
            const auto pt = partial_transpose(rho, sub);
            EXPECT_EQ(max_abs_diff(partial_transpose(pt, sub), rho.matrix()), 0.0);
            EXPECT_NEAR(pt.trace().real(), 1.0, 1e-12);
            EXPECT_LT(max_abs_diff(pt, pt.adjoint()), 1e-15);
        }
    }
}

TEST(PartialTranspose, RejectsWrongDimension) {
    EXPECT_THROW(partial_transpose(DensityMatrix::maximally_mixed(8)), ValidationError);
}

TEST(IsPpt, KnownStates) {
    EXPECT_TRUE(is_ppt(DensityMatrix::maximally_mixed(4)));
    EXPECT_FALSE(is_ppt(DensityMatrix::from_pure(bell_state())));
    EXPECT_NEAR(ppt_min_eigenvalue(DensityMatrix::from_pure(bell_state())), -0.5, 1e-12);
}

TEST(IsPpt, WernerBoundaryAtOneThird) {
    // min eigenvalue of the partial transpose is (1 - 3p)/4
    for (double p : {0.0, 0.1, 0.3, 1.0 / 3.0, 0.34, 0.5, 0.9})
        EXPECT_NEAR(ppt_min_eigenvalue(werner(p)), (1.0 - 3.0 * p) / 4.0, 1e-12);
    EXPECT_TRUE(is_ppt(werner(1.0 / 3.0)));
    EXPECT_TRUE(is_ppt(werner(1.0 / 3.0 - 1e-6)));
    EXPECT_FALSE(is_ppt(werner(1.0 / 3.0 + 1e-6)));
    EXPECT_FALSE(is_ppt(werner(0.5)));
}

TEST(IsPpt, RandomProductStatesAreSeparable) {
    Rng rng(5);
    for (int t = 0; t < 1000; ++t) {
        const DensityMatrix rho(kron(random_single_qubit_state(rng), random_single_qubit_state(rng)));
        EXPECT_TRUE(is_ppt(rho));
    }
}

TEST(ReducedPurity, Examples) {
    EXPECT_NEAR(reduced_purity(zero_state(2), 0), 1.0, 1e-15);
    EXPECT_NEAR(reduced_purity(bell_state(), 0), 0.5, 1e-15);
    const auto psi = PureState::normalized({2.0, 0.0, 0.0, 1.0});
    EXPECT_NEAR(reduced_purity(psi, 0), 17.0 / 25.0, 1e-15);
    EXPECT_NEAR(reduced_purity(psi, 1), 17.0 / 25.0, 1e-15);
}

TEST(ReducedPurity, RangeOnRandomStates) {
    Rng rng(9);
    for (int t = 0; t < 500; ++t) {
        std::vector<Complex> v(4);
        for (auto& a : v) a = Complex{standard_normal(rng), standard_normal(rng)};
        const double p = reduced_purity(PureState::normalized(v), t % 2);
        EXPECT_GE(p, 0.5 - 1e-12);
        EXPECT_LE(p, 1.0 + 1e-12);
    }
}

TEST(ReferenceStates, Amplitudes) {
    const auto g = ghz_state();
    EXPECT_NEAR(std::abs(g[0]), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(g[7]), 1.0 / std::sqrt(2.0), 1e-15);
    const auto w = w_state();
    for (std::size_t i : {1u, 2u, 4u}) EXPECT_NEAR(std::abs(w[i]), 1.0 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(overlap(g, w), 0.0, 1e-30);
}
