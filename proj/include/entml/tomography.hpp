#pragma once

// Pauli correlation vectors T_j = tr(sigma_{i_1} (x) ... (x) sigma_{i_N} rho),
// indexed lexicographically with j = sum_n 4^(n-1) i_n (qubit 1 is the
// least significant base-4 digit). This is the canonical feature order on
// disk and in memory.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "entml/error.hpp"
#include "entml/qcore.hpp"
#include "entml/random.hpp"

namespace entml {

inline std::size_t feature_count(std::size_t num_qubits) { return std::size_t{1} << (2 * num_qubits); }

inline std::size_t lex_index(const PauliString& s) {
    std::size_t j = 0;
    std::size_t weight = 1;
    for (std::size_t n = 0; n < s.size(); ++n) {
        j += weight * static_cast<std::size_t>(s[n]);
        weight *= 4;
    }
    return j;
}

inline PauliString lex_unindex(std::size_t j, std::size_t num_qubits) {
    require(num_qubits >= 1 && num_qubits <= 8, "lex_unindex: qubit count out of range");
    require(j < feature_count(num_qubits), "lex_unindex: index out of range");
    std::vector<int> idx(num_qubits);
    for (std::size_t n = 0; n < num_qubits; ++n) {
        idx[n] = static_cast<int>(j % 4);
        j /= 4;
    }
    return PauliString(std::move(idx));
}

inline std::string pauli_label(std::size_t j, std::size_t num_qubits) { return lex_unindex(j, num_qubits).label(); }

class CorrelationVector {
public:
    static constexpr double kBoundTolerance = 1e-9;

    CorrelationVector() = default;
    CorrelationVector(std::size_t num_qubits, std::vector<double> values)
        : num_qubits_(num_qubits), values_(std::move(values)) {
        require(values_.size() == feature_count(num_qubits_), "CorrelationVector: expected 4^N values");
        require(values_[0] == 1.0, "CorrelationVector: identity component must equal 1");
        for (double v : values_)
            require(std::abs(v) <= 1.0 + kBoundTolerance, "CorrelationVector: component outside [-1, 1]");
    }

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t j) const { return values_[j]; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t num_qubits_ = 0;
    std::vector<double> values_;
};

namespace detail {

// P|c> = phase(c) |c xor flip> for a Pauli string P.
struct PauliAction {
    std::size_t flip = 0;
    std::vector<Complex> phase;
};

inline PauliAction pauli_action(const PauliString& s) {
    const std::size_t n = s.size();
    const std::size_t dim = std::size_t{1} << n;
    PauliAction act;
    act.phase.assign(dim, Complex{1.0, 0.0});
    for (std::size_t q = 0; q < n; ++q) {
        const std::size_t bit = n - 1 - q;
        if (s[q] == 1 || s[q] == 2) act.flip |= std::size_t{1} << bit;
    }
    const Complex i{0.0, 1.0};
    for (std::size_t c = 0; c < dim; ++c) {
        Complex f{1.0, 0.0};
        for (std::size_t q = 0; q < n; ++q) {
            const bool one = (c >> (n - 1 - q)) & 1U;
            if (s[q] == 2) f *= one ? -i : i;
            if (s[q] == 3 && one) f = -f;
        }
        act.phase[c] = f;
    }
    return act;
}

inline const std::vector<PauliAction>& pauli_actions(std::size_t num_qubits) {
    static const std::vector<PauliAction> two = [] {
        std::vector<PauliAction> v;
        for (std::size_t j = 0; j < 16; ++j) v.push_back(pauli_action(lex_unindex(j, 2)));
        return v;
    }();
    static const std::vector<PauliAction> three = [] {
        std::vector<PauliAction> v;
        for (std::size_t j = 0; j < 64; ++j) v.push_back(pauli_action(lex_unindex(j, 3)));
        return v;
    }();
    require(num_qubits == 2 || num_qubits == 3, "pauli_actions: only 2 or 3 qubits are tabulated");
    return num_qubits == 2 ? two : three;
}

inline void check_real(Complex t) {
    if (std::abs(t.imag()) >= 1e-10)
        throw NumericalError("correlation_vector: imaginary expectation value (non-Hermitian input)");
}

} // namespace detail

// tr(P rho) for a single string, using the monomial structure of P.
inline double pauli_expectation(const ComplexMatrix& rho, const PauliString& s) {
    require(rho.rows() == (std::size_t{1} << s.size()) && rho.is_square(),
            "pauli_expectation: dimension mismatch");
    const auto act = detail::pauli_action(s);
    Complex t{0.0, 0.0};
    for (std::size_t c = 0; c < rho.rows(); ++c) t += act.phase[c] * rho(c, c ^ act.flip);
    detail::check_real(t);
    return t.real();
}

inline CorrelationVector correlation_vector(const DensityMatrix& rho) {
    const std::size_t n = rho.num_qubits();
    const auto& acts = detail::pauli_actions(n);
    std::vector<double> T(acts.size());
    T[0] = 1.0;
    for (std::size_t j = 1; j < acts.size(); ++j) {
        Complex t{0.0, 0.0};
        for (std::size_t c = 0; c < rho.dim(); ++c) t += acts[j].phase[c] * rho(c, c ^ acts[j].flip);
        detail::check_real(t);
        T[j] = t.real();
    }
    return CorrelationVector(n, std::move(T));
}

// <psi|P|psi> for every string, without forming the projector.
inline CorrelationVector correlation_vector(const PureState& psi) {
    const std::size_t n = psi.num_qubits();
    const auto& acts = detail::pauli_actions(n);
    std::vector<double> T(acts.size());
    T[0] = 1.0;
    for (std::size_t j = 1; j < acts.size(); ++j) {
        Complex t{0.0, 0.0};
        for (std::size_t c = 0; c < psi.dim(); ++c) t += std::conj(psi[c ^ acts[j].flip]) * acts[j].phase[c] * psi[c];
        detail::check_real(t);
        T[j] = std::clamp(t.real(), -1.0, 1.0);
    }
    return CorrelationVector(n, std::move(T));
}

struct ShotConfig {
    std::uint64_t shots_per_setting = 1000;
    std::uint64_t seed = 0;
};

// Each non-identity setting has spectrum {-1, +1}; the +1 count over M shots is
// Binomial(M, (1 + T_j) / 2), and the estimate is the sample mean of outcomes.
inline CorrelationVector finite_shot_correlation(const CorrelationVector& ideal, std::uint64_t shots, Rng& rng) {
    require(shots >= 1, "finite_shot_correlation: shots per setting must be >= 1");
    std::vector<double> est(ideal.size());
    est[0] = 1.0;
    const double m = static_cast<double>(shots);
    for (std::size_t j = 1; j < ideal.size(); ++j) {
        const double p_plus = std::clamp((1.0 + ideal[j]) / 2.0, 0.0, 1.0);
        std::binomial_distribution<std::uint64_t> draw(shots, p_plus);
        const double plus = static_cast<double>(draw(rng));
        est[j] = (2.0 * plus - m) / m;
    }
    return CorrelationVector(ideal.num_qubits(), std::move(est));
}

inline CorrelationVector finite_shot_correlation(const DensityMatrix& rho, const ShotConfig& cfg) {
    require(cfg.shots_per_setting >= 1, "finite_shot_correlation: shots per setting must be >= 1");
    Rng rng(derive_seed(cfg.seed, "shots"));
    return finite_shot_correlation(correlation_vector(rho), cfg.shots_per_setting, rng);
}

struct Reconstruction {
    ComplexMatrix matrix;
    double min_eigenvalue = 0.0;
    bool physical = true; // false: not positive semidefinite within -1e-10
};

// rho = 2^-N sum_j T_j sigma_j. Unphysical (noisy) vectors are flagged, not rejected.
inline Reconstruction reconstruct_density(const CorrelationVector& T) {
    const std::size_t n = T.num_qubits();
    const std::size_t dim = std::size_t{1} << n;
    const auto& acts = detail::pauli_actions(n);
    ComplexMatrix rho(dim, dim);
    const double scale = 1.0 / static_cast<double>(dim);
    for (std::size_t j = 0; j < acts.size(); ++j) {
        if (T[j] == 0.0) continue;
        // sigma_j has entry phase(c) at (c xor flip, c)
        for (std::size_t c = 0; c < dim; ++c) rho(c ^ acts[j].flip, c) += scale * T[j] * acts[j].phase[c];
    }
    Reconstruction r;
    r.min_eigenvalue = hermitian_eigenvalues(rho).front();
    r.physical = r.min_eigenvalue >= DensityMatrix::kPsdTolerance;
    r.matrix = std::move(rho);
    return r;
}

} // namespace entml
