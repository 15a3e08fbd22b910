#pragma once

// Fidelity witnesses W = alpha*I - |phi><phi| and the analytic facts used to
// build and audit the three-qubit mixed dataset: detection regimes of the
// depolarized family, Pauli decompositions of the GHZ/W projectors,
// redundancy/disjointness audits and relative-phase detection boundaries.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entml/error.hpp"
#include "entml/qcore.hpp"
#include "entml/tomography.hpp"

namespace entml {

enum class ReferenceState { ghz, w };

inline PureState reference_state(ReferenceState which) { return which == ReferenceState::ghz ? ghz_state() : w_state(); }

inline std::string to_string(ReferenceState which) { return which == ReferenceState::ghz ? "GHZ" : "W"; }

struct WitnessSpec {
    double alpha = 0.5;
    PureState phi;
    std::string name;

    WitnessSpec(double alpha_, PureState phi_, std::string name_ = {})
        : alpha(alpha_), phi(std::move(phi_)), name(std::move(name_)) {
        require(alpha > 0.0 && alpha < 1.0, "WitnessSpec: alpha must lie in (0, 1)");
    }
};

inline WitnessSpec ghz_witness(double alpha = 0.5) { return WitnessSpec(alpha, ghz_state(), "GHZ"); }
inline WitnessSpec w_witness(double alpha = 2.0 / 3.0) { return WitnessSpec(alpha, w_state(), "W"); }

// <phi|rho|phi>
inline double fidelity(const PureState& phi, const DensityMatrix& rho) {
    require(phi.dim() == rho.dim(), "fidelity: dimension mismatch");
    Complex s{0.0, 0.0};
    for (std::size_t r = 0; r < rho.dim(); ++r) {
        Complex row{0.0, 0.0};
        for (std::size_t c = 0; c < rho.dim(); ++c) row += rho(r, c) * phi[c];
        s += std::conj(phi[r]) * row;
    }
    return s.real();
}

// tr(W rho) = alpha - <phi|rho|phi>; negative means detected.
inline double witness_value(const WitnessSpec& w, const DensityMatrix& rho) {
    require(w.phi.dim() == rho.dim(), "witness_value: dimension mismatch");
    return w.alpha - fidelity(w.phi, rho);
}

inline bool is_detected(const WitnessSpec& w, const DensityMatrix& rho) { return witness_value(w, rho) < 0.0; }

// rho_psi = (beta/d) I + (1 - beta) |psi><psi|
inline DensityMatrix depolarized_state(const PureState& psi, double beta) {
    require(beta >= 0.0 && beta <= 1.0, "depolarized_state: beta must lie in [0, 1]");
    const double d = static_cast<double>(psi.dim());
    ComplexMatrix m = projector(psi) * Complex{1.0 - beta, 0.0};
    for (std::size_t i = 0; i < psi.dim(); ++i) m(i, i) += beta / d;
    return DensityMatrix(std::move(m));
}

// Closed form of tr(W rho_psi) for d = 8 with gamma = |<phi|psi>|^2.
inline double witness_value_depolarized(double alpha, double beta, double gamma) {
    return alpha - beta / 8.0 - (1.0 - beta) * gamma;
}

// ---------------------------------------------------------------------------
// Detection regimes of the depolarized family

enum class Regime { never_low_overlap, never_below_alpha, conditional };

struct DetectionRegime {
    Regime regime = Regime::never_low_overlap;
    double beta_max = 0.0; // meaningful for Regime::conditional only

    // Strict inequality: beta == beta_max gives tr(W rho) = 0, not detected.
    bool detects(double beta) const { return regime == Regime::conditional && beta < beta_max; }
};

inline double beta_threshold(double alpha, double gamma) { return (alpha - gamma) / (1.0 / 8.0 - gamma); }

inline DetectionRegime detection_regime(double alpha, double gamma) {
    require(alpha >= 0.0 && alpha <= 1.0 && gamma >= 0.0 && gamma <= 1.0,
            "detection_regime: alpha and gamma must lie in [0, 1]");
    if (gamma <= 1.0 / 8.0) return {Regime::never_low_overlap, 0.0};
    if (gamma <= alpha) return {Regime::never_below_alpha, 0.0};
    return {Regime::conditional, beta_threshold(alpha, gamma)};
}

// ---------------------------------------------------------------------------
// Pauli decompositions

// |phi><phi| = 2^-N sum_j p_j sigma_j, stored sparsely by lexicographic index.
struct PauliCoefficients {
    std::size_t num_qubits = 3;
    std::map<std::size_t, double> coeffs;

    double operator[](std::size_t j) const {
        auto it = coeffs.find(j);
        return it == coeffs.end() ? 0.0 : it->second;
    }

    double normalization() const {
        double s = 0.0;
        for (const auto& [j, p] : coeffs) s += p * p;
        return s / static_cast<double>(std::size_t{1} << num_qubits);
    }
};

// Brute-force trace oracle: p_j = tr(sigma_j |phi><phi|) for every string.
inline PauliCoefficients pauli_coefficients_by_trace(const PureState& phi, double zero_tol = 1e-12) {
    PauliCoefficients out;
    out.num_qubits = phi.num_qubits();
    const ComplexMatrix p = projector(phi);
    for (std::size_t j = 0; j < feature_count(out.num_qubits); ++j) {
        const ComplexMatrix prod = pauli_matrix(lex_unindex(j, out.num_qubits)) * p;
        const double v = prod.trace().real();
        if (std::abs(v) > zero_tol) out.coeffs[j] = v;
    }
    return out;
}

namespace detail {

inline std::size_t idx3(int a, int b, int c) { return lex_index(PauliString{a, b, c}); }

inline PauliCoefficients tabulated_coefficients(ReferenceState which) {
    PauliCoefficients t;
    t.num_qubits = 3;
    auto set = [&](int a, int b, int c, double v) { t.coeffs[idx3(a, b, c)] = v; };
    set(0, 0, 0, 1.0);
    if (which == ReferenceState::ghz) {
        set(0, 3, 3, 1.0);
        set(3, 0, 3, 1.0);
        set(3, 3, 0, 1.0);
        set(1, 1, 1, 1.0);
        set(1, 2, 2, -1.0);
        set(2, 1, 2, -1.0);
        set(2, 2, 1, -1.0);
    } else {
        const double third = 1.0 / 3.0, two_thirds = 2.0 / 3.0;
        set(0, 0, 3, third);
        set(0, 3, 0, third);
        set(3, 0, 0, third);
        set(0, 1, 1, two_thirds);
        set(0, 2, 2, two_thirds);
        set(0, 3, 3, -third);
        set(1, 0, 1, two_thirds);
        set(2, 0, 2, two_thirds);
        set(3, 0, 3, -third);
        set(1, 1, 0, two_thirds);
        set(2, 2, 0, two_thirds);
        set(3, 3, 0, -third);
        set(1, 1, 3, two_thirds);
        set(1, 3, 1, two_thirds);
        set(3, 1, 1, two_thirds);
        set(2, 2, 3, two_thirds);
        set(2, 3, 2, two_thirds);
        set(3, 2, 2, two_thirds);
        set(3, 3, 3, -1.0);
    }
    return t;
}

} // namespace detail

// Tabulated coefficients, checked entry by entry against the trace oracle on
// all 64 strings; any disagreement above 1e-10 is a hard error.
inline PauliCoefficients projector_pauli_coefficients(ReferenceState which) {
    const PauliCoefficients table = detail::tabulated_coefficients(which);
    const PauliCoefficients oracle = pauli_coefficients_by_trace(reference_state(which));
    for (std::size_t j = 0; j < 64; ++j) {
        if (std::abs(table[j] - oracle[j]) > 1e-10)
            throw NumericalError("projector_pauli_coefficients: table entry " + pauli_label(j, 3) +
                                 " disagrees with the trace oracle");
    }
    return table;
}

// Non-identity strings with nonzero coefficient: the settings a witness needs.
inline std::vector<std::size_t> witness_support(ReferenceState which) {
    std::vector<std::size_t> out;
    for (const auto& [j, p] : projector_pauli_coefficients(which).coeffs)
        if (j != 0 && p != 0.0) out.push_back(j);
    return out;
}

// <phi|rho|phi> = 2^-N sum_j p_j T_j.
inline double fidelity_from_correlations(const PauliCoefficients& p, std::span<const double> T) {
    require(T.size() == feature_count(p.num_qubits), "fidelity_from_correlations: size mismatch");
    double s = 0.0;
    for (const auto& [j, c] : p.coeffs) s += c * T[j];
    return s / static_cast<double>(std::size_t{1} << p.num_qubits);
}

inline double witness_value_from_correlations(double alpha, const PauliCoefficients& p, std::span<const double> T) {
    return alpha - fidelity_from_correlations(p, T);
}

// ---------------------------------------------------------------------------
// Audits over sampled states

struct RedundancyReport {
    bool holds = true;
    std::size_t checked = 0;
    std::size_t strong_detections = 0;
    std::size_t weak_detections = 0;
    std::size_t weak_only = 0; // detected by the weak witness alone (strictness)
    std::optional<std::size_t> counterexample; // index into the sample set
};

// Every state detected by `strong` must also be detected by `weak`.
inline RedundancyReport check_redundancy(const WitnessSpec& strong, const WitnessSpec& weak,
                                         std::span<const DensityMatrix> samples) {
    RedundancyReport r;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const bool s = is_detected(strong, samples[k]);
        const bool w = is_detected(weak, samples[k]);
        ++r.checked;
        r.strong_detections += s;
        r.weak_detections += w;
        r.weak_only += (w && !s);
        if (s && !w && r.holds) {
            r.holds = false;
            r.counterexample = k;
        }
    }
    return r;
}

struct DisjointnessReport {
    bool holds = true;
    bool orthogonal = false;    // |<phi|phi'>|^2 = 0 within 1e-12
    bool alphas_cover = false;  // alpha + alpha' >= 1
    std::size_t checked = 0;
    std::size_t first_detections = 0;
    std::size_t second_detections = 0;
    std::size_t double_detections = 0;
    std::optional<std::size_t> counterexample;
};

inline DisjointnessReport check_disjointness(const WitnessSpec& w1, const WitnessSpec& w2,
                                             std::span<const DensityMatrix> samples) {
    DisjointnessReport r;
    r.orthogonal = overlap(w1.phi, w2.phi) < 1e-12;
    r.alphas_cover = w1.alpha + w2.alpha >= 1.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const bool a = is_detected(w1, samples[k]);
        const bool b = is_detected(w2, samples[k]);
        ++r.checked;
        r.first_detections += a;
        r.second_detections += b;
        if (a && b) {
            ++r.double_detections;
            if (r.holds) r.counterexample = k;
            r.holds = false;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Relative phases

// (|000> + e^{i theta}|111>) / sqrt(2)
inline PureState ghz_phase_state(double theta) {
    const double h = 1.0 / std::sqrt(2.0);
    std::vector<Complex> v(8, 0.0);
    v[0] = h;
    v[7] = h * std::polar(1.0, theta);
    return PureState(std::move(v));
}

// (|001> + e^{i theta1}|010> + e^{i theta2}|100>) / sqrt(3)
inline PureState w_phase_state(double theta1, double theta2) {
    const double t = 1.0 / std::sqrt(3.0);
    std::vector<Complex> v(8, 0.0);
    v[1] = t;
    v[2] = t * std::polar(1.0, theta1);
    v[4] = t * std::polar(1.0, theta2);
    return PureState(std::move(v));
}

// alpha = 1/2: detected iff cos(theta) > 0.
inline bool ghz_phase_detected(double theta) { return std::cos(theta) > 0.0; }

// alpha = 2/3: detected iff cos t1 + cos t2 + cos(t1 - t2) > 3/2.
inline bool w_phase_detected(double theta1, double theta2) {
    return std::cos(theta1) + std::cos(theta2) + std::cos(theta1 - theta2) > 1.5;
}

inline bool phase_boundary(ReferenceState which, std::span<const double> thetas) {
    if (which == ReferenceState::ghz) {
        require(thetas.size() == 1, "phase_boundary: GHZ family takes one phase");
        return ghz_phase_detected(thetas[0]);
    }
    require(thetas.size() == 2, "phase_boundary: W family takes two phases");
    return w_phase_detected(thetas[0], thetas[1]);
}

} // namespace entml
