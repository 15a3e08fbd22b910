#pragma once

// Labeled datasets of correlation vectors for the four scenarios:
// two/three qubits, pure/mixed. Pure states come from random local invertible
// maps applied to class representatives, 2q mixed states from XX^dag/tr and a
// PPT label, 3q mixed states from witness-guided depolarized mixtures.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "entml/dataset.hpp"
#include "entml/error.hpp"
#include "entml/io.hpp"
#include "entml/parallel.hpp"
#include "entml/qcore.hpp"
#include "entml/random.hpp"
#include "entml/tomography.hpp"
#include "entml/witness.hpp"

namespace entml {

enum class Scenario { pure_2q, pure_3q, mixed_2q, mixed_3q };

inline std::string to_string(Scenario s) {
    switch (s) {
    case Scenario::pure_2q: return "2q-pure";
    case Scenario::pure_3q: return "3q-pure";
    case Scenario::mixed_2q: return "2q-mixed";
    case Scenario::mixed_3q: return "3q-mixed";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& name) {
    for (Scenario s : {Scenario::pure_2q, Scenario::pure_3q, Scenario::mixed_2q, Scenario::mixed_3q})
        if (to_string(s) == name) return s;
    throw UsageError("unknown scenario '" + name + "' (expected 2q-pure, 3q-pure, 2q-mixed or 3q-mixed)");
}

inline std::size_t scenario_qubits(Scenario s) { return (s == Scenario::pure_2q || s == Scenario::mixed_2q) ? 2 : 3; }
inline std::size_t scenario_classes(Scenario s) { return s == Scenario::pure_3q ? 6 : 2; }

// Three-qubit pure classes.
namespace cls3 {
inline constexpr int fully_separable = 0;
inline constexpr int pair_12 = 1;
inline constexpr int pair_13 = 2;
inline constexpr int pair_23 = 3;
inline constexpr int w = 4;
inline constexpr int ghz = 5;
} // namespace cls3

struct SloccClass {
    std::size_t num_qubits = 2;
    int class_index = 0;

    SloccClass(std::size_t n, int c) : num_qubits(n), class_index(c) {
        require(n == 2 || n == 3, "SloccClass: only 2 or 3 qubits");
        require(c >= 0 && c < (n == 2 ? 2 : 6), "SloccClass: class index out of range");
    }
};

enum class ElementDist { normal, uniform };

inline std::string to_string(ElementDist d) { return d == ElementDist::normal ? "normal" : "uniform"; }

inline ElementDist parse_element_dist(const std::string& s) {
    if (s == "normal") return ElementDist::normal;
    if (s == "uniform") return ElementDist::uniform;
    throw UsageError("unknown element distribution '" + s + "' (expected normal or uniform)");
}

// ---------------------------------------------------------------------------
// Samplers

inline Complex random_element(ElementDist dist, Rng& rng, double normal_sigma) {
    if (dist == ElementDist::normal) return {normal_sigma * standard_normal(rng), normal_sigma * standard_normal(rng)};
    return {uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
}

// Complex Ginibre (variance 1/2 per real component) or uniform entries in [-1, 1].
inline ComplexMatrix sample_lio(ElementDist dist, Rng& rng) {
    const double sigma = std::sqrt(0.5);
    for (int attempt = 0; attempt < 100; ++attempt) {
        ComplexMatrix a(2, 2);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 2; ++c) a(r, c) = random_element(dist, rng, sigma);
        if (std::abs(det2(a)) > 1e-12) return a;
    }
    throw NumericalError("sample_lio: no invertible matrix after 100 attempts");
}

inline PureState canonical_representative(const SloccClass& c) {
    const double h = 1.0 / std::sqrt(2.0);
    if (c.num_qubits == 2) return c.class_index == 0 ? zero_state(2) : bell_state();
    std::vector<Complex> v(8, 0.0);
    switch (c.class_index) {
    case cls3::fully_separable: return zero_state(3);
    case cls3::pair_12: v[0] = h; v[6] = h; break; // (|00> + |11>)|0>
    case cls3::pair_13: v[0] = h; v[5] = h; break; // |0>_2 (|00> + |11>)_13
    case cls3::pair_23: v[0] = h; v[3] = h; break; // |0>(|00> + |11>)
    case cls3::w: return w_state();
    default: return ghz_state();
    }
    return PureState(std::move(v));
}

inline PureState apply_local_operators(const std::vector<ComplexMatrix>& ops, const PureState& psi) {
    require(ops.size() == psi.num_qubits(), "apply_local_operators: one operator per qubit");
    std::vector<Complex> amp = psi.amplitudes();
    for (std::size_t q = 0; q < ops.size(); ++q) amp = apply_single_qubit(ops[q], q, amp);
    return PureState::normalized(std::move(amp));
}

// Independent class check from single-qubit reduced purities: a qubit is
// unentangled with the rest iff its reduced state is pure.
inline std::optional<int> reduced_state_class(const PureState& psi, double tol = 1e-9) {
    const std::size_t n = psi.num_qubits();
    std::vector<bool> pure(n);
    for (std::size_t q = 0; q < n; ++q) pure[q] = purity_of(reduced_single_qubit(psi, q)) > 1.0 - tol;
    if (n == 2) {
        if (pure[0] != pure[1]) return std::nullopt;
        return pure[0] ? 0 : 1;
    }
    const int count = pure[0] + pure[1] + pure[2];
    if (count == 3) return cls3::fully_separable;
    if (count == 1) {
        if (pure[2]) return cls3::pair_12;
        if (pure[1]) return cls3::pair_13;
        return cls3::pair_23;
    }
    if (count == 0) return cls3::w; // genuinely entangled; W and GHZ are not told apart here
    return std::nullopt;
}

inline bool consistent_with_class(const PureState& psi, int class_index, double tol = 1e-9) {
    const auto found = reduced_state_class(psi, tol);
    if (!found) return false;
    if (psi.num_qubits() == 3 && class_index >= cls3::w) return *found == cls3::w;
    return *found == class_index;
}

// (A_1 x ... x A_N) |rep_c>, renormalized. Numerically borderline draws whose
// reduced purities contradict the class are resampled.
inline PureState generate_pure_state(const SloccClass& c, ElementDist dist, Rng& rng) {
    const PureState rep = canonical_representative(c);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<ComplexMatrix> ops;
        for (std::size_t q = 0; q < c.num_qubits; ++q) ops.push_back(sample_lio(dist, rng));
        std::vector<Complex> amp = rep.amplitudes();
        for (std::size_t q = 0; q < ops.size(); ++q) amp = apply_single_qubit(ops[q], q, amp);
        if (PureState::squared_norm(amp) < 1e-24) continue;
        PureState psi = PureState::normalized(std::move(amp));
        if (consistent_with_class(psi, c.class_index)) return psi;
    }
    throw NumericalError("generate_pure_state: resampling budget exhausted");
}

// rho = X X^dag / tr(X X^dag) with X in C^{4x4}; Ginibre entries N(0, 1) per
// real component give the Hilbert-Schmidt measure.
inline DensityMatrix sample_density_2q(ElementDist dist, Rng& rng) {
    ComplexMatrix x(4, 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) x(r, c) = random_element(dist, rng, 1.0);
    ComplexMatrix m = x * x.adjoint();
    // Symmetrize away rounding so hermiticity is exact.
    for (std::size_t r = 0; r < 4; ++r) {
        m(r, r) = {m(r, r).real(), 0.0};
        for (std::size_t c = r + 1; c < 4; ++c) m(c, r) = std::conj(m(r, c));
    }
    const double tr = m.trace().real();
    m *= Complex{1.0 / tr, 0.0};
    return DensityMatrix(std::move(m));
}

inline SloccClass label_2q_mixed(const DensityMatrix& rho) { return SloccClass(2, is_ppt(rho) ? 0 : 1); }

// ---------------------------------------------------------------------------
// Cap sampling around a reference state

enum class Region { detected, undetected };

inline std::string to_string(Region r) { return r == Region::detected ? "detected" : "undetected"; }

// Orthonormal basis {phi, b_2, ..., b_d}: Gram-Schmidt seeded from the
// canonical basis, skipping residuals below 1e-8.
inline std::vector<std::vector<Complex>> complete_basis(const PureState& phi) {
    const std::size_t d = phi.dim();
    std::vector<std::vector<Complex>> basis{phi.amplitudes()};
    for (std::size_t k = 0; k < d && basis.size() < d; ++k) {
        std::vector<Complex> v(d, 0.0);
        v[k] = 1.0;
        for (const auto& b : basis) {
            Complex p{0.0, 0.0};
            for (std::size_t i = 0; i < d; ++i) p += std::conj(b[i]) * v[i];
            for (std::size_t i = 0; i < d; ++i) v[i] -= p * b[i];
        }
        const double norm = std::sqrt(PureState::squared_norm(v));
        if (norm < 1e-8) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    if (basis.size() != d) throw NumericalError("complete_basis: degenerate completion");
    return basis;
}

// psi = a phi + sqrt(1 - |a|^2) sum_k v_k b_k with v a unit vector in C^{d-1}.
inline PureState cap_state(const std::vector<std::vector<Complex>>& basis, Complex a, const std::vector<Complex>& v) {
    const std::size_t d = basis.size();
    require(v.size() == d - 1, "cap_state: complement coefficients must have d - 1 entries");
    require(std::norm(a) <= 1.0 + 1e-12, "cap_state: |a| must not exceed 1");
    const double rest = std::sqrt(std::max(0.0, 1.0 - std::norm(a)));
    std::vector<Complex> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) out[i] = a * basis[0][i];
    for (std::size_t k = 0; k + 1 < d; ++k)
        for (std::size_t i = 0; i < d; ++i) out[i] += rest * v[k] * basis[k + 1][i];
    return PureState::normalized(std::move(out));
}

// gamma with density proportional to (1 - gamma)^(d-2) on [lo, hi], drawn by
// inverting F(gamma) = 1 - (1 - gamma)^(d-1).
inline double sample_truncated_overlap(double lo, double hi, std::size_t d, Rng& rng) {
    const double k = static_cast<double>(d - 1);
    const double f_lo = 1.0 - std::pow(1.0 - lo, k);
    const double f_hi = 1.0 - std::pow(1.0 - hi, k);
    const double u = f_lo + (f_hi - f_lo) * uniform01(rng);
    return std::clamp(1.0 - std::pow(std::max(0.0, 1.0 - u), 1.0 / k), lo, hi);
}

struct CapSample {
    PureState psi;
    double gamma = 0.0;
};

inline CapSample sample_cap_state(const PureState& phi, double alpha, Region region, Rng& rng) {
    require(alpha > 0.0 && alpha < 1.0, "sample_cap_state: alpha must lie in (0, 1)");
    const std::size_t d = phi.dim();
    const auto basis = complete_basis(phi);
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double gamma = region == Region::detected ? sample_truncated_overlap(alpha, 1.0, d, rng)
                                                        : sample_truncated_overlap(0.0, alpha, d, rng);
        if (region == Region::detected && gamma <= alpha) continue; // open at alpha
        const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        std::vector<Complex> v(d - 1);
        double norm2 = 0.0;
        for (auto& x : v) {
            x = {standard_normal(rng), standard_normal(rng)};
            norm2 += std::norm(x);
        }
        if (norm2 < 1e-24) continue;
        for (auto& x : v) x /= std::sqrt(norm2);
        PureState psi = cap_state(basis, std::polar(std::sqrt(gamma), theta), v);
        return {std::move(psi), gamma};
    }
    throw NumericalError("sample_cap_state: resampling budget exhausted");
}

// ---------------------------------------------------------------------------
// Three-qubit mixed states

namespace detail {

// (beta/d) I + (1 - beta) |psi><psi|, accumulated with weight w into m.
inline void add_depolarized(ComplexMatrix& m, const PureState& psi, double beta, double w) {
    const std::size_t d = psi.dim();
    const double pure_w = w * (1.0 - beta);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r, c) += pure_w * psi[r] * std::conj(psi[c]);
    for (std::size_t i = 0; i < d; ++i) m(i, i) += w * beta / static_cast<double>(d);
}

struct DepolarizedDraw {
    PureState psi;
    double beta = 0.0;
};

inline DepolarizedDraw draw_depolarized(const WitnessSpec& w, Region region, Rng& rng) {
    if (region == Region::detected) {
        CapSample s = sample_cap_state(w.phi, w.alpha, Region::detected, rng);
        const double bmax = beta_threshold(w.alpha, s.gamma);
        return {std::move(s.psi), bmax * uniform01(rng)}; // beta in [0, beta_max)
    }
    if (uniform01(rng) < 0.5) {
        CapSample s = sample_cap_state(w.phi, w.alpha, Region::undetected, rng);
        return {std::move(s.psi), 1.0 - uniform01(rng)}; // beta in (0, 1]
    }
    CapSample s = sample_cap_state(w.phi, w.alpha, Region::detected, rng);
    const double bmax = beta_threshold(w.alpha, s.gamma);
    return {std::move(s.psi), bmax + (1.0 - bmax) * (1.0 - uniform01(rng))}; // beta in (beta_max, 1]
}

} // namespace detail

struct MixingConfig {
    int min_terms = 2;
    int max_terms = 20;
};

// Convex mixture of m ~ U{min..max} depolarized states, all drawn for the same
// witness and region, with flat Dirichlet weights.
inline DensityMatrix generate_3q_mixed(const WitnessSpec& w, Region region, Rng& rng, const MixingConfig& mix = {}) {
    require(mix.min_terms >= 1 && mix.max_terms >= mix.min_terms, "generate_3q_mixed: invalid mixing range");
    require(w.phi.dim() == 8, "generate_3q_mixed: three-qubit witness expected");
    const int m = mix.min_terms + static_cast<int>(uniform_index(rng, mix.max_terms - mix.min_terms + 1));
    const auto weights = random_simplex(rng, static_cast<std::size_t>(m));
    ComplexMatrix acc(8, 8);
    for (int k = 0; k < m; ++k) {
        const auto draw = detail::draw_depolarized(w, region, rng);
        detail::add_depolarized(acc, draw.psi, draw.beta, weights[k]);
    }
    for (std::size_t r = 0; r < 8; ++r) {
        acc(r, r) = {acc(r, r).real(), 0.0};
        for (std::size_t c = r + 1; c < 8; ++c) acc(c, r) = std::conj(acc(r, c));
    }
    const double tr = acc.trace().real();
    acc *= Complex{1.0 / tr, 0.0};
    return DensityMatrix(std::move(acc));
}

// The generator's pair of witnesses; class 1 means detected by either.
inline std::array<WitnessSpec, 2> dataset_witnesses() { return {w_witness(2.0 / 3.0), ghz_witness(0.5)}; }

inline int label_3q_mixed(const DensityMatrix& rho) {
    for (const auto& w : dataset_witnesses())
        if (is_detected(w, rho)) return 1;
    return 0;
}

// Class-conditional draw: detected states pick the W or GHZ witness with
// probability 1/2; undetected states are redrawn until neither witness fires.
inline DensityMatrix generate_3q_mixed_class(int class_index, Rng& rng, const MixingConfig& mix = {}) {
    const auto ws = dataset_witnesses();
    const auto& w = ws[uniform01(rng) < 0.5 ? 0 : 1];
    if (class_index == 1) return generate_3q_mixed(w, Region::detected, rng, mix);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        DensityMatrix rho = generate_3q_mixed(w, Region::undetected, rng, mix);
        if (label_3q_mixed(rho) == 0) return rho;
    }
    throw NumericalError("generate_3q_mixed_class: undetected resampling budget exhausted");
}

// ---------------------------------------------------------------------------
// Datasets

struct GenConfig {
    Scenario scenario = Scenario::pure_2q;
    std::size_t per_class = 1000; // E_c, training rows per class
    std::size_t dev_per_class = 0; // optional development split; validation = dev / 10
    ElementDist dist = ElementDist::normal;
    std::uint64_t seed = 0;
    std::optional<ShotConfig> shots;      // train and development splits
    std::optional<ShotConfig> test_shots; // test and validation; falls back to `shots`
    MixingConfig mixing;
    std::size_t threads = 1;

    void check() const { require(per_class >= 10, "GenConfig: per-class count must be >= 10"); }
};

inline ElementDist default_element_dist(Scenario s) { return s == Scenario::mixed_2q ? ElementDist::uniform : ElementDist::normal; }

struct DatasetSplits {
    Dataset train, test, dev, validation;
    nlohmann::json stats = nlohmann::json::object();
};

namespace detail {

inline std::vector<double> example_features(const GenConfig& cfg, const CorrelationVector& T,
                                            const std::optional<ShotConfig>& shots, std::uint64_t stream) {
    if (!shots) return T.values();
    Rng rng(derive_seed(shots->seed ^ cfg.seed, "shots", stream));
    return finite_shot_correlation(T, shots->shots_per_setting, rng).values();
}

inline Dataset empty_dataset(const GenConfig& cfg) {
    const std::size_t n = scenario_qubits(cfg.scenario);
    return Dataset{n, scenario_classes(cfg.scenario), feature_count(n), {}, {}};
}

// Fills `count` rows per class, each row drawn from its own derived stream.
inline Dataset generate_split(const GenConfig& cfg, const std::string& split, std::size_t count,
                              const std::optional<ShotConfig>& shots, nlohmann::json& stats) {
    Dataset d = empty_dataset(cfg);
    const std::size_t C = d.num_classes;
    if (count == 0) return d;
    d.features.assign(C * count * d.dim, 0.0);
    d.labels.assign(C * count, 0);
    const std::string stage = "gen/" + to_string(cfg.scenario) + "/" + split;

    if (cfg.scenario == Scenario::mixed_2q) {
        // Labels come from the PPT oracle, so draw a shared stream and bucket
        // by class in index order until every class is full.
        std::vector<std::size_t> filled(C, 0);
        std::size_t drawn = 0;
        const std::size_t chunk = 4096;
        std::vector<std::pair<int, std::vector<double>>> buf(chunk);
        while (true) {
            bool done = true;
            for (auto f : filled) done = done && f == count;
            if (done) break;
            parallel_for(chunk, cfg.threads, [&](std::size_t k) {
                Rng rng(derive_seed(cfg.seed, stage, drawn + k));
                const DensityMatrix rho = sample_density_2q(cfg.dist, rng);
                buf[k] = {label_2q_mixed(rho).class_index, example_features(cfg, correlation_vector(rho), shots, drawn + k)};
            });
            for (std::size_t k = 0; k < chunk; ++k) {
                const auto c = static_cast<std::size_t>(buf[k].first);
                if (filled[c] == count) continue;
                const std::size_t row = c * count + filled[c]++;
                std::copy(buf[k].second.begin(), buf[k].second.end(), d.row(row));
                d.labels[row] = static_cast<int>(c);
            }
            drawn += chunk;
        }
        stats[split]["drawn"] = drawn;
    } else {
        parallel_for(C * count, cfg.threads, [&](std::size_t row) {
            const int c = static_cast<int>(row / count);
            Rng rng(derive_seed(cfg.seed, stage, row));
            CorrelationVector T;
            if (cfg.scenario == Scenario::mixed_3q) {
                const DensityMatrix rho = generate_3q_mixed_class(c, rng, cfg.mixing);
                if (label_3q_mixed(rho) != c) throw NumericalError("generate_split: 3q mixed label disagrees with witness oracle");
                T = correlation_vector(rho);
            } else {
                const PureState psi = generate_pure_state(SloccClass(d.num_qubits, c), cfg.dist, rng);
                T = correlation_vector(psi);
            }
            const auto f = example_features(cfg, T, shots, row);
            std::copy(f.begin(), f.end(), d.row(row));
            d.labels[row] = c;
        });
    }

    std::vector<std::size_t> order(d.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, stage + "/shuffle"));
    shuffle(order, rng);
    return take_rows(d, order);
}

} // namespace detail

// Balanced, shuffled splits: train E_c per class, test E_c/10 per class, and
// optional development/validation in the same ratio.
inline DatasetSplits build_dataset(const GenConfig& cfg) {
    cfg.check();
    DatasetSplits s;
    const auto& test_shots = cfg.test_shots ? cfg.test_shots : cfg.shots;
    s.train = detail::generate_split(cfg, "train", cfg.per_class, cfg.shots, s.stats);
    s.test = detail::generate_split(cfg, "test", cfg.per_class / 10, test_shots, s.stats);
    s.dev = detail::generate_split(cfg, "dev", cfg.dev_per_class, cfg.shots, s.stats);
    s.validation = detail::generate_split(cfg, "validation", cfg.dev_per_class / 10, test_shots, s.stats);
    return s;
}

// ---------------------------------------------------------------------------
// Run files

inline nlohmann::json gen_config_json(const GenConfig& cfg) {
    nlohmann::json j = {{"scenario", to_string(cfg.scenario)},
                        {"per_class", cfg.per_class},
                        {"dev_per_class", cfg.dev_per_class},
                        {"element_dist", to_string(cfg.dist)},
                        {"seed", cfg.seed},
                        {"mixing", {{"min_terms", cfg.mixing.min_terms}, {"max_terms", cfg.mixing.max_terms}}}};
    auto shots = [](const std::optional<ShotConfig>& s) -> nlohmann::json {
        if (!s) return nullptr;
        return {{"shots_per_setting", s->shots_per_setting}, {"seed", s->seed}};
    };
    j["shots"] = shots(cfg.shots);
    j["test_shots"] = shots(cfg.test_shots);
    return j;
}

// Writes train.bin/test.bin (and dev/validation when present) plus manifest.json.
inline nlohmann::json write_splits(const fs::path& dir, const DatasetSplits& s, const GenConfig& cfg, bool csv = false) {
    nlohmann::json manifest = {{"format", "EMLDSET1"}, {"config", gen_config_json(cfg)}, {"generator_stats", s.stats}};
    auto emit = [&](const char* name, const Dataset& d) {
        if (d.rows() == 0) return;
        write_dataset(dir / (std::string(name) + ".bin"), d);
        if (csv) atomic_write(dir / (std::string(name) + ".csv"), dataset_csv(d));
        manifest["splits"][name] = {{"rows", d.rows()}, {"dim", d.dim}, {"classes", d.num_classes},
                                    {"class_counts", d.class_counts()}};
    };
    emit("train", s.train);
    emit("test", s.test);
    emit("dev", s.dev);
    emit("validation", s.validation);
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

} // namespace entml
