#pragma once

// Measurement-reduction experiments: removal orders, retraining on feature
// subsets, masking, random-subset studies, and decision/phase scans of
// trained models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "entml/attribution.hpp"
#include "entml/dataset.hpp"
#include "entml/error.hpp"
#include "entml/nn/train.hpp"
#include "entml/parallel.hpp"
#include "entml/random.hpp"
#include "entml/tomography.hpp"
#include "entml/witness.hpp"

namespace entml {

struct RemovalOrder {
    std::string name;
    std::string provenance; // model_increasing, aggregated_decreasing, random, theory_informed, ...
    std::vector<std::size_t> indices;

    void check(std::size_t features) const {
        nn::Network::check_permutation(indices, features);
        require(indices.front() == 0, "RemovalOrder: the identity setting must be removed first");
    }
};

namespace detail {

inline std::vector<std::size_t> identity_first(std::vector<std::size_t> v) {
    auto it = std::find(v.begin(), v.end(), std::size_t{0});
    require(it != v.end(), "removal order: missing identity index");
    v.erase(it);
    v.insert(v.begin(), 0);
    return v;
}

} // namespace detail

// From a ranking (order = increasing importance): "increasing" removes the
// least important settings first, "decreasing" the most important first.
inline RemovalOrder order_from_ranking(const ImportanceRanking& r, bool increasing, const std::string& provenance,
                                       const std::string& name = {}) {
    std::vector<std::size_t> v = r.order;
    if (!increasing) std::reverse(v.begin(), v.end());
    RemovalOrder o{name.empty() ? provenance : name, provenance, detail::identity_first(std::move(v))};
    o.check(r.order.size());
    return o;
}

inline RemovalOrder random_order(std::size_t features, std::uint64_t seed) {
    std::vector<std::size_t> v(features - 1);
    std::iota(v.begin(), v.end(), std::size_t{1});
    Rng rng(derive_seed(seed, "random-order"));
    shuffle(v, rng);
    v.insert(v.begin(), 0);
    return {"random-" + std::to_string(seed), "random", std::move(v)};
}

// Takes `base` (identity first) and moves `keep_last` to the end, in their
// base order, so those settings survive longest.
inline RemovalOrder theory_informed_order(const std::string& name, const RemovalOrder& base,
                                          const std::vector<std::size_t>& keep_last) {
    const std::set<std::size_t> protect(keep_last.begin(), keep_last.end());
    require(!protect.count(0), "theory_informed_order: identity cannot be protected");
    std::vector<std::size_t> head, tail;
    for (auto j : base.indices) (protect.count(j) ? tail : head).push_back(j);
    require(tail.size() == protect.size(), "theory_informed_order: protected index outside the feature range");
    head.insert(head.end(), tail.begin(), tail.end());
    RemovalOrder o{name, "theory_informed", std::move(head)};
    o.check(base.indices.size());
    return o;
}

// Local Bloch components of qubit 2 and of qubit 1 in lexicographic indexing.
inline std::vector<std::size_t> schmidt_set() { return {lex_index(PauliString{0, 1}), lex_index(PauliString{0, 2}), lex_index(PauliString{0, 3})}; }
inline std::vector<std::size_t> mirrored_schmidt_set() { return {lex_index(PauliString{1, 0}), lex_index(PauliString{2, 0}), lex_index(PauliString{3, 0})}; }

// Union of the GHZ and W witness supports.
inline std::vector<std::size_t> witness_support_union() {
    std::set<std::size_t> s;
    for (auto which : {ReferenceState::ghz, ReferenceState::w})
        for (auto j : witness_support(which)) s.insert(j);
    return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Retraining

struct SubsetResult {
    std::vector<std::size_t> keep;
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::uint64_t seed = 0;
    std::optional<nn::TrainedModel> model;
};

// Same layers as `arch`, input resized to the kept features.
inline nn::NetworkSpec resized_spec(const nn::NetworkSpec& arch, std::size_t inputs) {
    nn::NetworkSpec s = arch;
    s.input_dim = inputs;
    s.check();
    return s;
}

inline std::uint64_t subset_seed(std::uint64_t seed, const std::vector<std::size_t>& keep) {
    std::uint64_t h = 0x84222325cbf29ce4ULL ^ keep.size();
    for (auto j : keep) h = splitmix64(h ^ j);
    return derive_seed(seed, "subset", h);
}

inline SubsetResult retrain_with_subset(const Dataset& train, const Dataset& test, const std::vector<std::size_t>& keep,
                                        const nn::NetworkSpec& arch, const nn::TrainConfig& cfg, bool keep_model = false) {
    require(!keep.empty(), "retrain_with_subset: keep set must be nonempty");
    SubsetResult r;
    r.keep = keep;
    r.seed = subset_seed(cfg.seed, keep);
    nn::TrainConfig c = cfg;
    c.seed = r.seed;
    c.evaluate_test_each_epoch = false;
    const Dataset tr = select_features(train, keep);
    const Dataset te = select_features(test, keep);
    auto m = nn::train(resized_spec(arch, keep.size()), tr, &te, c);
    r.train_acc = nn::evaluate(m.net, tr).accuracy;
    r.test_acc = nn::evaluate(m.net, te).accuracy;
    if (keep_model) r.model = std::move(m);
    return r;
}

struct CurvePoint {
    std::size_t num_remaining = 0;
    std::vector<std::size_t> removed;
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::uint64_t seed = 0;
};

struct ReductionCurve {
    std::string order_name;
    std::string provenance;
    std::vector<CurvePoint> points; // strictly decreasing num_remaining
};

// Remaining-feature counts to evaluate: every count for N = 2, every 4th for
// larger inputs plus the last few counts where elbows appear.
inline std::vector<std::size_t> default_steps(std::size_t features) {
    std::set<std::size_t, std::greater<>> s;
    const std::size_t stride = features <= 16 ? 1 : 4;
    for (std::size_t k = features - 1; k >= 1; k = k > stride ? k - stride : 0) s.insert(k);
    for (std::size_t k = 1; k <= std::min<std::size_t>(4, features - 1); ++k) s.insert(k);
    return {s.begin(), s.end()};
}

inline ReductionCurve reduction_curve(const Dataset& train, const Dataset& test, const RemovalOrder& order,
                                      const nn::NetworkSpec& arch, const nn::TrainConfig& cfg,
                                      std::vector<std::size_t> steps = {}, std::size_t threads = 1) {
    const std::size_t F = train.dim;
    order.check(F);
    if (steps.empty()) steps = default_steps(F);
    std::sort(steps.begin(), steps.end(), std::greater<>());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    for (auto k : steps) require(k >= 1 && k <= F, "reduction_curve: remaining count out of range");

    ReductionCurve curve{order.name, order.provenance, std::vector<CurvePoint>(steps.size())};
    parallel_for(steps.size(), threads, [&](std::size_t i) {
        const std::size_t remaining = steps[i];
        const std::size_t removed = F - remaining;
        std::vector<std::size_t> keep(order.indices.begin() + static_cast<std::ptrdiff_t>(removed), order.indices.end());
        std::sort(keep.begin(), keep.end()); // canonical feature order
        const auto r = retrain_with_subset(train, test, keep, arch, cfg);
        curve.points[i] = {remaining,
                           std::vector<std::size_t>(order.indices.begin(), order.indices.begin() + static_cast<std::ptrdiff_t>(removed)),
                           r.train_acc, r.test_acc, r.seed};
    });
    return curve;
}

inline std::string curves_csv(const std::vector<ReductionCurve>& curves) {
    std::string out = "order_name,num_remaining,removed_indices,train_acc,test_acc,seed\n";
    char buf[128];
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            std::string removed;
            for (std::size_t i = 0; i < p.removed.size(); ++i) removed += (i ? ";" : "") + std::to_string(p.removed[i]);
            std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%llu\n", p.train_acc, p.test_acc,
                          static_cast<unsigned long long>(p.seed));
            out += c.order_name + "," + std::to_string(p.num_remaining) + "," + removed + buf;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Masking and random subsets

// Accuracy with the masked columns overwritten; the model is not retrained.
inline double mask_eval(const nn::Network& net, const Dataset& data, const std::vector<std::size_t>& masked,
                        double mask_value = 0.0) {
    Dataset d = data;
    for (auto j : masked) require(j < d.dim, "mask_eval: index out of range");
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (auto j : masked) d.row(i)[j] = mask_value;
    return nn::evaluate(net, d).accuracy;
}

struct RandomSubsetStudy {
    std::vector<SubsetResult> runs;
    double min_test = 0.0, max_test = 0.0, mean_test = 0.0;
};

// num_models retrainings, each on its own uniformly random subset of the
// non-identity settings.
inline RandomSubsetStudy random_subset_study(const Dataset& train, const Dataset& test, std::size_t subset_size,
                                             std::size_t num_models, const nn::NetworkSpec& arch,
                                             const nn::TrainConfig& cfg, std::uint64_t seed, std::size_t threads = 1) {
    const std::size_t F = train.dim;
    require(subset_size >= 1 && subset_size <= F, "random_subset_study: subset size out of range");
    RandomSubsetStudy st;
    st.runs.resize(num_models);
    parallel_for(num_models, threads, [&](std::size_t m) {
        std::vector<std::size_t> keep;
        if (subset_size >= F - 1) {
            keep.resize(F);
            std::iota(keep.begin(), keep.end(), std::size_t{0});
            if (subset_size == F - 1) keep.erase(keep.begin());
        } else {
            Rng rng(derive_seed(seed, "random-subset", m));
            for (auto j : sample_without_replacement(rng, F - 1, subset_size)) keep.push_back(j + 1);
            std::sort(keep.begin(), keep.end());
        }
        st.runs[m] = retrain_with_subset(train, test, keep, arch, cfg);
    });
    if (!st.runs.empty()) {
        st.min_test = 1.0;
        for (const auto& r : st.runs) {
            st.min_test = std::min(st.min_test, r.test_acc);
            st.max_test = std::max(st.max_test, r.test_acc);
            st.mean_test += r.test_acc / static_cast<double>(st.runs.size());
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Scans of trained models

struct GridRow {
    std::vector<double> coords;
    std::size_t predicted = 0;
    std::vector<double> probabilities;
};

// Evaluates a 1- or 2-input model on a regular grid over [-1, 1]^k.
inline std::vector<GridRow> decision_region_scan(const nn::Network& net, std::size_t points_per_axis) {
    const std::size_t k = net.input_dim();
    require(k == 1 || k == 2, "decision_region_scan: model must take 1 or 2 inputs");
    require(points_per_axis >= 2, "decision_region_scan: need at least two points per axis");
    auto coord = [&](std::size_t i) { return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points_per_axis - 1); };
    std::vector<GridRow> rows;
    const std::size_t ny = k == 2 ? points_per_axis : 1;
    for (std::size_t i = 0; i < points_per_axis; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            GridRow r;
            r.coords.push_back(coord(i));
            if (k == 2) r.coords.push_back(coord(j));
            r.probabilities = net.probabilities(r.coords);
            r.predicted = nn::argmax(r.probabilities.data(), r.probabilities.size());
            rows.push_back(std::move(r));
        }
    return rows;
}

// Correlation features of a pure phase state, restricted to `keep` when given.
inline std::vector<double> phase_features(const PureState& psi, const std::vector<std::size_t>& keep) {
    const auto T = correlation_vector(psi).values();
    if (keep.empty()) return T;
    std::vector<double> out;
    for (auto j : keep) out.push_back(T[j]);
    return out;
}

struct PhasePoint {
    double theta1 = 0.0, theta2 = 0.0;
    double p_detected = 0.0; // model probability of class 1
    bool analytic = false;   // witness condition
};

inline std::vector<PhasePoint> ghz_phase_scan(const nn::Network& net, std::size_t points,
                                              const std::vector<std::size_t>& keep = {}) {
    require(points >= 2, "ghz_phase_scan: need at least two points");
    std::vector<PhasePoint> out;
    for (std::size_t i = 0; i < points; ++i) {
        const double th = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(points);
        const auto p = net.probabilities(phase_features(ghz_phase_state(th), keep));
        out.push_back({th, 0.0, p[1], ghz_phase_detected(th)});
    }
    return out;
}

inline std::vector<PhasePoint> w_phase_scan(const nn::Network& net, std::size_t points_per_axis,
                                            const std::vector<std::size_t>& keep = {}) {
    require(points_per_axis >= 2, "w_phase_scan: need at least two points per axis");
    std::vector<PhasePoint> out;
    auto th = [&](std::size_t i) {
        return -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(points_per_axis);
    };
    for (std::size_t i = 0; i < points_per_axis; ++i)
        for (std::size_t j = 0; j < points_per_axis; ++j) {
            const auto p = net.probabilities(phase_features(w_phase_state(th(i), th(j)), keep));
            out.push_back({th(i), th(j), p[1], w_phase_detected(th(i), th(j))});
        }
    return out;
}

// Where the detection probability crosses 1/2 moving away from theta = 0 on
// each side, by linear interpolation. Empty when the curve never crosses.
struct Crossings {
    std::optional<double> negative, positive;
};

inline Crossings ghz_crossings(const std::vector<PhasePoint>& scan) {
    std::vector<PhasePoint> s = scan;
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.theta1 < b.theta1; });
    std::size_t zero = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (std::abs(s[i].theta1) < std::abs(s[zero].theta1)) zero = i;
    auto interp = [](const PhasePoint& a, const PhasePoint& b) {
        const double t = (0.5 - a.p_detected) / (b.p_detected - a.p_detected);
        return a.theta1 + t * (b.theta1 - a.theta1);
    };
    Crossings c;
    for (std::size_t i = zero; i + 1 < s.size(); ++i)
        if ((s[i].p_detected - 0.5) * (s[i + 1].p_detected - 0.5) <= 0.0 && s[i].p_detected != s[i + 1].p_detected) {
            c.positive = interp(s[i], s[i + 1]);
            break;
        }
    for (std::size_t i = zero; i > 0; --i)
        if ((s[i].p_detected - 0.5) * (s[i - 1].p_detected - 0.5) <= 0.0 && s[i].p_detected != s[i - 1].p_detected) {
            c.negative = interp(s[i], s[i - 1]);
            break;
        }
    return c;
}

// Fraction of scan points where the model decision (p > 1/2) matches the analytic region.
inline double region_agreement(const std::vector<PhasePoint>& scan) {
    require(!scan.empty(), "region_agreement: empty scan");
    std::size_t agree = 0;
    for (const auto& p : scan) agree += (p.p_detected > 0.5) == p.analytic;
    return static_cast<double>(agree) / static_cast<double>(scan.size());
}

inline std::string phase_scan_csv(const std::vector<PhasePoint>& scan) {
    std::string out = "theta1,theta2,p_detected,analytic_detected\n";
    char buf[128];
    for (const auto& p : scan) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%d\n", p.theta1, p.theta2, p.p_detected, p.analytic ? 1 : 0);
        out += buf;
    }
    return out;
}

} // namespace entml
