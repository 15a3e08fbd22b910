#pragma once

// Shapley attributions of a classifier's logits over its input features.
// The value of a coalition S is interventional: the mean model output over
// background rows with the features in S replaced by the explained instance.
//
// Backends: exact subset enumeration (<= 20 features), permutation sampling
// with per-feature standard errors, and the rescale multiplier rule.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "entml/dataset.hpp"
#include "entml/error.hpp"
#include "entml/io.hpp"
#include "entml/nn/network.hpp"
#include "entml/parallel.hpp"
#include "entml/random.hpp"
#include "entml/tomography.hpp"

namespace entml {

// f(X) for a batch of rows: writes rows x outputs values.
struct BatchModel {
    std::size_t input_dim = 0;
    std::size_t outputs = 0;
    std::function<void(const double* x, std::size_t rows, double* out)> eval;
};

inline BatchModel logit_model(const nn::Network& net) {
    BatchModel m;
    m.input_dim = net.input_dim();
    m.outputs = net.num_classes();
    m.eval = [&net](const double* x, std::size_t rows, double* out) {
        nn::Workspace ws;
        const std::size_t chunk = 4096;
        for (std::size_t lo = 0; lo < rows; lo += chunk) {
            const std::size_t n = std::min(chunk, rows - lo);
            const double* z = net.forward(x + lo * net.input_dim(), n, ws);
            std::copy_n(z, n * net.num_classes(), out + lo * net.num_classes());
        }
    };
    return m;
}

// Attributions for one instance: value(j, c), plus optional standard errors.
struct Attribution {
    std::size_t features = 0;
    std::size_t classes = 0;
    std::vector<double> values; // features x classes
    std::vector<double> stderr_; // same shape; empty for deterministic backends

    Attribution() = default;
    Attribution(std::size_t f, std::size_t c) : features(f), classes(c), values(f * c, 0.0) {}
    double& operator()(std::size_t j, std::size_t c) { return values[j * classes + c]; }
    double operator()(std::size_t j, std::size_t c) const { return values[j * classes + c]; }
    double se(std::size_t j, std::size_t c) const { return stderr_.empty() ? 0.0 : stderr_[j * classes + c]; }
    double total(std::size_t c) const {
        double s = 0.0;
        for (std::size_t j = 0; j < features; ++j) s += (*this)(j, c);
        return s;
    }
};

inline constexpr std::size_t kExactFeatureCap = 20;

namespace detail {

// s! (n - s - 1)! / n! for s = 0..n-1.
inline std::vector<double> shapley_weights(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t s = 0; s < n; ++s)
        w[s] = std::exp(std::lgamma(static_cast<double>(s + 1)) + std::lgamma(static_cast<double>(n - s)) -
                        std::lgamma(static_cast<double>(n + 1)));
    return w;
}

inline void check_background(const BatchModel& m, std::span<const double> x, const Dataset& bg) {
    require(x.size() == m.input_dim, "shapley: instance dimension mismatch");
    require(bg.dim == m.input_dim, "shapley: background dimension mismatch");
    require(bg.rows() > 0, "shapley: empty background");
}

// Features equal in the instance and every background row: their coalition
// membership never changes the hybrid inputs.
inline std::vector<bool> null_features(std::span<const double> x, const Dataset& bg) {
    std::vector<bool> null(x.size(), true);
    for (std::size_t b = 0; b < bg.rows(); ++b)
        for (std::size_t j = 0; j < x.size(); ++j)
            if (bg.row(b)[j] != x[j]) null[j] = false;
    return null;
}

inline std::vector<double> mean_rows(const std::vector<double>& out, std::size_t rows, std::size_t cols) {
    std::vector<double> m(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m[c] += out[r * cols + c];
    for (auto& v : m) v /= static_cast<double>(rows);
    return m;
}

} // namespace detail

// Shapley values of a tabulated n-player game, value(mask) for mask in [0, 2^n).
inline std::vector<double> exact_shapley_game(std::size_t n, const std::function<double(std::uint32_t)>& value) {
    require(n >= 1 && n <= kExactFeatureCap, "exact_shapley_game: 1..20 players");
    const auto w = detail::shapley_weights(n);
    const std::uint32_t full = 1u << n;
    std::vector<double> v(full);
    for (std::uint32_t s = 0; s < full; ++s) v[s] = value(s);
    std::vector<double> phi(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint32_t bit = 1u << j;
        for (std::uint32_t s = 0; s < full; ++s)
            if (!(s & bit)) phi[j] += w[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    return phi;
}

inline Attribution exact_shapley(const BatchModel& m, std::span<const double> x, const Dataset& bg) {
    detail::check_background(m, x, bg);
    const std::size_t F = m.input_dim, C = m.outputs, K = bg.rows();
    if (F > kExactFeatureCap)
        throw ValidationError("exact_shapley: " + std::to_string(F) +
                              " features exceed the enumeration cap of 20; use the permutation or rescale backend");
    // A null player's Shapley value is zero and removing it leaves the others
    // unchanged, so the game is enumerated over the active features only.
    const auto null = detail::null_features(x, bg);
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < F; ++j)
        if (!null[j]) active.push_back(j);
    const std::size_t n = active.size();
    Attribution a(F, C);
    if (n == 0) return a;

    const std::uint32_t full = 1u << n;
    std::vector<double> value(static_cast<std::size_t>(full) * C, 0.0);
    const std::size_t per_batch = std::max<std::size_t>(1, 4096 / K);
    std::vector<double> rows, out;
    for (std::uint32_t lo = 0; lo < full; lo += static_cast<std::uint32_t>(per_batch)) {
        const std::size_t nm = std::min<std::size_t>(per_batch, full - lo);
        rows.resize(nm * K * F);
        out.resize(nm * K * C);
        for (std::size_t q = 0; q < nm; ++q) {
            const std::uint32_t s = lo + static_cast<std::uint32_t>(q);
            for (std::size_t b = 0; b < K; ++b) {
                double* r = rows.data() + (q * K + b) * F;
                std::copy_n(bg.row(b), F, r);
                for (std::size_t t = 0; t < n; ++t)
                    if (s >> t & 1u) r[active[t]] = x[active[t]];
            }
        }
        m.eval(rows.data(), nm * K, out.data());
        for (std::size_t q = 0; q < nm; ++q)
            for (std::size_t b = 0; b < K; ++b)
                for (std::size_t c = 0; c < C; ++c) value[(lo + q) * C + c] += out[(q * K + b) * C + c];
    }
    for (auto& v : value) v /= static_cast<double>(K);

    const auto w = detail::shapley_weights(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::uint32_t bit = 1u << t;
        for (std::uint32_t s = 0; s < full; ++s) {
            if (s & bit) continue;
            const double wt = w[static_cast<std::size_t>(std::popcount(s))];
            for (std::size_t c = 0; c < C; ++c)
                a(active[t], c) += wt * (value[static_cast<std::size_t>(s | bit) * C + c] - value[static_cast<std::size_t>(s) * C + c]);
        }
    }
    return a;
}

// Monte-Carlo over feature orderings. Each ordering walks from "all features
// from the background" to "all from the instance", so its contributions
// telescope to f(x) - mean_b f(b).
inline Attribution permutation_shapley(const BatchModel& m, std::span<const double> x, const Dataset& bg,
                                       std::size_t num_perms, Rng& rng) {
    detail::check_background(m, x, bg);
    require(num_perms >= 1, "permutation_shapley: num_perms must be >= 1");
    const std::size_t F = m.input_dim, C = m.outputs, K = bg.rows();
    const auto null = detail::null_features(x, bg);
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < F; ++j)
        if (!null[j]) active.push_back(j);

    std::vector<double> sum(F * C, 0.0), sum2(F * C, 0.0);
    std::vector<double> rows((active.size() + 1) * K * F), out((active.size() + 1) * K * C);
    for (std::size_t p = 0; p < num_perms; ++p) {
        std::vector<std::size_t> order = active;
        shuffle(order, rng);
        // Step 0: background rows; step t: first t features of `order` from x.
        for (std::size_t b = 0; b < K; ++b) std::copy_n(bg.row(b), F, rows.data() + b * F);
        for (std::size_t t = 1; t <= order.size(); ++t) {
            double* dst = rows.data() + t * K * F;
            std::copy_n(rows.data() + (t - 1) * K * F, K * F, dst);
            for (std::size_t b = 0; b < K; ++b) dst[b * F + order[t - 1]] = x[order[t - 1]];
        }
        m.eval(rows.data(), (order.size() + 1) * K, out.data());
        std::vector<double> prev = detail::mean_rows(out, K, C);
        for (std::size_t t = 1; t <= order.size(); ++t) {
            std::vector<double> block(out.begin() + static_cast<std::ptrdiff_t>(t * K * C),
                                      out.begin() + static_cast<std::ptrdiff_t>((t + 1) * K * C));
            const auto cur = detail::mean_rows(block, K, C);
            const std::size_t j = order[t - 1];
            for (std::size_t c = 0; c < C; ++c) {
                const double d = cur[c] - prev[c];
                sum[j * C + c] += d;
                sum2[j * C + c] += d * d;
            }
            prev = cur;
        }
    }
    Attribution a(F, C);
    a.stderr_.assign(F * C, 0.0);
    const double P = static_cast<double>(num_perms);
    for (std::size_t i = 0; i < F * C; ++i) {
        a.values[i] = sum[i] / P;
        if (num_perms > 1) {
            const double var = std::max(0.0, (sum2[i] - P * a.values[i] * a.values[i]) / (P - 1.0));
            a.stderr_[i] = std::sqrt(var / P);
        }
    }
    return a;
}

// Rescale rule: every ReLU passes the multiplier delta(out)/delta(in) relative
// to the reference row (its derivative at the reference when |delta(in)| <
// 1e-9); linear layers pass their weights. One backward pass per class and
// background row; attributions are averaged over the background.
inline Attribution rescale_attribution(const nn::Network& net, std::span<const double> x, const Dataset& bg) {
    require(x.size() == net.input_dim() && bg.dim == net.input_dim(), "rescale_attribution: dimension mismatch");
    require(bg.rows() > 0, "rescale_attribution: empty background");
    for (const auto& op : net.ops())
        if (op.type == nn::OpType::maxpool)
            throw ValidationError("rescale_attribution: max pooling is not supported by the rescale rule");
    const std::size_t F = net.input_dim(), C = net.num_classes(), K = bg.rows();
    const auto& ops = net.ops();

    nn::Workspace wr, wx;
    net.forward(bg.features.data(), K, wr);
    std::vector<double> xs(K * F);
    for (std::size_t b = 0; b < K; ++b) std::copy_n(x.data(), F, xs.data() + b * F);
    net.forward(xs.data(), K, wx);

    std::vector<std::vector<double>> mult(ops.size());
    std::vector<const double*> mult_ptr(ops.size(), nullptr);
    for (std::size_t k = 0; k < ops.size(); ++k) {
        if (ops[k].type != nn::OpType::relu) continue;
        const auto& zr = wr.act[k];
        const auto& zx = wx.act[k];
        auto& mk = mult[k];
        mk.resize(zr.size());
        for (std::size_t i = 0; i < zr.size(); ++i) {
            const double dz = zx[i] - zr[i];
            if (std::abs(dz) < 1e-9) {
                mk[i] = zr[i] > 0.0 ? 1.0 : 0.0;
            } else {
                const double ax = zx[i] > 0.0 ? zx[i] : 0.0, ar = zr[i] > 0.0 ? zr[i] : 0.0;
                mk[i] = (ax - ar) / dz;
            }
        }
        mult_ptr[k] = mk.data();
    }

    Attribution a(F, C);
    std::vector<double> dlog(K * C), dinput(K * F);
    for (std::size_t c = 0; c < C; ++c) {
        std::fill(dlog.begin(), dlog.end(), 0.0);
        for (std::size_t b = 0; b < K; ++b) dlog[b * C + c] = 1.0;
        net.backward(wr, dlog.data(), nullptr, dinput.data(), &mult_ptr);
        for (std::size_t j = 0; j < F; ++j) {
            double s = 0.0;
            for (std::size_t b = 0; b < K; ++b) s += (x[j] - bg.row(b)[j]) * dinput[b * F + j];
            a(j, c) = s / static_cast<double>(K);
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Backend { exact, permutation, rescale };

inline std::string to_string(Backend b) {
    switch (b) {
    case Backend::exact: return "exact";
    case Backend::permutation: return "permutation";
    case Backend::rescale: return "rescale";
    }
    return "?";
}

inline Backend parse_backend(const std::string& s) {
    if (s == "exact") return Backend::exact;
    if (s == "permutation") return Backend::permutation;
    if (s == "rescale") return Backend::rescale;
    throw UsageError("unknown attribution backend '" + s + "' (expected exact, permutation or rescale)");
}

struct ShapParams {
    std::size_t models = 1;     // M
    std::size_t trials = 1;     // L
    std::size_t background = 1; // K_b
    std::size_t samples = 1;    // K_s
};

// Reference parameter sets (M, L, K_b, K_s) per scenario.
inline ShapParams reference_shap_params(const std::string& scenario) {
    if (scenario == "2q-pure") return {10, 10, 10000, 1000};
    if (scenario == "2q-mixed") return {10, 75, 3600, 400};
    if (scenario == "3q-pure") return {20, 60, 1800, 180};
    if (scenario == "3q-mixed") return {20, 25, 5000, 1000};
    throw UsageError("unknown scenario '" + scenario + "'");
}

// Background and sample sizes shrunk tenfold, other counts kept.
inline ShapParams desk_shap_params(const std::string& scenario) {
    auto p = reference_shap_params(scenario);
    p.background /= 10;
    p.samples /= 10;
    return p;
}

struct ShapConfig {
    Backend backend = Backend::rescale;
    std::size_t num_perms = 200;
    std::size_t background = 100; // K_b
    std::size_t samples = 10;     // K_s
    std::size_t trials = 1;       // L
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool keep_tensor = false;
};

struct ImportanceRanking {
    std::vector<double> scores;     // per feature, >= 0
    std::vector<std::size_t> order; // increasing importance
    std::vector<std::size_t> rank;  // rank[j] = position of j in order
};

// Ascending by score; equal scores are ordered by feature index.
inline ImportanceRanking ranking_from_scores(std::vector<double> scores) {
    ImportanceRanking r;
    r.order.resize(scores.size());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    r.rank.resize(scores.size());
    for (std::size_t p = 0; p < r.order.size(); ++p) r.rank[r.order[p]] = p;
    r.scores = std::move(scores);
    return r;
}

struct TrialResult {
    ImportanceRanking ranking;
    // chi[((l * K_s + k) * F + j) * C + c] when keep_tensor is set.
    std::vector<double> tensor;
    std::size_t trials = 0, samples = 0, features = 0, classes = 0;
};

inline Attribution attribute(const nn::Network& net, std::span<const double> x, const Dataset& bg,
                             const ShapConfig& cfg, Rng& rng) {
    switch (cfg.backend) {
    case Backend::exact: return exact_shapley(logit_model(net), x, bg);
    case Backend::permutation: return permutation_shapley(logit_model(net), x, bg, cfg.num_perms, rng);
    case Backend::rescale: return rescale_attribution(net, x, bg);
    }
    throw ValidationError("attribute: unknown backend");
}

// L independent draws of disjoint background (K_b) and sample (K_s) rows
// from `data` without replacement; scores are mean |chi| over trials,
// samples and classes with equal class weight.
inline TrialResult aggregate_trials(const ShapConfig& cfg, const nn::Network& net, const Dataset& data) {
    require(data.dim == net.input_dim(), "aggregate_trials: dataset dimension mismatch");
    require(cfg.background >= 1 && cfg.samples >= 1 && cfg.trials >= 1, "aggregate_trials: sizes must be >= 1");
    if (data.rows() < cfg.background + cfg.samples)
        throw ValidationError("aggregate_trials: dataset has fewer rows than K_b + K_s");
    if (cfg.backend == Backend::exact && net.input_dim() > kExactFeatureCap)
        throw ValidationError("aggregate_trials: exact backend needs <= 20 features; use permutation or rescale");
    const std::size_t F = net.input_dim(), C = net.num_classes(), L = cfg.trials, S = cfg.samples;
    std::vector<Attribution> results(L * S);
    std::vector<Dataset> backgrounds(L);
    std::vector<std::vector<std::size_t>> sample_rows(L);
    for (std::size_t l = 0; l < L; ++l) {
        Rng rng(derive_seed(cfg.seed, "shap-trial", l));
        const auto idx = sample_without_replacement(rng, data.rows(), cfg.background + cfg.samples);
        backgrounds[l] = take_rows(data, std::vector<std::size_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.background)));
        sample_rows[l].assign(idx.begin() + static_cast<std::ptrdiff_t>(cfg.background), idx.end());
    }
    parallel_for(L * S, cfg.threads, [&](std::size_t job) {
        const std::size_t l = job / S, k = job % S;
        Rng rng(derive_seed(cfg.seed, "shap-sample", job));
        const double* x = data.row(sample_rows[l][k]);
        results[job] = attribute(net, std::span<const double>(x, F), backgrounds[l], cfg, rng);
    });
    TrialResult out;
    out.trials = L;
    out.samples = S;
    out.features = F;
    out.classes = C;
    std::vector<double> scores(F, 0.0);
    for (const auto& a : results)
        for (std::size_t j = 0; j < F; ++j)
            for (std::size_t c = 0; c < C; ++c) scores[j] += std::abs(a(j, c));
    for (auto& s : scores) s /= static_cast<double>(L * S * C);
    if (cfg.keep_tensor) {
        out.tensor.reserve(L * S * F * C);
        for (const auto& a : results) out.tensor.insert(out.tensor.end(), a.values.begin(), a.values.end());
    }
    out.ranking = ranking_from_scores(std::move(scores));
    return out;
}

// Rank points per model (best F-1, worst 0), averaged across models; the
// final order sorts by mean points with ties broken by feature index.
inline ImportanceRanking rank_aggregate(const std::vector<std::vector<double>>& per_model_scores) {
    require(!per_model_scores.empty(), "rank_aggregate: need at least one model");
    const std::size_t F = per_model_scores[0].size();
    std::vector<double> points(F, 0.0);
    for (const auto& s : per_model_scores) {
        require(s.size() == F, "rank_aggregate: models disagree on the feature count");
        const auto r = ranking_from_scores(s);
        for (std::size_t j = 0; j < F; ++j) points[j] += static_cast<double>(r.rank[j]);
    }
    for (auto& p : points) p /= static_cast<double>(per_model_scores.size());
    return ranking_from_scores(std::move(points));
}

// g(chi) = sqrt(1 - (chi - 1)^2) on [0, 1].
inline double rescale_for_plot(double chi) {
    if (chi < 0.0 || chi > 1.0) {
        std::cerr << "rescale_for_plot: value " << chi << " outside [0, 1], clamped\n";
        chi = std::clamp(chi, 0.0, 1.0);
    }
    return std::sqrt(1.0 - (chi - 1.0) * (chi - 1.0));
}

// Spearman correlation with average ranks for ties.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length samples");
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j);
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Export

struct RankingRow {
    std::size_t feature_index;
    std::string pauli_string;
    double mean_abs_shap;
    std::size_t rank;
    double score;
};

// mean_abs_shap: mean |chi| (averaged over models); score: rank points
// (mean over models); rank: final position, 0 = least important.
inline std::vector<RankingRow> ranking_rows(const ImportanceRanking& final_ranking, std::span<const double> mean_abs,
                                            std::size_t num_qubits) {
    std::vector<RankingRow> rows;
    for (std::size_t j = 0; j < final_ranking.scores.size(); ++j)
        rows.push_back({j, pauli_label(j, num_qubits), mean_abs[j], final_ranking.rank[j], final_ranking.scores[j]});
    return rows;
}

inline std::string ranking_csv(const std::vector<RankingRow>& rows) {
    std::string out = "feature_index,pauli_string,mean_abs_shap,rank,score\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%s,%.12g,%zu,%.12g\n", r.feature_index, r.pauli_string.c_str(), r.mean_abs_shap,
                      r.rank, r.score);
        out += buf;
    }
    return out;
}

inline nlohmann::json ranking_json(const std::vector<RankingRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
        j.push_back({{"feature_index", r.feature_index},
                     {"pauli_string", r.pauli_string},
                     {"mean_abs_shap", r.mean_abs_shap},
                     {"rank", r.rank},
                     {"score", r.score}});
    return j;
}

} // namespace entml
