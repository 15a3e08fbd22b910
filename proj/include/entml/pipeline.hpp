#pragma once

// Run configuration and the gen -> train -> explain -> reduce -> report
// stages. Each stage reads the previous stage's files from the run directory
// and writes its own outputs there atomically.
//
// Run directory layout:
//   run_config.json              resolved configuration (every stage)
//   dataset/{train,test}.bin     + manifest.json
//   models/model_<m>.bin         + history_<m>.csv
//   explain/ranking.{csv,json}   + scores_<m>.csv
//   reduce/curves.csv, masking.json, random_subsets.csv, phase_*.csv
//   report/summary.json

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "entml/attribution.hpp"
#include "entml/datagen.hpp"
#include "entml/dataset.hpp"
#include "entml/error.hpp"
#include "entml/io.hpp"
#include "entml/nn/spec.hpp"
#include "entml/nn/train.hpp"
#include "entml/random.hpp"
#include "entml/reduction.hpp"

namespace entml {

using nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw UsageError(where + ": unknown key '" + k + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config key '") + key + "': " + e.what());
    }
}

inline std::optional<ShotConfig> parse_shots(const json& j, const std::string& where) {
    if (j.is_null()) return std::nullopt;
    check_keys(j, {"shots_per_setting", "seed"}, where);
    ShotConfig s;
    s.shots_per_setting = get_or<std::uint64_t>(j, "shots_per_setting", 1000);
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    return s;
}

} // namespace detail

struct ReducePlan {
    std::vector<std::string> orders{"aggregated_increasing", "aggregated_decreasing", "random", "theory_informed"};
    std::vector<std::size_t> steps; // empty = default_steps
    std::size_t random_orders = 1;
    std::size_t subset_size = 0; // random-subset study, 0 = skip
    std::size_t subset_models = 10;
    std::size_t mask_count = 3;
    double mask_value = 0.0;
    std::size_t phase_points = 0; // 3q-mixed phase scans, 0 = skip
};

struct RunConfig {
    std::string scenario = "2q-pure";
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    GenConfig gen;
    bool gen_csv = false;
    std::string architecture;
    nn::TrainConfig train;
    std::size_t models = 1;
    bool augment = false;
    ShapConfig shap;
    ReducePlan reduce;
    json source = json::object();

    std::size_t num_qubits() const { return scenario_qubits(gen.scenario); }
};

// Parses and validates a versioned config; unknown keys are rejected.
inline RunConfig parse_run_config(const json& j) {
    using detail::check_keys;
    using detail::get_or;
    check_keys(j, {"schema_version", "scenario", "seed", "threads", "gen", "train", "explain", "reduce"}, "config");
    if (get_or<int>(j, "schema_version", kConfigSchemaVersion) != kConfigSchemaVersion)
        throw UsageError("config: unsupported schema_version");
    RunConfig c;
    c.source = j;
    c.scenario = get_or<std::string>(j, "scenario", "2q-pure");
    c.gen.scenario = parse_scenario(c.scenario);
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
    c.threads = get_or<std::size_t>(j, "threads", 1);

    const json g = j.value("gen", json::object());
    check_keys(g, {"per_class", "dev_per_class", "element_dist", "shots", "test_shots", "mixing", "csv"}, "config.gen");
    c.gen.per_class = get_or<std::size_t>(g, "per_class", 1000);
    c.gen.dev_per_class = get_or<std::size_t>(g, "dev_per_class", 0);
    c.gen.dist = g.contains("element_dist") ? parse_element_dist(g.at("element_dist").get<std::string>())
                                            : default_element_dist(c.gen.scenario);
    c.gen.shots = detail::parse_shots(g.value("shots", json()), "config.gen.shots");
    c.gen.test_shots = detail::parse_shots(g.value("test_shots", json()), "config.gen.test_shots");
    if (g.contains("mixing")) {
        check_keys(g.at("mixing"), {"min_terms", "max_terms"}, "config.gen.mixing");
        c.gen.mixing.min_terms = get_or<int>(g.at("mixing"), "min_terms", 2);
        c.gen.mixing.max_terms = get_or<int>(g.at("mixing"), "max_terms", 20);
    }
    c.gen_csv = get_or<bool>(g, "csv", false);

    const json t = j.value("train", json::object());
    check_keys(t, {"architecture", "phases", "batch_size", "adam", "models", "augment", "canonical_accumulation"},
               "config.train");
    c.architecture = get_or<std::string>(t, "architecture", nn::default_architecture(c.scenario));
    c.train = nn::default_train_config(c.scenario);
    if (t.contains("phases")) {
        c.train.phases.clear();
        for (const auto& p : t.at("phases")) {
            check_keys(p, {"learning_rate", "epochs"}, "config.train.phases[]");
            c.train.phases.push_back({get_or<double>(p, "learning_rate", 1e-3), get_or<std::size_t>(p, "epochs", 1)});
        }
    }
    c.train.batch_size = get_or<std::size_t>(t, "batch_size", 64);
    if (t.contains("adam")) {
        check_keys(t.at("adam"), {"beta1", "beta2", "epsilon"}, "config.train.adam");
        c.train.beta1 = get_or<double>(t.at("adam"), "beta1", 0.9);
        c.train.beta2 = get_or<double>(t.at("adam"), "beta2", 0.999);
        c.train.epsilon = get_or<double>(t.at("adam"), "epsilon", 1e-8);
    }
    c.models = get_or<std::size_t>(t, "models", 1);
    c.augment = get_or<bool>(t, "augment", false);

    const json e = j.value("explain", json::object());
    check_keys(e, {"backend", "num_perms", "background", "samples", "trials", "preset"}, "config.explain");
    const std::string preset = get_or<std::string>(e, "preset", "desk");
    ShapParams sp;
    if (preset == "desk") sp = desk_shap_params(c.scenario);
    else if (preset == "reference") sp = reference_shap_params(c.scenario);
    else throw UsageError("config.explain.preset: expected desk or reference");
    c.shap.backend = parse_backend(get_or<std::string>(e, "backend", "rescale"));
    c.shap.num_perms = get_or<std::size_t>(e, "num_perms", 200);
    c.shap.background = get_or<std::size_t>(e, "background", sp.background);
    c.shap.samples = get_or<std::size_t>(e, "samples", sp.samples);
    c.shap.trials = get_or<std::size_t>(e, "trials", sp.trials);
    if (!t.contains("models")) c.models = sp.models;

    const json r = j.value("reduce", json::object());
    check_keys(r, {"orders", "steps", "random_orders", "subset_size", "subset_models", "mask_count", "mask_value", "phase_points"},
               "config.reduce");
    if (r.contains("orders")) c.reduce.orders = r.at("orders").get<std::vector<std::string>>();
    for (const auto& o : c.reduce.orders)
        if (o != "aggregated_increasing" && o != "aggregated_decreasing" && o != "model_increasing" &&
            o != "model_decreasing" && o != "random" && o != "theory_informed")
            throw UsageError("config.reduce.orders: unknown order '" + o + "'");
    c.reduce.steps = get_or<std::vector<std::size_t>>(r, "steps", {});
    c.reduce.random_orders = get_or<std::size_t>(r, "random_orders", 1);
    c.reduce.subset_size = get_or<std::size_t>(r, "subset_size", 0);
    c.reduce.subset_models = get_or<std::size_t>(r, "subset_models", 10);
    c.reduce.mask_count = get_or<std::size_t>(r, "mask_count", 3);
    c.reduce.mask_value = get_or<double>(r, "mask_value", 0.0);
    c.reduce.phase_points = get_or<std::size_t>(r, "phase_points", c.scenario == "3q-mixed" ? 64 : 0);

    require(c.models >= 1, "config.train.models must be >= 1");
    c.gen.check();
    c.train.check();
    get_or<bool>(t, "canonical_accumulation", false);
    nn::registry_spec(c.architecture, feature_count(c.num_qubits()), scenario_classes(c.gen.scenario));
    return c;
}

// Every sub-seed is derived from the global seed and the stage name.
inline void apply_global_seed(RunConfig& c) {
    c.gen.seed = derive_seed(c.seed, "gen");
    c.gen.threads = c.threads;
    c.train.seed = derive_seed(c.seed, "train");
    c.shap.seed = derive_seed(c.seed, "explain");
    c.shap.threads = c.threads;
}

inline json resolved_config(const RunConfig& c) {
    return {{"schema_version", kConfigSchemaVersion},
            {"scenario", c.scenario},
            {"seed", c.seed},
            {"threads", c.threads},
            {"gen", gen_config_json(c.gen)},
            {"architecture", c.architecture},
            {"train", nn::to_json(c.train)},
            {"models", c.models},
            {"augment", c.augment},
            {"explain",
             {{"backend", to_string(c.shap.backend)},
              {"num_perms", c.shap.num_perms},
              {"background", c.shap.background},
              {"samples", c.shap.samples},
              {"trials", c.shap.trials},
              {"seed", c.shap.seed}}},
            {"reduce",
             {{"orders", c.reduce.orders},
              {"steps", c.reduce.steps},
              {"random_orders", c.reduce.random_orders},
              {"subset_size", c.reduce.subset_size},
              {"subset_models", c.reduce.subset_models},
              {"mask_count", c.reduce.mask_count},
              {"mask_value", c.reduce.mask_value},
              {"phase_points", c.reduce.phase_points}}},
            {"source", c.source}};
}

inline RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed, std::optional<std::size_t> threads) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    RunConfig c = parse_run_config(j);
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    apply_global_seed(c);
    return c;
}

inline nn::NetworkSpec architecture_spec(const RunConfig& c) {
    auto s = nn::registry_spec(c.architecture, feature_count(c.num_qubits()), scenario_classes(c.gen.scenario));
    s.canonical_accumulation = c.source.value("train", json::object()).value("canonical_accumulation", false);
    return s;
}

inline void write_run_config(const fs::path& out, const RunConfig& c) {
    atomic_write(out / "run_config.json", resolved_config(c).dump(2) + "\n");
}

inline Dataset load_split(const fs::path& out, const std::string& split) {
    const fs::path p = out / "dataset" / (split + ".bin");
    if (!fs::exists(p)) throw UsageError("missing dataset file " + p.string() + " (run `gen` first)");
    return read_dataset(p);
}

inline std::string model_path_name(std::size_t m) { return "model_" + std::to_string(m) + ".bin"; }

// ---------------------------------------------------------------------------
// Stages

inline json cmd_gen(const RunConfig& c, const fs::path& out) {
    write_run_config(out, c);
    const auto splits = build_dataset(c.gen);
    auto manifest = write_splits(out / "dataset", splits, c.gen, c.gen_csv);
    std::cout << "gen: " << c.scenario << " train " << splits.train.rows() << " rows, test " << splits.test.rows()
              << " rows -> " << (out / "dataset").string() << "\n";
    return manifest;
}

inline json cmd_train(const RunConfig& c, const fs::path& out) {
    write_run_config(out, c);
    const Dataset train = load_split(out, "train");
    const Dataset test = load_split(out, "test");
    const auto arch = architecture_spec(c);
    json summary = json::array();
    for (std::size_t m = 0; m < c.models; ++m) {
        nn::TrainConfig tc = c.train;
        tc.seed = derive_seed(c.train.seed, "model", m);
        nn::EpochHook hook;
        if (c.augment) {
            hook = [&c, m](std::size_t epoch, Dataset& rows) {
                GenConfig g = c.gen;
                g.seed = derive_seed(c.gen.seed, "augment", m * 100003 + epoch);
                g.dev_per_class = 0;
                rows = build_dataset(g).train;
            };
        }
        auto model = nn::train(arch, train, &test, tc, hook, c.threads);
        model.metadata = {{"scenario", c.scenario}, {"architecture", c.architecture}, {"model_index", m},
                          {"augment", c.augment}};
        const auto ev = nn::evaluate(model.net, test, c.threads);
        nn::write_model(out / "models" / model_path_name(m), model);
        atomic_write(out / "models" / ("history_" + std::to_string(m) + ".csv"), nn::history_csv(model.history));
        std::cout << "train: model " << m << " (" << c.architecture << ") test accuracy " << ev.accuracy << "\n";
        summary.push_back({{"model", m}, {"test_accuracy", ev.accuracy}, {"test_loss", ev.loss},
                           {"train_accuracy", model.history.back().train_acc}});
    }
    atomic_write(out / "models" / "summary.json", summary.dump(2) + "\n");
    return summary;
}

inline std::vector<nn::TrainedModel> load_models(const fs::path& out, std::size_t count) {
    std::vector<nn::TrainedModel> models;
    for (std::size_t m = 0; m < count; ++m) {
        const fs::path p = out / "models" / model_path_name(m);
        if (!fs::exists(p)) throw UsageError("missing model file " + p.string() + " (run `train` first)");
        models.push_back(nn::read_model(p));
    }
    return models;
}

inline json cmd_explain(const RunConfig& c, const fs::path& out) {
    write_run_config(out, c);
    const Dataset train = load_split(out, "train");
    const auto models = load_models(out, c.models);
    if (c.shap.backend == Backend::exact && train.dim > kExactFeatureCap)
        throw ValidationError("explain: exact backend supports at most 20 features; this scenario has " +
                              std::to_string(train.dim));
    std::vector<std::vector<double>> per_model;
    std::vector<double> mean_abs(train.dim, 0.0);
    for (std::size_t m = 0; m < models.size(); ++m) {
        ShapConfig sc = c.shap;
        sc.seed = derive_seed(c.shap.seed, "model", m);
        const auto res = aggregate_trials(sc, models[m].net, train);
        per_model.push_back(res.ranking.scores);
        for (std::size_t j = 0; j < train.dim; ++j) mean_abs[j] += res.ranking.scores[j] / static_cast<double>(models.size());
        const auto single = ranking_rows(res.ranking, res.ranking.scores, c.num_qubits());
        atomic_write(out / "explain" / ("scores_" + std::to_string(m) + ".csv"), ranking_csv(single));
    }
    const auto agg = rank_aggregate(per_model);
    const auto rows = ranking_rows(agg, mean_abs, c.num_qubits());
    atomic_write(out / "explain" / "ranking.csv", ranking_csv(rows));
    json j = {{"models", models.size()}, {"backend", to_string(c.shap.backend)}, {"ranking", ranking_json(rows)},
              {"order_increasing", agg.order}};
    atomic_write(out / "explain" / "ranking.json", j.dump(2) + "\n");
    std::cout << "explain: most important settings:";
    for (std::size_t k = 0; k < std::min<std::size_t>(5, agg.order.size()); ++k)
        std::cout << " " << pauli_label(agg.order[agg.order.size() - 1 - k], c.num_qubits());
    std::cout << "\n";
    return j;
}

inline ImportanceRanking load_ranking(const fs::path& out, const std::string& file = "ranking.json") {
    const fs::path p = out / "explain" / file;
    if (!fs::exists(p)) throw UsageError("missing " + p.string() + " (run `explain` first)");
    const json j = json::parse(read_file(p));
    std::vector<double> scores;
    for (const auto& r : j.at("ranking")) scores.push_back(r.at("score").get<double>());
    return ranking_from_scores(scores);
}

inline json cmd_reduce(const RunConfig& c, const fs::path& out) {
    write_run_config(out, c);
    const Dataset train = load_split(out, "train");
    const Dataset test = load_split(out, "test");
    const auto arch = architecture_spec(c);
    const auto agg = load_ranking(out);
    const std::size_t F = train.dim;
    nn::TrainConfig tc = c.train;
    tc.seed = derive_seed(c.seed, "reduce");

    std::vector<RemovalOrder> orders;
    for (const auto& name : c.reduce.orders) {
        if (name == "aggregated_increasing") orders.push_back(order_from_ranking(agg, true, name));
        if (name == "aggregated_decreasing") orders.push_back(order_from_ranking(agg, false, name));
        if (name == "model_increasing" || name == "model_decreasing") {
            const fs::path p = out / "explain" / "scores_0.csv";
            if (!fs::exists(p)) throw UsageError("missing " + p.string() + " (run `explain` first)");
            std::vector<double> scores;
            std::istringstream in(read_file(p));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                std::vector<std::string> cols;
                std::stringstream ls(line);
                for (std::string cell; std::getline(ls, cell, ',');) cols.push_back(cell);
                scores.push_back(std::stod(cols.at(2)));
            }
            orders.push_back(order_from_ranking(ranking_from_scores(scores), name == "model_increasing", name));
        }
        if (name == "random")
            for (std::size_t r = 0; r < c.reduce.random_orders; ++r) orders.push_back(random_order(F, derive_seed(c.seed, "reduce-random", r)));
        if (name == "theory_informed") {
            const auto base = order_from_ranking(agg, true, "aggregated_increasing");
            if (c.scenario == "2q-pure") {
                orders.push_back(theory_informed_order("theory_schmidt", base, schmidt_set()));
                orders.push_back(theory_informed_order("theory_schmidt_mirrored", base, mirrored_schmidt_set()));
            } else if (c.scenario == "3q-mixed") {
                orders.push_back(theory_informed_order("theory_witness_support", base, witness_support_union()));
            } else {
                std::cerr << "reduce: no theory-informed order for " << c.scenario << ", skipped\n";
            }
        }
    }
    std::vector<ReductionCurve> curves;
    for (const auto& o : orders) {
        curves.push_back(reduction_curve(train, test, o, arch, tc, c.reduce.steps, c.threads));
        std::cout << "reduce: " << o.name << " done (" << curves.back().points.size() << " points)\n";
    }
    atomic_write(out / "reduce" / "curves.csv", curves_csv(curves));
    json summary = {{"curves", orders.size()}};

    const auto models = load_models(out, 1);
    if (c.reduce.mask_count > 0) {
        std::vector<std::size_t> top(agg.order.end() - static_cast<std::ptrdiff_t>(std::min(c.reduce.mask_count, F)), agg.order.end());
        const double masked = mask_eval(models[0].net, test, top, c.reduce.mask_value);
        const double full = nn::evaluate(models[0].net, test).accuracy;
        summary["masking"] = {{"masked", top}, {"mask_value", c.reduce.mask_value}, {"accuracy", masked}, {"unmasked_accuracy", full}};
        atomic_write(out / "reduce" / "masking.json", summary["masking"].dump(2) + "\n");
    }
    if (c.reduce.subset_size > 0) {
        const auto st = random_subset_study(train, test, c.reduce.subset_size, c.reduce.subset_models, arch, tc,
                                            derive_seed(c.seed, "reduce-subsets"), c.threads);
        std::string csv = "model,subset,train_acc,test_acc,seed\n";
        for (std::size_t m = 0; m < st.runs.size(); ++m) {
            std::string keep;
            for (std::size_t i = 0; i < st.runs[m].keep.size(); ++i) keep += (i ? ";" : "") + std::to_string(st.runs[m].keep[i]);
            csv += std::to_string(m) + "," + keep + "," + std::to_string(st.runs[m].train_acc) + "," +
                   std::to_string(st.runs[m].test_acc) + "," + std::to_string(st.runs[m].seed) + "\n";
        }
        atomic_write(out / "reduce" / "random_subsets.csv", csv);
        summary["random_subsets"] = {{"min", st.min_test}, {"max", st.max_test}, {"mean", st.mean_test}};
    }
    if (c.scenario == "3q-mixed" && c.reduce.phase_points > 0) {
        const auto ghz = ghz_phase_scan(models[0].net, c.reduce.phase_points);
        const auto w = w_phase_scan(models[0].net, c.reduce.phase_points);
        atomic_write(out / "reduce" / "phase_ghz.csv", phase_scan_csv(ghz));
        atomic_write(out / "reduce" / "phase_w.csv", phase_scan_csv(w));
        const auto cr = ghz_crossings(ghz);
        summary["phase"] = {{"ghz_crossing_negative", cr.negative ? json(*cr.negative) : json()},
                            {"ghz_crossing_positive", cr.positive ? json(*cr.positive) : json()},
                            {"w_region_agreement", region_agreement(w)}};
    }
    atomic_write(out / "reduce" / "summary.json", summary.dump(2) + "\n");
    return summary;
}

// Collates whatever stages have run; missing pieces become warnings.
inline json cmd_report(const fs::path& out) {
    if (!fs::exists(out) || fs::is_empty(out)) throw UsageError("report: run directory " + out.string() + " is empty or missing");
    json report = {{"run_dir", out.string()}, {"warnings", json::array()}, {"artifacts", json::array()}};
    auto load = [&](const fs::path& rel, const char* key) {
        const fs::path p = out / rel;
        if (fs::exists(p)) {
            report[key] = json::parse(read_file(p));
        } else {
            report["warnings"].push_back("missing " + rel.string());
        }
    };
    load("run_config.json", "config");
    load("dataset/manifest.json", "dataset");
    load("models/summary.json", "models");
    load("explain/ranking.json", "explain");
    load("reduce/summary.json", "reduce");
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out))
        if (e.is_regular_file()) {
            const auto rel = fs::relative(e.path(), out).generic_string();
            if (rel.rfind("report/", 0) != 0) files.push_back(rel);
        }
    std::sort(files.begin(), files.end());
    report["artifacts"] = files;
    atomic_write(out / "report" / "summary.json", report.dump(2) + "\n");
    return report;
}

} // namespace entml
