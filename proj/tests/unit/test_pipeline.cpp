#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "entml/pipeline.hpp"

using namespace entml;

namespace {

json small_config() {
    return json::parse(R"({
        "schema_version": 1,
        "scenario": "2q-pure",
        "seed": 11,
        "gen": {"per_class": 40},
        "train": {"phases": [{"learning_rate": 0.003, "epochs": 4}], "batch_size": 16, "models": 2},
        "explain": {"background": 20, "samples": 5, "trials": 2},
        "reduce": {"steps": [8, 3], "subset_size": 2, "subset_models": 2}
    })");
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("entml_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig resolved(json j) {
    auto c = parse_run_config(j);
    apply_global_seed(c);
    return c;
}

} // namespace

TEST(Config, Defaults) {
    const auto c = parse_run_config(json::object());
    EXPECT_EQ(c.scenario, "2q-pure");
    EXPECT_EQ(c.architecture, nn::default_architecture("2q-pure"));
    EXPECT_EQ(c.shap.backend, Backend::rescale);
    EXPECT_EQ(c.models, desk_shap_params("2q-pure").models);
    EXPECT_EQ(c.reduce.phase_points, 0u);
    EXPECT_EQ(parse_run_config(json{{"scenario", "3q-mixed"}}).reduce.phase_points, 64u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_run_config(json{{"sed", 1}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"gen", {{"per_clas", 10}}}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"train", {{"adam", {{"beta3", 1}}}}}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"schema_version", 2}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"scenario", "4q-pure"}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"explain", {{"backend", "kernel"}}}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"explain", {{"preset", "huge"}}}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"reduce", {{"orders", {"sideways"}}}}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"seed", "eleven"}}), UsageError);
    EXPECT_THROW(parse_run_config(json{{"train", {{"architecture", "no-such-net"}}}}), UsageError);
}

TEST(Config, StageSeedsDeriveFromGlobalSeed) {
    auto j = small_config();
    const auto a = resolved(j);
    j["seed"] = 12;
    const auto b = resolved(j);
    EXPECT_EQ(a.gen.seed, derive_seed(11, "gen"));
    EXPECT_EQ(a.train.seed, derive_seed(11, "train"));
    EXPECT_EQ(a.shap.seed, derive_seed(11, "explain"));
    EXPECT_NE(a.gen.seed, b.gen.seed);
    EXPECT_NE(a.gen.seed, a.train.seed);
    const auto r = resolved_config(a);
    EXPECT_EQ(r["schema_version"], kConfigSchemaVersion);
    EXPECT_EQ(r["explain"]["seed"], a.shap.seed);
}

TEST(Pipeline, StagesRunInOrderAndRepeatIdentically) {
    TempDir a("pipe_a"), b("pipe_b");
    const auto c = resolved(small_config());
    EXPECT_THROW(cmd_train(c, a.path), UsageError);
    EXPECT_THROW(cmd_report(a.path / "nothing"), UsageError);
    for (const auto* d : {&a, &b}) {
        cmd_gen(c, d->path);
        cmd_train(c, d->path);
        cmd_explain(c, d->path);
        cmd_reduce(c, d->path);
    }
    for (const char* f : {"dataset/train.bin", "models/model_1.bin", "explain/ranking.csv", "reduce/curves.csv",
                          "reduce/masking.json", "reduce/random_subsets.csv", "reduce/summary.json"}) {
        ASSERT_TRUE(fs::exists(a.path / f)) << f;
        EXPECT_EQ(read_file(a.path / f), read_file(b.path / f)) << f;
    }
    const auto rep = cmd_report(a.path);
    EXPECT_TRUE(rep["warnings"].empty());
    EXPECT_EQ(rep["explain"]["models"], 2);
    // Aggregated increasing, decreasing, one random and two Schmidt-protected orders.
    EXPECT_EQ(rep["reduce"]["curves"], 5);
    const auto r = load_ranking(a.path);
    EXPECT_EQ(r.order.size(), 16u);
    EXPECT_EQ(r.rank[0], 0u);
}

TEST(Pipeline, ExactBackendRefusedForThreeQubits) {
    TempDir d("pipe_exact");
    auto j = small_config();
    j["scenario"] = "3q-pure";
    j["explain"]["backend"] = "exact";
    const auto c = resolved(j);
    cmd_gen(c, d.path);
    cmd_train(c, d.path);
    EXPECT_THROW(cmd_explain(c, d.path), ValidationError);
}

TEST(Pipeline, ReportWarnsAboutMissingStages) {
    TempDir d("pipe_report");
    const auto c = resolved(small_config());
    cmd_gen(c, d.path);
    const auto rep = cmd_report(d.path);
    EXPECT_EQ(rep["warnings"].size(), 3u);
    EXPECT_TRUE(fs::exists(d.path / "report" / "summary.json"));
}
