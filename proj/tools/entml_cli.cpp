// entml: entanglement-classification pipeline driver.
//
//   entml gen     --config run.json --out runs/a
//   entml train   --config run.json --out runs/a
//   entml explain --config run.json --out runs/a
//   entml reduce  --config run.json --out runs/a
//   entml report  --out runs/a
//   entml witness --state ghz --alpha 0.5 --gamma 0.9 --beta 0.2
//
// Exit codes: 0 ok, 1 usage or config error, 2 validation, 3 numerical.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "entml/pipeline.hpp"
#include "entml/witness.hpp"

namespace {

int run_witness(const std::string& state, double alpha, std::optional<double> gamma, std::optional<double> beta) {
    using namespace entml;
    const auto ref = state == "ghz" ? ReferenceState::ghz : state == "w" ? ReferenceState::w
                                                                         : throw UsageError("--state must be ghz or w");
    const WitnessSpec w(alpha, reference_state(ref), state);
    const auto coeffs = projector_pauli_coefficients(ref);
    json out = {{"state", state}, {"alpha", alpha}, {"support_size", witness_support(ref).size()}};
    json support = json::array();
    for (auto j : witness_support(ref)) support.push_back({{"index", j}, {"pauli", pauli_label(j, 3)}, {"coefficient", coeffs[j]}});
    out["support"] = support;
    if (gamma) {
        const auto reg = detection_regime(w.alpha, *gamma);
        out["gamma"] = *gamma;
        out["beta_max"] = reg.beta_max;
        if (beta) {
            out["beta"] = *beta;
            out["detected"] = reg.detects(*beta);
        }
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entanglement classification, attribution and feature-reduction pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "run";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "run configuration (JSON)");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "run directory")->capture_default_str();
        sub->add_option("--seed", seed, "override the configured global seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* gen = app.add_subcommand("gen", "generate train/test datasets");
    auto* train = app.add_subcommand("train", "train models on the generated data");
    auto* explain = app.add_subcommand("explain", "attribute and rank the input features");
    auto* reduce = app.add_subcommand("reduce", "retrain on reduced feature sets");
    auto* report = app.add_subcommand("report", "collate a run directory into report/summary.json");
    for (auto* s : {gen, train, explain, reduce}) add_common(s, true);
    report->add_option("--out", out_dir, "run directory")->capture_default_str();

    auto* witness = app.add_subcommand("witness", "inspect a fidelity witness and its detection regime");
    std::string state = "ghz";
    double alpha = 0.5;
    std::optional<double> gamma, beta;
    witness->add_option("--state", state, "reference state: ghz or w")->capture_default_str();
    witness->add_option("--alpha", alpha, "witness offset")->capture_default_str();
    witness->add_option("--gamma", gamma, "overlap with the reference state");
    witness->add_option("--beta", beta, "depolarizing weight");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*witness) return run_witness(state, alpha, gamma, beta);
        const entml::fs::path out(out_dir);
        if (*report) {
            const auto r = entml::cmd_report(out);
            std::cout << "report: " << r["artifacts"].size() << " artifacts, " << r["warnings"].size() << " warnings -> "
                      << (out / "report" / "summary.json").string() << "\n";
            for (const auto& w : r["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
            return 0;
        }
        const auto cfg = entml::load_run_config(config_path, seed, threads);
        if (*gen) entml::cmd_gen(cfg, out);
        if (*train) entml::cmd_train(cfg, out);
        if (*explain) entml::cmd_explain(cfg, out);
        if (*reduce) entml::cmd_reduce(cfg, out);
        return 0;
    } catch (const entml::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const entml::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const entml::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
