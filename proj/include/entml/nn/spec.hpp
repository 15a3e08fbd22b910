#pragma once

// Network and training descriptions, their JSON form, and the architecture
// registry for the four scenarios.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "entml/error.hpp"

namespace entml::nn {

enum class LayerKind { dense, conv1d, flatten, dropout, maxpool, avgpool };
enum class Activation { none, relu };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t units = 0; // dense outputs or conv filters
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
    Activation activation = Activation::relu;
    double rate = 0.0;    // dropout
    std::size_t pool = 2; // pooling window and stride

    static LayerSpec dense(std::size_t units, Activation act = Activation::relu) {
        LayerSpec l;
        l.kind = LayerKind::dense;
        l.units = units;
        l.activation = act;
        return l;
    }
    static LayerSpec conv1d(std::size_t filters, std::size_t kernel = 3, std::size_t stride = 1, std::size_t padding = 1,
                            Activation act = Activation::relu) {
        LayerSpec l;
        l.kind = LayerKind::conv1d;
        l.units = filters;
        l.kernel = kernel;
        l.stride = stride;
        l.padding = padding;
        l.activation = act;
        return l;
    }
    static LayerSpec flatten() {
        LayerSpec l;
        l.kind = LayerKind::flatten;
        l.activation = Activation::none;
        return l;
    }
    static LayerSpec dropout(double rate) {
        LayerSpec l;
        l.kind = LayerKind::dropout;
        l.rate = rate;
        l.activation = Activation::none;
        return l;
    }
    static LayerSpec pooling(LayerKind kind, std::size_t window = 2) {
        LayerSpec l;
        l.kind = kind;
        l.pool = window;
        l.activation = Activation::none;
        return l;
    }
};

struct NetworkSpec {
    std::string name;
    std::size_t input_dim = 0;
    std::size_t num_classes = 2;
    std::vector<LayerSpec> layers;
    // Sum each first-layer dense output over sorted products, so the result
    // does not depend on the order of input features.
    bool canonical_accumulation = false;

    void check() const {
        require(input_dim > 0, "NetworkSpec: input_dim must be positive");
        require(num_classes >= 2, "NetworkSpec: at least two classes");
        require(!layers.empty(), "NetworkSpec: no layers");
        bool seen_dense = false;
        for (const auto& l : layers) {
            if (l.kind == LayerKind::dense) {
                require(l.units > 0, "NetworkSpec: dense layer needs units");
                seen_dense = true;
            }
            if (l.kind == LayerKind::conv1d) {
                require(!seen_dense, "NetworkSpec: convolutions must precede the dense section");
                require(l.units > 0 && l.kernel > 0 && l.stride > 0, "NetworkSpec: invalid conv1d layer");
            }
            if (l.kind == LayerKind::dropout) require(l.rate >= 0.0 && l.rate < 1.0, "NetworkSpec: dropout rate in [0, 1)");
            if (l.kind == LayerKind::maxpool || l.kind == LayerKind::avgpool)
                require(l.pool >= 1, "NetworkSpec: pooling window must be >= 1");
        }
        const auto& last = layers.back();
        require(last.kind == LayerKind::dense && last.units == num_classes,
                "NetworkSpec: final layer must be dense with width equal to the class count");
        require(last.activation == Activation::none, "NetworkSpec: final layer feeds the softmax and takes no activation");
    }
};

// Dense widths list the final class layer, e.g. {256, 64, 2}.
inline NetworkSpec make_network(std::string name, std::size_t input_dim, const std::vector<std::size_t>& conv_filters,
                                const std::vector<std::size_t>& dense_widths) {
    require(!dense_widths.empty(), "make_network: need at least the output layer");
    NetworkSpec s;
    s.name = std::move(name);
    s.input_dim = input_dim;
    s.num_classes = dense_widths.back();
    for (auto f : conv_filters) s.layers.push_back(LayerSpec::conv1d(f));
    if (!conv_filters.empty()) s.layers.push_back(LayerSpec::flatten());
    for (std::size_t i = 0; i < dense_widths.size(); ++i)
        s.layers.push_back(LayerSpec::dense(dense_widths[i], i + 1 == dense_widths.size() ? Activation::none : Activation::relu));
    s.check();
    return s;
}

// ---------------------------------------------------------------------------
// Registry

struct RegistryEntry {
    std::string key;
    std::vector<std::size_t> conv;
    std::vector<std::size_t> dense_hidden; // the class layer is appended
    std::string note;
};

inline const std::vector<RegistryEntry>& registry() {
    static const std::vector<RegistryEntry> r = {
        {"2q-pure-cnn", {4, 8, 8, 8}, {64}, "default for 2q-pure"},
        {"3q-pure-cnn", {32, 16, 8, 8, 8}, {128, 64}, "default for 3q-pure, five convolutions"},
        {"3q-pure-cnn-table", {4, 8, 8, 8, 8, 8, 8, 8}, {128, 64}, "tabulated 3q-pure variant (4, 8^7)"},
        {"2q-mixed-dnn", {}, {256, 64}, "default for 2q-mixed"},
        {"2q-mixed-cnn", {64}, {256, 64}, "single 64-filter convolution before the dense section"},
        {"3q-mixed-dnn", {}, {8}, "default for 3q-mixed (8, 2)"},
        {"3q-mixed-dnn-82", {}, {82}, "wider hidden layer (82, 2)"},
    };
    return r;
}

inline NetworkSpec registry_spec(const std::string& key, std::size_t input_dim, std::size_t num_classes) {
    for (const auto& e : registry()) {
        if (e.key != key) continue;
        auto widths = e.dense_hidden;
        widths.push_back(num_classes);
        return make_network(e.key, input_dim, e.conv, widths);
    }
    throw UsageError("unknown architecture '" + key + "'");
}

inline std::string default_architecture(const std::string& scenario) {
    if (scenario == "2q-pure") return "2q-pure-cnn";
    if (scenario == "3q-pure") return "3q-pure-cnn";
    if (scenario == "2q-mixed") return "2q-mixed-dnn";
    if (scenario == "3q-mixed") return "3q-mixed-dnn";
    throw UsageError("unknown scenario '" + scenario + "'");
}

// ---------------------------------------------------------------------------
// Training configuration

struct Phase {
    double learning_rate = 1e-3;
    std::size_t epochs = 1;
};

struct TrainConfig {
    std::vector<Phase> phases{{1e-3, 100}, {1e-4, 50}};
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool evaluate_test_each_epoch = true;

    std::size_t total_epochs() const {
        std::size_t n = 0;
        for (const auto& p : phases) n += p.epochs;
        return n;
    }
    void check() const {
        require(!phases.empty(), "TrainConfig: no phases");
        for (const auto& p : phases) require(p.learning_rate > 0.0, "TrainConfig: learning rate must be positive");
        require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
    }
};

inline TrainConfig default_train_config(const std::string& scenario) {
    TrainConfig c;
    if (scenario == "2q-mixed" || scenario == "3q-mixed") c.phases = {{1e-3, 50}, {1e-4, 10}};
    return c;
}

// ---------------------------------------------------------------------------
// JSON

inline std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dropout: return "dropout";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    }
    return "?";
}

inline LayerKind parse_layer_kind(const std::string& s) {
    for (auto k : {LayerKind::dense, LayerKind::conv1d, LayerKind::flatten, LayerKind::dropout, LayerKind::maxpool,
                   LayerKind::avgpool})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown layer kind '" + s + "'");
}

inline nlohmann::json to_json(const NetworkSpec& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.layers) {
        nlohmann::json j = {{"kind", to_string(l.kind)},
                            {"activation", l.activation == Activation::relu ? "relu" : "none"}};
        switch (l.kind) {
        case LayerKind::dense: j["units"] = l.units; break;
        case LayerKind::conv1d:
            j["filters"] = l.units;
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["padding"] = l.padding;
            break;
        case LayerKind::dropout: j["rate"] = l.rate; break;
        case LayerKind::maxpool:
        case LayerKind::avgpool: j["pool"] = l.pool; break;
        case LayerKind::flatten: break;
        }
        layers.push_back(std::move(j));
    }
    return {{"name", s.name},
            {"input_dim", s.input_dim},
            {"num_classes", s.num_classes},
            {"canonical_accumulation", s.canonical_accumulation},
            {"layers", layers}};
}

inline NetworkSpec network_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.name = j.value("name", "");
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.canonical_accumulation = j.value("canonical_accumulation", false);
    for (const auto& lj : j.at("layers")) {
        LayerSpec l;
        l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
        l.activation = lj.value("activation", "none") == "relu" ? Activation::relu : Activation::none;
        if (l.kind == LayerKind::dense) l.units = lj.at("units").get<std::size_t>();
        if (l.kind == LayerKind::conv1d) {
            l.units = lj.at("filters").get<std::size_t>();
            l.kernel = lj.value("kernel", std::size_t{3});
            l.stride = lj.value("stride", std::size_t{1});
            l.padding = lj.value("padding", std::size_t{1});
        }
        if (l.kind == LayerKind::dropout) l.rate = lj.at("rate").get<double>();
        if (l.kind == LayerKind::maxpool || l.kind == LayerKind::avgpool) l.pool = lj.value("pool", std::size_t{2});
        s.layers.push_back(l);
    }
    s.check();
    return s;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : c.phases) phases.push_back({{"learning_rate", p.learning_rate}, {"epochs", p.epochs}});
    return {{"phases", phases}, {"batch_size", c.batch_size}, {"seed", c.seed},
            {"adam", {{"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}}}};
}

} // namespace entml::nn
