#pragma once

// Softmax cross-entropy training with Adam over learning-rate phases,
// argmax evaluation, and the model/history containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "entml/dataset.hpp"
#include "entml/error.hpp"
#include "entml/io.hpp"
#include "entml/nn/network.hpp"
#include "entml/nn/spec.hpp"
#include "entml/parallel.hpp"
#include "entml/random.hpp"

namespace entml::nn {

struct EpochRecord {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double train_acc = 0.0; // running accuracy over the epoch's minibatches
    double train_loss = 0.0;
    double test_acc = 0.0;
    double test_loss = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainedModel {
    Network net;
    std::vector<EpochRecord> history;
    TrainConfig config;
    nlohmann::json metadata = nlohmann::json::object();
};

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
};

// Ties go to the lowest class index.
inline std::size_t argmax(const double* z, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (z[i] > z[best]) best = i;
    return best;
}

// Cross-entropy of one row of logits against class y.
inline double softmax_xent(const double* z, std::size_t n, std::size_t y) {
    const double m = *std::max_element(z, z + n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - m);
    return std::log(s) + m - z[y];
}

inline EvalResult evaluate(const Network& net, const Dataset& data, std::size_t threads = 1, std::size_t chunk = 512) {
    require(data.dim == net.input_dim(), "evaluate: dataset dimension does not match the network input");
    EvalResult r;
    r.total = data.rows();
    if (r.total == 0) return r;
    const std::size_t C = net.num_classes();
    const std::size_t nchunks = (r.total + chunk - 1) / chunk;
    std::vector<std::size_t> correct(nchunks, 0);
    std::vector<double> loss(nchunks, 0.0);
    parallel_for(nchunks, threads, [&](std::size_t c) {
        Workspace ws;
        const std::size_t lo = c * chunk, n = std::min(chunk, r.total - lo);
        const double* z = net.forward(data.row(lo), n, ws);
        for (std::size_t i = 0; i < n; ++i) {
            const auto y = static_cast<std::size_t>(data.labels[lo + i]);
            correct[c] += argmax(z + i * C, C) == y;
            loss[c] += softmax_xent(z + i * C, C, y);
        }
    });
    for (std::size_t c = 0; c < nchunks; ++c) {
        r.correct += correct[c];
        r.loss += loss[c];
    }
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
    r.loss /= static_cast<double>(r.total);
    return r;
}

inline std::vector<std::size_t> predict(const Network& net, const Dataset& data, std::size_t chunk = 512) {
    std::vector<std::size_t> out(data.rows());
    const std::size_t C = net.num_classes();
    Workspace ws;
    for (std::size_t lo = 0; lo < data.rows(); lo += chunk) {
        const std::size_t n = std::min(chunk, data.rows() - lo);
        const double* z = net.forward(data.row(lo), n, ws);
        for (std::size_t i = 0; i < n; ++i) out[lo + i] = argmax(z + i * C, C);
    }
    return out;
}

// Called before every epoch after the first; may replace the training rows
// (fresh-sample augmentation).
using EpochHook = std::function<void(std::size_t epoch, Dataset& train)>;

struct AdamState {
    std::vector<double> m, v;
    std::uint64_t step = 0;
};

inline void adam_update(AlignedVector& params, const AlignedVector& grad, AdamState& st, double lr,
                        const TrainConfig& cfg) {
    if (st.m.empty()) {
        st.m.assign(params.size(), 0.0);
        st.v.assign(params.size(), 0.0);
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

// Trains an already initialized network. The minibatch order depends only on
// (seed, epoch) and the row count, never on feature values.
inline TrainedModel train(Network net, Dataset train_set, const Dataset* test_set, const TrainConfig& cfg,
                          const EpochHook& hook = {}, std::size_t eval_threads = 1) {
    cfg.check();
    train_set.check();
    require(train_set.rows() > 0, "train: empty training set");
    require(train_set.dim == net.input_dim(), "train: dataset dimension does not match the network input");
    require(train_set.num_classes == net.num_classes(), "train: class count mismatch");

    TrainedModel out;
    out.config = cfg;
    const std::size_t C = net.num_classes();
    const std::size_t bs = cfg.batch_size;
    AdamState adam;
    AlignedVector grad(net.param_count());
    std::vector<double> xb, dz;
    Workspace ws;
    Rng drop_rng(derive_seed(cfg.seed, "dropout"));

    std::size_t epoch = 0;
    for (const auto& phase : cfg.phases) {
        for (std::size_t e = 0; e < phase.epochs; ++e, ++epoch) {
            if (hook && epoch > 0) {
                hook(epoch, train_set);
                require(train_set.dim == net.input_dim() && train_set.rows() > 0, "train: epoch hook produced invalid rows");
            }
            const std::size_t n = train_set.rows();
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            Rng rng(derive_seed(cfg.seed, "epoch", epoch));
            shuffle(order, rng);

            std::size_t correct = 0;
            double loss_sum = 0.0;
            for (std::size_t lo = 0; lo < n; lo += bs) {
                const std::size_t b = std::min(bs, n - lo);
                xb.resize(b * train_set.dim);
                for (std::size_t i = 0; i < b; ++i)
                    std::copy_n(train_set.row(order[lo + i]), train_set.dim, xb.data() + i * train_set.dim);
                const double* z = net.forward(xb.data(), b, ws, Mode::train, &drop_rng);
                dz.resize(b * C);
                double batch_loss = 0.0;
                for (std::size_t i = 0; i < b; ++i) {
                    const auto y = static_cast<std::size_t>(train_set.labels[order[lo + i]]);
                    const double* zi = z + i * C;
                    batch_loss += softmax_xent(zi, C, y);
                    correct += argmax(zi, C) == y;
                    std::copy_n(zi, C, dz.data() + i * C);
                    Network::softmax_inplace(dz.data() + i * C, C);
                    dz[i * C + y] -= 1.0;
                    for (std::size_t c = 0; c < C; ++c) dz[i * C + c] /= static_cast<double>(b);
                }
                if (!std::isfinite(batch_loss))
                    throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at row " +
                                         std::to_string(lo));
                loss_sum += batch_loss;
                std::fill(grad.begin(), grad.end(), 0.0);
                net.backward(ws, dz.data(), grad.data(), nullptr);
                adam_update(net.params(), grad, adam, phase.learning_rate, cfg);
            }
            EpochRecord rec;
            rec.epoch = epoch;
            rec.learning_rate = phase.learning_rate;
            rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
            rec.train_loss = loss_sum / static_cast<double>(n);
            const bool last = epoch + 1 == cfg.total_epochs();
            if (test_set && test_set->rows() > 0 && (cfg.evaluate_test_each_epoch || last)) {
                const auto ev = evaluate(net, *test_set, eval_threads);
                rec.test_acc = ev.accuracy;
                rec.test_loss = ev.loss;
            }
            out.history.push_back(rec);
        }
    }
    out.net = std::move(net);
    return out;
}

// Fresh network from spec with He initialization drawn from (seed, "init").
inline Network initialized_network(const NetworkSpec& spec, std::uint64_t seed) {
    Network net(spec);
    Rng rng(derive_seed(seed, "init"));
    net.init(rng);
    return net;
}

inline TrainedModel train(const NetworkSpec& spec, const Dataset& train_set, const Dataset* test_set,
                          const TrainConfig& cfg, const EpochHook& hook = {}, std::size_t eval_threads = 1) {
    return train(initialized_network(spec, cfg.seed), train_set, test_set, cfg, hook, eval_threads);
}

// ---------------------------------------------------------------------------
// Containers

inline std::string history_csv(const std::vector<EpochRecord>& h) {
    std::string out = "epoch,train_acc,test_acc,train_loss,test_loss\n";
    char buf[160];
    for (const auto& r : h) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.train_acc, r.test_acc, r.train_loss,
                      r.test_loss);
        out += buf;
    }
    return out;
}

inline constexpr char kModelMagic[8] = {'E', 'M', 'L', 'M', 'O', 'D', 'E', 'L'};

// magic, u64 header length, JSON header, f64 parameters.
inline std::string serialize_model(const TrainedModel& m) {
    nlohmann::json header = {{"format_version", 1},
                             {"network", to_json(m.net.spec())},
                             {"train_config", to_json(m.config)},
                             {"param_count", m.net.param_count()},
                             {"metadata", m.metadata}};
    const std::string h = header.dump();
    ByteWriter w;
    w.put_raw(std::string_view(kModelMagic, 8));
    w.put(static_cast<std::uint64_t>(h.size()));
    w.put_raw(h);
    w.put_array(m.net.params());
    return w.bytes();
}

inline TrainedModel deserialize_model(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.get_raw(8) != std::string_view(kModelMagic, 8)) throw ValidationError("model: bad magic");
    const auto len = r.get<std::uint64_t>();
    const auto header = nlohmann::json::parse(r.get_raw(len));
    if (header.at("format_version").get<int>() != 1) throw ValidationError("model: unsupported version");
    TrainedModel m;
    m.net = Network(network_from_json(header.at("network")));
    const auto count = header.at("param_count").get<std::size_t>();
    require(count == m.net.param_count(), "model: parameter count disagrees with the architecture");
    m.net.set_params(r.get_array<double>(count));
    if (!r.done()) throw ValidationError("model: trailing bytes");
    m.metadata = header.value("metadata", nlohmann::json::object());
    const auto& tc = header.at("train_config");
    m.config.phases.clear();
    for (const auto& p : tc.at("phases")) m.config.phases.push_back({p.at("learning_rate"), p.at("epochs")});
    m.config.batch_size = tc.at("batch_size");
    m.config.seed = tc.at("seed");
    return m;
}

inline void write_model(const fs::path& path, const TrainedModel& m) { atomic_write(path, serialize_model(m)); }
inline TrainedModel read_model(const fs::path& path) { return deserialize_model(read_file(path)); }

} // namespace entml::nn
