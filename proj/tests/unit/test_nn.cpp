#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "entml/nn/network.hpp"
#include "entml/nn/spec.hpp"
#include "entml/nn/train.hpp"

using namespace entml;
using namespace entml::nn;

namespace {

struct Batch {
    std::vector<double> x;
    std::vector<std::size_t> y;
    std::size_t rows;
};

Batch random_batch(std::size_t rows, std::size_t dim, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    Batch b{std::vector<double>(rows * dim), std::vector<std::size_t>(rows), rows};
    for (auto& v : b.x) v = uniform(rng, -1.0, 1.0);
    for (auto& y : b.y) y = uniform_index(rng, classes);
    return b;
}

double batch_loss(const Network& net, const Batch& b, Mode mode, std::uint64_t drop_seed) {
    Workspace ws;
    Rng rng(drop_seed);
    const double* z = net.forward(b.x.data(), b.rows, ws, mode, &rng);
    double s = 0.0;
    for (std::size_t i = 0; i < b.rows; ++i) s += softmax_xent(z + i * net.num_classes(), net.num_classes(), b.y[i]);
    return s / static_cast<double>(b.rows);
}

struct Grads {
    std::vector<double> params, input;
};

Grads analytic(const Network& net, const Batch& b, Mode mode, std::uint64_t drop_seed) {
    Workspace ws;
    Rng rng(drop_seed);
    const std::size_t C = net.num_classes();
    const double* z = net.forward(b.x.data(), b.rows, ws, mode, &rng);
    std::vector<double> dz(z, z + b.rows * C);
    for (std::size_t i = 0; i < b.rows; ++i) {
        Network::softmax_inplace(dz.data() + i * C, C);
        dz[i * C + b.y[i]] -= 1.0;
        for (std::size_t c = 0; c < C; ++c) dz[i * C + c] /= static_cast<double>(b.rows);
    }
    Grads g{std::vector<double>(net.param_count(), 0.0), std::vector<double>(b.x.size(), 0.0)};
    net.backward(ws, dz.data(), g.params.data(), g.input.data());
    return g;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& n) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    return std::sqrt(diff) / std::max(1e-12, std::sqrt(na) + std::sqrt(nn));
}

// Central differences over every parameter and every input entry.
void gradient_check(const NetworkSpec& spec, Mode mode = Mode::eval) {
    Network net(spec);
    Rng init(7);
    net.init(init);
    for (auto& p : net.params()) p += 0.05 * standard_normal(init); // non-zero biases
    Batch b = random_batch(5, spec.input_dim, spec.num_classes, 3);
    const auto g = analytic(net, b, mode, 99);
    const double h = 1e-6;
    std::vector<double> num(net.param_count());
    for (std::size_t i = 0; i < num.size(); ++i) {
        const double keep = net.params()[i];
        net.params()[i] = keep + h;
        const double up = batch_loss(net, b, mode, 99);
        net.params()[i] = keep - h;
        const double dn = batch_loss(net, b, mode, 99);
        net.params()[i] = keep;
        num[i] = (up - dn) / (2 * h);
    }
    EXPECT_LT(rel_error(g.params, num), 1e-4) << spec.name << " parameters";
    std::vector<double> numx(b.x.size());
    for (std::size_t i = 0; i < numx.size(); ++i) {
        const double keep = b.x[i];
        b.x[i] = keep + h;
        const double up = batch_loss(net, b, mode, 99);
        b.x[i] = keep - h;
        const double dn = batch_loss(net, b, mode, 99);
        b.x[i] = keep;
        numx[i] = (up - dn) / (2 * h);
    }
    EXPECT_LT(rel_error(g.input, numx), 1e-4) << spec.name << " inputs";
}

Dataset separable_dataset(std::size_t rows, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d{2, 2, 6, {}, {}};
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            const double v = uniform(rng, -1.0, 1.0);
            d.features.push_back(v);
            s += (j % 2 ? 1.0 : -0.5) * v;
        }
        d.labels.push_back(s > 0.0 ? 1 : 0);
    }
    return d;
}

} // namespace

TEST(GradientCheck, Dense) {
    gradient_check(make_network("dense", 16, {}, {8, 6, 3}));
    NetworkSpec s = make_network("dense-canonical", 16, {}, {8, 2});
    s.canonical_accumulation = true;
    gradient_check(s);
}

TEST(GradientCheck, Conv) {
    gradient_check(make_network("conv", 16, {3, 4}, {5, 2}));
    NetworkSpec s;
    s.name = "conv-stride";
    s.input_dim = 17;
    s.num_classes = 3;
    s.layers = {LayerSpec::conv1d(2, 4, 2, 0), LayerSpec::conv1d(3, 3, 1, 2, Activation::none), LayerSpec::flatten(),
                LayerSpec::dense(3, Activation::none)};
    gradient_check(s);
}

TEST(GradientCheck, PoolingAndDropout) {
    NetworkSpec s;
    s.name = "pool";
    s.input_dim = 16;
    s.num_classes = 2;
    s.layers = {LayerSpec::conv1d(3), LayerSpec::pooling(LayerKind::maxpool, 2), LayerSpec::conv1d(2),
                LayerSpec::pooling(LayerKind::avgpool, 2), LayerSpec::flatten(), LayerSpec::dense(4),
                LayerSpec::dropout(0.3), LayerSpec::dense(2, Activation::none)};
    gradient_check(s, Mode::eval);
    gradient_check(s, Mode::train);
}

TEST(Network, RegistryShapes) {
    for (const auto& e : registry()) {
        const std::size_t in = e.key.rfind("3q", 0) == 0 ? 64 : 16;
        const std::size_t C = e.key == "3q-pure-cnn" || e.key == "3q-pure-cnn-table" ? 6 : 2;
        EXPECT_NO_THROW(Network(registry_spec(e.key, in, C))) << e.key;
    }
    EXPECT_EQ(Network(registry_spec("2q-mixed-dnn", 16, 2)).param_count(), 16u * 256 + 256 + 256 * 64 + 64 + 64 * 2 + 2);
    EXPECT_EQ(Network(registry_spec("3q-mixed-dnn", 64, 2)).param_count(), 64u * 8 + 8 + 8 * 2 + 2);
    EXPECT_THROW(registry_spec("nope", 16, 2), UsageError);
}

TEST(Network, RejectsBadSpecs) {
    NetworkSpec s = make_network("x", 4, {}, {3, 2});
    s.layers.back().activation = Activation::relu;
    EXPECT_THROW(Network{s}, ValidationError);
    s = make_network("x", 4, {}, {3, 2});
    s.layers.insert(s.layers.begin() + 1, LayerSpec::conv1d(2));
    EXPECT_THROW(Network{s}, ValidationError);
}

TEST(Network, ZeroFinalLayerGivesUniformProbabilities) {
    Network net(make_network("z", 16, {4}, {8, 3}));
    Rng rng(1);
    net.init(rng);
    const auto& last = net.ops().back();
    for (std::size_t i = 0; i < last.w_count; ++i) net.params()[last.w_off + i] = 0.0;
    for (std::size_t i = 0; i < last.b_count; ++i) net.params()[last.b_off + i] = 0.0;
    std::vector<double> x(16, 0.3);
    for (double p : net.probabilities(x)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Network, BatchedForwardMatchesSingleRows) {
    Network net(registry_spec("2q-pure-cnn", 16, 2));
    Rng rng(2);
    net.init(rng);
    const auto b = random_batch(9, 16, 2, 4);
    Workspace ws;
    const double* z = net.forward(b.x.data(), b.rows, ws);
    for (std::size_t i = 0; i < b.rows; ++i) {
        const auto single = net.logits(std::span<const double>(b.x.data() + i * 16, 16));
        for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(single[c], z[i * 2 + c], 1e-12);
    }
}

TEST(Network, PermuteInputWeights) {
    NetworkSpec s = make_network("p", 6, {}, {5, 2});
    Network net(s);
    Rng rng(3);
    net.init(rng);
    std::vector<std::size_t> perm{3, 1, 5, 0, 2, 4};
    Network moved = net;
    moved.permute_input_weights(perm);
    std::vector<double> x{0.1, -0.2, 0.3, 0.4, -0.5, 0.6}, xp(6);
    for (std::size_t k = 0; k < 6; ++k) xp[k] = x[perm[k]];
    const auto a = net.logits(x), b = moved.logits(xp);
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(a[c], b[c], 1e-14);
    Network same = net;
    std::vector<std::size_t> id(6);
    std::iota(id.begin(), id.end(), 0);
    same.permute_input_weights(id);
    EXPECT_EQ(same.params(), net.params());
    EXPECT_THROW(moved.permute_input_weights(std::vector<std::size_t>{0, 0, 1, 2, 3, 4}), ValidationError);
    Network conv(make_network("c", 6, {2}, {2}));
    EXPECT_THROW(conv.permute_input_weights(id), ValidationError);
}

TEST(Eval, ArgmaxTiesAndUniformModel) {
    const double z[3] = {0.5, 0.5, 0.1};
    EXPECT_EQ(argmax(z, 3), 0u);
    Network net(make_network("u", 6, {}, {2}));
    auto d = separable_dataset(200, 5);
    const auto ev = evaluate(net, d);
    const auto counts = d.class_counts();
    EXPECT_DOUBLE_EQ(ev.accuracy, static_cast<double>(counts[0]) / 200.0);
    EXPECT_NEAR(ev.loss, std::log(2.0), 1e-12);
}

TEST(Train, LearnsSeparableProblemDeterministically) {
    const auto train_set = separable_dataset(2000, 1);
    const auto test_set = separable_dataset(400, 2);
    TrainConfig cfg;
    cfg.phases = {{1e-2, 8}, {1e-3, 4}};
    cfg.batch_size = 32;
    cfg.seed = 5;
    const auto spec = make_network("toy", 6, {}, {16, 2});
    const auto a = train(spec, train_set, &test_set, cfg);
    const auto b = train(spec, train_set, &test_set, cfg);
    ASSERT_EQ(a.history.size(), 12u);
    EXPECT_GT(a.history.back().test_acc, 0.95);
    EXPECT_EQ(a.history, b.history);
    EXPECT_EQ(a.net.params(), b.net.params());
    EXPECT_DOUBLE_EQ(a.history[9].learning_rate, 1e-3);
    cfg.seed = 6;
    EXPECT_NE(train(spec, train_set, &test_set, cfg).net.params(), a.net.params());
}

TEST(Train, NonFiniteLossRaises) {
    auto d = separable_dataset(64, 1);
    d.features[0] = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.phases = {{1e-3, 1}};
    EXPECT_THROW(train(make_network("nan", 6, {}, {4, 2}), d, nullptr, cfg), NumericalError);
}

TEST(Train, EpochHookReplacesRows) {
    const auto d = separable_dataset(128, 1);
    TrainConfig cfg;
    cfg.phases = {{1e-3, 3}};
    std::vector<std::size_t> seen;
    EpochHook hook = [&](std::size_t epoch, Dataset& rows) {
        seen.push_back(epoch);
        rows = separable_dataset(128, 100 + epoch);
    };
    train(make_network("hook", 6, {}, {4, 2}), d, nullptr, cfg, hook);
    EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2}));
}

TEST(Train, CanonicalAccumulationIsPermutationInvariant) {
    auto spec = make_network("canon", 6, {}, {8, 2});
    spec.canonical_accumulation = true;
    const auto d = separable_dataset(512, 3);
    const std::vector<std::size_t> perm{4, 2, 0, 5, 1, 3};
    Dataset dp = select_features(d, perm);
    TrainConfig cfg;
    cfg.phases = {{1e-2, 3}};
    cfg.seed = 9;
    auto base = initialized_network(spec, cfg.seed);
    auto moved = base;
    moved.permute_input_weights(perm);
    const auto a = train(base, d, &d, cfg);
    const auto b = train(moved, dp, &dp, cfg);
    EXPECT_EQ(a.history, b.history);
    auto expect = a.net;
    expect.permute_input_weights(perm);
    EXPECT_EQ(expect.params(), b.net.params());
}

TEST(ModelIo, RoundTrip) {
    const auto d = separable_dataset(256, 1);
    TrainConfig cfg;
    cfg.phases = {{1e-3, 2}};
    auto m = train(registry_spec("2q-pure-cnn", 6, 2), d, nullptr, cfg);
    m.metadata = {{"note", "x"}};
    const auto bytes = serialize_model(m);
    const auto back = deserialize_model(bytes);
    EXPECT_EQ(back.net.params(), m.net.params());
    EXPECT_EQ(predict(back.net, d), predict(m.net, d));
    EXPECT_EQ(back.metadata["note"], "x");
    EXPECT_EQ(to_json(back.net.spec()), to_json(m.net.spec()));
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 8)), ValidationError);
    EXPECT_THROW(deserialize_model(bytes + "x"), ValidationError);
}

TEST(Train, HistoryCsv) {
    std::vector<EpochRecord> h{{0, 1e-3, 0.5, 0.7, 0.6, 0.65}};
    EXPECT_EQ(history_csv(h), "epoch,train_acc,test_acc,train_loss,test_loss\n0,0.5,0.6,0.7,0.65\n");
}
