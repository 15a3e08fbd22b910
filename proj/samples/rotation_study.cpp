// Does the input order matter? Trains the same architecture on several
// column permutations of one 2q-pure dataset and compares test accuracy.
// The dense model with canonical accumulation is exactly order-blind; the
// CNN sees a different local neighbourhood under each permutation.
//
//   rotation_study [permutations] [per_class]

#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "entml/datagen.hpp"
#include "entml/nn/train.hpp"

using namespace entml;

int main(int argc, char** argv) {
    const std::size_t perms = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 4;
    GenConfig g;
    g.scenario = Scenario::pure_2q;
    g.per_class = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 3000;
    g.seed = 7;
    const auto data = build_dataset(g);

    nn::TrainConfig tc;
    tc.phases = {{1e-3, 40}, {1e-4, 10}};
    tc.seed = 8;
    tc.evaluate_test_each_epoch = false;

    auto dense = nn::make_network("dense", 16, {}, {64, 32, 2});
    dense.canonical_accumulation = true;
    const nn::NetworkSpec specs[2] = {nn::registry_spec("2q-pure-cnn", 16, 2), dense};

    std::printf("permutation,architecture,test_acc\n");
    for (std::size_t p = 0; p <= perms; ++p) {
        std::vector<std::size_t> order(16);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (p > 0) {
            Rng rng(derive_seed(11, "rotation", p));
            shuffle(order, rng);
        }
        const Dataset tr = select_features(data.train, order), te = select_features(data.test, order);
        for (const auto& spec : specs) {
            // Same initial weights up to the permutation, so only the order differs.
            auto net = nn::initialized_network(spec, tc.seed);
            if (spec.canonical_accumulation) net.permute_input_weights(order);
            const auto m = nn::train(net, tr, nullptr, tc);
            std::printf("%zu,%s,%.4f\n", p, spec.name.c_str(), nn::evaluate(m.net, te).accuracy);
        }
    }
    return 0;
}
