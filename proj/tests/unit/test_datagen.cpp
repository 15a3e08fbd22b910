#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "entml/datagen.hpp"
#include "entml/dataset.hpp"

using namespace entml;

namespace {

DensityMatrix werner(double p) {
    ComplexMatrix m = projector(bell_state()) * Complex{p, 0.0};
    for (std::size_t i = 0; i < 4; ++i) m(i, i) += (1.0 - p) / 4.0;
    return DensityMatrix(m);
}

// Chi-square statistic of gamma samples against the density (1-g)^(d-2) truncated to [lo, hi].
double cap_chi_square(const std::vector<double>& g, double lo, double hi, std::size_t bins) {
    auto F = [](double x) { return 1.0 - std::pow(1.0 - x, 7.0); };
    std::vector<double> obs(bins, 0.0);
    for (double x : g) {
        const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins)));
        obs[b] += 1.0;
    }
    const double mass = F(hi) - F(lo);
    double chi = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double a = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
        const double c = lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(bins);
        const double expect = static_cast<double>(g.size()) * (F(c) - F(a)) / mass;
        chi += (obs[b] - expect) * (obs[b] - expect) / expect;
    }
    return chi;
}

} // namespace

TEST(Scenario, ParseAndShape) {
    EXPECT_EQ(parse_scenario("3q-mixed"), Scenario::mixed_3q);
    EXPECT_EQ(to_string(Scenario::pure_2q), "2q-pure");
    EXPECT_EQ(scenario_classes(Scenario::pure_3q), 6u);
    EXPECT_EQ(scenario_qubits(Scenario::mixed_2q), 2u);
    EXPECT_THROW(parse_scenario("4q-pure"), UsageError);
    EXPECT_THROW(SloccClass(3, 6), ValidationError);
}

TEST(SampleLio, InvertibleWithGinibreMoments) {
    Rng rng(1);
    double second = 0.0, mean_re = 0.0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) {
        const auto a = sample_lio(ElementDist::normal, rng);
        EXPECT_GT(std::abs(det2(a)), 1e-12);
        for (const auto& z : a.data()) {
            second += std::norm(z);
            mean_re += z.real();
        }
    }
    EXPECT_NEAR(second / (4.0 * n), 1.0, 0.02); // variance 1/2 per real component
    EXPECT_NEAR(mean_re / (4.0 * n), 0.0, 0.02);
    for (int t = 0; t < 1000; ++t) {
        const auto a = sample_lio(ElementDist::uniform, rng);
        for (const auto& z : a.data()) {
            EXPECT_LE(std::abs(z.real()), 1.0);
            EXPECT_LE(std::abs(z.imag()), 1.0);
        }
    }
}

TEST(PureStates, TwoQubitClassesByReducedPurity) {
    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
        EXPECT_NEAR(reduced_purity(generate_pure_state(SloccClass(2, 0), ElementDist::normal, rng), 0), 1.0, 1e-9);
        EXPECT_LT(reduced_purity(generate_pure_state(SloccClass(2, 1), ElementDist::normal, rng), 0), 1.0 - 1e-9);
    }
}

TEST(PureStates, ThreeQubitClassesByReducedStates) {
    Rng rng(3);
    for (int c = 0; c < 6; ++c)
        for (int t = 0; t < 1000; ++t) {
            const auto psi = generate_pure_state(SloccClass(3, c), t % 2 ? ElementDist::uniform : ElementDist::normal, rng);
            ASSERT_TRUE(consistent_with_class(psi, c)) << "class " << c;
        }
}

TEST(PureStates, CanonicalRepresentatives) {
    const auto ghz = canonical_representative(SloccClass(3, cls3::ghz));
    EXPECT_NEAR(overlap(ghz, ghz_state()), 1.0, 1e-15);
    EXPECT_NEAR(overlap(canonical_representative(SloccClass(3, cls3::w)), w_state()), 1.0, 1e-15);
    EXPECT_NEAR(overlap(canonical_representative(SloccClass(2, 1)), bell_state()), 1.0, 1e-15);
    for (const int c : {cls3::pair_12, cls3::pair_13, cls3::pair_23})
        EXPECT_EQ(reduced_state_class(canonical_representative(SloccClass(3, c))), c);
    const std::vector<ComplexMatrix> id(3, ComplexMatrix::identity(2));
    EXPECT_NEAR(overlap(apply_local_operators(id, ghz_state()), ghz_state()), 1.0, 1e-15);
}

TEST(MixedTwoQubit, LabelsAndHilbertSchmidtStatistics) {
    EXPECT_EQ(label_2q_mixed(DensityMatrix::maximally_mixed(4)).class_index, 0);
    EXPECT_EQ(label_2q_mixed(DensityMatrix::from_pure(bell_state())).class_index, 1);
    EXPECT_EQ(label_2q_mixed(werner(0.5)).class_index, 1);

    for (std::uint64_t seed : {10u, 11u}) {
        Rng rng(seed);
        const int n = 20000;
        double purity = 0.0;
        int ppt = 0;
        for (int t = 0; t < n; ++t) {
            const auto rho = sample_density_2q(ElementDist::normal, rng);
            purity += rho.purity();
            ppt += is_ppt(rho);
        }
        // Hilbert-Schmidt measure on d = 4: E tr(rho^2) = 2d/(d^2+1), P(PPT) = 8/33.
        EXPECT_NEAR(purity / n, 8.0 / 17.0, 0.01);
        EXPECT_NEAR(static_cast<double>(ppt) / n, 8.0 / 33.0, 0.015);
    }
}

TEST(CapSampler, OverlapIdentityAndRegion) {
    Rng rng(4);
    for (auto ref : {ReferenceState::ghz, ReferenceState::w})
        for (int t = 0; t < 2000; ++t) {
            const auto phi = reference_state(ref);
            const Region reg = t % 2 ? Region::detected : Region::undetected;
            const auto s = sample_cap_state(phi, 2.0 / 3.0, reg, rng);
            EXPECT_NEAR(overlap(phi, s.psi), s.gamma, 1e-10);
            if (reg == Region::detected) EXPECT_GT(s.gamma, 2.0 / 3.0);
            else EXPECT_LE(s.gamma, 2.0 / 3.0);
        }
    EXPECT_THROW(sample_cap_state(w_state(), 1.0, Region::detected, rng), ValidationError);
}

TEST(CapSampler, ForcedUnitAmplitude) {
    const auto basis = complete_basis(w_state());
    std::vector<Complex> v(7, 0.0);
    v[0] = 1.0;
    const auto psi = cap_state(basis, std::polar(1.0, 0.7), v);
    EXPECT_NEAR(overlap(psi, w_state()), 1.0, 1e-14);
}

TEST(CapSampler, CompleteBasisIsOrthonormal) {
    for (auto ref : {ReferenceState::ghz, ReferenceState::w}) {
        const auto b = complete_basis(reference_state(ref));
        ASSERT_EQ(b.size(), 8u);
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t k = 0; k < 8; ++k) {
                Complex s = 0.0;
                for (std::size_t a = 0; a < 8; ++a) s += std::conj(b[i][a]) * b[k][a];
                EXPECT_NEAR(std::abs(s - Complex(i == k ? 1.0 : 0.0, 0.0)), 0.0, 1e-12);
            }
    }
}

TEST(CapSampler, GammaFollowsTruncatedCapLaw) {
    Rng rng(5);
    const double alpha = 2.0 / 3.0;
    std::vector<double> hi, lo;
    for (int t = 0; t < 100000; ++t) {
        hi.push_back(sample_cap_state(w_state(), alpha, Region::detected, rng).gamma);
        lo.push_back(sample_cap_state(w_state(), alpha, Region::undetected, rng).gamma);
    }
    // 10 bins, 9 degrees of freedom, p = 0.01 critical value
    EXPECT_LT(cap_chi_square(hi, alpha, 1.0, 10), 21.666);
    EXPECT_LT(cap_chi_square(lo, 0.0, alpha, 10), 21.666);
}

TEST(MixedThreeQubit, ConstructionGuarantees) {
    Rng rng(6);
    EXPECT_NEAR(witness_value(ghz_witness(0.5), depolarized_state(ghz_state(), 0.0)), -0.5, 1e-14);
    for (int t = 0; t < 300; ++t) {
        for (const auto& w : dataset_witnesses()) {
            const auto d = generate_3q_mixed(w, Region::detected, rng);
            EXPECT_LT(witness_value(w, d), 0.0);
        }
        const auto u = generate_3q_mixed_class(0, rng);
        for (const auto& w : dataset_witnesses()) EXPECT_GE(witness_value(w, u), 0.0);
        EXPECT_EQ(label_3q_mixed(generate_3q_mixed_class(1, rng)), 1);
    }
}

TEST(BuildDataset, ShapesAndBalance) {
    GenConfig cfg;
    cfg.scenario = Scenario::pure_2q;
    cfg.per_class = 100;
    cfg.seed = 1;
    auto s = build_dataset(cfg);
    EXPECT_EQ(s.train.rows(), 200u);
    EXPECT_EQ(s.test.rows(), 20u);
    EXPECT_EQ(s.train.class_counts(), (std::vector<std::size_t>{100, 100}));
    EXPECT_EQ(s.train.dim, 16u);

    cfg.scenario = Scenario::pure_3q;
    cfg.per_class = 10;
    s = build_dataset(cfg);
    EXPECT_EQ(s.train.rows(), 60u);
    EXPECT_EQ(s.train.class_counts(), std::vector<std::size_t>(6, 10));
    EXPECT_EQ(s.train.dim, 64u);

    cfg.scenario = Scenario::mixed_2q;
    cfg.per_class = 50;
    cfg.dev_per_class = 20;
    s = build_dataset(cfg);
    EXPECT_EQ(s.dev.rows(), 40u);
    EXPECT_EQ(s.validation.rows(), 4u);
    for (std::size_t i = 0; i < s.train.rows(); ++i) {
        const auto rho = reconstruct_density(CorrelationVector(2, std::vector<double>(s.train.row(i), s.train.row(i) + 16)));
        EXPECT_EQ(label_2q_mixed(DensityMatrix(rho.matrix)).class_index, s.train.labels[i]);
    }

    cfg.per_class = 5;
    EXPECT_THROW(build_dataset(cfg), ValidationError);
}

TEST(BuildDataset, DeterministicAndThreadIndependent) {
    for (auto sc : {Scenario::pure_2q, Scenario::pure_3q, Scenario::mixed_2q, Scenario::mixed_3q}) {
        GenConfig cfg;
        cfg.scenario = sc;
        cfg.per_class = 20;
        cfg.seed = 42;
        const auto a = serialize_dataset(build_dataset(cfg).train);
        cfg.threads = 3;
        const auto b = serialize_dataset(build_dataset(cfg).train);
        EXPECT_EQ(a, b) << to_string(sc);
        cfg.seed = 43;
        EXPECT_NE(a, serialize_dataset(build_dataset(cfg).train));
    }
}

TEST(BuildDataset, ShotNoiseKeepsIdentityAndUsesGrid) {
    GenConfig cfg;
    cfg.per_class = 20;
    cfg.shots = ShotConfig{4, 9};
    const auto s = build_dataset(cfg);
    for (std::size_t i = 0; i < s.train.rows(); ++i) {
        EXPECT_EQ(s.train.row(i)[0], 1.0);
        for (std::size_t j = 1; j < 16; ++j) {
            const double v = s.train.row(i)[j] * 4.0;
            EXPECT_EQ(v, std::round(v));
        }
    }
}

TEST(DatasetIo, RoundTripAndCorruption) {
    GenConfig cfg;
    cfg.scenario = Scenario::mixed_3q;
    cfg.per_class = 10;
    const auto d = build_dataset(cfg).train;
    const auto bytes = serialize_dataset(d);
    const auto back = deserialize_dataset(bytes);
    EXPECT_EQ(back.features, d.features);
    EXPECT_EQ(back.labels, d.labels);
    EXPECT_EQ(back.num_qubits, 3u);
    EXPECT_THROW(deserialize_dataset(bytes.substr(0, bytes.size() - 3)), ValidationError);
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_dataset(bad), ValidationError);

    const auto csv = dataset_csv(d);
    EXPECT_EQ(csv.substr(0, 9), "T_0,T_1,T");
    EXPECT_NE(csv.find("T_63,label\n"), std::string::npos);
}

TEST(DatasetIo, WriteSplitsManifest) {
    const auto dir = std::filesystem::temp_directory_path() / "entml_test_splits";
    std::filesystem::remove_all(dir);
    GenConfig cfg;
    cfg.per_class = 10;
    const auto s = build_dataset(cfg);
    const auto m = write_splits(dir, s, cfg, true);
    EXPECT_TRUE(std::filesystem::exists(dir / "train.bin"));
    EXPECT_TRUE(std::filesystem::exists(dir / "test.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "dev.bin"));
    EXPECT_EQ(m["splits"]["train"]["rows"], 20);
    EXPECT_EQ(read_dataset(dir / "test.bin").labels, s.test.labels);
    std::filesystem::remove_all(dir);
}

TEST(DatasetOps, SelectAndTake) {
    Dataset d{2, 2, 3, {1, 2, 3, 4, 5, 6}, {0, 1}};
    const auto s = select_features(d, {2, 0});
    EXPECT_EQ(s.features, (std::vector<double>{3, 1, 6, 4}));
    EXPECT_EQ(s.dim, 2u);
    const auto t = take_rows(d, {1});
    EXPECT_EQ(t.features, (std::vector<double>{4, 5, 6}));
    EXPECT_EQ(t.labels, std::vector<int>{1});
    EXPECT_THROW(select_features(d, {3}), ValidationError);
}
