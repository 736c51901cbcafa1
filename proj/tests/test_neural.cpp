#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"

#include "meshfuse/errors.hpp"
#include "meshfuse/neural.hpp"
#include "neural_oracle.hpp"

using namespace meshfuse;

namespace {

Vec random_vec(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
    Vec v(n);
    for (double& x : v) {
        x = (static_cast<double>(gen() >> 11) * 0x1.0p-52 - 1.0) * scale;
    }
    return v;
}

}  // namespace

TEST_CASE("initialization is deterministic for a given seed") {
    const ModelWeights a = init_weights(NeuralConfig::tiny(), 42);
    const ModelWeights b = init_weights(NeuralConfig::tiny(), 42);
    for (const auto& [name, tensor] : a.tensors()) {
        CHECK(tensor.data == b.at(name).data);
    }
    const ModelWeights c = init_weights(NeuralConfig::tiny(), 43);
    CHECK(c.at("gate.l1.weight").data != a.at("gate.l1.weight").data);
}

TEST_CASE("default parameter count lands within five percent of 604428") {
    const ModelWeights w = init_weights(NeuralConfig{}, 1);
    const double count = static_cast<double>(w.parameter_count());
    CHECK(std::abs(count - 604428.0) / 604428.0 <= 0.05);
}

TEST_CASE("gate input width is 14d + 2") {
    const NeuralConfig c;
    CHECK(c.gate_input() == 898);
    for (const TensorSpec& spec : model_tensor_specs(c)) {
        if (spec.name == "gate.l1.weight") {
            CHECK(spec.shape == std::vector<std::size_t>{256, 898});
        }
    }
    CHECK(NeuralConfig::tiny().gate_input() == 14 * 4 + 2);
}

TEST_CASE("forward output invariants hold for random inputs") {
    const ModelWeights w = init_weights(NeuralConfig::tiny(), 7);
    const NeuralConfig& c = w.config();
    std::mt19937_64 gen(99);
    for (int it = 0; it < 100; ++it) {
        std::vector<Vec> incoming(kFieldCount);
        for (Vec& v : incoming) v = random_vec(gen, c.sent_dim);
        const std::size_t k = 1 + gen() % 4;
        std::vector<FieldMap<Vec>> anchors(k);
        for (auto& anchor : anchors) {
            for (std::size_t i = 0; i < kFieldCount; ++i) {
                anchor[i] = normalized(random_vec(gen, c.d));
            }
        }
        const double tau = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        const double conf = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        const NeuralOutput out = forward(w, incoming, anchors, tau, conf);

        double psum = 0.0;
        for (double p : out.probs) {
            CHECK(p > 0.0);
            psum += p;
        }
        CHECK(std::abs(psum - 1.0) <= 1e-6);
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            CHECK(out.gates[i] > 0.0);
            CHECK(out.gates[i] < 1.0);
            CHECK(out.field_drift[i] > 0.0);
            CHECK(out.field_drift[i] < 1.0);
            CHECK(is_unit(out.fused[i]));
        }
        CHECK(out.total_drift > 0.0);
        CHECK(out.total_drift < 1.0);
    }
}

TEST_CASE("tiny-config forward matches the straight-line oracle to 1e-6") {
    const ModelWeights w = init_weights(NeuralConfig::tiny(), 2024);
    const NeuralConfig& c = w.config();
    std::mt19937_64 gen(5);
    for (int it = 0; it < 20; ++it) {
        std::vector<Vec> incoming(kFieldCount);
        for (Vec& v : incoming) v = random_vec(gen, c.sent_dim);
        std::vector<FieldMap<Vec>> anchors(2);
        for (auto& anchor : anchors) {
            for (std::size_t i = 0; i < kFieldCount; ++i) {
                anchor[i] = normalized(random_vec(gen, c.d));
            }
        }
        const NeuralOutput got = forward(w, incoming, anchors, 0.75, 0.95);
        const NeuralOutput want = oracle::oracle_forward(w, incoming, anchors, 0.75, 0.95);

        for (std::size_t i = 0; i < kFieldCount; ++i) {
            REQUIRE(got.gates[i] == doctest::Approx(want.gates[i]).epsilon(1e-6));
            REQUIRE(got.field_drift[i] ==
                    doctest::Approx(want.field_drift[i]).epsilon(1e-6));
            for (std::size_t d = 0; d < c.d; ++d) {
                REQUIRE(got.fused[i][d] ==
                        doctest::Approx(want.fused[i][d]).epsilon(1e-6));
            }
        }
        REQUIRE(got.total_drift == doctest::Approx(want.total_drift).epsilon(1e-6));
        for (int i = 0; i < 3; ++i) {
            REQUIRE(got.probs[i] == doctest::Approx(want.probs[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("loss terms follow their definitions") {
    NeuralConfig config;
    NeuralOutput out;
    out.gates = {0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.5};  // mood last
    out.field_drift.fill(0.4);
    out.total_drift = 0.4;
    out.probs = {1.0, 0.0, 0.0};
    std::array<double, kFieldCount> targets;
    targets.fill(0.4);

    SUBCASE("satisfied mood margin yields zero coupling loss") {
        const LossBreakdown loss = compute_loss(out, 0, targets, config);
        CHECK(loss.coupling == 0.0);
        CHECK(loss.decision_ce == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(loss.drift_mse == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(loss.gate_dir == 0.0);  // only rejected targets penalize gates
        CHECK(loss.total == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("violated mood margin costs the shortfall") {
        out.gates = {0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.2};
        const LossBreakdown loss = compute_loss(out, 0, targets, config);
        CHECK(loss.coupling == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(loss.total ==
              doctest::Approx(config.lambda_coupling * 0.2).epsilon(1e-12));
    }

    SUBCASE("rejected targets penalize the mean gate") {
        out.probs = {0.0, 0.0, 1.0};
        const LossBreakdown loss = compute_loss(out, 2, targets, config);
        const double mean_gate = (0.3 * 6 + 0.5) / 7.0;
        CHECK(loss.gate_dir == doctest::Approx(mean_gate).epsilon(1e-12));
        CHECK(loss.coupling == 0.0);
        CHECK(loss.decision_ce == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("perfect one-hot prediction zeroes the decision term") {
        out.probs = {0.0, 1.0, 0.0};
        out.gates = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.9};
        targets.fill(0.1);
        out.field_drift.fill(0.3);
        out.total_drift = 0.1;
        const LossBreakdown loss = compute_loss(out, 1, targets, config);
        CHECK(loss.decision_ce == doctest::Approx(0.0).epsilon(1e-12));
        const double expected_mse = (7 * 0.2 * 0.2 + 0.0) / 8.0;
        CHECK(loss.drift_mse == doctest::Approx(expected_mse).epsilon(1e-12));
        CHECK(loss.total ==
              doctest::Approx(config.lambda_drift * expected_mse).epsilon(1e-12));
    }

    SUBCASE("class weights scale the cross entropy") {
        out.probs = {0.5, 0.25, 0.25};
        const LossBreakdown l0 = compute_loss(out, 0, targets, config);
        CHECK(l0.decision_ce ==
              doctest::Approx(-config.class_weights[0] * std::log(0.5)).epsilon(1e-12));
        const LossBreakdown l2 = compute_loss(out, 2, targets, config);
        CHECK(l2.decision_ce ==
              doctest::Approx(-config.class_weights[2] * std::log(0.25)).epsilon(1e-12));
    }
}

TEST_CASE("coupling loss is zero exactly on the satisfied-margin region") {
    NeuralConfig config;
    std::mt19937_64 gen(5150);
    std::array<double, kFieldCount> targets{};
    for (int it = 0; it < 500; ++it) {
        NeuralOutput out;
        for (double& g : out.gates) {
            g = 0.01 + 0.98 * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
        }
        out.probs = {0.4, 0.4, 0.2};
        const LossBreakdown loss = compute_loss(out, 0, targets, config);
        double mean_other = 0.0;
        for (std::size_t i = 0; i + 1 < kFieldCount; ++i) mean_other += out.gates[i];
        mean_other /= 6.0;
        const double mood = out.gates[field_index(FieldId::mood)];
        if (mood >= mean_other + config.margin) {
            CHECK(loss.coupling == 0.0);
        } else {
            CHECK(loss.coupling > 0.0);
        }
    }
}

TEST_CASE("weight container round-trips through the manifest format") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "meshfuse_weights_test";
    fs::create_directories(dir);
    const std::string manifest = (dir / "tiny.json").string();

    const ModelWeights original = init_weights(NeuralConfig::tiny(), 11);
    save_weights(original, manifest, "tiny.bin");
    const ModelWeights loaded = load_weights(manifest);

    CHECK(loaded.parameter_count() == original.parameter_count());
    for (const auto& [name, tensor] : original.tensors()) {
        const Tensor& got = loaded.at(name);
        REQUIRE(got.shape == tensor.shape);
        for (std::size_t i = 0; i < tensor.data.size(); ++i) {
            // Container stores float32: match after the same narrowing.
            CHECK(got.data[i] == static_cast<double>(static_cast<float>(tensor.data[i])));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("a renamed tensor is reported by name on load") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "meshfuse_missing_test";
    fs::create_directories(dir);
    const std::string manifest = (dir / "tiny.json").string();
    save_weights(init_weights(NeuralConfig::tiny(), 3), manifest, "tiny.bin");

    std::ifstream in(manifest);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    const std::string needle = "\"gate.l3.bias\"";
    const auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(), "\"gate.l3.renamed\"");
    std::ofstream out(manifest);
    out << text;
    out.close();

    try {
        load_weights(manifest);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("gate.l3.bias") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("forward validates its inputs") {
    const ModelWeights w = init_weights(NeuralConfig::tiny(), 1);
    const NeuralConfig& c = w.config();
    std::vector<Vec> incoming(kFieldCount, Vec(c.sent_dim, 0.1));
    std::vector<FieldMap<Vec>> anchors(1);
    for (std::size_t i = 0; i < kFieldCount; ++i) anchors[0][i] = Vec(c.d, 0.5);

    CHECK_THROWS_AS(forward(w, incoming, {}, 0.5, 0.5), DimensionError);
    std::vector<Vec> short_incoming(kFieldCount - 1, Vec(c.sent_dim, 0.1));
    CHECK_THROWS_AS(forward(w, short_incoming, anchors, 0.5, 0.5), DimensionError);
    std::vector<Vec> bad_width(kFieldCount, Vec(c.sent_dim + 1, 0.1));
    CHECK_THROWS_AS(forward(w, bad_width, anchors, 0.5, 0.5), DimensionError);
}
