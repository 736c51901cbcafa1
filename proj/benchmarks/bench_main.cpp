// Microbenchmarks for the hot paths: text encoding, field fusion, full
// heuristic evaluation, neural forward, and per-neuron blending.

#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "meshfuse/blend.hpp"
#include "meshfuse/encoder.hpp"
#include "meshfuse/neural.hpp"
#include "meshfuse/sim.hpp"
#include "meshfuse/svaf.hpp"

namespace {

using namespace meshfuse;

const Encoder& bench_encoder() {
    static const Encoder encoder{EncoderConfig{}};
    return encoder;
}

AgentProfile bench_profile(int anchors) {
    AgentProfile p;
    p.agent_id = "bench";
    p.alpha = {1.5, 1.5, 1.0, 1.5, 1.0, 1.0, 2.0};
    p.tau_freshness = 10800;
    p.anchor_k = anchors;
    return p;
}

MemoryStore bench_store(int anchors) {
    MemoryStore store("bench");
    for (int i = 0; i < anchors; ++i) {
        std::map<FieldId, std::string> texts;
        texts[FieldId::focus] = "focus session on mesh memory " + std::to_string(i);
        texts[FieldId::issue] = "fatigue accumulating " + std::to_string(i);
        texts[FieldId::mood] = "tired, low energy";
        store.create_cmb("bench", 1000 + i, 0.9, texts, Affect{-0.4, -0.4}, {},
                         "observation", bench_encoder());
    }
    return store;
}

Cmb bench_incoming() {
    MemoryStore scratch("peer");
    std::map<FieldId, std::string> texts;
    texts[FieldId::focus] = "focus session on mesh memory protocols";
    texts[FieldId::issue] = "fatigue accumulating quickly";
    texts[FieldId::mood] = "tired, low energy";
    return scratch.create_cmb("peer", 1100, 0.8, texts, Affect{-0.4, -0.4}, {},
                              "observation", bench_encoder());
}

void BM_EncodeText(benchmark::State& state) {
    const std::string text = "user coding with an assistant for 8 hours, exhausted";
    for (auto _ : state) {
        benchmark::DoNotOptimize(bench_encoder().encode(text));
    }
}
BENCHMARK(BM_EncodeText);

void BM_EvaluateCmb(benchmark::State& state) {
    const int anchors = static_cast<int>(state.range(0));
    const AgentProfile profile = bench_profile(anchors);
    const MemoryStore store = bench_store(anchors);
    const Cmb incoming = bench_incoming();
    const Thresholds thresholds;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            evaluate_cmb(store, profile, incoming, 1200, thresholds, bench_encoder()));
    }
}
BENCHMARK(BM_EvaluateCmb)->Arg(5)->Arg(20);

void BM_FuseField(benchmark::State& state) {
    const AgentProfile profile = bench_profile(5);
    const MemoryStore store = bench_store(5);
    const Cmb incoming = bench_incoming();
    std::vector<AnchorView> views;
    for (const auto& [key, rec] : store.records()) {
        AnchorView v;
        v.entry = &rec.cmb.fields[0];
        v.t_origin = rec.cmb.timestamp;
        v.confidence = rec.cmb.confidence;
        v.lifecycle_weight = 1.0;
        v.key = key;
        views.push_back(v);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            fuse_field(FieldId::focus, incoming.fields[0], views, profile, 0.8, 1200));
    }
}
BENCHMARK(BM_FuseField);

void BM_NeuralForward(benchmark::State& state) {
    const ModelWeights weights = init_weights(NeuralConfig{}, 42);
    const NeuralConfig& c = weights.config();
    std::vector<Vec> incoming(kFieldCount, Vec(c.sent_dim, 0.1));
    std::vector<FieldMap<Vec>> anchors(5);
    for (auto& a : anchors) a.fill(normalized(Vec(c.d, 1.0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(weights, incoming, anchors, 0.9, 0.95));
    }
}
BENCHMARK(BM_NeuralForward);

void BM_BlendStates(benchmark::State& state) {
    HiddenState local;
    local.h = make_initial_state(64, 7);
    local.tau = make_tau_vector(64, 11);
    const Vec peer = make_initial_state(64, 13);
    for (auto _ : state) {
        benchmark::DoNotOptimize(blend_states(local, peer, 0.4, BlendConfig{}));
    }
}
BENCHMARK(BM_BlendStates);

}  // namespace

BENCHMARK_MAIN();
