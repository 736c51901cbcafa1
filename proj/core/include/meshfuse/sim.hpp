#pragma once
// Deterministic discrete-event mesh simulator. N agents run the full
// cognition loop over a lossless instant broadcast transport: external
// observations become memory blocks, every other agent evaluates and
// remixes them, accepted content is ingested into hidden states, states
// blend pairwise at each sync interval, and stores sweep daily.
//
// The loop is single-threaded and processes each simulated second in fixed
// phase order (observations, deliveries, state sync, daily maintenance),
// with agents sorted by id inside a phase, so equal seeds replay to
// byte-identical traces.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meshfuse/blend.hpp"
#include "meshfuse/encoder.hpp"
#include "meshfuse/narrative.hpp"
#include "meshfuse/store.hpp"
#include "meshfuse/svaf.hpp"

namespace meshfuse {

struct SimAgent {
    AgentProfile profile;       // profile.agent_id doubles as the node id
    std::uint64_t tau_seed = 0; // 0 -> derived from (sim seed, agent id)
};

struct SimConfig {
    std::uint64_t seed = 0;
    std::vector<SimAgent> agents;  // at least 2
    Narrative scenario;
    Timestamp duration = 0;        // simulated seconds, > 0
    Timestamp sync_interval = 300;
    Thresholds thresholds;
    BlendConfig blend;
    EncoderConfig encoder;
    Timestamp retention_max_age = 90LL * 86400LL;
    Timestamp rebroadcast_delay = 1;  // remix re-broadcast latency
};

struct TraceEvent {
    Timestamp t = 0;
    std::string kind;      // observe|broadcast|evaluate|remix_notify|mood_delivery|
                           // validate|authority_error|sync|lifecycle|sweep
    AgentId agent;         // acting agent (receiver for evaluate, a for sync)
    AgentId peer;          // counterparty where applicable
    CmbKey key;
    CmbKey parent;         // observe: lineage parent (validation blocks)
    std::string label;     // decision / peer class / lifecycle state
    double drift = 0.0;    // evaluate: total drift; sync: drift before blend
    double drift_after = 0.0;   // sync only
    double alpha_eff = 0.0;     // sync only
    double freshness = 0.0;     // evaluate only
    FieldMap<double> field_drift{};
    CmbKey remix_key;
    bool mood_delivered = false;
    double valence = 0.0;       // mood_delivery only
    double arousal = 0.0;
    std::vector<CmbKey> purged;  // sweep only
};

struct Trace {
    std::vector<TraceEvent> events;
};

std::string trace_to_json_lines(const Trace& trace);

struct SimResult {
    Trace trace;
    std::map<AgentId, MemoryStore> stores;
    std::map<AgentId, HiddenState> states;
};

// Throws ConfigError / SchemaError for invalid configs or scenario
// references to unknown agents.
SimResult run_simulation(const SimConfig& config);

struct PairDriftPoint {
    Timestamp t = 0;
    double before = 0.0;
    double after = 0.0;
};

struct TraceSummary {
    std::map<std::string, std::vector<PairDriftPoint>> pair_drift;  // "a|b"
    std::map<std::string, std::size_t> decision_counts;
    std::map<std::size_t, std::size_t> lineage_depth_histogram;
    std::size_t max_lineage_depth = 0;
    std::size_t mood_delivered_count = 0;
    std::map<std::string, std::size_t> final_lifecycle_counts;
    std::size_t stored_cmbs = 0;
    std::size_t purged_cmbs = 0;
    std::size_t live_cmbs = 0;
};

TraceSummary summarize(const Trace& trace);
std::string summary_to_json(const TraceSummary& summary);

// Stratified per-neuron time constants: one third per coupling regime
// (fast < 5s, medium 5-30s, slow 30-120s), log-uniform within a regime.
Vec make_tau_vector(std::size_t dim, std::uint64_t seed);

// Initial hidden state: uniform coordinates in [-1, 1], so fresh peers start
// near drift 1.
Vec make_initial_state(std::size_t dim, std::uint64_t seed);

// Convenience loader for the CLI: agents are derived from the scenario's
// distinct agent types looked up in the profile map.
SimConfig make_sim_config(const Narrative& scenario,
                          const std::map<std::string, AgentProfile>& profiles,
                          std::uint64_t seed, Timestamp duration,
                          Timestamp sync_interval);

}  // namespace meshfuse
