#pragma once
// Peer-level coupling and per-neuron state blending. Hidden states are
// opaque vectors with per-neuron time constants: fast neurons couple with
// peers readily, slow neurons stay sovereign.
//
// States are owned by one agent; blend/ingest are pure functions returning
// a new state, with peer states arriving as immutable snapshots.

#include <cstdint>
#include <string>

#include "meshfuse/cmb.hpp"
#include "meshfuse/svaf.hpp"
#include "meshfuse/vec.hpp"

namespace meshfuse {

struct HiddenState {
    Vec h;                    // cognitive state, default dimension 64
    Vec tau;                  // per-neuron time constants (seconds), > 0
    Timestamp last_update = 0;
};

enum class PeerClass : std::uint8_t { aligned, guarded, rejected };

std::string_view peer_class_name(PeerClass c);

struct PeerCouplingDecision {
    PeerClass cls = PeerClass::rejected;
    double alpha_eff = 0.0;  // 0.40 / 0.15 / 0.0
    double drift = 0.0;      // 1 - cos(h_local, h_peer), in [0, 2]
};

struct BlendConfig {
    double blend_rate_seconds = 5.0;  // K: scales per-neuron coupling speed
    double aligned_threshold = 0.25;
    double guarded_threshold = 0.50;
};

inline constexpr double kAlignedAlpha = 0.40;
inline constexpr double kGuardedAlpha = 0.15;

// Cosine drift between two hidden states; symmetric in its arguments.
PeerCouplingDecision classify_peer(const Vec& h_local, const Vec& h_peer,
                                   const BlendConfig& config = {});

// Per-neuron blend toward the peer snapshot:
//   sim_i  = max(1 - |l - p| / max(|l|, |p|), 0)   (both zero -> 1)
//   beta_i = min(alpha_eff * K * sim_i / tau_i, 1)
//   h_i    = (1 - beta_i) * l + beta_i * p
HiddenState blend_states(const HiddenState& local, const Vec& peer_h,
                         double alpha_eff, const BlendConfig& config = {});

// Pulls the state toward the alpha-weighted mean of accepted fused field
// vectors. Per neuron the pull rate is min(dt_since_update / tau_i, 1).
// Stand-in for the synthetic-memory encoding stage; deterministic.
HiddenState ingest_state(const HiddenState& local,
                         const FieldMap<Vec>& accepted_fused_fields,
                         const FieldMap<bool>& accepted,
                         const AgentProfile& profile, Timestamp t_now);

// State-sync record: {"agent":...,"ts":...,"h":[...],"tau":[...]}.
std::string state_sync_json(const AgentId& agent, const HiddenState& state);

}  // namespace meshfuse
