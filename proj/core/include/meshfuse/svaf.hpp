#pragma once
// Heuristic per-field evaluation and fusion. An incoming block is fused
// field-by-field against local anchors; per-field drift feeds a band-pass
// decision (redundant / aligned / guarded / rejected), and accepted signals
// produce a remix block with lineage back to the incoming key.
//
// Pure evaluation over an immutable store snapshot: the single store writer
// applies the resulting remix; many incoming blocks may be evaluated
// concurrently against the same snapshot.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meshfuse/cmb.hpp"
#include "meshfuse/encoder.hpp"
#include "meshfuse/store.hpp"

namespace meshfuse {

enum class AgentRole : std::uint8_t { observer, validator, anchor };

std::string_view role_name(AgentRole r);
AgentRole role_from_name(std::string_view name);

struct AgentProfile {
    AgentId agent_id;
    FieldMap<double> alpha{};        // per-field weights, at least one > 0
    double tau_freshness = 3600.0;   // seconds, > 0
    double default_confidence = 0.9; // confidence assigned to remixes
    AgentRole role = AgentRole::observer;
    int anchor_k = 5;

    bool may_validate() const {
        return role == AgentRole::validator || role == AgentRole::anchor;
    }
};

struct Thresholds {
    double redundant = 0.10;
    double aligned = 0.25;
    double guarded = 0.50;
};

// Weight applied to the staleness term of aggregate drift.
inline constexpr double kStaleWeight = 0.25;
// Anchor attenuation factor applied before re-fusing a guarded signal.
inline constexpr double kGuardedAttenuation = 0.5;
// Sender confidence by extraction tier.
inline constexpr double kLlmTierConfidence = 0.95;
inline constexpr double kHeuristicTierConfidence = 0.80;

enum class Decision : std::uint8_t { redundant, aligned, guarded, rejected };

std::string_view decision_name(Decision d);

// exp(-(t_now - t_origin) / tau). Throws ClockSkewError when t_now < t_origin.
double temporal_freshness(Timestamp t_now, Timestamp t_origin, double tau_seconds);

struct AnchorView {
    const FieldEntry* entry = nullptr;  // anchor's entry for the field
    Timestamp t_origin = 0;
    double confidence = 0.0;
    double lifecycle_weight = 1.0;
    CmbKey key;
    const std::string* text = nullptr;
};

struct FieldAudit {
    double w_new = 0.0;
    std::vector<double> anchor_weights;
    std::vector<CmbKey> anchor_keys;
    bool no_anchors = false;
};

struct FieldFusion {
    Vec fused;
    double drift = 0.0;  // 1 - cos(fused, incoming)
    FieldAudit audit;
};

// Ratio-form weighted average of incoming and anchor vectors, renormalized.
// Scaling the whole weight list by a positive constant leaves it unchanged.
Vec weighted_fuse(const Vec& incoming, const std::vector<const Vec*>& anchors,
                  double w_new, const std::vector<double>& weights);

// Anchor weight: alpha_f * max(cos, 0) * freshness * confidence * lifecycle.
FieldFusion fuse_field(FieldId field, const FieldEntry& incoming,
                       const std::vector<AnchorView>& anchors,
                       const AgentProfile& profile, double sender_confidence,
                       Timestamp t_now);

// Band-pass decision. Aggregate drift is the alpha-weighted mean of field
// drifts plus a staleness penalty (1 - freshness) * kStaleWeight, clamped
// to [0,1]. Redundant requires every field below the redundant threshold.
struct Classification {
    Decision decision;
    double total_drift;
};

Classification classify(const FieldMap<double>& per_field_drift,
                        const AgentProfile& profile, double tau_fresh,
                        const Thresholds& thresholds);

struct FusionOutcome {
    Decision decision = Decision::rejected;
    FieldMap<double> per_field_drift{};
    double total_drift = 0.0;
    FieldMap<Vec> fused;
    double freshness = 1.0;
    FieldMap<FieldAudit> audit;
    bool mood_delivered = false;  // rejected signal whose mood still crossed
    std::optional<Cmb> remix;     // present iff aligned or guarded
};

struct AnchorCandidate {
    const StoreRecord* record = nullptr;
    double score = 0.0;
};

// Top-k anchors by lifecycle_weight * exp(-age / tau), ties broken by key.
std::vector<const StoreRecord*> retrieve_anchors(const MemoryStore& store,
                                                 const AgentProfile& profile,
                                                 Timestamp t_now, int k);

// Full evaluation pipeline: retrieve anchors, fuse all 7 fields, classify,
// and build the remix for accepted signals. Pure function of its inputs.
FusionOutcome evaluate_cmb(const MemoryStore& receiver_store,
                           const AgentProfile& profile, const Cmb& incoming,
                           Timestamp t_now, const Thresholds& thresholds,
                           const Encoder& encoder);

// One-line JSON audit record for an evaluation (decision, drifts, weights).
std::string audit_json(const FusionOutcome& outcome);

}  // namespace meshfuse
