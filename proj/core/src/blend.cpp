#include "meshfuse/blend.hpp"

#include <algorithm>
#include <cmath>

#include "meshfuse/errors.hpp"
#include "meshfuse/serialize.hpp"

namespace meshfuse {

std::string_view peer_class_name(PeerClass c) {
    switch (c) {
        case PeerClass::aligned: return "aligned";
        case PeerClass::guarded: return "guarded";
        case PeerClass::rejected: return "rejected";
    }
    return "?";
}

PeerCouplingDecision classify_peer(const Vec& h_local, const Vec& h_peer,
                                   const BlendConfig& config) {
    if (h_local.size() != h_peer.size()) {
        throw DimensionError("classify_peer: dimension mismatch");
    }
    PeerCouplingDecision d;
    d.drift = 1.0 - cosine(h_local, h_peer);
    if (d.drift <= config.aligned_threshold) {
        d.cls = PeerClass::aligned;
        d.alpha_eff = kAlignedAlpha;
    } else if (d.drift <= config.guarded_threshold) {
        d.cls = PeerClass::guarded;
        d.alpha_eff = kGuardedAlpha;
    } else {
        d.cls = PeerClass::rejected;
        d.alpha_eff = 0.0;
    }
    return d;
}

HiddenState blend_states(const HiddenState& local, const Vec& peer_h,
                         double alpha_eff, const BlendConfig& config) {
    if (local.h.size() != peer_h.size()) {
        throw DimensionError("blend_states: dimension mismatch");
    }
    HiddenState out = local;
    for (std::size_t i = 0; i < out.h.size(); ++i) {
        const double l = local.h[i];
        const double p = peer_h[i];
        const double denom = std::max(std::abs(l), std::abs(p));
        // Identical neurons (including the 0/0 case) are maximally similar.
        const double sim = denom == 0.0 ? 1.0 : std::max(1.0 - std::abs(l - p) / denom, 0.0);
        const double beta =
            std::min(alpha_eff * config.blend_rate_seconds * sim / local.tau[i], 1.0);
        out.h[i] = (1.0 - beta) * l + beta * p;
    }
    return out;
}

HiddenState ingest_state(const HiddenState& local,
                         const FieldMap<Vec>& accepted_fused_fields,
                         const FieldMap<bool>& accepted,
                         const AgentProfile& profile, Timestamp t_now) {
    Vec pooled(local.h.size(), 0.0);
    double alpha_sum = 0.0;
    bool any = false;
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        if (!accepted[i]) continue;
        const Vec& v = accepted_fused_fields[i];
        if (v.size() != local.h.size()) {
            throw DimensionError("ingest_state: field dimension != state dimension");
        }
        const double a = profile.alpha[i];
        for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += a * v[k];
        alpha_sum += a;
        any = true;
    }
    if (!any || alpha_sum <= 0.0) return local;
    for (double& x : pooled) x /= alpha_sum;
    pooled = normalized(std::move(pooled));

    HiddenState out = local;
    const double dt = static_cast<double>(std::max<Timestamp>(0, t_now - local.last_update));
    for (std::size_t i = 0; i < out.h.size(); ++i) {
        const double gamma = std::min(dt / local.tau[i], 1.0);
        out.h[i] = (1.0 - gamma) * local.h[i] + gamma * pooled[i];
    }
    out.last_update = t_now;
    return out;
}

std::string state_sync_json(const AgentId& agent, const HiddenState& state) {
    std::string out = "{\"agent\":\"" + json_escape(agent) + "\"";
    out += ",\"ts\":" + std::to_string(state.last_update);
    out += ",\"h\":[";
    for (std::size_t i = 0; i < state.h.size(); ++i) {
        if (i) out += ',';
        out += format_g9(state.h[i]);
    }
    out += "],\"tau\":[";
    for (std::size_t i = 0; i < state.tau.size(); ++i) {
        if (i) out += ',';
        out += format_g9(state.tau[i]);
    }
    out += "]}";
    return out;
}

}  // namespace meshfuse
