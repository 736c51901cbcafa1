#include "meshfuse/svaf.hpp"

#include <algorithm>
#include <cmath>

#include "meshfuse/errors.hpp"
#include "meshfuse/serialize.hpp"

namespace meshfuse {

std::string_view role_name(AgentRole r) {
    switch (r) {
        case AgentRole::observer: return "observer";
        case AgentRole::validator: return "validator";
        case AgentRole::anchor: return "anchor";
    }
    return "?";
}

AgentRole role_from_name(std::string_view name) {
    for (AgentRole r : {AgentRole::observer, AgentRole::validator, AgentRole::anchor}) {
        if (role_name(r) == name) return r;
    }
    throw SchemaError("unknown role: " + std::string(name));
}

std::string_view decision_name(Decision d) {
    switch (d) {
        case Decision::redundant: return "redundant";
        case Decision::aligned: return "aligned";
        case Decision::guarded: return "guarded";
        case Decision::rejected: return "rejected";
    }
    return "?";
}

double temporal_freshness(Timestamp t_now, Timestamp t_origin, double tau_seconds) {
    if (tau_seconds <= 0.0) throw ConfigError("temporal_freshness: tau must be > 0");
    if (t_now < t_origin) {
        throw ClockSkewError("temporal_freshness: t_now precedes t_origin");
    }
    return std::exp(-static_cast<double>(t_now - t_origin) / tau_seconds);
}

Vec weighted_fuse(const Vec& incoming, const std::vector<const Vec*>& anchors,
                  double w_new, const std::vector<double>& weights) {
    double total = w_new;
    for (double w : weights) total += w;
    Vec acc(incoming.size(), 0.0);
    for (std::size_t i = 0; i < incoming.size(); ++i) acc[i] = w_new * incoming[i];
    for (std::size_t j = 0; j < anchors.size(); ++j) {
        const Vec& a = *anchors[j];
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weights[j] * a[i];
    }
    if (total > 0.0) {
        for (double& x : acc) x /= total;
    }
    return normalized(std::move(acc));
}

FieldFusion fuse_field(FieldId field, const FieldEntry& incoming,
                       const std::vector<AnchorView>& anchors,
                       const AgentProfile& profile, double sender_confidence,
                       Timestamp t_now) {
    FieldFusion out;
    if (anchors.empty()) {
        out.fused = incoming.vector;
        out.drift = 0.0;
        out.audit.w_new = sender_confidence;
        out.audit.no_anchors = true;
        return out;
    }

    const double alpha = profile.alpha[field_index(field)];
    std::vector<const Vec*> vecs;
    std::vector<double> weights;
    vecs.reserve(anchors.size());
    weights.reserve(anchors.size());
    out.audit.w_new = sender_confidence;
    for (const AnchorView& a : anchors) {
        if (a.entry->vector.size() != incoming.vector.size()) {
            throw DimensionError("fuse_field: anchor dimension mismatch");
        }
        const double sim = std::max(cosine(incoming.vector, a.entry->vector), 0.0);
        const double fresh = temporal_freshness(t_now, a.t_origin, profile.tau_freshness);
        const double w = alpha * sim * fresh * a.confidence * a.lifecycle_weight;
        vecs.push_back(&a.entry->vector);
        weights.push_back(w);
        out.audit.anchor_weights.push_back(w);
        out.audit.anchor_keys.push_back(a.key);
    }
    out.fused = weighted_fuse(incoming.vector, vecs, sender_confidence, weights);
    out.drift = 1.0 - cosine(out.fused, incoming.vector);
    return out;
}

Classification classify(const FieldMap<double>& per_field_drift,
                        const AgentProfile& profile, double tau_fresh,
                        const Thresholds& thresholds) {
    double weighted = 0.0;
    double alpha_sum = 0.0;
    double max_drift = 0.0;
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        weighted += profile.alpha[i] * per_field_drift[i];
        alpha_sum += profile.alpha[i];
        max_drift = std::max(max_drift, per_field_drift[i]);
    }
    double total = alpha_sum > 0.0 ? weighted / alpha_sum : 0.0;
    total += (1.0 - tau_fresh) * kStaleWeight;
    total = std::clamp(total, 0.0, 1.0);

    Decision d;
    if (max_drift < thresholds.redundant) {
        d = Decision::redundant;
    } else if (total <= thresholds.aligned) {
        d = Decision::aligned;
    } else if (total <= thresholds.guarded) {
        d = Decision::guarded;
    } else {
        d = Decision::rejected;
    }
    return {d, total};
}

std::vector<const StoreRecord*> retrieve_anchors(const MemoryStore& store,
                                                 const AgentProfile& profile,
                                                 Timestamp t_now, int k) {
    std::vector<std::pair<double, const StoreRecord*>> scored;
    scored.reserve(store.size());
    for (const auto& [key, rec] : store.records()) {
        const double age = static_cast<double>(std::max<Timestamp>(0, t_now - rec.cmb.timestamp));
        const double score =
            lifecycle_weight(rec.state) * std::exp(-age / profile.tau_freshness);
        scored.emplace_back(score, &rec);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->cmb.key < b.second->cmb.key;
    });
    std::vector<const StoreRecord*> out;
    const std::size_t n = std::min<std::size_t>(k < 0 ? 0 : k, scored.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
    return out;
}

namespace {

// Index of the heaviest anchor in the audit, or -1 when none carries weight.
int dominant_anchor(const FieldAudit& audit) {
    int best = -1;
    double best_w = 0.0;
    for (std::size_t j = 0; j < audit.anchor_weights.size(); ++j) {
        if (audit.anchor_weights[j] > best_w) {
            best_w = audit.anchor_weights[j];
            best = static_cast<int>(j);
        }
    }
    return best;
}

double anchor_share(const FieldAudit& audit) {
    double sum = 0.0;
    for (double w : audit.anchor_weights) sum += w;
    const double total = audit.w_new + sum;
    return total > 0.0 ? sum / total : 0.0;
}

Cmb build_remix(const Cmb& incoming, const AgentProfile& profile, Timestamp t_now,
                const FusionOutcome& outcome,
                const std::vector<const StoreRecord*>& anchors) {
    Cmb remix;
    remix.origin_agent = profile.agent_id;
    remix.timestamp = t_now;
    remix.confidence = profile.default_confidence;
    remix.lineage.parents = {incoming.key};
    remix.lineage.method = "SVAF-v1";

    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        const FieldEntry& in = incoming.fields[i];
        FieldEntry& e = remix.fields[i];
        e.vector = outcome.fused[i];

        const FieldAudit& audit = outcome.audit[i];
        const int dom = dominant_anchor(audit);
        if (anchor_share(audit) > 0.5 && dom >= 0) {
            e.text = anchors[dom]->cmb.fields[i].text;
        } else {
            e.text = profile.agent_id + " remix of " + in.text;
        }

        if (f == FieldId::mood) {
            Affect blended = in.affect.value_or(Affect{});
            if (dom >= 0) {
                const Cmb& anchor_cmb = anchors[dom]->cmb;
                const Affect anchor_affect =
                    anchor_cmb.fields[i].affect.value_or(Affect{});
                const double c_in = incoming.confidence;
                const double c_an = anchor_cmb.confidence;
                if (c_in + c_an > 0.0) {
                    blended.valence = (c_in * blended.valence + c_an * anchor_affect.valence) /
                                      (c_in + c_an);
                    blended.arousal = (c_in * blended.arousal + c_an * anchor_affect.arousal) /
                                      (c_in + c_an);
                }
            }
            blended.valence = std::clamp(blended.valence, -1.0, 1.0);
            blended.arousal = std::clamp(blended.arousal, -1.0, 1.0);
            e.affect = blended;
        }
    }
    remix.key = derive_key(t_now, profile.agent_id + "|" + incoming.key + "|SVAF-v1");
    return remix;
}

}  // namespace

FusionOutcome evaluate_cmb(const MemoryStore& receiver_store,
                           const AgentProfile& profile, const Cmb& incoming,
                           Timestamp t_now, const Thresholds& thresholds,
                           const Encoder& encoder) {
    validate_cmb(incoming, encoder.dim());

    FusionOutcome out;
    out.freshness = temporal_freshness(t_now, incoming.timestamp, profile.tau_freshness);

    const double sender_confidence = incoming.confidence;
    const std::vector<const StoreRecord*> anchors =
        retrieve_anchors(receiver_store, profile, t_now, profile.anchor_k);

    if (anchors.empty()) {
        // Cold store: no local memory to test redundancy against. The signal
        // is accepted as-is so first contact can bootstrap the mesh.
        for (FieldId f : kAllFields) {
            const std::size_t i = field_index(f);
            out.fused[i] = incoming.fields[i].vector;
            out.per_field_drift[i] = 0.0;
            out.audit[i].w_new = sender_confidence;
            out.audit[i].no_anchors = true;
        }
        out.total_drift = 0.0;
        out.decision = Decision::aligned;
        out.remix = build_remix(incoming, profile, t_now, out, anchors);
        return out;
    }

    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        std::vector<AnchorView> views;
        views.reserve(anchors.size());
        for (const StoreRecord* rec : anchors) {
            AnchorView v;
            v.entry = &rec->cmb.fields[i];
            v.t_origin = rec->cmb.timestamp;
            v.confidence = rec->cmb.confidence;
            v.lifecycle_weight = lifecycle_weight(rec->state);
            v.key = rec->cmb.key;
            views.push_back(v);
        }
        FieldFusion fusion =
            fuse_field(f, incoming.fields[i], views, profile, sender_confidence, t_now);
        out.fused[i] = std::move(fusion.fused);
        out.per_field_drift[i] = fusion.drift;
        out.audit[i] = std::move(fusion.audit);
    }

    const Classification cls =
        classify(out.per_field_drift, profile, out.freshness, thresholds);
    out.decision = cls.decision;
    out.total_drift = cls.total_drift;

    if (out.decision == Decision::guarded) {
        // Attenuated fusion: anchors pull with half strength; the audit keeps
        // the weights that produced the classification.
        for (FieldId f : kAllFields) {
            const std::size_t i = field_index(f);
            std::vector<const Vec*> vecs;
            std::vector<double> halved;
            for (std::size_t j = 0; j < anchors.size(); ++j) {
                vecs.push_back(&anchors[j]->cmb.fields[i].vector);
                halved.push_back(out.audit[i].anchor_weights[j] * kGuardedAttenuation);
            }
            out.fused[i] = weighted_fuse(incoming.fields[i].vector, vecs,
                                         out.audit[i].w_new, halved);
        }
    }

    if (out.decision == Decision::aligned || out.decision == Decision::guarded) {
        out.remix = build_remix(incoming, profile, t_now, out, anchors);
    } else if (out.decision == Decision::rejected) {
        out.mood_delivered = mood_is_nonneutral(incoming);
    }
    return out;
}

std::string audit_json(const FusionOutcome& outcome) {
    std::string out = "{\"decision\":\"" + std::string(decision_name(outcome.decision)) + "\"";
    out += ",\"drift\":{";
    bool first = true;
    for (FieldId f : kAllFields) {
        if (!first) out += ',';
        first = false;
        out += "\"" + std::string(field_name(f)) + "\":" +
               format_fixed(outcome.per_field_drift[field_index(f)], 3);
    }
    out += "},\"total_drift\":" + format_fixed(outcome.total_drift, 3);
    out += ",\"freshness\":" + format_fixed(outcome.freshness, 6);
    out += ",\"weights\":{";
    first = true;
    for (FieldId f : kAllFields) {
        const FieldAudit& a = outcome.audit[field_index(f)];
        if (!first) out += ',';
        first = false;
        out += "\"" + std::string(field_name(f)) + "\":{\"w_new\":" + format_g9(a.w_new);
        out += ",\"anchors\":[";
        for (std::size_t j = 0; j < a.anchor_weights.size(); ++j) {
            if (j) out += ',';
            out += format_g9(a.anchor_weights[j]);
        }
        out += ']';
        if (a.no_anchors) out += ",\"no_anchors\":true";
        out += '}';
    }
    out += '}';
    if (outcome.remix) {
        out += ",\"remix\":\"" + json_escape(outcome.remix->key) + "\"";
    }
    out += ",\"mood_delivered\":";
    out += outcome.mood_delivered ? "true" : "false";
    out += '}';
    return out;
}

}  // namespace meshfuse
