#include "meshfuse/cmb.hpp"

#include <algorithm>
#include <cstdio>

#include "meshfuse/encoder.hpp"

namespace meshfuse {

CmbKey make_key(Timestamp t_seconds, std::uint64_t entropy_hi, std::uint16_t entropy_lo) {
    const std::uint64_t ms = static_cast<std::uint64_t>(t_seconds) * 1000ULL;
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%012llx%016llx%04x",
                  static_cast<unsigned long long>(ms & 0xFFFFFFFFFFFFULL),
                  static_cast<unsigned long long>(entropy_hi),
                  static_cast<unsigned>(entropy_lo));
    return CmbKey(buf);
}

CmbKey derive_key(Timestamp t_seconds, std::string_view seed_material) {
    const std::uint64_t h1 = fnv1a64(seed_material);
    std::string second(seed_material);
    second.push_back('#');
    const std::uint64_t h2 = fnv1a64(second);
    return make_key(t_seconds, h1, static_cast<std::uint16_t>(h2 & 0xFFFF));
}

double lifecycle_weight(LifecycleState s) {
    switch (s) {
        case LifecycleState::observed: return 1.0;
        case LifecycleState::remixed: return 1.5;
        case LifecycleState::validated: return 2.0;
        case LifecycleState::canonical: return 3.0;
        case LifecycleState::archived: return 0.5;
    }
    return 1.0;
}

std::string_view lifecycle_name(LifecycleState s) {
    switch (s) {
        case LifecycleState::observed: return "observed";
        case LifecycleState::remixed: return "remixed";
        case LifecycleState::validated: return "validated";
        case LifecycleState::canonical: return "canonical";
        case LifecycleState::archived: return "archived";
    }
    return "?";
}

LifecycleState lifecycle_from_name(std::string_view name) {
    for (LifecycleState s : {LifecycleState::observed, LifecycleState::remixed,
                             LifecycleState::validated, LifecycleState::canonical,
                             LifecycleState::archived}) {
        if (lifecycle_name(s) == name) return s;
    }
    throw SchemaError("unknown lifecycle state: " + std::string(name));
}

int lifecycle_rank(LifecycleState s) {
    switch (s) {
        case LifecycleState::archived: return 0;
        case LifecycleState::observed: return 1;
        case LifecycleState::remixed: return 2;
        case LifecycleState::validated: return 3;
        case LifecycleState::canonical: return 4;
    }
    return 0;
}

void validate_cmb(const Cmb& cmb, std::size_t dim) {
    if (cmb.key.empty()) throw SchemaError("cmb: empty key");
    if (cmb.origin_agent.empty()) throw SchemaError("cmb: empty origin agent");
    if (!(cmb.confidence >= 0.0 && cmb.confidence <= 1.0)) {
        throw SchemaError("cmb: confidence out of [0,1]");
    }
    for (FieldId f : kAllFields) {
        const FieldEntry& e = cmb.fields[field_index(f)];
        if (e.vector.size() != dim) {
            throw SchemaError("cmb: field dimension mismatch on " +
                              std::string(field_name(f)));
        }
        if (!is_unit(e.vector)) {
            throw SchemaError("cmb: field vector not unit norm on " +
                              std::string(field_name(f)));
        }
        const bool is_mood = f == FieldId::mood;
        if (e.affect.has_value() != is_mood) {
            throw SchemaError("cmb: valence/arousal present iff field is mood");
        }
        if (is_mood) {
            const Affect& a = *e.affect;
            if (a.valence < -1.0 || a.valence > 1.0 || a.arousal < -1.0 ||
                a.arousal > 1.0) {
                throw SchemaError("cmb: valence/arousal out of [-1,1]");
            }
        }
    }
    for (std::size_t i = 0; i < cmb.lineage.parents.size(); ++i) {
        if (cmb.lineage.parents[i] == cmb.key) {
            throw SchemaError("cmb: self-referencing lineage");
        }
        for (std::size_t j = i + 1; j < cmb.lineage.parents.size(); ++j) {
            if (cmb.lineage.parents[i] == cmb.lineage.parents[j]) {
                throw SchemaError("cmb: duplicate parent key");
            }
        }
    }
}

bool mood_is_nonneutral(const Cmb& cmb) {
    const FieldEntry& mood = cmb.fields[field_index(FieldId::mood)];
    if (mood.affect.has_value() &&
        std::abs(mood.affect->valence) + std::abs(mood.affect->arousal) > 0.0) {
        return true;
    }
    return Encoder::normalize_text(mood.text) != "neutral";
}

}  // namespace meshfuse
