#pragma once
// Cognitive memory block: an immutable 7-field observation with text+vector
// per field, provenance lineage, and a time-ordered 128-bit key.

#include <cstdint>
#include <string>
#include <vector>

#include "meshfuse/field.hpp"

namespace meshfuse {

using CmbKey = std::string;  // 32 lowercase hex chars, sorts by creation time
using AgentId = std::string;
using Timestamp = std::int64_t;  // seconds since epoch (simulated or real)

// 48-bit millisecond timestamp followed by 80 bits of entropy, rendered as
// lowercase hex. Lexicographic order over keys equals time order.
CmbKey make_key(Timestamp t_seconds, std::uint64_t entropy_hi, std::uint16_t entropy_lo);

// Entropy derived from content, so block creation needs no RNG and replays
// deterministically.
CmbKey derive_key(Timestamp t_seconds, std::string_view seed_material);

struct Lineage {
    std::vector<CmbKey> parents;  // empty for an original observation
    std::string method;           // fusion method label, e.g. "SVAF-v1"
};

struct Cmb {
    CmbKey key;
    AgentId origin_agent;
    Timestamp timestamp = 0;
    double confidence = 0.0;  // [0, 1]
    FieldMap<FieldEntry> fields;
    Lineage lineage;
};

enum class LifecycleState : std::uint8_t {
    observed,
    remixed,
    validated,
    canonical,
    archived,
};

// Influence multiplier a block contributes when used as a fusion anchor.
double lifecycle_weight(LifecycleState s);

std::string_view lifecycle_name(LifecycleState s);
LifecycleState lifecycle_from_name(std::string_view name);

// Row order used for the activity-monotonicity rule (archived is the decay
// state below observed).
int lifecycle_rank(LifecycleState s);

// Structural validity: all 7 fields present with matching dimension and
// unit-norm vectors, affect only on mood, confidence in range, no duplicate
// or self-referencing parents. Throws SchemaError.
void validate_cmb(const Cmb& cmb, std::size_t dim);

// True when the mood field carries signal: text other than "neutral" or a
// nonzero valence/arousal pair.
bool mood_is_nonneutral(const Cmb& cmb);

}  // namespace meshfuse
