#pragma once
// The fixed 7-field schema shared by every memory block. The declaration
// order is the canonical serialization order and must never change.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "meshfuse/errors.hpp"
#include "meshfuse/vec.hpp"

namespace meshfuse {

enum class FieldId : std::uint8_t {
    focus = 0,
    issue,
    intent,
    motivation,
    commitment,
    perspective,
    mood,
};

inline constexpr std::size_t kFieldCount = 7;

inline constexpr std::array<FieldId, kFieldCount> kAllFields = {
    FieldId::focus,      FieldId::issue,       FieldId::intent,
    FieldId::motivation, FieldId::commitment,  FieldId::perspective,
    FieldId::mood,
};

constexpr std::size_t field_index(FieldId f) {
    return static_cast<std::size_t>(f);
}

constexpr std::string_view field_name(FieldId f) {
    switch (f) {
        case FieldId::focus: return "focus";
        case FieldId::issue: return "issue";
        case FieldId::intent: return "intent";
        case FieldId::motivation: return "motivation";
        case FieldId::commitment: return "commitment";
        case FieldId::perspective: return "perspective";
        case FieldId::mood: return "mood";
    }
    return "?";
}

inline FieldId field_from_name(std::string_view name) {
    for (FieldId f : kAllFields) {
        if (field_name(f) == name) return f;
    }
    throw SchemaError("unknown field name: " + std::string(name));
}

// Valence/arousal coordinates carried only by the mood field.
struct Affect {
    double valence = 0.0;  // [-1, 1]
    double arousal = 0.0;  // [-1, 1]
};

// One field of a memory block: symbolic text plus unit-norm vector.
struct FieldEntry {
    std::string text;
    Vec vector;
    std::optional<Affect> affect;  // present iff field is mood
};

// Fixed-size per-field table keyed by FieldId, iterated in schema order.
template <typename T>
using FieldMap = std::array<T, kFieldCount>;

}  // namespace meshfuse
