#pragma once
// Narrative scenarios: timestamped multi-agent signal sequences. The same
// JSON format drives both the mesh simulator and the training-sample
// generator. Field extraction here is the heuristic tier (keyword and
// position rules, confidence 0.80); an LLM tier exists only as an interface
// so callers can plug one in.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meshfuse/cmb.hpp"
#include "meshfuse/field.hpp"

namespace meshfuse {

enum class SignalAction : std::uint8_t { observe, validate, rebroadcast };

struct Signal {
    Timestamp t_offset = 0;   // seconds from narrative start, strictly increasing
    std::string agent_type;   // sender profile name, e.g. "coding"
    std::string text;
    std::string mood;         // label, e.g. "frustrated"; empty = neutral
    std::string energy;       // "low" / "moderate" / "high"; may be empty
    SignalAction action = SignalAction::observe;
};

struct Narrative {
    std::string name;
    std::string description;
    std::vector<Signal> signals;  // 4..10 entries for corpus narratives
    std::string outcome;
};

// Parses one narrative/scenario document; validates monotone t_offsets.
Narrative narrative_from_json(const std::string& json_text);
std::string narrative_to_json(const Narrative& narrative);

// Reads every *.json narrative in a directory, sorted by filename.
std::vector<Narrative> load_narratives(const std::string& dir);

struct ExtractedFields {
    std::map<FieldId, std::string> texts;  // absent entries mean neutral
    Affect mood_affect;
    double confidence = 0.0;  // extraction-tier confidence
};

// Extraction interface. The bundled implementation is the heuristic tier;
// the LLM tier is a declared stub that reports itself unavailable.
class FieldExtractor {
public:
    virtual ~FieldExtractor() = default;
    virtual bool available() const = 0;
    virtual ExtractedFields extract(const Signal& signal) const = 0;
};

class HeuristicExtractor final : public FieldExtractor {
public:
    bool available() const override { return true; }
    ExtractedFields extract(const Signal& signal) const override;
};

// Placeholder for model-backed extraction; always unavailable here.
class LlmExtractor final : public FieldExtractor {
public:
    bool available() const override { return false; }
    ExtractedFields extract(const Signal& signal) const override;
};

// Two-tier dispatch: the llm tier when available, else the heuristic tier.
ExtractedFields extract_fields(const Signal& signal,
                               const FieldExtractor* llm_tier = nullptr);

// Valence/arousal for a mood label ("frustrated", "calm", ...), adjusted by
// the energy label; unknown labels map to neutral (0, 0).
Affect mood_affect_for(const std::string& mood_label, const std::string& energy_label);

}  // namespace meshfuse
