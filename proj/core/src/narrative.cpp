#include "meshfuse/narrative.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "meshfuse/encoder.hpp"
#include "meshfuse/errors.hpp"
#include "meshfuse/svaf.hpp"

namespace meshfuse {

Narrative narrative_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw SchemaError("narrative: invalid JSON");
    Narrative n;
    n.name = j.at("name").get<std::string>();
    n.description = j.value("description", "");
    n.outcome = j.value("outcome", "");
    Timestamp prev = -1;
    for (const auto& js : j.at("signals")) {
        Signal s;
        s.t_offset = js.at("t").get<Timestamp>();
        s.agent_type = js.at("agent").get<std::string>();
        s.text = js.value("text", "");
        s.mood = js.value("mood", "");
        s.energy = js.value("energy", "");
        const std::string action = js.value("action", "observe");
        if (action == "validate") {
            s.action = SignalAction::validate;
        } else if (action == "rebroadcast") {
            s.action = SignalAction::rebroadcast;
        } else if (action == "observe") {
            s.action = SignalAction::observe;
        } else {
            throw SchemaError("narrative: unknown action " + action);
        }
        if (s.t_offset <= prev) {
            throw SchemaError("narrative: t offsets must be strictly increasing");
        }
        prev = s.t_offset;
        n.signals.push_back(std::move(s));
    }
    return n;
}

std::string narrative_to_json(const Narrative& narrative) {
    nlohmann::ordered_json j;
    j["name"] = narrative.name;
    if (!narrative.description.empty()) j["description"] = narrative.description;
    j["signals"] = nlohmann::ordered_json::array();
    for (const Signal& s : narrative.signals) {
        nlohmann::ordered_json js;
        js["t"] = s.t_offset;
        js["agent"] = s.agent_type;
        js["text"] = s.text;
        if (!s.mood.empty()) js["mood"] = s.mood;
        if (!s.energy.empty()) js["energy"] = s.energy;
        if (s.action == SignalAction::validate) js["action"] = "validate";
        if (s.action == SignalAction::rebroadcast) js["action"] = "rebroadcast";
        j["signals"].push_back(std::move(js));
    }
    if (!narrative.outcome.empty()) j["outcome"] = narrative.outcome;
    return j.dump(2);
}

std::vector<Narrative> load_narratives(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw ConfigError("narrative directory not found: " + dir);
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<Narrative> out;
    for (const fs::path& p : paths) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        out.push_back(narrative_from_json(ss.str()));
    }
    return out;
}

namespace {

struct MoodEntry {
    const char* label;
    double valence;
    double arousal;
};

// Circumplex-style lexicon for the labels used across the narrative corpus.
constexpr std::array<MoodEntry, 24> kMoodLexicon = {{
    {"neutral", 0.0, 0.0},       {"focused", 0.3, 0.4},
    {"frustrated", -0.6, 0.4},   {"stressed", -0.5, 0.6},
    {"calm", 0.3, -0.3},         {"relieved", 0.4, -0.1},
    {"tired", -0.4, -0.5},       {"exhausted", -0.5, -0.6},
    {"energized", 0.5, 0.6},     {"curious", 0.3, 0.4},
    {"concerned", -0.2, 0.3},    {"supportive", 0.3, -0.3},
    {"resolved", 0.3, 0.1},      {"urgent", -0.1, 0.7},
    {"anxious", -0.5, 0.5},      {"motivated", 0.5, 0.5},
    {"bored", -0.3, -0.4},       {"content", 0.4, -0.2},
    {"excited", 0.6, 0.7},       {"overwhelmed", -0.6, 0.6},
    {"protective", -0.2, 0.3},   {"restless", -0.3, 0.5},
    {"satisfied", 0.5, -0.1},    {"drained", -0.5, -0.6},
}};

bool contains_word(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

// Comma/period-delimited clause containing the first keyword match.
std::string matching_clause(const std::string& text,
                            const std::vector<std::string>& keywords) {
    const std::string lower = Encoder::normalize_text(text);
    for (const std::string& kw : keywords) {
        const auto pos = lower.find(kw);
        if (pos == std::string::npos) continue;
        std::size_t start = lower.find_last_of(",.;", pos);
        start = start == std::string::npos ? 0 : start + 1;
        std::size_t end = lower.find_first_of(",.;", pos);
        if (end == std::string::npos) end = lower.size();
        std::string clause = lower.substr(start, end - start);
        while (!clause.empty() && clause.front() == ' ') clause.erase(clause.begin());
        while (!clause.empty() && clause.back() == ' ') clause.pop_back();
        if (!clause.empty()) return clause;
    }
    return "";
}

std::string daypart(Timestamp t_offset) {
    // Narrative clocks start at 08:00.
    const std::int64_t hour = (8 + t_offset / 3600) % 24;
    if (hour < 5) return "night";
    if (hour < 12) return "morning";
    if (hour < 18) return "afternoon";
    if (hour < 22) return "evening";
    return "night";
}

}  // namespace

Affect mood_affect_for(const std::string& mood_label, const std::string& energy_label) {
    const std::string norm = Encoder::normalize_text(mood_label);
    Affect a{0.0, 0.0};
    bool matched = false;
    for (const MoodEntry& e : kMoodLexicon) {
        if (contains_word(norm, e.label)) {
            a.valence = e.valence;
            a.arousal = e.arousal;
            matched = true;
            break;
        }
    }
    if (!matched && !norm.empty() && norm != "neutral") {
        // Unknown but explicit mood: mild activation so it is not neutral.
        a.arousal = 0.1;
    }
    const std::string energy = Encoder::normalize_text(energy_label);
    if (energy == "low") {
        a.arousal = std::clamp(a.arousal - 0.5, -1.0, 1.0);
    } else if (energy == "high") {
        a.arousal = std::clamp(a.arousal + 0.2, -1.0, 1.0);
    }
    return a;
}

ExtractedFields HeuristicExtractor::extract(const Signal& signal) const {
    ExtractedFields out;
    out.confidence = kHeuristicTierConfidence;
    const std::string lower = Encoder::normalize_text(signal.text);

    if (!lower.empty()) {
        out.texts[FieldId::focus] = lower;
    }

    std::string issue = matching_clause(
        signal.text, {"error", "stall", "exhaust", "fatigue", "tired", "sedentary",
                      "no movement", "blocked", "blocker", "risk", "insomnia",
                      "stress", "declin", "slump", "disrupt", "pain", "anxi",
                      "overwhelm", "deadline", "skipping"});
    if (issue.empty() && Encoder::normalize_text(signal.energy) == "low") {
        issue = "low energy state";
    }
    if (!issue.empty()) out.texts[FieldId::issue] = issue;

    const std::string intent = matching_clause(
        signal.text, {"need", "recommend", "verify", "wants", "plan", "should",
                      "switch", "trying", "aim"});
    if (!intent.empty()) out.texts[FieldId::intent] = intent;

    std::string motivation = matching_clause(
        signal.text, {"prevent", "because", "to avoid", "so that", "goal",
                      "recover", "improve", "boost"});
    if (motivation.empty() && !signal.mood.empty() &&
        mood_affect_for(signal.mood, signal.energy).valence < 0.0) {
        motivation = "address " + Encoder::normalize_text(signal.mood) + " state";
    }
    if (!motivation.empty()) out.texts[FieldId::motivation] = motivation;

    const std::string commitment = matching_clause(
        signal.text, {"will ", "done", "ongoing", "recommended", "scheduled",
                      "sent", "completed", "started", "playing", "took"});
    if (!commitment.empty()) out.texts[FieldId::commitment] = commitment;

    out.texts[FieldId::perspective] =
        signal.agent_type + " agent view, " + daypart(signal.t_offset);

    if (!signal.mood.empty()) {
        out.texts[FieldId::mood] = signal.energy.empty()
                                       ? signal.mood
                                       : signal.mood + ", " + signal.energy + " energy";
    }
    out.mood_affect = mood_affect_for(signal.mood, signal.energy);
    return out;
}

ExtractedFields LlmExtractor::extract(const Signal&) const {
    throw ConfigError("LLM extraction tier is not available in this build");
}

ExtractedFields extract_fields(const Signal& signal, const FieldExtractor* llm_tier) {
    if (llm_tier != nullptr && llm_tier->available()) {
        ExtractedFields out = llm_tier->extract(signal);
        out.confidence = kLlmTierConfidence;
        return out;
    }
    static const HeuristicExtractor heuristic;
    return heuristic.extract(signal);
}

}  // namespace meshfuse
