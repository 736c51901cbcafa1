#pragma once
// Synthetic training-sample generation: each narrative signal is paired with
// every non-sender agent type, labeled for usefulness by domain rules, for
// freshness by the receiver's decay window, and for per-field drift against
// the receiver's domain prototype. Generation is deterministic under a seed
// and embarrassingly parallel across narratives; output order is fixed by
// (narrative name, signal index, receiver id).

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meshfuse/encoder.hpp"
#include "meshfuse/narrative.hpp"
#include "meshfuse/svaf.hpp"

namespace meshfuse {

struct LabelRule {
    std::string sender;    // agent type or "*"
    std::string receiver;  // agent type or "*"
    std::string tag;       // content tag or "*"
    double p = 0.0;        // usefulness probability
};

struct LabelRules {
    double fresh_cut = 0.5;              // tau_fresh >= cut counts as fresh
    double reject_prob = 0.7;            // not-useful -> rejected with this p
    double useful_freshness_mix = 0.5;   // staleness discount on usefulness p
    double default_p = 0.3;              // fallback usefulness probability
    std::vector<LabelRule> rules;        // first match wins
};

LabelRules label_rules_from_json(const std::string& json_text);
LabelRules load_label_rules(const std::string& path);

// Ordered content tags found in a signal (energy, stress, sedentary, ...).
std::vector<std::string> signal_tags(const Signal& signal);

// Effective usefulness probability for one sender/receiver/signal triple.
double usefulness_probability(const LabelRules& rules, const std::string& sender,
                              const std::string& receiver, const Signal& signal,
                              double tau_fresh);

// Receiver domain prototype: alpha-weighted mean of the encoded canonical
// phrases declared per field, renormalized.
Vec receiver_prototype(const FieldMap<std::string>& canonical_phrases,
                       const AgentProfile& profile, const Encoder& encoder);

using PrototypePhrases = std::map<std::string, FieldMap<std::string>>;

PrototypePhrases prototype_phrases_from_json(const std::string& json_text);
PrototypePhrases load_prototype_phrases(const std::string& path);

struct Sample {
    std::string narrative;
    std::size_t signal_index = 0;
    std::string sender_type;
    std::string receiver_type;
    FieldMap<std::string> field_texts;
    FieldMap<Vec> field_vectors;
    double tau_fresh = 1.0;
    double useful_p = 0.0;    // probability the label rule produced
    double useful_draw = 0.0; // uniform draw compared against useful_p
    bool useful = false;
    double reject_draw = -1.0;  // only drawn for not-useful samples
    int decision = 0;           // 0 aligned, 1 guarded, 2 rejected
    std::array<double, kFieldCount> drift_labels{};
};

struct DatasetStats {
    std::size_t sample_count = 0;
    std::array<std::size_t, 3> class_counts{};
    std::size_t train_count = 0;
    std::size_t val_count = 0;
};

struct Dataset {
    std::vector<Sample> samples;  // every sample, train and validation
    std::vector<std::string> train_narratives;
    std::vector<std::string> val_narratives;
    DatasetStats stats;
};

// Profiles are keyed by agent type; every signal's type must be present.
Dataset generate_samples(const std::vector<Narrative>& narratives,
                         const LabelRules& rules,
                         const std::map<std::string, AgentProfile>& profiles,
                         const PrototypePhrases& prototypes, std::uint64_t seed,
                         const Encoder& encoder);

std::string sample_to_json(const Sample& sample);

// Writes train.jsonl, val.jsonl, and stats.json into out_dir.
void write_dataset(const Dataset& dataset, const std::string& out_dir);

// Re-derives the decision label from the recorded draws; used to check that
// every emitted label follows the rules exactly.
int rederive_decision(const LabelRules& rules, const Sample& sample);

}  // namespace meshfuse
