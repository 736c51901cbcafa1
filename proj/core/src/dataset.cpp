#include "meshfuse/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "meshfuse/errors.hpp"
#include "meshfuse/serialize.hpp"

namespace meshfuse {

LabelRules label_rules_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("label rules: invalid JSON");
    LabelRules r;
    r.fresh_cut = j.value("fresh_cut", r.fresh_cut);
    r.reject_prob = j.value("reject_prob", r.reject_prob);
    r.useful_freshness_mix = j.value("useful_freshness_mix", r.useful_freshness_mix);
    r.default_p = j.value("default_p", r.default_p);
    for (const auto& jr : j.value("rules", nlohmann::json::array())) {
        LabelRule rule;
        rule.sender = jr.value("sender", "*");
        rule.receiver = jr.value("receiver", "*");
        rule.tag = jr.value("tag", "*");
        rule.p = jr.at("p").get<double>();
        if (rule.p < 0.0 || rule.p > 1.0) {
            throw ConfigError("label rules: p out of [0,1]");
        }
        r.rules.push_back(std::move(rule));
    }
    return r;
}

LabelRules load_label_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open label rules: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return label_rules_from_json(ss.str());
}

namespace {

bool has_any(const std::string& lower, std::initializer_list<const char*> keywords) {
    for (const char* kw : keywords) {
        if (lower.find(kw) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> signal_tags(const Signal& signal) {
    std::vector<std::string> tags;
    const std::string lower = Encoder::normalize_text(signal.text);
    const std::string energy = Encoder::normalize_text(signal.energy);
    const std::string mood = Encoder::normalize_text(signal.mood);

    if (energy == "low" || energy == "high" ||
        has_any(lower, {"exhaust", "tired", "fatigue", "energ", "drained"}) ||
        has_any(mood, {"tired", "exhaust", "drained", "energized"})) {
        tags.push_back("energy");
    }
    if (has_any(lower, {"stress", "frustrat", "anxi", "overwhelm", "deadline", "spiral"}) ||
        has_any(mood, {"stress", "frustrat", "anxi", "overwhelm"})) {
        tags.push_back("stress");
    }
    if (has_any(lower, {"sedentary", "no movement", "sitting", "inactive"})) {
        tags.push_back("sedentary");
    }
    if (has_any(lower, {"track", "playlist", "ambient", "music", "song", "listening"})) {
        tags.push_back("music");
    }
    if (has_any(lower, {"coding", "code", "bug", "error", "build", "deploy", "review"})) {
        tags.push_back("code");
    }
    if (has_any(lower, {"paper", "arxiv", "research", "article", "feed", "digest"})) {
        tags.push_back("research");
    }
    if (has_any(lower, {"message", "chat", "meeting", "conversation", "call"})) {
        tags.push_back("social");
    }
    if (has_any(lower, {"workout", "stretch", "walk", "run", "exercise", "movement break"})) {
        tags.push_back("exercise");
    }
    tags.push_back("general");
    return tags;
}

double usefulness_probability(const LabelRules& rules, const std::string& sender,
                              const std::string& receiver, const Signal& signal,
                              double tau_fresh) {
    const std::vector<std::string> tags = signal_tags(signal);
    double p = rules.default_p;
    for (const LabelRule& rule : rules.rules) {
        if (rule.sender != "*" && rule.sender != sender) continue;
        if (rule.receiver != "*" && rule.receiver != receiver) continue;
        if (rule.tag != "*" &&
            std::find(tags.begin(), tags.end(), rule.tag) == tags.end()) {
            continue;
        }
        p = rule.p;
        break;
    }
    // Older signals are less likely useful.
    const double mix = rules.useful_freshness_mix;
    return p * ((1.0 - mix) + mix * tau_fresh);
}

Vec receiver_prototype(const FieldMap<std::string>& canonical_phrases,
                       const AgentProfile& profile, const Encoder& encoder) {
    Vec acc(encoder.dim(), 0.0);
    double alpha_sum = 0.0;
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        const double a = profile.alpha[i];
        const Vec v = encoder.encode(canonical_phrases[i]);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += a * v[k];
        alpha_sum += a;
    }
    if (alpha_sum > 0.0) {
        for (double& x : acc) x /= alpha_sum;
    }
    return normalized(std::move(acc));
}

PrototypePhrases prototype_phrases_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("prototypes: invalid JSON");
    PrototypePhrases out;
    for (const auto& [type, jf] : j.items()) {
        FieldMap<std::string> phrases;
        for (FieldId f : kAllFields) {
            phrases[field_index(f)] = jf.value(std::string(field_name(f)), "neutral");
        }
        out.emplace(type, std::move(phrases));
    }
    return out;
}

PrototypePhrases load_prototype_phrases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open prototypes: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return prototype_phrases_from_json(ss.str());
}

namespace {

// Per-sample RNG stream: independent of generation order.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double sample_uniform(std::uint64_t seed, const std::string& key, int stream) {
    std::uint64_t h = fnv1a64(key) ^ mix64(seed + static_cast<std::uint64_t>(stream));
    return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

int decide(const LabelRules& rules, bool useful, double tau_fresh, double reject_draw) {
    if (useful) {
        return tau_fresh >= rules.fresh_cut ? 0 : 1;
    }
    return reject_draw < rules.reject_prob ? 2 : 1;
}

}  // namespace

int rederive_decision(const LabelRules& rules, const Sample& sample) {
    const bool useful = sample.useful_draw < sample.useful_p;
    return decide(rules, useful, sample.tau_fresh, sample.reject_draw);
}

Dataset generate_samples(const std::vector<Narrative>& narratives,
                         const LabelRules& rules,
                         const std::map<std::string, AgentProfile>& profiles,
                         const PrototypePhrases& prototypes, std::uint64_t seed,
                         const Encoder& encoder) {
    Dataset out;

    // Prototype vectors per receiver type, built once.
    std::map<std::string, Vec> proto_vecs;
    for (const auto& [type, profile] : profiles) {
        auto it = prototypes.find(type);
        if (it != prototypes.end()) {
            proto_vecs.emplace(type, receiver_prototype(it->second, profile, encoder));
        }
    }

    std::set<std::string> train_set, val_set;
    for (const Narrative& narrative : narratives) {
        const bool is_val =
            sample_uniform(seed, "split|" + narrative.name, 0) < 0.15;
        (is_val ? val_set : train_set).insert(narrative.name);
        if (narrative.signals.empty()) continue;
        const Timestamp receipt_time = narrative.signals.back().t_offset;

        for (std::size_t si = 0; si < narrative.signals.size(); ++si) {
            const Signal& signal = narrative.signals[si];
            if (signal.action != SignalAction::observe) continue;
            if (!profiles.count(signal.agent_type)) {
                throw ConfigError("unknown agent type in narrative " + narrative.name +
                                  ": " + signal.agent_type);
            }
            const ExtractedFields extracted = extract_fields(signal);

            FieldMap<std::string> texts;
            FieldMap<Vec> vectors;
            for (FieldId f : kAllFields) {
                const std::size_t i = field_index(f);
                auto it = extracted.texts.find(f);
                texts[i] = (it == extracted.texts.end() ||
                            Encoder::normalize_text(it->second).empty())
                               ? "neutral"
                               : it->second;
                vectors[i] = encoder.encode(texts[i]);
            }

            for (const auto& [receiver_type, receiver] : profiles) {
                if (receiver_type == signal.agent_type) continue;

                Sample s;
                s.narrative = narrative.name;
                s.signal_index = si;
                s.sender_type = signal.agent_type;
                s.receiver_type = receiver_type;
                s.field_texts = texts;
                s.field_vectors = vectors;
                s.tau_fresh = temporal_freshness(receipt_time, signal.t_offset,
                                                 receiver.tau_freshness);

                const std::string key = narrative.name + "|" + std::to_string(si) +
                                        "|" + receiver_type;
                s.useful_p = usefulness_probability(rules, s.sender_type,
                                                    receiver_type, signal, s.tau_fresh);
                s.useful_draw = sample_uniform(seed, key, 1);
                s.useful = s.useful_draw < s.useful_p;
                if (!s.useful) {
                    s.reject_draw = sample_uniform(seed, key, 2);
                }
                s.decision = decide(rules, s.useful, s.tau_fresh, s.reject_draw);

                auto pit = proto_vecs.find(receiver_type);
                for (FieldId f : kAllFields) {
                    const std::size_t i = field_index(f);
                    double drift = 1.0;
                    if (pit != proto_vecs.end()) {
                        drift = 1.0 - cosine(s.field_vectors[i], pit->second);
                    }
                    s.drift_labels[i] = std::clamp(drift, 0.0, 1.0);
                }

                out.stats.class_counts[s.decision]++;
                if (is_val) {
                    out.stats.val_count++;
                } else {
                    out.stats.train_count++;
                }
                out.samples.push_back(std::move(s));
            }
        }
    }
    out.stats.sample_count = out.samples.size();
    out.train_narratives.assign(train_set.begin(), train_set.end());
    out.val_narratives.assign(val_set.begin(), val_set.end());
    return out;
}

std::string sample_to_json(const Sample& s) {
    std::string out = "{\"narrative\":\"" + json_escape(s.narrative) + "\"";
    out += ",\"signal\":" + std::to_string(s.signal_index);
    out += ",\"sender\":\"" + json_escape(s.sender_type) + "\"";
    out += ",\"receiver\":\"" + json_escape(s.receiver_type) + "\"";
    out += ",\"fields\":{";
    bool first = true;
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        if (!first) out += ',';
        first = false;
        out += "\"" + std::string(field_name(f)) + "\":{\"text\":\"" +
               json_escape(s.field_texts[i]) + "\",\"vector\":[";
        for (std::size_t k = 0; k < s.field_vectors[i].size(); ++k) {
            if (k) out += ',';
            out += format_g9(s.field_vectors[i][k]);
        }
        out += "]}";
    }
    out += "},\"tau_fresh\":" + format_g9(s.tau_fresh);
    out += ",\"useful_p\":" + format_g9(s.useful_p);
    out += ",\"useful_draw\":" + format_g9(s.useful_draw);
    out += ",\"useful\":";
    out += s.useful ? "true" : "false";
    if (s.reject_draw >= 0.0) {
        out += ",\"reject_draw\":" + format_g9(s.reject_draw);
    }
    out += ",\"decision\":" + std::to_string(s.decision);
    out += ",\"drift\":[";
    for (std::size_t i = 0; i < s.drift_labels.size(); ++i) {
        if (i) out += ',';
        out += format_g9(s.drift_labels[i]);
    }
    out += "]}";
    return out;
}

void write_dataset(const Dataset& dataset, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream train(fs::path(out_dir) / "train.jsonl");
    std::ofstream val(fs::path(out_dir) / "val.jsonl");
    if (!train || !val) throw ConfigError("cannot write dataset to " + out_dir);

    std::set<std::string> val_names(dataset.val_narratives.begin(),
                                    dataset.val_narratives.end());
    for (const Sample& s : dataset.samples) {
        (val_names.count(s.narrative) ? val : train) << sample_to_json(s) << "\n";
    }

    nlohmann::ordered_json stats;
    stats["samples"] = dataset.stats.sample_count;
    stats["class_counts"] = {{"aligned", dataset.stats.class_counts[0]},
                             {"guarded", dataset.stats.class_counts[1]},
                             {"rejected", dataset.stats.class_counts[2]}};
    nlohmann::ordered_json fractions;
    const double n = std::max<std::size_t>(dataset.stats.sample_count, 1);
    fractions["aligned"] = dataset.stats.class_counts[0] / n;
    fractions["guarded"] = dataset.stats.class_counts[1] / n;
    fractions["rejected"] = dataset.stats.class_counts[2] / n;
    stats["class_fractions"] = std::move(fractions);
    stats["train_samples"] = dataset.stats.train_count;
    stats["val_samples"] = dataset.stats.val_count;
    stats["train_narratives"] = dataset.train_narratives;
    stats["val_narratives"] = dataset.val_narratives;
    std::ofstream sf(fs::path(out_dir) / "stats.json");
    sf << stats.dump(2) << "\n";
}

}  // namespace meshfuse
