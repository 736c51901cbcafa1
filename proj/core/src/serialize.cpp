#include "meshfuse/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "meshfuse/errors.hpp"

namespace meshfuse {

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string format_fixed(double v, int decimals) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    return out;
}

namespace {

void append_vector(const Vec& v, std::string& out) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_g9(v[i]);
    }
    out += ']';
}

}  // namespace

std::string to_canonical_json(const Cmb& cmb) {
    std::string out;
    out += "{\"key\":\"" + json_escape(cmb.key) + "\"";
    out += ",\"origin\":\"" + json_escape(cmb.origin_agent) + "\"";
    out += ",\"ts\":" + std::to_string(cmb.timestamp);
    out += ",\"confidence\":" + format_g9(cmb.confidence);
    out += ",\"fields\":{";
    bool first = true;
    for (FieldId f : kAllFields) {
        const FieldEntry& e = cmb.fields[field_index(f)];
        if (!first) out += ',';
        first = false;
        out += "\"" + std::string(field_name(f)) + "\":{\"text\":\"" +
               json_escape(e.text) + "\",\"vector\":";
        append_vector(e.vector, out);
        if (e.affect) {
            out += ",\"valence\":" + format_g9(e.affect->valence);
            out += ",\"arousal\":" + format_g9(e.affect->arousal);
        }
        out += '}';
    }
    out += "},\"lineage\":{\"parents\":[";
    for (std::size_t i = 0; i < cmb.lineage.parents.size(); ++i) {
        if (i) out += ',';
        out += "\"" + json_escape(cmb.lineage.parents[i]) + "\"";
    }
    out += "],\"method\":\"" + json_escape(cmb.lineage.method) + "\"}}";
    return out;
}

Cmb cmb_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw SchemaError("cmb: invalid JSON");
    Cmb cmb;
    try {
        cmb.key = j.at("key").get<std::string>();
        cmb.origin_agent = j.at("origin").get<std::string>();
        cmb.timestamp = j.at("ts").get<Timestamp>();
        cmb.confidence = j.at("confidence").get<double>();
        const auto& jf = j.at("fields");
        for (FieldId f : kAllFields) {
            const std::string name(field_name(f));
            if (!jf.contains(name)) {
                throw SchemaError("cmb: missing field " + name);
            }
            const auto& je = jf.at(name);
            FieldEntry& e = cmb.fields[field_index(f)];
            e.text = je.at("text").get<std::string>();
            e.vector = je.at("vector").get<Vec>();
            if (je.contains("valence") || je.contains("arousal")) {
                e.affect = Affect{je.at("valence").get<double>(),
                                  je.at("arousal").get<double>()};
            }
        }
        const auto& jl = j.at("lineage");
        cmb.lineage.parents = jl.at("parents").get<std::vector<CmbKey>>();
        cmb.lineage.method = jl.at("method").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("cmb: ") + e.what());
    }
    return cmb;
}

std::string store_to_json(const MemoryStore& store) {
    std::string out = "{\"owner\":\"" + json_escape(store.owner()) + "\",\"records\":[";
    bool first = true;
    for (const auto& [key, rec] : store.records()) {
        if (!first) out += ',';
        first = false;
        out += "{\"cmb\":" + to_canonical_json(rec.cmb);
        out += ",\"state\":\"" + std::string(lifecycle_name(rec.state)) + "\"";
        out += ",\"last_remix_time\":" + std::to_string(rec.last_remix_time);
        out += ",\"remixers\":[";
        bool f2 = true;
        for (const AgentId& a : rec.remixers) {
            if (!f2) out += ',';
            f2 = false;
            out += "\"" + json_escape(a) + "\"";
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

MemoryStore store_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw SchemaError("store: invalid JSON");
    MemoryStore store(j.at("owner").get<std::string>());
    for (const auto& jr : j.at("records")) {
        Cmb cmb = cmb_from_json(jr.at("cmb").dump());
        const Timestamp t = cmb.timestamp;
        store.insert(std::move(cmb), t);
    }
    // Lifecycle bookkeeping is replayed after all inserts so foreign-parent
    // ordering cannot reject a valid snapshot.
    for (const auto& jr : j.at("records")) {
        const CmbKey key = jr.at("cmb").at("key").get<std::string>();
        if (jr.contains("remixers")) {
            for (const auto& a : jr.at("remixers")) {
                store.advance_lifecycle(
                    key, LifecycleTrigger::peer_remix(a.get<std::string>(),
                                                      jr.value("last_remix_time", 0)));
            }
        }
        if (jr.contains("state")) {
            const LifecycleState want = lifecycle_from_name(jr.at("state").get<std::string>());
            // Replaying remix triggers may undershoot states that required a
            // validation or clock event; apply those directly.
            if (want == LifecycleState::validated || want == LifecycleState::canonical) {
                store.advance_lifecycle(key, LifecycleTrigger::human_validation("snapshot", true));
            } else if (want == LifecycleState::archived) {
                store.advance_lifecycle(
                    key, LifecycleTrigger::clock(jr.value("last_remix_time", 0) +
                                                 MemoryStore::kArchiveAfterSeconds));
            }
        }
    }
    return store;
}

std::map<std::string, AgentProfile> profiles_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("profiles: invalid JSON");
    std::map<std::string, AgentProfile> out;
    for (const auto& jp : j.at("profiles")) {
        AgentProfile p;
        p.agent_id = jp.at("id").get<std::string>();
        const auto& ja = jp.at("alpha");
        double alpha_sum = 0.0;
        for (FieldId f : kAllFields) {
            const double a = ja.at(std::string(field_name(f))).get<double>();
            if (a < 0.0) throw ConfigError("profiles: alpha must be >= 0");
            p.alpha[field_index(f)] = a;
            alpha_sum += a;
        }
        if (alpha_sum <= 0.0) throw ConfigError("profiles: at least one alpha must be > 0");
        p.tau_freshness = jp.at("tau_freshness").get<double>();
        if (p.tau_freshness <= 0.0) throw ConfigError("profiles: tau_freshness must be > 0");
        p.default_confidence = jp.value("default_confidence", 0.9);
        p.role = role_from_name(jp.value("role", "observer"));
        p.anchor_k = jp.value("anchor_k", 5);
        out.emplace(p.agent_id, std::move(p));
    }
    return out;
}

std::map<std::string, AgentProfile> load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return profiles_from_json(ss.str());
}

}  // namespace meshfuse
