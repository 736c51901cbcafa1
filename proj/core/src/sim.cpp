#include "meshfuse/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "meshfuse/errors.hpp"
#include "meshfuse/serialize.hpp"
#include "rng_util.hpp"

namespace meshfuse {

Vec make_tau_vector(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Vec tau(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double lo = 1.0, hi = 5.0;
        if (i % 3 == 1) {
            lo = 5.0;
            hi = 30.0;
        } else if (i % 3 == 2) {
            lo = 30.0;
            hi = 120.0;
        }
        tau[i] = std::exp(rng::uniform(gen, std::log(lo), std::log(hi)));
    }
    return tau;
}

Vec make_initial_state(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Vec h(dim);
    for (double& x : h) x = rng::uniform(gen, -1.0, 1.0);
    return h;
}

SimConfig make_sim_config(const Narrative& scenario,
                          const std::map<std::string, AgentProfile>& profiles,
                          std::uint64_t seed, Timestamp duration,
                          Timestamp sync_interval) {
    SimConfig config;
    config.seed = seed;
    config.scenario = scenario;
    config.sync_interval = sync_interval;

    std::set<std::string> types;
    for (const Signal& s : scenario.signals) types.insert(s.agent_type);
    for (const std::string& type : types) {
        auto it = profiles.find(type);
        if (it == profiles.end()) {
            throw ConfigError("scenario references unknown agent type: " + type);
        }
        config.agents.push_back({it->second, 0});
    }
    config.duration = duration > 0
                          ? duration
                          : (scenario.signals.empty()
                                 ? 10 * sync_interval
                                 : scenario.signals.back().t_offset + 4 * sync_interval);
    return config;
}

namespace {

struct Delivery {
    AgentId origin;
    CmbKey key;
};

class Simulation {
public:
    explicit Simulation(const SimConfig& config)
        : config_(config), encoder_(config.encoder) {
        if (config_.duration <= 0) throw ConfigError("sim: duration must be > 0");
        if (config_.agents.size() < 2) throw ConfigError("sim: at least 2 agents");
        if (config_.sync_interval <= 0) throw ConfigError("sim: sync_interval must be > 0");
        if (config_.rebroadcast_delay <= 0) {
            throw ConfigError("sim: rebroadcast_delay must be >= 1");
        }
        for (const SimAgent& a : config_.agents) {
            const AgentId& id = a.profile.agent_id;
            if (profiles_.count(id)) throw ConfigError("sim: duplicate agent id " + id);
            profiles_.emplace(id, a.profile);
            stores_.emplace(id, MemoryStore(id));
            const std::uint64_t tau_seed =
                a.tau_seed ? a.tau_seed : rng::stream_seed(config_.seed, "tau|" + id);
            HiddenState state;
            state.tau = make_tau_vector(encoder_.dim(), tau_seed);
            state.h = make_initial_state(encoder_.dim(),
                                         rng::stream_seed(config_.seed, "h|" + id));
            state.last_update = 0;
            states_.emplace(id, std::move(state));
        }
        for (const Signal& s : config_.scenario.signals) {
            if (!profiles_.count(s.agent_type)) {
                throw ConfigError("sim: scenario references unknown agent " + s.agent_type);
            }
            signals_by_time_[s.t_offset].push_back(&s);
        }
    }

    SimResult run() {
        Timestamp t = next_time(-1);
        while (t >= 0 && t <= config_.duration) {
            step(t);
            t = next_time(t);
        }
        SimResult result;
        result.trace = std::move(trace_);
        result.stores = std::move(stores_);
        result.states = std::move(states_);
        return result;
    }

private:
    // Smallest event time strictly greater than `after`.
    Timestamp next_time(Timestamp after) const {
        Timestamp best = -1;
        const auto consider = [&](Timestamp t) {
            if (t > after && t <= config_.duration && (best < 0 || t < best)) best = t;
        };
        auto sit = signals_by_time_.upper_bound(after);
        if (sit != signals_by_time_.end()) consider(sit->first);
        auto dit = deliveries_.upper_bound(after);
        if (dit != deliveries_.end()) consider(dit->first);
        consider(((after / config_.sync_interval) + 1) * config_.sync_interval);
        consider(((after / 86400) + 1) * 86400);
        return best;
    }

    void step(Timestamp t) {
        // Phase 1: external observations and scenario actions.
        auto sit = signals_by_time_.find(t);
        if (sit != signals_by_time_.end()) {
            std::vector<const Signal*> signals = sit->second;
            std::stable_sort(signals.begin(), signals.end(),
                             [](const Signal* a, const Signal* b) {
                                 return a->agent_type < b->agent_type;
                             });
            for (const Signal* s : signals) process_signal(t, *s);
        }

        // Phase 2: broadcast deliveries.
        auto dit = deliveries_.find(t);
        if (dit != deliveries_.end()) {
            std::vector<Delivery> todo = std::move(dit->second);
            deliveries_.erase(dit);
            std::sort(todo.begin(), todo.end(), [](const Delivery& a, const Delivery& b) {
                return a.origin != b.origin ? a.origin < b.origin : a.key < b.key;
            });
            for (const Delivery& d : todo) {
                TraceEvent ev;
                ev.t = t;
                ev.kind = "broadcast";
                ev.agent = d.origin;
                ev.key = d.key;
                trace_.events.push_back(std::move(ev));
                deliver(t, d);
            }
        }

        // Phase 3: pairwise state sync.
        if (t % config_.sync_interval == 0) sync_round(t);

        // Phase 4: daily lifecycle decay and retention.
        if (t % 86400 == 0) daily_maintenance(t);
    }

    void process_signal(Timestamp t, const Signal& signal) {
        const AgentId& agent = signal.agent_type;
        switch (signal.action) {
            case SignalAction::observe: {
                const ExtractedFields extracted = extract_fields(signal);
                const Cmb& cmb = stores_.at(agent).create_cmb(
                    agent, t, extracted.confidence, extracted.texts,
                    extracted.mood_affect, {}, "observation", encoder_);
                mesh_index_.emplace(cmb.key, cmb);
                last_own_[agent] = cmb.key;
                emit_observe(t, agent, cmb.key, "");
                broadcast(t, agent, cmb.key);
                ingest_own(t, agent, cmb);
                break;
            }
            case SignalAction::validate: {
                auto seen = last_seen_.find(agent);
                if (seen == last_seen_.end()) {
                    throw ConfigError("sim: validate action before any received block");
                }
                const CmbKey target = seen->second;
                const Cmb& target_cmb = mesh_index_.at(target);
                const AgentProfile& profile = profiles_.at(agent);
                try {
                    stores_.at(target_cmb.origin_agent)
                        .advance_lifecycle(target,
                                           LifecycleTrigger::human_validation(
                                               agent, profile.may_validate()));
                } catch (const AuthorityError&) {
                    TraceEvent ev;
                    ev.t = t;
                    ev.kind = "authority_error";
                    ev.agent = agent;
                    ev.key = target;
                    trace_.events.push_back(std::move(ev));
                    return;
                }
                TraceEvent ev;
                ev.t = t;
                ev.kind = "validate";
                ev.agent = agent;
                ev.peer = target_cmb.origin_agent;
                ev.key = target;
                ev.label = "validated";
                trace_.events.push_back(std::move(ev));

                // The human action itself enters the mesh as a block citing
                // what prompted it.
                const ExtractedFields extracted = extract_fields(signal);
                Cmb action_cmb;
                action_cmb.origin_agent = agent;
                action_cmb.timestamp = t;
                action_cmb.confidence = profile.default_confidence;
                action_cmb.lineage.parents = {target};
                action_cmb.lineage.method = "validation";
                for (FieldId f : kAllFields) {
                    FieldEntry& e = action_cmb.fields[field_index(f)];
                    auto it = extracted.texts.find(f);
                    e.text = (it == extracted.texts.end() ||
                              Encoder::normalize_text(it->second).empty())
                                 ? "neutral"
                                 : it->second;
                    e.vector = encoder_.encode(e.text);
                    if (f == FieldId::mood) e.affect = extracted.mood_affect;
                }
                action_cmb.key = derive_key(t, agent + "|" + target + "|validation");
                const Cmb& stored = stores_.at(agent).insert(std::move(action_cmb), t);
                mesh_index_.emplace(stored.key, stored);
                last_own_[agent] = stored.key;
                emit_observe(t, agent, stored.key, target);
                broadcast(t, agent, stored.key);
                ingest_own(t, agent, stored);
                break;
            }
            case SignalAction::rebroadcast: {
                auto own = last_own_.find(agent);
                if (own == last_own_.end()) {
                    throw ConfigError("sim: rebroadcast before any own block");
                }
                broadcast(t, agent, own->second);
                break;
            }
        }
    }

    void deliver(Timestamp t, const Delivery& d) {
        const Cmb& incoming = mesh_index_.at(d.key);
        for (auto& [receiver, store] : stores_) {
            if (receiver == d.origin) continue;
            const AgentProfile& profile = profiles_.at(receiver);
            FusionOutcome outcome = evaluate_cmb(store, profile, incoming, t,
                                                 config_.thresholds, encoder_);
            last_seen_[receiver] = d.key;

            TraceEvent ev;
            ev.t = t;
            ev.kind = "evaluate";
            ev.agent = receiver;
            ev.peer = incoming.origin_agent;
            ev.key = d.key;
            ev.label = std::string(decision_name(outcome.decision));
            ev.drift = outcome.total_drift;
            ev.freshness = outcome.freshness;
            ev.field_drift = outcome.per_field_drift;
            ev.mood_delivered = outcome.mood_delivered;
            if (outcome.remix) ev.remix_key = outcome.remix->key;
            trace_.events.push_back(std::move(ev));

            if (outcome.remix) {
                // Duplicate deliveries re-derive the same remix key; the
                // receiver already holds that understanding, skip quietly.
                if (!store.contains(outcome.remix->key)) {
                    const Cmb& remix = store.insert(*outcome.remix, t);
                    mesh_index_.emplace(remix.key, remix);
                    notify_remix(t, incoming, receiver);
                    ingest_accepted(t, receiver, remix);
                    schedule_rebroadcast(t, receiver, remix.key);
                }
            } else if (outcome.mood_delivered) {
                const FieldEntry& mood = incoming.fields[field_index(FieldId::mood)];
                TraceEvent mv;
                mv.t = t;
                mv.kind = "mood_delivery";
                mv.agent = receiver;
                mv.peer = incoming.origin_agent;
                mv.key = d.key;
                if (mood.affect) {
                    mv.valence = mood.affect->valence;
                    mv.arousal = mood.affect->arousal;
                }
                trace_.events.push_back(std::move(mv));
            }
        }
    }

    void notify_remix(Timestamp t, const Cmb& parent, const AgentId& remixer) {
        auto sit = stores_.find(parent.origin_agent);
        if (sit == stores_.end() || !sit->second.contains(parent.key)) return;
        const LifecycleState state = sit->second.advance_lifecycle(
            parent.key, LifecycleTrigger::peer_remix(remixer, t));
        TraceEvent ev;
        ev.t = t;
        ev.kind = "remix_notify";
        ev.agent = parent.origin_agent;
        ev.peer = remixer;
        ev.key = parent.key;
        ev.label = std::string(lifecycle_name(state));
        trace_.events.push_back(std::move(ev));
    }

    void broadcast(Timestamp t, const AgentId& origin, const CmbKey& key) {
        deliveries_[t].push_back({origin, key});
    }

    void schedule_rebroadcast(Timestamp t, const AgentId& origin, const CmbKey& key) {
        const Timestamp when = t + config_.rebroadcast_delay;
        if (when > config_.duration) return;
        deliveries_[when].push_back({origin, key});
    }

    void ingest_own(Timestamp t, const AgentId& agent, const Cmb& cmb) {
        // The observing agent internalizes its own block, the stand-in for
        // encoding derived knowledge into its cognitive state.
        ingest_accepted(t, agent, cmb);
    }

    void ingest_accepted(Timestamp t, const AgentId& agent, const Cmb& cmb) {
        FieldMap<Vec> vectors;
        FieldMap<bool> accepted;
        for (FieldId f : kAllFields) {
            vectors[field_index(f)] = cmb.fields[field_index(f)].vector;
            accepted[field_index(f)] = true;
        }
        HiddenState& state = states_.at(agent);
        state = ingest_state(state, vectors, accepted, profiles_.at(agent), t);
    }

    void sync_round(Timestamp t) {
        std::map<AgentId, Vec> snapshots;
        for (const auto& [id, state] : states_) snapshots.emplace(id, state.h);

        for (auto a = states_.begin(); a != states_.end(); ++a) {
            for (auto b = std::next(a); b != states_.end(); ++b) {
                const PeerCouplingDecision decision =
                    classify_peer(snapshots.at(a->first), snapshots.at(b->first),
                                  config_.blend);
                a->second = blend_states(a->second, snapshots.at(b->first),
                                         decision.alpha_eff, config_.blend);
                b->second = blend_states(b->second, snapshots.at(a->first),
                                         decision.alpha_eff, config_.blend);
                TraceEvent ev;
                ev.t = t;
                ev.kind = "sync";
                ev.agent = a->first;
                ev.peer = b->first;
                ev.label = std::string(peer_class_name(decision.cls));
                ev.drift = decision.drift;
                ev.alpha_eff = decision.alpha_eff;
                ev.drift_after = 1.0 - cosine(a->second.h, b->second.h);
                trace_.events.push_back(std::move(ev));
            }
        }
    }

    void daily_maintenance(Timestamp t) {
        for (auto& [id, store] : stores_) {
            std::vector<std::pair<CmbKey, LifecycleState>> transitions;
            for (const auto& [key, rec] : store.records()) {
                const LifecycleState before = rec.state;
                const LifecycleState after =
                    store.advance_lifecycle(key, LifecycleTrigger::clock(t));
                if (after != before) transitions.emplace_back(key, after);
            }
            for (const auto& [key, state] : transitions) {
                TraceEvent ev;
                ev.t = t;
                ev.kind = "lifecycle";
                ev.agent = id;
                ev.key = key;
                ev.label = std::string(lifecycle_name(state));
                trace_.events.push_back(std::move(ev));
            }
            std::vector<CmbKey> purged =
                store.retention_sweep(t, config_.retention_max_age);
            if (!purged.empty()) {
                TraceEvent ev;
                ev.t = t;
                ev.kind = "sweep";
                ev.agent = id;
                ev.purged = std::move(purged);
                trace_.events.push_back(std::move(ev));
            }
        }
    }

    void emit_observe(Timestamp t, const AgentId& agent, const CmbKey& key,
                      const CmbKey& parent) {
        TraceEvent ev;
        ev.t = t;
        ev.kind = "observe";
        ev.agent = agent;
        ev.key = key;
        ev.parent = parent;
        trace_.events.push_back(std::move(ev));
    }

    const SimConfig& config_;
    Encoder encoder_;
    std::map<AgentId, AgentProfile> profiles_;
    std::map<AgentId, MemoryStore> stores_;
    std::map<AgentId, HiddenState> states_;
    std::map<Timestamp, std::vector<const Signal*>> signals_by_time_;
    std::map<Timestamp, std::vector<Delivery>> deliveries_;
    std::map<CmbKey, Cmb> mesh_index_;  // every broadcast payload by key
    std::map<AgentId, CmbKey> last_seen_;
    std::map<AgentId, CmbKey> last_own_;
    Trace trace_;
};

}  // namespace

SimResult run_simulation(const SimConfig& config) {
    Simulation sim(config);
    return sim.run();
}

std::string trace_to_json_lines(const Trace& trace) {
    std::string out;
    for (const TraceEvent& ev : trace.events) {
        out += "{\"t\":" + std::to_string(ev.t);
        out += ",\"kind\":\"" + ev.kind + "\"";
        out += ",\"agent\":\"" + json_escape(ev.agent) + "\"";
        if (!ev.peer.empty()) out += ",\"peer\":\"" + json_escape(ev.peer) + "\"";
        if (!ev.key.empty()) out += ",\"key\":\"" + json_escape(ev.key) + "\"";
        if (!ev.parent.empty()) out += ",\"parent\":\"" + json_escape(ev.parent) + "\"";
        if (!ev.label.empty()) out += ",\"label\":\"" + json_escape(ev.label) + "\"";
        if (ev.kind == "evaluate") {
            out += ",\"total_drift\":" + format_fixed(ev.drift, 3);
            out += ",\"freshness\":" + format_fixed(ev.freshness, 6);
            out += ",\"field_drift\":[";
            for (std::size_t i = 0; i < kFieldCount; ++i) {
                if (i) out += ',';
                out += format_fixed(ev.field_drift[i], 3);
            }
            out += ']';
            if (!ev.remix_key.empty()) {
                out += ",\"remix\":\"" + json_escape(ev.remix_key) + "\"";
            }
            out += ",\"mood_delivered\":";
            out += ev.mood_delivered ? "true" : "false";
        } else if (ev.kind == "sync") {
            out += ",\"drift\":" + format_g9(ev.drift);
            out += ",\"alpha_eff\":" + format_g9(ev.alpha_eff);
            out += ",\"drift_after\":" + format_g9(ev.drift_after);
        } else if (ev.kind == "mood_delivery") {
            out += ",\"valence\":" + format_g9(ev.valence);
            out += ",\"arousal\":" + format_g9(ev.arousal);
        } else if (ev.kind == "sweep") {
            out += ",\"purged\":[";
            for (std::size_t i = 0; i < ev.purged.size(); ++i) {
                if (i) out += ',';
                out += "\"" + json_escape(ev.purged[i]) + "\"";
            }
            out += ']';
        }
        out += "}\n";
    }
    return out;
}

TraceSummary summarize(const Trace& trace) {
    TraceSummary s;
    std::map<CmbKey, std::size_t> depth;
    std::map<CmbKey, std::string> final_state;
    std::set<CmbKey> purged;

    for (const TraceEvent& ev : trace.events) {
        if (ev.kind == "sync") {
            const std::string pair = ev.agent + "|" + ev.peer;
            s.pair_drift[pair].push_back({ev.t, ev.drift, ev.drift_after});
        } else if (ev.kind == "evaluate") {
            s.decision_counts[ev.label]++;
            if (!ev.remix_key.empty()) {
                const std::size_t d = depth.count(ev.key) ? depth[ev.key] + 1 : 1;
                depth[ev.remix_key] = d;
                final_state.emplace(ev.remix_key, "observed");
            }
            if (ev.mood_delivered) s.mood_delivered_count++;
        } else if (ev.kind == "observe") {
            depth[ev.key] = ev.parent.empty() || !depth.count(ev.parent)
                                ? (ev.parent.empty() ? 0 : 1)
                                : depth[ev.parent] + 1;
            final_state.emplace(ev.key, "observed");
        } else if (ev.kind == "remix_notify" || ev.kind == "lifecycle" ||
                   ev.kind == "validate") {
            final_state[ev.key] = ev.label;
        } else if (ev.kind == "sweep") {
            purged.insert(ev.purged.begin(), ev.purged.end());
        }
    }

    for (const auto& [key, d] : depth) {
        s.lineage_depth_histogram[d]++;
        s.max_lineage_depth = std::max(s.max_lineage_depth, d);
    }
    for (const auto& [key, state] : final_state) {
        if (!purged.count(key)) s.final_lifecycle_counts[state]++;
    }
    s.stored_cmbs = final_state.size();
    s.purged_cmbs = purged.size();
    s.live_cmbs = s.stored_cmbs - s.purged_cmbs;
    return s;
}

std::string summary_to_json(const TraceSummary& s) {
    std::string out = "{\"pair_drift\":{";
    bool first = true;
    for (const auto& [pair, points] : s.pair_drift) {
        if (!first) out += ',';
        first = false;
        out += "\"" + json_escape(pair) + "\":[";
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (i) out += ',';
            out += "{\"t\":" + std::to_string(points[i].t);
            out += ",\"before\":" + format_g9(points[i].before);
            out += ",\"after\":" + format_g9(points[i].after) + "}";
        }
        out += ']';
    }
    out += "},\"decisions\":{";
    first = true;
    for (const auto& [k, v] : s.decision_counts) {
        if (!first) out += ',';
        first = false;
        out += "\"" + k + "\":" + std::to_string(v);
    }
    out += "},\"lineage_depth\":{";
    first = true;
    for (const auto& [d, n] : s.lineage_depth_histogram) {
        if (!first) out += ',';
        first = false;
        out += "\"" + std::to_string(d) + "\":" + std::to_string(n);
    }
    out += "},\"max_lineage_depth\":" + std::to_string(s.max_lineage_depth);
    out += ",\"mood_delivered\":" + std::to_string(s.mood_delivered_count);
    out += ",\"final_lifecycle\":{";
    first = true;
    for (const auto& [k, v] : s.final_lifecycle_counts) {
        if (!first) out += ',';
        first = false;
        out += "\"" + k + "\":" + std::to_string(v);
    }
    out += "},\"stored\":" + std::to_string(s.stored_cmbs);
    out += ",\"purged\":" + std::to_string(s.purged_cmbs);
    out += ",\"live\":" + std::to_string(s.live_cmbs) + "}";
    return out;
}

}  // namespace meshfuse
