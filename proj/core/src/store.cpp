#include "meshfuse/store.hpp"

#include <algorithm>

#include "meshfuse/errors.hpp"

namespace meshfuse {

const StoreRecord& MemoryStore::record(const CmbKey& key) const {
    auto it = records_.find(key);
    if (it == records_.end()) {
        throw LineageError("unknown key: " + key);
    }
    return it->second;
}

const std::vector<CmbKey>& MemoryStore::children(const CmbKey& key) const {
    static const std::vector<CmbKey> kEmpty;
    auto it = children_.find(key);
    return it == children_.end() ? kEmpty : it->second;
}

const Cmb& MemoryStore::create_cmb(const AgentId& origin, Timestamp t,
                                   double confidence,
                                   const std::map<FieldId, std::string>& field_texts,
                                   std::optional<Affect> mood_affect,
                                   const std::vector<CmbKey>& parents,
                                   const std::string& method,
                                   const Encoder& encoder) {
    if (confidence < 0.0 || confidence > 1.0) {
        throw SchemaError("create_cmb: confidence out of [0,1]");
    }
    for (const CmbKey& p : parents) {
        if (!records_.count(p)) {
            throw LineageError("create_cmb: unknown parent key " + p);
        }
    }

    Cmb cmb;
    cmb.origin_agent = origin;
    cmb.timestamp = t;
    cmb.confidence = confidence;
    cmb.lineage.parents = parents;
    cmb.lineage.method = method;

    std::string seed = origin + "|" + method + "|" + std::to_string(t) + "|" +
                       std::to_string(create_seq_++);
    for (FieldId f : kAllFields) {
        FieldEntry& e = cmb.fields[field_index(f)];
        auto it = field_texts.find(f);
        const std::string& text = it == field_texts.end() ? std::string() : it->second;
        e.text = Encoder::normalize_text(text).empty() ? "neutral" : text;
        e.vector = encoder.encode(e.text);
        if (f == FieldId::mood) {
            e.affect = mood_affect.value_or(Affect{0.0, 0.0});
        }
        seed += "|" + e.text;
    }
    cmb.key = derive_key(t, seed);
    return insert(std::move(cmb), t);
}

const Cmb& MemoryStore::insert(Cmb cmb, Timestamp t_now) {
    if (records_.count(cmb.key)) {
        throw DagViolationError("insert: duplicate key " + cmb.key);
    }
    for (const CmbKey& p : cmb.lineage.parents) {
        if (p == cmb.key) {
            throw DagViolationError("insert: self-referencing lineage");
        }
        // A cycle forms only if this key is already an ancestor of a parent
        // (possible when parents were inserted with foreign references).
        if (records_.count(p)) {
            std::set<CmbKey> anc;
            collect_ancestors(p, anc);
            if (anc.count(cmb.key)) {
                throw DagViolationError("insert: would create lineage cycle at " + cmb.key);
            }
        }
    }

    StoreRecord rec;
    rec.state = LifecycleState::observed;
    rec.last_remix_time = cmb.timestamp;
    rec.cmb = std::move(cmb);
    const CmbKey key = rec.cmb.key;
    for (const CmbKey& p : rec.cmb.lineage.parents) {
        children_[p].push_back(key);
    }
    auto [it, ok] = records_.emplace(key, std::move(rec));
    (void)t_now;
    (void)ok;
    return it->second.cmb;
}

void MemoryStore::maybe_promote_canonical(StoreRecord& rec) {
    if (rec.state == LifecycleState::validated && rec.remixers.size() >= 2) {
        rec.state = LifecycleState::canonical;
    }
}

LifecycleState MemoryStore::advance_lifecycle(const CmbKey& key,
                                              const LifecycleTrigger& trigger) {
    auto it = records_.find(key);
    if (it == records_.end()) {
        throw LineageError("advance_lifecycle: unknown key " + key);
    }
    StoreRecord& rec = it->second;

    switch (trigger.kind) {
        case LifecycleTriggerKind::peer_remix:
            rec.remixers.insert(trigger.agent);
            if (rec.state == LifecycleState::observed ||
                rec.state == LifecycleState::archived) {
                rec.state = LifecycleState::remixed;
            }
            maybe_promote_canonical(rec);
            break;
        case LifecycleTriggerKind::human_validation:
            if (!trigger.agent_may_validate) {
                throw AuthorityError("validation requires validator or anchor role: " +
                                     trigger.agent);
            }
            if (lifecycle_rank(rec.state) < lifecycle_rank(LifecycleState::validated)) {
                rec.state = LifecycleState::validated;
            }
            maybe_promote_canonical(rec);
            break;
        case LifecycleTriggerKind::clock:
            if (rec.state != LifecycleState::canonical &&
                trigger.t_now - rec.last_remix_time >= kArchiveAfterSeconds) {
                rec.state = LifecycleState::archived;
            }
            break;
    }
    if (trigger.kind == LifecycleTriggerKind::peer_remix) {
        rec.last_remix_time = std::max(rec.last_remix_time, trigger.t_now);
    }
    return rec.state;
}

void MemoryStore::clock_tick(Timestamp t_now) {
    for (auto& [key, rec] : records_) {
        if (rec.state != LifecycleState::canonical &&
            t_now - rec.last_remix_time >= kArchiveAfterSeconds) {
            rec.state = LifecycleState::archived;
        }
    }
}

std::vector<CmbKey> MemoryStore::retention_sweep(Timestamp t_now,
                                                 std::int64_t max_age_seconds) {
    std::vector<CmbKey> purged;
    for (const auto& [key, rec] : records_) {
        if (t_now - rec.cmb.timestamp <= max_age_seconds) continue;
        std::set<CmbKey> desc;
        collect_descendants(key, desc);
        if (desc.empty()) purged.push_back(key);
    }
    for (const CmbKey& key : purged) {
        const StoreRecord& rec = records_.at(key);
        for (const CmbKey& p : rec.cmb.lineage.parents) {
            auto cit = children_.find(p);
            if (cit != children_.end()) {
                auto& v = cit->second;
                v.erase(std::remove(v.begin(), v.end(), key), v.end());
                if (v.empty()) children_.erase(cit);
            }
        }
        children_.erase(key);
        records_.erase(key);
    }
    return purged;
}

void MemoryStore::collect_ancestors(const CmbKey& key, std::set<CmbKey>& out) const {
    auto it = records_.find(key);
    if (it == records_.end()) return;
    for (const CmbKey& p : it->second.cmb.lineage.parents) {
        if (out.insert(p).second) {
            collect_ancestors(p, out);
        }
    }
}

void MemoryStore::collect_descendants(const CmbKey& key, std::set<CmbKey>& out) const {
    auto it = children_.find(key);
    if (it == children_.end()) return;
    for (const CmbKey& c : it->second) {
        if (out.insert(c).second) {
            collect_descendants(c, out);
        }
    }
}

LineageInfo MemoryStore::lineage_query(const CmbKey& key) const {
    const StoreRecord& rec = record(key);
    LineageInfo info;
    info.parents = rec.cmb.lineage.parents;

    std::set<CmbKey> anc;
    collect_ancestors(key, anc);
    info.ancestors.assign(anc.begin(), anc.end());

    std::set<CmbKey> desc;
    collect_descendants(key, desc);
    info.descendants.assign(desc.begin(), desc.end());

    info.remix_count = children(key).size();

    // Longest ancestor chain; foreign parent keys terminate a chain at
    // depth +1 since their history is not stored here.
    std::map<CmbKey, std::size_t> memo;
    const auto depth = [&](const auto& self, const CmbKey& k) -> std::size_t {
        auto mit = memo.find(k);
        if (mit != memo.end()) return mit->second;
        auto rit = records_.find(k);
        std::size_t best = 0;
        if (rit != records_.end()) {
            for (const CmbKey& p : rit->second.cmb.lineage.parents) {
                best = std::max(best, 1 + self(self, p));
            }
        }
        memo[k] = best;
        return best;
    };
    info.lineage_depth = depth(depth, key);
    return info;
}

}  // namespace meshfuse
