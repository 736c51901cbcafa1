#pragma once
// Per-agent append-only memory store. Blocks are immutable once inserted;
// lifecycle state and remix bookkeeping live beside them, never inside them.
//
// Single-writer: one agent owns one store. Reads are safe concurrently with
// no writer; cross-agent interaction passes immutable Cmb values only.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "meshfuse/cmb.hpp"
#include "meshfuse/encoder.hpp"

namespace meshfuse {

enum class LifecycleTriggerKind : std::uint8_t { peer_remix, human_validation, clock };

struct LifecycleTrigger {
    LifecycleTriggerKind kind;
    AgentId agent;       // peer_remix / human_validation
    Timestamp t_now = 0; // clock
    bool agent_may_validate = false;  // acting agent's role is validator/anchor

    static LifecycleTrigger peer_remix(AgentId a, Timestamp t) {
        return {LifecycleTriggerKind::peer_remix, std::move(a), t, false};
    }
    static LifecycleTrigger human_validation(AgentId a, bool may_validate) {
        return {LifecycleTriggerKind::human_validation, std::move(a), 0, may_validate};
    }
    static LifecycleTrigger clock(Timestamp t) {
        return {LifecycleTriggerKind::clock, {}, t, false};
    }
};

struct StoreRecord {
    Cmb cmb;
    LifecycleState state = LifecycleState::observed;
    Timestamp last_remix_time = 0;  // creation time until first peer remix
    std::set<AgentId> remixers;     // distinct agents that remixed this block
};

struct LineageInfo {
    std::vector<CmbKey> parents;
    std::vector<CmbKey> ancestors;    // transitive closure, sorted
    std::vector<CmbKey> descendants;  // transitive closure, sorted
    std::size_t remix_count = 0;      // direct children in this store
    std::size_t lineage_depth = 0;    // longest ancestor chain
};

class MemoryStore {
public:
    explicit MemoryStore(AgentId owner) : owner_(std::move(owner)) {}

    const AgentId& owner() const { return owner_; }
    std::size_t size() const { return records_.size(); }
    bool contains(const CmbKey& key) const { return records_.count(key) != 0; }

    // Throws LineageError for an unknown key.
    const StoreRecord& record(const CmbKey& key) const;

    // Ordered by key, i.e. by creation time.
    const std::map<CmbKey, StoreRecord>& records() const { return records_; }

    // Builds and stores a new block. Missing/empty field texts are filled
    // with the neutral baseline. Parents must already exist in this store;
    // lifecycle starts at observed.
    const Cmb& create_cmb(const AgentId& origin, Timestamp t, double confidence,
                          const std::map<FieldId, std::string>& field_texts,
                          std::optional<Affect> mood_affect,
                          const std::vector<CmbKey>& parents,
                          const std::string& method, const Encoder& encoder);

    // Inserts an externally built block (e.g. a remix whose parent lives in
    // another agent's store). Parents may be foreign keys; inserting may
    // never create a cycle among stored blocks.
    const Cmb& insert(Cmb cmb, Timestamp t_now);

    // Applies one lifecycle trigger and returns the resulting state.
    LifecycleState advance_lifecycle(const CmbKey& key, const LifecycleTrigger& trigger);

    // Applies the 30-day decay rule to every record.
    void clock_tick(Timestamp t_now);

    // Purges blocks older than max_age that have no descendant in the store
    // at sweep start. Protection lifts one generation per sweep: a dead
    // chain unwinds leaf-first across consecutive sweeps.
    std::vector<CmbKey> retention_sweep(Timestamp t_now, std::int64_t max_age_seconds);

    LineageInfo lineage_query(const CmbKey& key) const;

    // Direct children of key stored here (reverse lineage index).
    const std::vector<CmbKey>& children(const CmbKey& key) const;

    // Anchor weight decay window (Table-2 archive rule), in seconds.
    static constexpr std::int64_t kArchiveAfterSeconds = 30LL * 86400LL;

private:
    void collect_ancestors(const CmbKey& key, std::set<CmbKey>& out) const;
    void collect_descendants(const CmbKey& key, std::set<CmbKey>& out) const;
    void maybe_promote_canonical(StoreRecord& rec);

    AgentId owner_;
    std::map<CmbKey, StoreRecord> records_;
    std::map<CmbKey, std::vector<CmbKey>> children_;
    std::uint64_t create_seq_ = 0;
};

}  // namespace meshfuse
