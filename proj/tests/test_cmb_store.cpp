#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"

#include "meshfuse/encoder.hpp"
#include "meshfuse/errors.hpp"
#include "meshfuse/serialize.hpp"
#include "meshfuse/store.hpp"

using namespace meshfuse;

namespace {

const Encoder& enc() {
    static const Encoder encoder{EncoderConfig{}};
    return encoder;
}

std::map<FieldId, std::string> full_texts(const std::string& stem) {
    std::map<FieldId, std::string> t;
    t[FieldId::focus] = stem + " focus";
    t[FieldId::issue] = stem + " issue";
    t[FieldId::intent] = stem + " intent";
    t[FieldId::motivation] = stem + " motivation";
    t[FieldId::commitment] = stem + " commitment";
    t[FieldId::perspective] = stem + " perspective";
    t[FieldId::mood] = stem + " mood";
    return t;
}

// Brute-force recount of direct children by scanning every parents list.
std::size_t recount_children(const MemoryStore& store, const CmbKey& key) {
    std::size_t n = 0;
    for (const auto& [k, rec] : store.records()) {
        for (const CmbKey& p : rec.cmb.lineage.parents) {
            if (p == key) ++n;
        }
    }
    return n;
}

// Independent DFS ancestor/descendant/depth oracle over raw parents lists.
struct DfsOracle {
    std::map<CmbKey, std::vector<CmbKey>> parents;

    explicit DfsOracle(const MemoryStore& store) {
        for (const auto& [k, rec] : store.records()) {
            parents[k] = rec.cmb.lineage.parents;
        }
    }

    std::set<CmbKey> ancestors(const CmbKey& key) const {
        std::set<CmbKey> out;
        anc(key, out);
        return out;
    }
    void anc(const CmbKey& key, std::set<CmbKey>& out) const {
        auto it = parents.find(key);
        if (it == parents.end()) return;
        for (const CmbKey& p : it->second) {
            if (out.insert(p).second) anc(p, out);
        }
    }
    std::set<CmbKey> descendants(const CmbKey& key) const {
        std::set<CmbKey> out;
        for (const auto& [k, ps] : parents) {
            if (ancestors(k).count(key)) out.insert(k);
        }
        return out;
    }
    std::size_t depth(const CmbKey& key) const {
        auto it = parents.find(key);
        std::size_t best = 0;
        if (it != parents.end()) {
            for (const CmbKey& p : it->second) {
                if (parents.count(p)) best = std::max(best, 1 + depth(p));
            }
            if (best == 0 && !it->second.empty()) best = 1;
        }
        return best;
    }
};

}  // namespace

TEST_CASE("create_cmb fills all fields and starts at observed") {
    MemoryStore store("alice");
    const Cmb& cmb = store.create_cmb("alice", 1000, 0.8, full_texts("first"),
                                      Affect{0.2, -0.1}, {}, "observation", enc());
    CHECK(cmb.lineage.parents.empty());
    CHECK(store.record(cmb.key).state == LifecycleState::observed);
    CHECK(lifecycle_weight(LifecycleState::observed) == 1.0);
    CHECK_NOTHROW(validate_cmb(cmb, enc().dim()));
}

TEST_CASE("missing field text is filled with the neutral baseline") {
    MemoryStore store("alice");
    auto texts = full_texts("partial");
    texts.erase(FieldId::commitment);
    const Cmb& cmb = store.create_cmb("alice", 1000, 0.8, texts, std::nullopt, {},
                                      "observation", enc());
    const FieldEntry& e = cmb.fields[field_index(FieldId::commitment)];
    CHECK(e.text == "neutral");
    CHECK(e.vector == enc().neutral());
    CHECK(is_unit(e.vector));
}

TEST_CASE("remix count is computed from the reverse index") {
    MemoryStore store("alice");
    const Cmb& a = store.create_cmb("alice", 1000, 0.8, full_texts("a"),
                                    std::nullopt, {}, "observation", enc());
    CHECK(store.lineage_query(a.key).remix_count == 0);
    CHECK(recount_children(store, a.key) == 0);
    store.create_cmb("alice", 1100, 0.8, full_texts("b"), std::nullopt, {a.key},
                     "SVAF-v1", enc());
    CHECK(store.lineage_query(a.key).remix_count == 1);
    CHECK(recount_children(store, a.key) == 1);
}

TEST_CASE("unknown parent key raises a lineage error") {
    MemoryStore store("alice");
    CHECK_THROWS_AS(store.create_cmb("alice", 1000, 0.8, full_texts("x"),
                                     std::nullopt, {"deadbeef"}, "observation", enc()),
                    LineageError);
}

TEST_CASE("confidence outside [0,1] is rejected") {
    MemoryStore store("alice");
    CHECK_THROWS_AS(store.create_cmb("alice", 1000, 1.2, full_texts("x"),
                                     std::nullopt, {}, "observation", enc()),
                    SchemaError);
}

TEST_CASE("foreign-parent inserts cannot close a lineage cycle") {
    MemoryStore store("alice");
    // B arrives first citing the (still external) key A.
    Cmb b;
    b.key = "bbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb";
    b.origin_agent = "alice";
    b.timestamp = 1000;
    b.confidence = 0.8;
    for (FieldId f : kAllFields) {
        FieldEntry& e = b.fields[field_index(f)];
        e.text = "neutral";
        e.vector = enc().neutral();
        if (f == FieldId::mood) e.affect = Affect{};
    }
    Cmb a = b;
    a.key = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
    b.lineage.parents = {a.key};
    store.insert(b, 1000);
    // Now inserting A with parent B would make A its own ancestor.
    a.lineage.parents = {b.key};
    CHECK_THROWS_AS(store.insert(a, 1001), DagViolationError);
    // Self reference and duplicate keys are rejected too.
    Cmb self = a;
    self.lineage.parents = {self.key};
    CHECK_THROWS_AS(store.insert(self, 1002), DagViolationError);
    CHECK_THROWS_AS(store.insert(b, 1003), DagViolationError);
}

TEST_CASE("lifecycle follows the activity table") {
    MemoryStore store("alice");
    const Cmb& a = store.create_cmb("alice", 1000, 0.8, full_texts("a"),
                                    std::nullopt, {}, "observation", enc());

    SUBCASE("observed -> remixed on first peer remix, weight 1.5") {
        const LifecycleState s =
            store.advance_lifecycle(a.key, LifecycleTrigger::peer_remix("bob", 1100));
        CHECK(s == LifecycleState::remixed);
        CHECK(lifecycle_weight(s) == 1.5);
    }

    SUBCASE("validated + second distinct remixer -> canonical, weight 3.0") {
        store.advance_lifecycle(a.key, LifecycleTrigger::peer_remix("bob", 1100));
        store.advance_lifecycle(a.key, LifecycleTrigger::human_validation("val", true));
        CHECK(store.record(a.key).state == LifecycleState::validated);
        CHECK(lifecycle_weight(LifecycleState::validated) == 2.0);
        const LifecycleState s =
            store.advance_lifecycle(a.key, LifecycleTrigger::peer_remix("carol", 1200));
        CHECK(s == LifecycleState::canonical);
        CHECK(lifecycle_weight(s) == 3.0);
    }

    SUBCASE("observed -> archived after 31 idle days, weight 0.5") {
        const LifecycleState s = store.advance_lifecycle(
            a.key, LifecycleTrigger::clock(1000 + 31LL * 86400LL));
        CHECK(s == LifecycleState::archived);
        CHECK(lifecycle_weight(s) == 0.5);
    }

    SUBCASE("archived blocks re-emerge as remixed") {
        store.advance_lifecycle(a.key, LifecycleTrigger::clock(1000 + 31LL * 86400LL));
        const LifecycleState s = store.advance_lifecycle(
            a.key, LifecycleTrigger::peer_remix("bob", 1000 + 32LL * 86400LL));
        CHECK(s == LifecycleState::remixed);
    }

    SUBCASE("validation by an observer-role agent fails, state unchanged") {
        CHECK_THROWS_AS(
            store.advance_lifecycle(a.key, LifecycleTrigger::human_validation("obs", false)),
            AuthorityError);
        CHECK(store.record(a.key).state == LifecycleState::observed);
    }

    SUBCASE("canonical never decays via the clock") {
        store.advance_lifecycle(a.key, LifecycleTrigger::peer_remix("bob", 1100));
        store.advance_lifecycle(a.key, LifecycleTrigger::peer_remix("carol", 1150));
        store.advance_lifecycle(a.key, LifecycleTrigger::human_validation("val", true));
        CHECK(store.record(a.key).state == LifecycleState::canonical);
        const LifecycleState s = store.advance_lifecycle(
            a.key, LifecycleTrigger::clock(1000 + 365LL * 86400LL));
        CHECK(s == LifecycleState::canonical);
    }
}

TEST_CASE("lifecycle is monotone upward under activity triggers") {
    std::mt19937_64 gen(99);
    for (int run = 0; run < 200; ++run) {
        MemoryStore store("alice");
        const Cmb& a = store.create_cmb("alice", 1000, 0.8, full_texts("a"),
                                        std::nullopt, {}, "observation", enc());
        int prev_rank = lifecycle_rank(store.record(a.key).state);
        for (int step = 0; step < 12; ++step) {
            const int pick = static_cast<int>(gen() % 3);
            LifecycleState next;
            if (pick == 0) {
                next = store.advance_lifecycle(
                    a.key, LifecycleTrigger::peer_remix("peer" + std::to_string(gen() % 4),
                                                        1000 + step));
            } else if (pick == 1) {
                next = store.advance_lifecycle(
                    a.key, LifecycleTrigger::human_validation("val", true));
            } else {
                // Clock without idle time never demotes.
                next = store.advance_lifecycle(a.key,
                                               LifecycleTrigger::clock(1001 + step));
            }
            const int rank = lifecycle_rank(next);
            CHECK(rank >= prev_rank);
            prev_rank = rank;
        }
    }
}

TEST_CASE("retention unwinds a dead chain one generation per sweep") {
    MemoryStore store("alice");
    const Cmb& a = store.create_cmb("alice", 1000, 0.8, full_texts("a"),
                                    std::nullopt, {}, "observation", enc());
    const Cmb& b = store.create_cmb("alice", 1100, 0.8, full_texts("b"),
                                    std::nullopt, {a.key}, "SVAF-v1", enc());
    const Timestamp t = 1000 + 100LL * 86400LL;

    const auto purged1 = store.retention_sweep(t, 90LL * 86400LL);
    CHECK(purged1 == std::vector<CmbKey>{b.key});
    CHECK(store.contains(a.key));

    const auto purged2 = store.retention_sweep(t, 90LL * 86400LL);
    CHECK(purged2 == std::vector<CmbKey>{a.key});
    CHECK(store.size() == 0);
}

TEST_CASE("retention sweep on an empty store is a no-op") {
    MemoryStore store("alice");
    CHECK(store.retention_sweep(100000, 86400).empty());
}

TEST_CASE("retention matches the brute-force oracle on random DAGs") {
    std::mt19937_64 gen(424242);
    for (int run = 0; run < 40; ++run) {
        MemoryStore store("alice");
        std::vector<CmbKey> keys;
        const Timestamp t_now = 2000000;
        const std::int64_t max_age = 500000;
        for (int i = 0; i < 50; ++i) {
            // Ages spread across the retention boundary.
            const Timestamp ts = t_now - static_cast<Timestamp>(gen() % 1000000);
            std::vector<CmbKey> parents;
            if (!keys.empty()) {
                const int n_parents = static_cast<int>(gen() % 3);
                std::set<CmbKey> chosen;
                for (int p = 0; p < n_parents; ++p) {
                    chosen.insert(keys[gen() % keys.size()]);
                }
                parents.assign(chosen.begin(), chosen.end());
            }
            Cmb cmb;
            cmb.key = derive_key(ts, "n" + std::to_string(run) + "_" + std::to_string(i));
            cmb.origin_agent = "alice";
            cmb.timestamp = ts;
            cmb.confidence = 0.8;
            for (FieldId f : kAllFields) {
                FieldEntry& e = cmb.fields[field_index(f)];
                e.text = "neutral";
                e.vector = enc().neutral();
                if (f == FieldId::mood) e.affect = Affect{};
            }
            cmb.lineage.parents = parents;
            cmb.lineage.method = "SVAF-v1";
            store.insert(cmb, ts);
            keys.push_back(cmb.key);
        }

        // Oracle: expired and no descendant in the pre-sweep store.
        const DfsOracle oracle(store);
        std::set<CmbKey> expected;
        for (const auto& [key, rec] : store.records()) {
            const bool expired = t_now - rec.cmb.timestamp > max_age;
            if (expired && oracle.descendants(key).empty()) expected.insert(key);
        }

        const auto purged = store.retention_sweep(t_now, max_age);
        const std::set<CmbKey> actual(purged.begin(), purged.end());
        CHECK(actual == expected);

        // Safety: no survivor lists a purged ancestor.
        for (const auto& [key, rec] : store.records()) {
            for (const CmbKey& anc : store.lineage_query(key).ancestors) {
                CHECK(actual.count(anc) == 0);
            }
        }
    }
}

TEST_CASE("lineage query on roots and chains") {
    MemoryStore store("biz");
    const Cmb& d = store.create_cmb("biz", 1000, 0.8, full_texts("research"),
                                    std::nullopt, {}, "observation", enc());
    const Cmb& e = store.create_cmb("biz", 1100, 0.8, full_texts("coo"),
                                    std::nullopt, {d.key}, "SVAF-v1", enc());
    const Cmb& f = store.create_cmb("biz", 1200, 0.8, full_texts("founder"),
                                    std::nullopt, {e.key}, "validation", enc());

    const LineageInfo root = store.lineage_query(d.key);
    CHECK(root.ancestors.empty());
    CHECK(root.lineage_depth == 0);
    CHECK(root.descendants == std::vector<CmbKey>{std::min(e.key, f.key),
                                                  std::max(e.key, f.key)});

    const LineageInfo leaf = store.lineage_query(f.key);
    CHECK(leaf.parents == std::vector<CmbKey>{e.key});
    CHECK(leaf.ancestors == std::vector<CmbKey>{std::min(d.key, e.key),
                                                std::max(d.key, e.key)});
    CHECK(leaf.lineage_depth == 2);
    CHECK_THROWS_AS(store.lineage_query("unknown"), LineageError);
}

TEST_CASE("lineage query matches the DFS oracle on random DAGs") {
    std::mt19937_64 gen(777);
    MemoryStore store("alice");
    std::vector<CmbKey> keys;
    for (int i = 0; i < 60; ++i) {
        std::vector<CmbKey> parents;
        if (!keys.empty()) {
            std::set<CmbKey> chosen;
            const int n_parents = static_cast<int>(gen() % 3);
            for (int p = 0; p < n_parents; ++p) {
                chosen.insert(keys[gen() % keys.size()]);
            }
            parents.assign(chosen.begin(), chosen.end());
        }
        const Cmb& cmb = store.create_cmb("alice", 1000 + i, 0.8,
                                          full_texts("n" + std::to_string(i)),
                                          std::nullopt, parents, "SVAF-v1", enc());
        keys.push_back(cmb.key);
    }

    const DfsOracle oracle(store);
    for (const CmbKey& key : keys) {
        const LineageInfo info = store.lineage_query(key);
        const auto anc = oracle.ancestors(key);
        const auto desc = oracle.descendants(key);
        CHECK(std::set<CmbKey>(info.ancestors.begin(), info.ancestors.end()) == anc);
        CHECK(std::set<CmbKey>(info.descendants.begin(), info.descendants.end()) == desc);
        CHECK(info.remix_count == recount_children(store, key));
        CHECK(info.lineage_depth == oracle.depth(key));
    }
}

TEST_CASE("stored blocks are immutable across operations") {
    MemoryStore store("alice");
    const Cmb& a = store.create_cmb("alice", 1000, 0.8, full_texts("a"),
                                    Affect{0.1, 0.2}, {}, "observation", enc());
    const std::string before = to_canonical_json(a);

    store.create_cmb("alice", 1100, 0.8, full_texts("b"), std::nullopt, {a.key},
                     "SVAF-v1", enc());
    store.advance_lifecycle(a.key, LifecycleTrigger::peer_remix("bob", 1200));
    store.advance_lifecycle(a.key, LifecycleTrigger::human_validation("val", true));
    store.retention_sweep(2000, 90LL * 86400LL);
    store.lineage_query(a.key);

    CHECK(to_canonical_json(store.record(a.key).cmb) == before);
}

TEST_CASE("dag stays acyclic after every insertion") {
    std::mt19937_64 gen(31337);
    MemoryStore store("alice");
    std::vector<CmbKey> keys;
    for (int i = 0; i < 40; ++i) {
        std::vector<CmbKey> parents;
        if (!keys.empty() && gen() % 2) parents.push_back(keys[gen() % keys.size()]);
        const Cmb& cmb = store.create_cmb("alice", 1000 + i, 0.8,
                                          full_texts("k" + std::to_string(i)),
                                          std::nullopt, parents, "SVAF-v1", enc());
        keys.push_back(cmb.key);

        // Kahn topological sort must consume every stored node.
        std::map<CmbKey, int> indegree;
        for (const auto& [k, rec] : store.records()) indegree[k] = 0;
        for (const auto& [k, rec] : store.records()) {
            for (const CmbKey& p : rec.cmb.lineage.parents) {
                if (indegree.count(p)) indegree[k]++;
            }
        }
        std::vector<CmbKey> ready;
        for (const auto& [k, deg] : indegree) {
            if (deg == 0) ready.push_back(k);
        }
        std::size_t seen = 0;
        while (!ready.empty()) {
            const CmbKey k = ready.back();
            ready.pop_back();
            ++seen;
            for (const CmbKey& child : store.children(k)) {
                if (--indegree[child] == 0) ready.push_back(child);
            }
        }
        CHECK(seen == store.size());
    }
}

TEST_CASE("canonical json round-trips and keeps key order") {
    MemoryStore store("alice");
    const Cmb& a = store.create_cmb("alice", 1234, 0.85, full_texts("serial"),
                                    Affect{-0.5, 0.25}, {}, "observation", enc());
    const std::string json = to_canonical_json(a);
    CHECK(json.find("\"key\":") < json.find("\"origin\":"));
    CHECK(json.find("\"origin\":") < json.find("\"ts\":"));
    CHECK(json.find("\"fields\":") < json.find("\"lineage\":"));
    CHECK(json.find("\"focus\"") < json.find("\"issue\""));
    CHECK(json.find("\"perspective\"") < json.find("\"mood\""));

    const Cmb parsed = cmb_from_json(json);
    CHECK(to_canonical_json(parsed) == json);

    const std::string snapshot = store_to_json(store);
    const MemoryStore restored = store_from_json(snapshot);
    CHECK(store_to_json(restored) == snapshot);
}

TEST_CASE("keys are time ordered") {
    const CmbKey early = make_key(1000, 0x1234, 7);
    const CmbKey late = make_key(2000, 0x0001, 1);
    CHECK(early < late);
    CHECK(early.size() == 32);
    for (char c : early) {
        const bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        CHECK(hex);
    }
}
