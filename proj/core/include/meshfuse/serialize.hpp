#pragma once
// Canonical JSON for memory blocks and store snapshots. Field order follows
// the schema declaration order and floats are rendered with 9 significant
// digits so golden files stay byte-stable.

#include <map>
#include <string>

#include "meshfuse/cmb.hpp"
#include "meshfuse/store.hpp"
#include "meshfuse/svaf.hpp"

namespace meshfuse {

// Shortest %.9g rendering shared by every serialized format.
std::string format_g9(double v);
std::string format_fixed(double v, int decimals);

std::string json_escape(const std::string& s);

// {"key":...,"origin":...,"ts":...,"confidence":...,"fields":{...},"lineage":{...}}
std::string to_canonical_json(const Cmb& cmb);
Cmb cmb_from_json(const std::string& json_text);

// Store snapshot: {"owner":...,"records":[{"cmb":...,"state":...,
// "last_remix_time":...,"remixers":[...]}]}, records in key order.
std::string store_to_json(const MemoryStore& store);
MemoryStore store_from_json(const std::string& json_text);

// Profile fixtures: {"profiles":[{"id":...,"alpha":{...},"tau_freshness":...,
// "default_confidence":...,"role":...,"anchor_k":...}]}, keyed by id.
std::map<std::string, AgentProfile> load_profiles(const std::string& path);
std::map<std::string, AgentProfile> profiles_from_json(const std::string& json_text);

}  // namespace meshfuse
