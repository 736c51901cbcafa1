#pragma once

#include <stdexcept>
#include <string>

namespace meshfuse {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lineage references a key the store does not know.
struct LineageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inserting the block would create a cycle in the lineage graph.
struct DagViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Validation attempted by an agent without validator/anchor role.
struct AuthorityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ClockSkewError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace meshfuse
