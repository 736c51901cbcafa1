#pragma once
// Deterministic text -> unit-vector encoding.
//
// The default mode hashes character trigrams and word bigrams (FNV-1a 64,
// bucket = hash mod dim, sign = bit 63) and L2-normalizes the result. It is
// bit-stable across runs and platforms. Table mode looks up precomputed
// vectors (JSON lines {"text":..., "vector":[...]}) by normalized text and
// falls back to the n-gram path on a miss, which is how externally produced
// semantic embeddings are plugged in.

#include <cstdint>
#include <string>
#include <unordered_map>

#include "meshfuse/vec.hpp"

namespace meshfuse {

enum class EncoderMode : std::uint8_t { ngram, table };

struct EncoderConfig {
    std::size_t dim = 64;  // >= 8
    EncoderMode mode = EncoderMode::ngram;
    std::string table_path;  // required for table mode
};

class Encoder {
public:
    // Throws ConfigError for dim < 8 or a missing/invalid table file.
    explicit Encoder(EncoderConfig config);

    // Empty text encodes to the zero vector (callers treat it as drift 1).
    Vec encode(const std::string& text) const;

    // encode("neutral"): the baseline filled into absent fields.
    const Vec& neutral() const { return neutral_; }

    std::size_t dim() const { return config_.dim; }
    const EncoderConfig& config() const { return config_; }

    // Case/whitespace normalization used for hashing and table lookup.
    static std::string normalize_text(const std::string& text);

private:
    Vec encode_ngram(const std::string& normalized) const;

    EncoderConfig config_;
    std::unordered_map<std::string, Vec> table_;
    Vec neutral_;
};

std::uint64_t fnv1a64(std::string_view data);

}  // namespace meshfuse
