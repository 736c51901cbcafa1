#include "meshfuse/encoder.hpp"

#include <fstream>
#include <vector>

#include "json.hpp"

#include "meshfuse/errors.hpp"

namespace meshfuse {
namespace {

// Minimal UTF-8 decode: returns codepoint and advances i. Invalid bytes are
// passed through as single codepoints so hashing stays total.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
    const auto byte = [&](std::size_t k) {
        return static_cast<unsigned char>(s[k]);
    };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (int k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    return cp;
}

void append_utf8(std::u32string::value_type cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space_cp(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_edge_punct(char32_t cp) {
    if (cp < 0x80) {
        const char c = static_cast<char>(cp);
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
               (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
    }
    // General punctuation block plus common quotes/bullets.
    return (cp >= 0x2010 && cp <= 0x205E) || cp == 0xAB || cp == 0xBB ||
           cp == 0x2022 || cp == 0x00B7;
}

std::vector<std::u32string> tokenize(const std::string& normalized) {
    std::vector<std::u32string> tokens;
    std::u32string current;
    std::size_t i = 0;
    const auto flush = [&] {
        if (current.empty()) return;
        std::size_t a = 0, b = current.size();
        while (a < b && is_edge_punct(current[a])) ++a;
        while (b > a && is_edge_punct(current[b - 1])) --b;
        if (b > a) tokens.push_back(current.substr(a, b - a));
        current.clear();
    };
    while (i < normalized.size()) {
        const char32_t cp = next_codepoint(normalized, i);
        if (is_space_cp(cp)) {
            flush();
        } else {
            current.push_back(cp);
        }
    }
    flush();
    return tokens;
}

std::string to_utf8(const std::u32string& s) {
    std::string out;
    for (char32_t cp : s) append_utf8(cp, out);
    return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string Encoder::normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool prev_space = true;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = next_codepoint(text, i);
        if (is_space_cp(cp)) {
            if (!prev_space) out.push_back(' ');
            prev_space = true;
            continue;
        }
        if (cp < 0x80 && cp >= 'A' && cp <= 'Z') cp += 32;
        append_utf8(cp, out);
        prev_space = false;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

Encoder::Encoder(EncoderConfig config) : config_(std::move(config)) {
    if (config_.dim < 8) {
        throw ConfigError("encoder dim must be >= 8");
    }
    if (config_.mode == EncoderMode::table) {
        if (config_.table_path.empty()) {
            throw ConfigError("table mode requires table_path");
        }
        std::ifstream in(config_.table_path);
        if (!in) {
            throw ConfigError("cannot open embedding table: " + config_.table_path);
        }
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("text") || !j.contains("vector")) {
                throw ConfigError("bad embedding table line " + std::to_string(line_no));
            }
            Vec v = j["vector"].get<Vec>();
            table_[normalize_text(j["text"].get<std::string>())] = normalized(std::move(v));
        }
    }
    neutral_ = encode("neutral");
}

Vec Encoder::encode_ngram(const std::string& normalized_text) const {
    Vec v(config_.dim, 0.0);
    std::size_t feature_count = 0;
    const auto add = [&](std::string_view feature) {
        const std::uint64_t h = fnv1a64(feature);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % config_.dim] += sign;
        ++feature_count;
    };

    const std::vector<std::u32string> tokens = tokenize(normalized_text);
    std::string feature;
    for (const auto& tok : tokens) {
        for (std::size_t i = 0; i + 3 <= tok.size(); ++i) {
            feature = "t|";
            append_utf8(tok[i], feature);
            append_utf8(tok[i + 1], feature);
            append_utf8(tok[i + 2], feature);
            add(feature);
        }
    }
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        feature = "b|" + to_utf8(tokens[i]) + " " + to_utf8(tokens[i + 1]);
        add(feature);
    }
    // Very short inputs can produce no trigram/bigram features; hash the
    // whole normalized text so every nonempty input still has a unit vector.
    if (feature_count == 0 && !normalized_text.empty()) {
        add("x|" + normalized_text);
    }
    return normalized(std::move(v));
}

Vec Encoder::encode(const std::string& text) const {
    const std::string norm = normalize_text(text);
    if (norm.empty()) return Vec(config_.dim, 0.0);
    if (config_.mode == EncoderMode::table) {
        auto it = table_.find(norm);
        if (it != table_.end()) return it->second;
    }
    return encode_ngram(norm);
}

}  // namespace meshfuse
