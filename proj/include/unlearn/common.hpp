#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace unlearn {

using NodeId = std::int32_t;
using ClassId = std::int32_t;

// Error taxonomy. Callers are expected to catch by type: config errors are
// caller mistakes, parse errors carry file/line context, validation errors
// mean an invariant of a constructed object failed.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedMethodError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, used for config fingerprints and seed derivation tags.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace unlearn
