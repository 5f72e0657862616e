#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace reactcmg {

/// 64-bit FNV-1a. Byte-oriented, so the result is identical on every platform.
/// The seed is folded into the offset basis; seed 0 gives plain FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0) {
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace reactcmg
