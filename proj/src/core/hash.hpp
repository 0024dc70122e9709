#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cascade {

// FNV-1a, 64 bit. Used for shard mapping, payload checksums, log record
// checksums and FIFO queue selection; must stay bit-exact across platforms.
inline constexpr uint64_t kFnv64OffsetBasis = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnv64Prime = 0x100000001b3ull;

inline uint64_t stable_hash(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = kFnv64OffsetBasis;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnv64Prime;
    }
    return h;
}

inline uint64_t stable_hash(std::string_view s) { return stable_hash(s.data(), s.size()); }

}  // namespace cascade
