#pragma once

#include <cstdint>
#include <string>

#include "core/bytes.hpp"
#include "core/keys.hpp"
#include "net/frames.hpp"

namespace cascade {

struct PutResult {
    Version version;
    PutTiming timing;
    uint64_t e2e_ns = 0;  // caller-side round trip
};

struct TrigResult {
    uint64_t resident_ns = 0;
    uint64_t e2e_ns = 0;
};

struct GetResult {
    std::string key;
    Version version;
    Bytes payload;
    uint64_t resident_ns = 0;
    uint64_t e2e_ns = 0;
};

}  // namespace cascade
