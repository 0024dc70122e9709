#pragma once

#include <chrono>
#include <cstdint>

namespace cascade {

// Wall-clock microseconds since the Unix epoch. Object timestamps use this.
inline uint64_t epoch_us() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                     std::chrono::system_clock::now().time_since_epoch())
                                     .count());
}

// Monotonic nanoseconds, for latency measurement. CLOCK_MONOTONIC is shared
// by all processes on one machine, so cross-process deltas are meaningful
// for a loopback cluster.
inline uint64_t mono_ns() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now().time_since_epoch())
                                     .count());
}

inline uint64_t mono_us() { return mono_ns() / 1000; }

}  // namespace cascade
