#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "log/persistent_log.hpp"

namespace cascade {

// Sequencer-side frontier bookkeeping: tracks each replica's durable seq and
// the timestamp of every outstanding seq, and advances the stability frontier
// to the minimum durable seq across replicas.
class FrontierTracker {
  public:
    explicit FrontierTracker(std::vector<uint32_t> member_ids) {
        for (uint32_t id : member_ids) durable_[id] = 0;
    }

    void note_timestamp(uint64_t seq, uint64_t ts_us) { seq_ts_[seq] = ts_us; }

    // Records a replica ack; returns the new frontier when it advanced.
    std::optional<StabilityFrontier> advance(uint32_t member_id, uint64_t durable_seq) {
        auto it = durable_.find(member_id);
        if (it == durable_.end()) return std::nullopt;
        if (durable_seq <= it->second) return std::nullopt;
        it->second = durable_seq;
        return recompute();
    }

    // Drops a failed replica from the minimum; the frontier may advance.
    std::optional<StabilityFrontier> remove_member(uint32_t member_id) {
        durable_.erase(member_id);
        return recompute();
    }

    std::optional<StabilityFrontier> recompute() {
        if (durable_.empty()) return std::nullopt;
        uint64_t stable = UINT64_MAX;
        for (const auto& [id, seq] : durable_) stable = std::min(stable, seq);
        if (stable == UINT64_MAX || stable <= frontier_.stable_seq) return std::nullopt;
        frontier_.stable_seq = stable;
        auto ts = seq_ts_.find(stable);
        if (ts != seq_ts_.end()) frontier_.stable_ts = ts->second;
        seq_ts_.erase(seq_ts_.begin(), seq_ts_.upper_bound(stable));
        return frontier_;
    }

    StabilityFrontier frontier() const { return frontier_; }

  private:
    std::map<uint32_t, uint64_t> durable_;
    std::map<uint64_t, uint64_t> seq_ts_;
    StabilityFrontier frontier_;
};

}  // namespace cascade
