#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "core/bytes.hpp"
#include "core/keys.hpp"
#include "core/status.hpp"
#include "log/frontier.hpp"
#include "net/frames.hpp"

namespace cascade {

using PutResponder = std::function<void(const Status&, const Version&, const PutTiming&)>;

// Per-shard total-order state, living on the member with the lowest id.
// Assigns seq numbers and delivery timestamps, multicasts to members, tracks
// apply/persist acks, answers the submitters, and advances the stability
// frontier for persistent pools.
class ShardSequencer {
  public:
    struct Hooks {
        // Sends an MCAST frame to a peer member (not self).
        std::function<bool(uint32_t member, const Bytes& head, const PayloadPtr& payload)>
            send_mcast;
        // Enqueues delivery on the local replica.
        std::function<void(McastMsg msg, PayloadPtr payload)> deliver_local;
        // Fires on every frontier advance (persistent pools).
        std::function<void(const StabilityFrontier&)> on_frontier;
    };

    ShardSequencer(std::string pool, uint32_t shard, uint32_t self_id,
                   std::vector<uint32_t> members, Persistence pool_persistence, Hooks hooks,
                   uint64_t initial_seq = 0, uint64_t initial_ts_us = 0);

    // Assigns the next seq and fans out. `kind` must be resolved (Volatile or
    // Persistent). recv_ns is the request arrival time on this node's clock.
    void submit(const std::string& full_key, PayloadPtr payload, PutKind kind, uint64_t recv_ns,
                PutResponder respond);

    void on_mcast_ack(const McastAckMsg& ack);
    void on_persist_ack(const PersistAckMsg& ack);
    void on_gap_req(const GapReqMsg& req);
    void on_member_removed(uint32_t member);

    // Fails pendings older than the deadline with CommitTimeout, naming the
    // lagging members.
    void check_timeouts(uint64_t commit_timeout_ms);

    StabilityFrontier frontier() const;
    bool has_persistence() const { return persistence_ == Persistence::Persistent; }
    const std::string& pool() const { return pool_; }
    uint32_t shard() const { return shard_; }

    // Shutdown: answers every pending with `code`.
    void fail_all(Code code);

  private:
    struct Pending {
        std::string key;
        PutKind kind;
        uint64_t seq = 0;
        uint64_t timestamp_us = 0;
        uint64_t per_key_version = 0;
        std::set<uint32_t> awaiting_apply;
        uint64_t recv_ns = 0;
        uint64_t all_applied_ns = 0;
        uint64_t max_apply_ns = 0;
        PutResponder respond;
    };

    struct Retained {
        Bytes head;
        PayloadPtr payload;
    };

    // Callers hold mu_.
    void complete_applied(uint64_t seq, std::vector<std::function<void()>>& out);
    void complete_persisted(uint64_t stable_seq, std::vector<std::function<void()>>& out);
    static PutTiming timing_of(const Pending& p, bool persisted);

    const std::string pool_;
    const uint32_t shard_;
    const uint32_t self_;
    const Persistence persistence_;
    Hooks hooks_;

    mutable std::mutex mu_;
    std::vector<uint32_t> members_;
    uint64_t next_seq_ = 0;  // last assigned
    uint64_t last_ts_us_ = 0;
    std::map<uint64_t, Pending> pending_;          // awaiting apply acks
    std::map<uint64_t, Pending> pending_persist_;  // applied, awaiting durability
    std::map<uint64_t, Retained> retained_;        // for gap retransmission
    FrontierTracker tracker_;
    bool failed_ = false;
};

}  // namespace cascade
