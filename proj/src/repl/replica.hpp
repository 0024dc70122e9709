#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <thread>

#include "core/bounded_queue.hpp"
#include "fastpath/dispatcher.hpp"
#include "kv/kv_shard.hpp"
#include "log/persistent_log.hpp"
#include "net/frames.hpp"

namespace cascade {

// One shard replica on one node: the ordered delivery context feeding the kv
// table, the log (persistent pools), and the fast path.
class ShardReplica {
  public:
    struct Hooks {
        std::function<void(const McastAckMsg&)> send_mcast_ack;
        std::function<void(const PersistAckMsg&)> send_persist_ack;
        std::function<void(const GapReqMsg&)> send_gap_req;
        std::function<void(std::shared_ptr<const DispatchObject>)> dispatch;
    };

    ShardReplica(std::string pool, uint32_t shard, uint32_t self_id, Persistence persistence,
                 size_t queue_capacity, Hooks hooks);
    ~ShardReplica();

    // Opens + recovers the log (persistent pools). Must run before enqueue.
    Status init_log(LogOptions opts);

    // Called from frame handlers and the local sequencer, any thread.
    void enqueue(McastMsg msg, PayloadPtr payload);

    // This node's slot among the shard members, for lambda designation.
    void set_position(uint32_t index, uint32_t count);

    KvShard& kv() { return *kv_; }
    PersistentLog* log() { return log_.get(); }
    uint64_t applied_seq() const { return applied_seq_.load(std::memory_order_acquire); }
    uint64_t last_applied_ts() const { return last_ts_us_.load(std::memory_order_acquire); }
    // Highest seq with every logged record at or below it durable.
    uint64_t durable_watermark() const;

    const std::string& pool() const { return pool_; }
    uint32_t shard() const { return shard_; }

    void stop();        // drains the queue, joins, final log sync
    void crash_stop();  // abandons queued deliveries and staged log writes

  private:
    struct Item {
        McastMsg msg;
        PayloadPtr payload;
    };

    void delivery_loop();
    void apply(const McastMsg& msg, const PayloadPtr& payload);

    const std::string pool_;
    const uint32_t shard_;
    const uint32_t self_;
    const Persistence persistence_;
    Hooks hooks_;

    std::unique_ptr<PersistentLog> log_;
    std::unique_ptr<KvShard> kv_;

    BoundedQueue<Item> queue_;
    std::thread delivery_;
    std::atomic<bool> stopped_{false};

    // delivery-thread state
    uint64_t next_expected_ = 1;
    std::map<uint64_t, Item> reorder_;
    uint64_t gap_requested_hi_ = 0;

    std::atomic<uint64_t> applied_seq_{0};
    std::atomic<uint64_t> last_ts_us_{0};
    std::atomic<uint32_t> member_index_{0};
    std::atomic<uint32_t> member_count_{1};

    // logged-but-not-yet-durable seqs, for the persist-ack watermark
    mutable std::mutex wm_mu_;
    mutable std::deque<uint64_t> pending_logged_;
};

}  // namespace cascade
