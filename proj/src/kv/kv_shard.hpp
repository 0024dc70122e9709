#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/bytes.hpp"
#include "core/keys.hpp"
#include "core/status.hpp"
#include "log/persistent_log.hpp"

namespace cascade {

// A consistent snapshot of one stored version.
struct VersionedObject {
    std::string key;  // full key
    PayloadPtr payload;
    Version version;
    uint64_t payload_checksum = 0;
    int64_t prev_offset = -1;  // log offset of the newest older logged record
    int64_t self_offset = -1;  // log offset of this record, -1 when unlogged

    bool has_prev() const { return version.per_key_version > 0; }
};

namespace detail {

// Variable-size current-version record. The payload is stored inline and
// overwritten in place by later puts when the capacity suffices, which is
// exactly the window the seqlock guards.
struct SlotRecord {
    uint64_t per_key_version;
    uint64_t shard_seq;
    uint64_t timestamp_us;
    uint64_t checksum;
    int64_t prev_offset;
    int64_t self_offset;
    uint32_t payload_size;
    uint32_t capacity;  // immutable for the lifetime of the block

    uint8_t* payload() { return reinterpret_cast<uint8_t*>(this + 1); }
    const uint8_t* payload() const { return reinterpret_cast<const uint8_t*>(this + 1); }
};

// Guard pair per key. The put path bumps v_a, writes the record, then bumps
// v_b; readers validate that v_a observed after the copy equals the v_b
// observed before it. v_a >= v_b always; equal exactly when no update is in
// flight.
struct KeySlot {
    std::atomic<uint64_t> v_a{0};
    std::atomic<uint64_t> v_b{0};
    std::atomic<SlotRecord*> rec{nullptr};

    // Writer-owned, never touched by readers:
    int64_t last_logged_offset = -1;
    uint64_t next_version = 0;
};

// Fixed-bucket hash directory. The single writer prepends nodes; readers
// traverse with acquire loads. Nodes are never removed, so lookups take no
// lock.
class SlotDirectory {
  public:
    explicit SlotDirectory(size_t buckets = 4096);
    ~SlotDirectory();
    SlotDirectory(const SlotDirectory&) = delete;
    SlotDirectory& operator=(const SlotDirectory&) = delete;

    KeySlot* find(std::string_view key) const;
    KeySlot* find_or_create(const std::string& key);  // writer only
    size_t size() const { return size_.load(std::memory_order_acquire); }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& head : buckets_) {
            for (Node* n = head.load(std::memory_order_acquire); n != nullptr;
                 n = n->next.load(std::memory_order_acquire))
                fn(n->key, n->slot);
        }
    }

  private:
    struct Node {
        uint64_t hash;
        std::string key;
        KeySlot slot;
        std::atomic<Node*> next{nullptr};
    };

    std::vector<std::atomic<Node*>> buckets_;
    std::atomic<size_t> size_{0};
};

}  // namespace detail

// The in-memory store held by one shard member. Exactly one update context
// (the ordered delivery thread) calls apply_put; any number of reader threads
// call the get family. The dual version guard is the only reader/writer
// synchronization on the object read path.
class KvShard {
  public:
    // log may be null (volatile pool). Not owned.
    KvShard(Persistence persistence, PersistentLog* log);
    ~KvShard();

    static constexpr int kMaxGetRetries = 1000;

    // Delivery context only. Stages the log append (when `logged`), installs
    // the new version and returns it. Total: storage errors degrade to an
    // unlogged in-memory version rather than failing the delivery.
    Version apply_put(const std::string& full_key, const uint8_t* data, size_t len,
                      uint64_t shard_seq, uint64_t timestamp_us, bool logged);

    Result<VersionedObject> get_current(std::string_view full_key) const;
    Result<VersionedObject> get_by_version(std::string_view full_key, uint64_t version) const;
    Result<std::vector<VersionedObject>> get_range_by_version(std::string_view full_key,
                                                              uint64_t v_lo, uint64_t v_hi) const;

    // Guard observation for tests: (v_a, v_b) for a key, zeros when absent.
    std::pair<uint64_t, uint64_t> guard_state(std::string_view full_key) const;

    uint64_t key_count() const { return dir_.size(); }
    Persistence persistence() const { return persistence_; }
    PersistentLog* log() const { return log_; }

    // Deterministic serialization of the current-version table (sorted by
    // key), used by the replica agreement checks. Call only when quiesced.
    Bytes state_fingerprint() const;

    // Rebuilds the current-version table from recovered log heads.
    void install_recovered(std::vector<PersistentLog::RecoveredHead> heads);

  private:
    Result<VersionedObject> snapshot(const detail::KeySlot& slot, std::string_view key) const;
    Result<VersionedObject> read_logged(int64_t offset) const;

    Persistence persistence_;
    PersistentLog* log_;
    detail::SlotDirectory dir_;

    // Replaced record blocks stay allocated until the shard dies, so readers
    // validating against a stale pointer never touch freed memory.
    std::vector<detail::SlotRecord*> retired_;
};

}  // namespace cascade
