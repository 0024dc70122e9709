#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "core/status.hpp"
#include "log/log_format.hpp"

namespace cascade {

struct LogOptions {
    std::string path;
    uint64_t size_budget_bytes = 1ull << 30;
    size_t flush_bytes = 1u << 20;    // flush when this much is staged...
    uint64_t flush_delay_us = 1000;   // ...or this long after the first staged record
};

struct StabilityFrontier {
    uint64_t stable_seq = 0;  // highest shard_seq durable on every replica
    uint64_t stable_ts = 0;
};

struct StagedMeta {
    std::string key;
    uint64_t version;
    uint64_t shard_seq;
    uint64_t timestamp_us;
    int64_t offset;
};

// Append-only per-shard-member log. One append context (the ordered delivery
// thread), one background write-back thread, any number of readers. Readers
// only ever see records the write-back thread has flushed, synced and
// published to the index.
class PersistentLog {
  public:
    struct RecoveredHead {
        LogRecord record;     // latest version of the key, payload included
        int64_t offset = -1;  // where that record lives in the file
    };

    struct Counters {
        uint64_t records_appended = 0;
        uint64_t write_calls = 0;
        uint64_t bytes_written = 0;
        uint64_t sync_calls = 0;
    };

    // Opens (creating if needed) and recovers the log file: replays every
    // record with a valid checksum up to the first corrupt or partial record
    // and truncates the rest. CorruptLog only if record 0 is complete but
    // fails its checksum.
    static Result<std::unique_ptr<PersistentLog>> open(LogOptions opts);

    ~PersistentLog();
    PersistentLog(const PersistentLog&) = delete;
    PersistentLog& operator=(const PersistentLog&) = delete;

    // Stages one record; the write-back thread makes it durable. Returns the
    // record's file offset. Sequence numbers must arrive gap-free and in
    // order. LogFull once the size budget would be exceeded.
    Result<int64_t> append(const LogRecord& rec);

    // Blocks until everything with shard_seq <= seq is flushed and synced.
    bool wait_durable(uint64_t seq, uint64_t timeout_us) const;
    uint64_t durable_seq() const { return durable_seq_.load(std::memory_order_acquire); }
    uint64_t last_staged_seq() const;

    // Asks the write-back thread to flush immediately.
    void request_flush() const;

    // Reads the record at `offset`, forcing a flush first if it is still in
    // the staging buffer.
    Result<LogRecord> read_at(int64_t offset) const;

    // Highest logged version of the key with timestamp <= t_us. Callers must
    // keep t_us at or below the stability frontier (get_by_time does the
    // waiting). KeyNotFound if the key was never logged; NotFound if its
    // first version is later than t_us.
    Result<uint64_t> time_to_version(const std::string& full_key, uint64_t t_us) const;

    // File offset of (key, version); VersionNotFound covers both versions
    // beyond the current one and versions that were never logged.
    Result<int64_t> offset_of_version(const std::string& full_key, uint64_t version) const;

    // Stability frontier, advanced from replication acks. Monotone.
    void set_frontier(uint64_t stable_seq, uint64_t stable_ts);
    StabilityFrontier frontier() const;
    // True once stable_ts >= ts_us, false on timeout or shutdown.
    bool wait_frontier_ts(uint64_t ts_us, uint64_t timeout_us) const;

    // Wakes and fails all frontier/durability waiters; used at node shutdown
    // so blocked temporal gets return promptly.
    void shutdown_waiters();

    // Invoked from the write-back thread after each sync with the new durable
    // seq; replication uses it to emit PERSIST_ACKs.
    void set_durable_callback(std::function<void(uint64_t)> cb);

    // Heads recovered by open(); the kv table is rebuilt from these.
    std::vector<RecoveredHead> take_recovered_heads();

    // Abandons the staging buffer and stops without a final flush, leaving
    // the file exactly as the last completed sync left it. Crash tests use
    // this; normal destruction drains the buffer.
    void crash_stop();

    Counters counters() const;
    size_t temporal_index_size() const;
    const std::string& path() const { return opts_.path; }

  private:
    explicit PersistentLog(LogOptions opts);

    Status open_and_recover();
    void writeback_loop();
    // Flushes the swapped-out buffer; returns false on IO error.
    bool flush_batch(Bytes& buf, std::vector<StagedMeta>& metas);
    void stop_writeback(bool drain);

    struct KeyIndexEntry {
        uint64_t version;
        uint64_t timestamp_us;
        int64_t offset;
    };
    struct TemporalEntry {
        uint64_t timestamp_us;
        uint64_t shard_seq;
        int64_t offset;
    };

    LogOptions opts_;
    int fd_ = -1;

    // staging (append thread <-> write-back thread)
    mutable std::mutex stage_mu_;
    mutable std::condition_variable stage_cv_;
    Bytes staging_;
    std::vector<StagedMeta> staged_metas_;
    uint64_t first_staged_at_us_ = 0;
    mutable bool flush_requested_ = false;
    bool stopping_ = false;
    bool crashed_ = false;
    int64_t next_offset_ = 0;     // offset the next staged record will get
    uint64_t staged_seq_ = 0;     // highest staged shard_seq
    std::thread writeback_;

    // published state (write-back thread -> readers)
    std::atomic<uint64_t> durable_seq_{0};
    std::atomic<int64_t> durable_offset_{0};  // file bytes covered by the last sync
    mutable std::mutex durable_mu_;
    mutable std::condition_variable durable_cv_;

    mutable std::shared_mutex index_mu_;
    std::unordered_map<std::string, std::vector<KeyIndexEntry>> per_key_;
    std::vector<TemporalEntry> temporal_;

    std::atomic<uint64_t> stable_seq_{0};
    std::atomic<uint64_t> stable_ts_{0};
    std::atomic<bool> waiters_closed_{false};
    mutable std::mutex frontier_mu_;
    mutable std::condition_variable frontier_cv_;

    mutable std::mutex cb_mu_;
    std::function<void(uint64_t)> durable_cb_;

    mutable std::mutex counters_mu_;
    Counters counters_;

    std::vector<RecoveredHead> recovered_heads_;
};

}  // namespace cascade
