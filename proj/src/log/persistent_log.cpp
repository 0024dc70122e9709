#include "log/persistent_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "core/clock.hpp"
#include "core/debug.hpp"

namespace cascade {

PersistentLog::PersistentLog(LogOptions opts) : opts_(std::move(opts)) {}

Result<std::unique_ptr<PersistentLog>> PersistentLog::open(LogOptions opts) {
    std::unique_ptr<PersistentLog> log(new PersistentLog(std::move(opts)));
    Status st = log->open_and_recover();
    if (!st.ok()) return st;
    log->writeback_ = std::thread([p = log.get()] { p->writeback_loop(); });
    return log;
}

Status PersistentLog::open_and_recover() {
    fd_ = ::open(opts_.path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0)
        return Status::error(Code::ConfigError,
                             "cannot open log file " + opts_.path + ": " + std::strerror(errno));

    off_t file_size = ::lseek(fd_, 0, SEEK_END);
    if (file_size < 0) return Status::error(Code::Internal, "lseek failed");

    // Sequential replay, one record at a time. Stops at the first corrupt or
    // partial record; a clean mid-record truncation (a crash tail) is dropped
    // silently, a complete record 0 that fails its checksum is CorruptLog.
    std::unordered_map<std::string, size_t> head_index;
    int64_t offset = 0;
    uint64_t last_seq = 0;
    size_t record_no = 0;
    std::vector<uint8_t> buf;
    while (offset + static_cast<int64_t>(kLogRecordHeaderSize + kLogRecordTrailerSize) <=
           file_size) {
        uint8_t header[kLogRecordHeaderSize];
        if (::pread(fd_, header, sizeof header, offset) != static_cast<ssize_t>(sizeof header))
            return Status::error(Code::Internal, "pread failed during recovery");
        uint32_t key_len, payload_len;
        std::memcpy(&key_len, header, 4);
        std::memcpy(&payload_len, header + 4, 4);
        if (key_len > kMaxLogFieldLen || payload_len > kMaxLogFieldLen) {
            if (record_no == 0)
                return Status::error(Code::CorruptLog, "record 0 unreadable in " + opts_.path);
            break;
        }
        size_t total = kLogRecordHeaderSize + key_len + payload_len + kLogRecordTrailerSize;
        if (offset + static_cast<int64_t>(total) > file_size) break;  // truncated tail

        buf.resize(total);
        if (::pread(fd_, buf.data(), total, offset) != static_cast<ssize_t>(total))
            return Status::error(Code::Internal, "pread failed during recovery");
        DecodedRecord dec = decode_record(buf.data(), total);
        if (dec.outcome != DecodeOutcome::Ok) {
            if (record_no == 0)
                return Status::error(Code::CorruptLog, "record 0 unreadable in " + opts_.path);
            break;
        }

        last_seq = dec.record.version.shard_seq;
        per_key_[dec.record.key].push_back(
            {dec.record.version.per_key_version, dec.record.version.timestamp_us, offset});
        temporal_.push_back({dec.record.version.timestamp_us, dec.record.version.shard_seq, offset});
        auto it = head_index.find(dec.record.key);
        if (it == head_index.end()) {
            head_index.emplace(dec.record.key, recovered_heads_.size());
            recovered_heads_.push_back({std::move(dec.record), offset});
        } else {
            recovered_heads_[it->second] = {std::move(dec.record), offset};
        }
        ++record_no;
        offset += static_cast<int64_t>(total);
    }

    // Drop anything past the last valid record so appends extend cleanly.
    if (offset < file_size) {
        if (::ftruncate(fd_, offset) != 0)
            return Status::error(Code::Internal, "ftruncate failed during recovery");
    }

    next_offset_ = offset;
    staged_seq_ = last_seq;
    durable_seq_.store(last_seq, std::memory_order_release);
    durable_offset_.store(offset, std::memory_order_release);
    return Status::success();
}

PersistentLog::~PersistentLog() {
    stop_writeback(/*drain=*/true);
    if (fd_ >= 0) ::close(fd_);
}

void PersistentLog::crash_stop() {
    stop_writeback(/*drain=*/false);
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void PersistentLog::stop_writeback(bool drain) {
    {
        std::lock_guard lk(stage_mu_);
        if (stopping_) return;
        stopping_ = true;
        crashed_ = !drain;
        stage_cv_.notify_all();
    }
    if (writeback_.joinable()) writeback_.join();
}

Result<int64_t> PersistentLog::append(const LogRecord& rec) {
    std::unique_lock lk(stage_mu_);
    // Strictly ascending; gaps are legal (a seq consumed by an update that
    // skipped logging), regressions are not.
    CASC_ASSERT(rec.version.shard_seq > staged_seq_,
                "log append out of order: seq " + std::to_string(rec.version.shard_seq) +
                    " after " + std::to_string(staged_seq_));
    int64_t offset = next_offset_;
    size_t size = rec.encoded_size();
    if (static_cast<uint64_t>(offset) + size > opts_.size_budget_bytes)
        return Status::error(Code::LogFull, "log size budget exceeded at " + opts_.path);

    encode_record(rec, staging_);
    staged_metas_.push_back(
        {rec.key, rec.version.per_key_version, rec.version.shard_seq, rec.version.timestamp_us, offset});
    next_offset_ = offset + static_cast<int64_t>(size);
    staged_seq_ = rec.version.shard_seq;
    if (staged_metas_.size() == 1) {
        first_staged_at_us_ = mono_us();
        stage_cv_.notify_all();  // wake the write-back thread to arm its timer
    } else if (staging_.size() >= opts_.flush_bytes) {
        stage_cv_.notify_all();
    }
    return offset;
}

uint64_t PersistentLog::last_staged_seq() const {
    std::lock_guard lk(stage_mu_);
    return staged_seq_;
}

void PersistentLog::request_flush() const {
    std::lock_guard lk(stage_mu_);
    flush_requested_ = true;
    stage_cv_.notify_all();
}

bool PersistentLog::wait_durable(uint64_t seq, uint64_t timeout_us) const {
    if (durable_seq_.load(std::memory_order_acquire) >= seq) return true;
    request_flush();
    std::unique_lock lk(durable_mu_);
    return durable_cv_.wait_for(lk, std::chrono::microseconds(timeout_us), [&] {
        return durable_seq_.load(std::memory_order_acquire) >= seq;
    });
}

void PersistentLog::writeback_loop() {
    Bytes batch;
    std::vector<StagedMeta> metas;
    for (;;) {
        {
            std::unique_lock lk(stage_mu_);
            for (;;) {
                if (stopping_ && (crashed_ || staging_.empty())) return;
                if (!staging_.empty()) {
                    if (stopping_ || flush_requested_ || staging_.size() >= opts_.flush_bytes) break;
                    uint64_t age = mono_us() - first_staged_at_us_;
                    if (age >= opts_.flush_delay_us) break;
                    stage_cv_.wait_for(lk, std::chrono::microseconds(opts_.flush_delay_us - age));
                } else {
                    flush_requested_ = false;
                    stage_cv_.wait(lk);
                }
            }
            batch.swap(staging_);
            metas.swap(staged_metas_);
            flush_requested_ = false;
        }
        if (!flush_batch(batch, metas)) return;
        batch.clear();
        metas.clear();
    }
}

bool PersistentLog::flush_batch(Bytes& buf, std::vector<StagedMeta>& metas) {
    int64_t write_offset = metas.front().offset;
    size_t written = 0;
    uint64_t write_calls = 0;
    while (written < buf.size()) {
        ssize_t n = ::pwrite(fd_, buf.data() + written, buf.size() - written,
                             write_offset + static_cast<int64_t>(written));
        if (n < 0) {
            if (errno == EINTR) continue;
            CASC_ERROR("log", "pwrite failed on %s: %s", opts_.path.c_str(), std::strerror(errno));
            return false;
        }
        written += static_cast<size_t>(n);
        ++write_calls;
    }
    if (::fdatasync(fd_) != 0) {
        CASC_ERROR("log", "fdatasync failed on %s: %s", opts_.path.c_str(), std::strerror(errno));
        return false;
    }

    {
        std::lock_guard lk(counters_mu_);
        counters_.records_appended += metas.size();
        counters_.write_calls += write_calls;
        counters_.bytes_written += written;
        counters_.sync_calls += 1;
    }

    // Publish: index entries first, then the durable watermark readers gate on.
    {
        std::unique_lock lk(index_mu_);
        for (const auto& m : metas) {
            per_key_[m.key].push_back({m.version, m.timestamp_us, m.offset});
            temporal_.push_back({m.timestamp_us, m.shard_seq, m.offset});
        }
    }
    uint64_t new_seq = metas.back().shard_seq;
    {
        std::lock_guard lk(durable_mu_);
        durable_offset_.store(write_offset + static_cast<int64_t>(written), std::memory_order_release);
        durable_seq_.store(new_seq, std::memory_order_release);
        durable_cv_.notify_all();
    }
    std::function<void(uint64_t)> cb;
    {
        std::lock_guard lk(cb_mu_);
        cb = durable_cb_;
    }
    if (cb) cb(new_seq);
    return true;
}

Result<LogRecord> PersistentLog::read_at(int64_t offset) const {
    if (offset < 0) return Status::error(Code::VersionNotFound, "no such record");
    if (durable_offset_.load(std::memory_order_acquire) <= offset) {
        request_flush();
        std::unique_lock lk(durable_mu_);
        bool ok = durable_cv_.wait_for(lk, std::chrono::seconds(5), [&] {
            return durable_offset_.load(std::memory_order_acquire) > offset;
        });
        if (!ok) return Status::error(Code::Timeout, "record not durable within 5s");
    }
    uint8_t header[kLogRecordHeaderSize];
    ssize_t n = ::pread(fd_, header, sizeof header, offset);
    if (n != static_cast<ssize_t>(sizeof header))
        return Status::error(Code::Internal, "short read of log record header");
    uint32_t key_len, payload_len;
    std::memcpy(&key_len, header, 4);
    std::memcpy(&payload_len, header + 4, 4);
    if (key_len > kMaxLogFieldLen || payload_len > kMaxLogFieldLen)
        return Status::error(Code::CorruptLog, "bad lengths in log record");
    size_t total = kLogRecordHeaderSize + key_len + payload_len + kLogRecordTrailerSize;
    std::vector<uint8_t> buf(total);
    n = ::pread(fd_, buf.data(), total, offset);
    if (n != static_cast<ssize_t>(total))
        return Status::error(Code::Internal, "short read of log record body");
    DecodedRecord dec = decode_record(buf.data(), buf.size());
    if (dec.outcome != DecodeOutcome::Ok)
        return Status::error(Code::CorruptLog, "log record failed checksum on read");
    return std::move(dec.record);
}

Result<uint64_t> PersistentLog::time_to_version(const std::string& full_key, uint64_t t_us) const {
    std::shared_lock lk(index_mu_);
    auto it = per_key_.find(full_key);
    if (it == per_key_.end() || it->second.empty())
        return Status::error(Code::KeyNotFound, "key never logged: " + full_key);
    const auto& entries = it->second;
    // Entries are in append order: ascending version, non-decreasing ts.
    auto pos = std::upper_bound(entries.begin(), entries.end(), t_us,
                                [](uint64_t t, const KeyIndexEntry& e) { return t < e.timestamp_us; });
    if (pos == entries.begin())
        return Status::error(Code::NotFound, "first version of " + full_key + " is later than t");
    return std::prev(pos)->version;
}

Result<int64_t> PersistentLog::offset_of_version(const std::string& full_key, uint64_t version) const {
    std::shared_lock lk(index_mu_);
    auto it = per_key_.find(full_key);
    if (it == per_key_.end() || it->second.empty())
        return Status::error(Code::KeyNotFound, "key never logged: " + full_key);
    const auto& entries = it->second;
    auto pos = std::lower_bound(entries.begin(), entries.end(), version,
                                [](const KeyIndexEntry& e, uint64_t v) { return e.version < v; });
    if (pos == entries.end() || pos->version != version)
        return Status::error(Code::VersionNotFound,
                             "version " + std::to_string(version) + " of " + full_key + " not logged");
    return pos->offset;
}

void PersistentLog::set_frontier(uint64_t stable_seq, uint64_t stable_ts) {
    std::lock_guard lk(frontier_mu_);
    if (stable_seq < stable_seq_.load(std::memory_order_relaxed)) return;  // stale
    stable_seq_.store(stable_seq, std::memory_order_release);
    if (stable_ts > stable_ts_.load(std::memory_order_relaxed))
        stable_ts_.store(stable_ts, std::memory_order_release);
    frontier_cv_.notify_all();
}

StabilityFrontier PersistentLog::frontier() const {
    std::lock_guard lk(frontier_mu_);
    return {stable_seq_.load(std::memory_order_relaxed), stable_ts_.load(std::memory_order_relaxed)};
}

bool PersistentLog::wait_frontier_ts(uint64_t ts_us, uint64_t timeout_us) const {
    std::unique_lock lk(frontier_mu_);
    frontier_cv_.wait_for(lk, std::chrono::microseconds(timeout_us), [&] {
        return stable_ts_.load(std::memory_order_relaxed) >= ts_us ||
               waiters_closed_.load(std::memory_order_relaxed);
    });
    return stable_ts_.load(std::memory_order_relaxed) >= ts_us;
}

void PersistentLog::shutdown_waiters() {
    {
        std::lock_guard lk(frontier_mu_);
        waiters_closed_.store(true, std::memory_order_relaxed);
        frontier_cv_.notify_all();
    }
    std::lock_guard lk(durable_mu_);
    durable_cv_.notify_all();
}

void PersistentLog::set_durable_callback(std::function<void(uint64_t)> cb) {
    std::lock_guard lk(cb_mu_);
    durable_cb_ = std::move(cb);
}

std::vector<PersistentLog::RecoveredHead> PersistentLog::take_recovered_heads() {
    return std::move(recovered_heads_);
}

PersistentLog::Counters PersistentLog::counters() const {
    std::lock_guard lk(counters_mu_);
    return counters_;
}

size_t PersistentLog::temporal_index_size() const {
    std::shared_lock lk(index_mu_);
    return temporal_.size();
}

}  // namespace cascade
