#include "kv/kv_shard.hpp"

#include <algorithm>
#include <cstring>
#include <thread>

#include "core/debug.hpp"
#include "core/hash.hpp"

namespace cascade {

namespace detail {

SlotDirectory::SlotDirectory(size_t buckets) : buckets_(buckets) {}

SlotDirectory::~SlotDirectory() {
    for (auto& head : buckets_) {
        Node* n = head.load(std::memory_order_relaxed);
        while (n != nullptr) {
            Node* next = n->next.load(std::memory_order_relaxed);
            SlotRecord* rec = n->slot.rec.load(std::memory_order_relaxed);
            ::operator delete(rec);
            delete n;
            n = next;
        }
    }
}

KeySlot* SlotDirectory::find(std::string_view key) const {
    uint64_t h = stable_hash(key);
    const auto& head = buckets_[h % buckets_.size()];
    for (Node* n = head.load(std::memory_order_acquire); n != nullptr;
         n = n->next.load(std::memory_order_acquire)) {
        if (n->hash == h && n->key == key) return &n->slot;
    }
    return nullptr;
}

KeySlot* SlotDirectory::find_or_create(const std::string& key) {
    if (KeySlot* slot = find(key)) return slot;
    uint64_t h = stable_hash(key);
    auto& head = buckets_[h % buckets_.size()];
    Node* node = new Node{h, key, {}, {}};
    node->next.store(head.load(std::memory_order_relaxed), std::memory_order_relaxed);
    head.store(node, std::memory_order_release);
    size_.fetch_add(1, std::memory_order_release);
    return &node->slot;
}

namespace {

SlotRecord* alloc_record(uint32_t capacity) {
    void* raw = ::operator new(sizeof(SlotRecord) + capacity);
    auto* rec = static_cast<SlotRecord*>(raw);
    rec->capacity = capacity;
    return rec;
}

void fill_record(SlotRecord* rec, uint64_t version, uint64_t seq, uint64_t ts, uint64_t checksum,
                 int64_t prev_offset, int64_t self_offset, const uint8_t* data, size_t len) {
    rec->per_key_version = version;
    rec->shard_seq = seq;
    rec->timestamp_us = ts;
    rec->checksum = checksum;
    rec->prev_offset = prev_offset;
    rec->self_offset = self_offset;
    rec->payload_size = static_cast<uint32_t>(len);
    if (len > 0) std::memcpy(rec->payload(), data, len);
}

}  // namespace

}  // namespace detail

KvShard::KvShard(Persistence persistence, PersistentLog* log)
    : persistence_(persistence), log_(log) {}

KvShard::~KvShard() {
    for (detail::SlotRecord* rec : retired_) ::operator delete(rec);
}

Version KvShard::apply_put(const std::string& full_key, const uint8_t* data, size_t len,
                           uint64_t shard_seq, uint64_t timestamp_us, bool logged) {
    detail::KeySlot* slot = dir_.find_or_create(full_key);

    uint64_t version = slot->next_version;
    Version ver{version, shard_seq, timestamp_us};
    uint64_t checksum = stable_hash(data, len);

    int64_t prev_offset = slot->last_logged_offset;
    int64_t self_offset = -1;
    if (logged && log_ != nullptr) {
        LogRecord rec;
        rec.key = full_key;
        rec.payload.assign(data, data + len);
        rec.version = ver;
        rec.prev_offset = prev_offset;
        auto appended = log_->append(rec);
        if (appended.ok()) {
            self_offset = appended.value();
        } else {
            // Delivery-side application is total; a full log degrades this
            // version to in-memory only.
            CASC_ERROR("kv", "log append failed (%s); version kept unlogged",
                       appended.status().to_string().c_str());
        }
    }

    // Guard protocol: bump v_a, write the record, bump v_b.
    uint64_t a = slot->v_a.load(std::memory_order_relaxed) + 1;
    slot->v_a.store(a, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);

    detail::SlotRecord* cur = slot->rec.load(std::memory_order_relaxed);
    if (cur == nullptr || cur->capacity < len) {
        uint32_t capacity = cur == nullptr ? 64u : cur->capacity;
        while (capacity < len) capacity *= 2;
        detail::SlotRecord* fresh = detail::alloc_record(capacity);
        detail::fill_record(fresh, version, shard_seq, timestamp_us, checksum, prev_offset,
                            self_offset, data, len);
        slot->rec.store(fresh, std::memory_order_release);
        if (cur != nullptr) retired_.push_back(cur);
    } else {
        detail::fill_record(cur, version, shard_seq, timestamp_us, checksum, prev_offset,
                            self_offset, data, len);
    }

    slot->v_b.store(a, std::memory_order_release);

    slot->next_version = version + 1;
    if (self_offset >= 0) slot->last_logged_offset = self_offset;
    return ver;
}

Result<VersionedObject> KvShard::snapshot(const detail::KeySlot& slot, std::string_view key) const {
    Bytes buf;
    uint64_t backoff_us = 1;
    for (int attempt = 0; attempt < kMaxGetRetries; ++attempt) {
        uint64_t b0 = slot.v_b.load(std::memory_order_acquire);
        if (b0 == 0) return Status::error(Code::KeyNotFound, std::string(key));
        detail::SlotRecord* rec = slot.rec.load(std::memory_order_acquire);
        if (rec != nullptr) {
            VersionedObject obj;
            obj.version.per_key_version = rec->per_key_version;
            obj.version.shard_seq = rec->shard_seq;
            obj.version.timestamp_us = rec->timestamp_us;
            obj.payload_checksum = rec->checksum;
            obj.prev_offset = rec->prev_offset;
            obj.self_offset = rec->self_offset;
            uint32_t n = std::min(rec->payload_size, rec->capacity);
            buf.assign(rec->payload(), rec->payload() + n);

            std::atomic_thread_fence(std::memory_order_acquire);
            uint64_t a1 = slot.v_a.load(std::memory_order_relaxed);
            if (a1 == b0) {
                obj.key = std::string(key);
                obj.payload = make_payload(std::move(buf));
                return obj;
            }
            buf.clear();
        }
        // A writer was mid-update; back off and reissue.
        std::this_thread::sleep_for(std::chrono::microseconds(backoff_us));
        backoff_us = std::min<uint64_t>(backoff_us * 2, 1000);
    }
    return Status::error(Code::RetryExhausted,
                         "reader starved on key " + std::string(key));
}

Result<VersionedObject> KvShard::get_current(std::string_view full_key) const {
    const detail::KeySlot* slot = dir_.find(full_key);
    if (slot == nullptr) return Status::error(Code::KeyNotFound, std::string(full_key));
    return snapshot(*slot, full_key);
}

Result<VersionedObject> KvShard::read_logged(int64_t offset) const {
    auto rec = log_->read_at(offset);
    if (!rec.ok()) return rec.status();
    VersionedObject obj;
    obj.key = rec->key;
    obj.version = rec->version;
    obj.prev_offset = rec->prev_offset;
    obj.self_offset = offset;
    obj.payload_checksum = stable_hash(rec->payload.data(), rec->payload.size());
    obj.payload = make_payload(std::move(rec->payload));
    return obj;
}

Result<VersionedObject> KvShard::get_by_version(std::string_view full_key, uint64_t version) const {
    auto head = get_current(full_key);
    if (!head.ok()) return head.status();
    if (version > head->version.per_key_version)
        return Status::error(Code::VersionNotFound,
                             "version " + std::to_string(version) + " exceeds current");
    if (version == head->version.per_key_version) return head;
    if (log_ == nullptr)
        return Status::error(Code::VersionNotFound,
                             "volatile pool holds only the latest version");

    // Walk the backpointer chain from the head until we reach the version.
    int64_t offset = head->prev_offset;
    while (offset >= 0) {
        auto obj = read_logged(offset);
        if (!obj.ok()) return obj.status();
        if (obj->version.per_key_version == version) return obj;
        if (obj->version.per_key_version < version) break;  // never logged
        offset = obj->prev_offset;
    }
    return Status::error(Code::VersionNotFound,
                         "version " + std::to_string(version) + " was never logged");
}

Result<std::vector<VersionedObject>> KvShard::get_range_by_version(std::string_view full_key,
                                                                   uint64_t v_lo,
                                                                   uint64_t v_hi) const {
    CASC_ASSERT(v_lo <= v_hi, "get_range_by_version requires v_lo <= v_hi");
    auto head = get_current(full_key);
    if (!head.ok()) return head.status();
    uint64_t current = head->version.per_key_version;
    if (v_hi > current)
        return Status::error(Code::VersionNotFound,
                             "version " + std::to_string(v_hi) + " exceeds current");

    // Collect descending from the head, then reverse. An unlogged version
    // inside the range shows up as a gap in the chain.
    std::vector<VersionedObject> out;
    int64_t offset = head->prev_offset;
    if (v_hi == current) out.push_back(*head);

    const size_t want = static_cast<size_t>(v_hi - v_lo) + 1;
    while (out.size() < want) {
        uint64_t expected = v_hi - out.size();
        if (offset < 0)
            return Status::error(Code::VersionNotFound,
                                 log_ == nullptr
                                     ? "volatile pool holds only the latest version"
                                     : "version " + std::to_string(expected) + " was never logged");
        auto obj = read_logged(offset);
        if (!obj.ok()) return obj.status();
        int64_t next_offset = obj->prev_offset;
        uint64_t v = obj->version.per_key_version;
        if (v > v_hi) {
            offset = next_offset;
            continue;
        }
        if (v != expected)
            return Status::error(Code::VersionNotFound,
                                 "version " + std::to_string(expected) + " was never logged");
        out.push_back(std::move(obj.value()));
        offset = next_offset;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::pair<uint64_t, uint64_t> KvShard::guard_state(std::string_view full_key) const {
    const detail::KeySlot* slot = dir_.find(full_key);
    if (slot == nullptr) return {0, 0};
    return {slot->v_a.load(std::memory_order_acquire), slot->v_b.load(std::memory_order_acquire)};
}

Bytes KvShard::state_fingerprint() const {
    std::vector<std::string> keys;
    dir_.for_each([&](const std::string& key, const detail::KeySlot&) { keys.push_back(key); });
    std::sort(keys.begin(), keys.end());

    Bytes out;
    auto put_u64 = [&out](uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    };
    for (const auto& key : keys) {
        auto obj = get_current(key);
        if (!obj.ok()) continue;
        put_u64(key.size());
        out.insert(out.end(), key.begin(), key.end());
        put_u64(obj->version.per_key_version);
        put_u64(obj->version.shard_seq);
        put_u64(obj->version.timestamp_us);
        put_u64(obj->payload->size());
        out.insert(out.end(), obj->payload->bytes().begin(), obj->payload->bytes().end());
    }
    return out;
}

void KvShard::install_recovered(std::vector<PersistentLog::RecoveredHead> heads) {
    for (auto& head : heads) {
        detail::KeySlot* slot = dir_.find_or_create(head.record.key);
        slot->next_version = head.record.version.per_key_version;
        slot->last_logged_offset = head.record.prev_offset;
        apply_put(head.record.key, head.record.payload.data(), head.record.payload.size(),
                  head.record.version.shard_seq, head.record.version.timestamp_us, false);
        // The record already sits in the file; point the slot at it instead
        // of treating the rebuild as an unlogged overwrite.
        detail::SlotRecord* rec = slot->rec.load(std::memory_order_relaxed);
        rec->self_offset = head.offset;
        slot->last_logged_offset = head.offset;
    }
}

}  // namespace cascade
