#include "log/log_format.hpp"

#include <cstring>

#include "core/hash.hpp"

namespace cascade {

namespace {

void put_u32(Bytes& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_u64(Bytes& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
    return v;
}

}  // namespace

void encode_record(const LogRecord& rec, Bytes& out) {
    size_t start = out.size();
    put_u32(out, static_cast<uint32_t>(rec.key.size()));
    put_u32(out, static_cast<uint32_t>(rec.payload.size()));
    put_u64(out, rec.version.per_key_version);
    put_u64(out, rec.version.shard_seq);
    put_u64(out, rec.version.timestamp_us);
    put_u64(out, static_cast<uint64_t>(rec.prev_offset));
    out.insert(out.end(), rec.key.begin(), rec.key.end());
    out.insert(out.end(), rec.payload.begin(), rec.payload.end());
    uint64_t checksum = stable_hash(out.data() + start, out.size() - start);
    put_u64(out, checksum);
}

DecodedRecord decode_record(const uint8_t* data, size_t available) {
    DecodedRecord out;
    if (available < kLogRecordHeaderSize) return out;  // Incomplete

    uint32_t key_len = get_u32(data);
    uint32_t payload_len = get_u32(data + 4);
    if (key_len > kMaxLogFieldLen || payload_len > kMaxLogFieldLen) {
        out.outcome = DecodeOutcome::BadLength;
        return out;
    }
    size_t total = kLogRecordHeaderSize + key_len + payload_len + kLogRecordTrailerSize;
    if (available < total) return out;  // Incomplete

    uint64_t stored = get_u64(data + total - kLogRecordTrailerSize);
    uint64_t actual = stable_hash(data, total - kLogRecordTrailerSize);
    if (stored != actual) {
        out.outcome = DecodeOutcome::BadChecksum;
        return out;
    }

    out.outcome = DecodeOutcome::Ok;
    out.encoded_size = total;
    out.record.version.per_key_version = get_u64(data + 8);
    out.record.version.shard_seq = get_u64(data + 16);
    out.record.version.timestamp_us = get_u64(data + 24);
    out.record.prev_offset = static_cast<int64_t>(get_u64(data + 32));
    const uint8_t* key_p = data + kLogRecordHeaderSize;
    out.record.key.assign(reinterpret_cast<const char*>(key_p), key_len);
    const uint8_t* payload_p = key_p + key_len;
    out.record.payload.assign(payload_p, payload_p + payload_len);
    return out;
}

}  // namespace cascade
