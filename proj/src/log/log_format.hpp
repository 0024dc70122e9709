#pragma once

#include <cstdint>
#include <string>

#include "core/bytes.hpp"
#include "core/keys.hpp"
#include "core/status.hpp"

namespace cascade {

/*
    Log record layout (all integers little-endian):

      u32  key_len
      u32  payload_len
      u64  per_key_version
      u64  shard_seq
      u64  timestamp_us
      i64  prev_offset          (-1 when this is the first version of the key)
      u8   key[key_len]
      u8   payload[payload_len]
      u64  record_checksum      FNV-1a over all preceding bytes of the record

    Records appear in the file in strictly ascending shard_seq order.
*/

inline constexpr size_t kLogRecordHeaderSize = 4 + 4 + 8 + 8 + 8 + 8;
inline constexpr size_t kLogRecordTrailerSize = 8;
inline constexpr uint32_t kMaxLogFieldLen = 1u << 30;

struct LogRecord {
    std::string key;  // full key
    Bytes payload;
    Version version;
    int64_t prev_offset = -1;

    size_t encoded_size() const {
        return kLogRecordHeaderSize + key.size() + payload.size() + kLogRecordTrailerSize;
    }
};

void encode_record(const LogRecord& rec, Bytes& out);

enum class DecodeOutcome { Ok, Incomplete, BadChecksum, BadLength };

struct DecodedRecord {
    DecodeOutcome outcome = DecodeOutcome::Incomplete;
    LogRecord record;
    size_t encoded_size = 0;
};

// Decodes one record from `data` (the bytes starting at a record boundary).
// Incomplete means the buffer ends mid-record, i.e. a truncated tail.
DecodedRecord decode_record(const uint8_t* data, size_t available);

}  // namespace cascade
