#pragma once

#include <cstdint>
#include <string>

#include "core/bytes.hpp"
#include "core/status.hpp"

namespace cascade {

/*
    Wire framing, little-endian throughout:

      u32 length | u8 type | body[length - 1]

    `length` counts the type byte plus the body. Variable-length strings are
    u32 length + bytes. At most one payload per frame, carried as the frame
    tail with no length of its own.

    Peer (node-to-node) frame types:
      0x01 MCAST        sequenced update, sequencer -> member
      0x02 MCAST_ACK    member -> sequencer, after in-memory apply
      0x03 PERSIST_ACK  member -> sequencer, cumulative durable seq
      0x04 TRIG         trigger object hand-off to one member
      0x05 GAP_REQ      member -> sequencer, retransmission request
      0x06 HEARTBEAT    liveness + per-shard stability frontiers

    Client frame types:
      0x10 REQ_PUT       0x11 REQ_TRIGPUT   0x12 REQ_GET
      0x13 REQ_GET_VER   0x14 REQ_GET_TIME  0x15 REQ_SUBSCRIBE
      0x16 REQ_PUBLISH
      0x20 RESP          0x21 NOTIFY
*/

enum FrameType : uint8_t {
    kMcast = 0x01,
    kMcastAck = 0x02,
    kPersistAck = 0x03,
    kTrig = 0x04,
    kGapReq = 0x05,
    kHeartbeat = 0x06,

    kReqPut = 0x10,
    kReqTrigPut = 0x11,
    kReqGet = 0x12,
    kReqGetVer = 0x13,
    kReqGetTime = 0x14,
    kReqSubscribe = 0x15,
    kReqPublish = 0x16,

    kResp = 0x20,
    kNotify = 0x21,
};

inline constexpr uint32_t kMaxFrameBytes = 64u << 20;

// Put kinds carried by REQ_PUT.
enum class PutKind : uint8_t { PoolDefault = 0, Volatile = 1, Persistent = 2 };

class WireWriter {
  public:
    Bytes& buf() { return buf_; }
    Bytes take() { return std::move(buf_); }

    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v));
        buf_.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void str(std::string_view s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(const uint8_t* data, size_t len) { buf_.insert(buf_.end(), data, data + len); }

  private:
    Bytes buf_;
};

class WireReader {
  public:
    WireReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

    bool ok() const { return ok_; }
    size_t remaining() const { return len_ - pos_; }

    uint8_t u8() { return take(1) ? data_[pos_ - 1] : 0; }
    uint16_t u16() {
        if (!take(2)) return 0;
        const uint8_t* p = data_ + pos_ - 2;
        return static_cast<uint16_t>(p[0] | p[1] << 8);
    }
    uint32_t u32() {
        if (!take(4)) return 0;
        const uint8_t* p = data_ + pos_ - 4;
        return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
               static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
    }
    uint64_t u64() {
        if (!take(8)) return 0;
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = v << 8 | data_[pos_ - 8 + i];
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        if (!take(n)) return {};
        return std::string(reinterpret_cast<const char*>(data_ + pos_ - n), n);
    }
    // The rest of the frame, as a payload copy.
    Bytes tail() {
        Bytes out(data_ + pos_, data_ + len_);
        pos_ = len_;
        return out;
    }
    const uint8_t* tail_data() const { return data_ + pos_; }
    size_t tail_size() const { return len_ - pos_; }

  private:
    bool take(size_t n) {
        if (!ok_ || len_ - pos_ < n) {
            ok_ = false;
            return false;
        }
        pos_ += n;
        return true;
    }

    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
    bool ok_ = true;
};

// ---- peer messages ----

struct McastMsg {
    PutKind kind = PutKind::Volatile;  // resolved kind: Volatile or Persistent
    std::string pool;
    uint32_t shard = 0;
    uint64_t seq = 0;
    uint64_t timestamp_us = 0;
    std::string key;  // full key
    // payload: frame tail
};
Bytes encode_mcast_head(const McastMsg& m);
Result<McastMsg> decode_mcast(WireReader& r);

struct McastAckMsg {
    std::string pool;
    uint32_t shard = 0;
    uint64_t seq = 0;
    uint32_t member = 0;
    uint64_t apply_ns = 0;         // member-local apply duration
    uint64_t per_key_version = 0;  // version the member assigned (identical on all)
};
Bytes encode_mcast_ack(const McastAckMsg& m);
Result<McastAckMsg> decode_mcast_ack(WireReader& r);

struct PersistAckMsg {
    std::string pool;
    uint32_t shard = 0;
    uint32_t member = 0;
    uint64_t durable_seq = 0;  // cumulative
};
Bytes encode_persist_ack(const PersistAckMsg& m);
Result<PersistAckMsg> decode_persist_ack(WireReader& r);

struct TrigMsg {
    std::string key;
    // payload: frame tail
};
Bytes encode_trig_head(const TrigMsg& m);
Result<TrigMsg> decode_trig(WireReader& r);

struct GapReqMsg {
    std::string pool;
    uint32_t shard = 0;
    uint32_t member = 0;
    uint64_t from_seq = 0;
    uint64_t to_seq = 0;
};
Bytes encode_gap_req(const GapReqMsg& m);
Result<GapReqMsg> decode_gap_req(WireReader& r);

struct FrontierInfo {
    std::string pool;
    uint32_t shard = 0;
    uint64_t stable_seq = 0;
    uint64_t stable_ts = 0;
};
struct HeartbeatMsg {
    uint32_t node = 0;
    std::vector<FrontierInfo> frontiers;
};
Bytes encode_heartbeat(const HeartbeatMsg& m);
Result<HeartbeatMsg> decode_heartbeat(WireReader& r);

// ---- client messages ----

struct PutReqMsg {
    uint64_t corr = 0;
    PutKind kind = PutKind::PoolDefault;
    std::string key;
    // payload: frame tail
};
Bytes encode_put_req_head(const PutReqMsg& m);
Result<PutReqMsg> decode_put_req(WireReader& r);

struct KeyReqMsg {  // REQ_TRIGPUT (payload tail), REQ_GET
    uint64_t corr = 0;
    std::string key;
};
Bytes encode_key_req_head(const KeyReqMsg& m);
Result<KeyReqMsg> decode_key_req(WireReader& r);

struct KeyAtReqMsg {  // REQ_GET_VER (arg = version), REQ_GET_TIME (arg = ts_us)
    uint64_t corr = 0;
    uint64_t arg = 0;
    std::string key;
};
Bytes encode_key_at_req(const KeyAtReqMsg& m);
Result<KeyAtReqMsg> decode_key_at_req(WireReader& r);

struct SubscribeReqMsg {
    uint64_t corr = 0;
    std::string topic;
};
Bytes encode_subscribe_req(const SubscribeReqMsg& m);
Result<SubscribeReqMsg> decode_subscribe_req(WireReader& r);

struct PublishReqMsg {
    uint64_t corr = 0;
    PutKind persistence = PutKind::Volatile;
    std::string topic;
    // payload: frame tail
};
Bytes encode_publish_req_head(const PublishReqMsg& m);
Result<PublishReqMsg> decode_publish_req(WireReader& r);

// Timing metadata attached to put/publish responses, nanoseconds measured on
// the serving node's monotonic clock.
struct PutTiming {
    uint64_t resident_ns = 0;     // request receive -> response send
    uint64_t multicast_ns = 0;    // receive -> all members applied
    uint64_t processing_ns = 0;   // in-memory apply at the sequencer member
    uint64_t persistence_ns = 0;  // all-applied -> all replicas durable
};

struct RespMsg {
    uint64_t corr = 0;
    uint16_t code = 0;  // cascade::Code
    std::string message;
    uint64_t per_key_version = 0;
    uint64_t shard_seq = 0;
    uint64_t timestamp_us = 0;
    PutTiming timing;
    // payload (gets only): frame tail
};
Bytes encode_resp_head(const RespMsg& m);
Result<RespMsg> decode_resp(WireReader& r);

struct NotifyMsg {
    std::string topic;
    uint64_t topic_seq = 0;  // per_key_version of the stored object
    uint64_t shard_seq = 0;
    uint64_t timestamp_us = 0;
    // payload: frame tail
};
Bytes encode_notify_head(const NotifyMsg& m);
Result<NotifyMsg> decode_notify(WireReader& r);

}  // namespace cascade
