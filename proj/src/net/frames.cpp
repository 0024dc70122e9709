#include "net/frames.hpp"

namespace cascade {

namespace {
Status short_frame() { return Status::error(Code::ProtocolError, "short or malformed frame"); }
}  // namespace

Bytes encode_mcast_head(const McastMsg& m) {
    WireWriter w;
    w.u8(static_cast<uint8_t>(m.kind));
    w.str(m.pool);
    w.u32(m.shard);
    w.u64(m.seq);
    w.u64(m.timestamp_us);
    w.str(m.key);
    return w.take();
}

Result<McastMsg> decode_mcast(WireReader& r) {
    McastMsg m;
    m.kind = static_cast<PutKind>(r.u8());
    m.pool = r.str();
    m.shard = r.u32();
    m.seq = r.u64();
    m.timestamp_us = r.u64();
    m.key = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_mcast_ack(const McastAckMsg& m) {
    WireWriter w;
    w.str(m.pool);
    w.u32(m.shard);
    w.u64(m.seq);
    w.u32(m.member);
    w.u64(m.apply_ns);
    w.u64(m.per_key_version);
    return w.take();
}

Result<McastAckMsg> decode_mcast_ack(WireReader& r) {
    McastAckMsg m;
    m.pool = r.str();
    m.shard = r.u32();
    m.seq = r.u64();
    m.member = r.u32();
    m.apply_ns = r.u64();
    m.per_key_version = r.u64();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_persist_ack(const PersistAckMsg& m) {
    WireWriter w;
    w.str(m.pool);
    w.u32(m.shard);
    w.u32(m.member);
    w.u64(m.durable_seq);
    return w.take();
}

Result<PersistAckMsg> decode_persist_ack(WireReader& r) {
    PersistAckMsg m;
    m.pool = r.str();
    m.shard = r.u32();
    m.member = r.u32();
    m.durable_seq = r.u64();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_trig_head(const TrigMsg& m) {
    WireWriter w;
    w.str(m.key);
    return w.take();
}

Result<TrigMsg> decode_trig(WireReader& r) {
    TrigMsg m;
    m.key = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_gap_req(const GapReqMsg& m) {
    WireWriter w;
    w.str(m.pool);
    w.u32(m.shard);
    w.u32(m.member);
    w.u64(m.from_seq);
    w.u64(m.to_seq);
    return w.take();
}

Result<GapReqMsg> decode_gap_req(WireReader& r) {
    GapReqMsg m;
    m.pool = r.str();
    m.shard = r.u32();
    m.member = r.u32();
    m.from_seq = r.u64();
    m.to_seq = r.u64();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_heartbeat(const HeartbeatMsg& m) {
    WireWriter w;
    w.u32(m.node);
    w.u32(static_cast<uint32_t>(m.frontiers.size()));
    for (const auto& f : m.frontiers) {
        w.str(f.pool);
        w.u32(f.shard);
        w.u64(f.stable_seq);
        w.u64(f.stable_ts);
    }
    return w.take();
}

Result<HeartbeatMsg> decode_heartbeat(WireReader& r) {
    HeartbeatMsg m;
    m.node = r.u32();
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n && r.ok(); ++i) {
        FrontierInfo f;
        f.pool = r.str();
        f.shard = r.u32();
        f.stable_seq = r.u64();
        f.stable_ts = r.u64();
        m.frontiers.push_back(std::move(f));
    }
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_put_req_head(const PutReqMsg& m) {
    WireWriter w;
    w.u64(m.corr);
    w.u8(static_cast<uint8_t>(m.kind));
    w.str(m.key);
    return w.take();
}

Result<PutReqMsg> decode_put_req(WireReader& r) {
    PutReqMsg m;
    m.corr = r.u64();
    m.kind = static_cast<PutKind>(r.u8());
    m.key = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_key_req_head(const KeyReqMsg& m) {
    WireWriter w;
    w.u64(m.corr);
    w.str(m.key);
    return w.take();
}

Result<KeyReqMsg> decode_key_req(WireReader& r) {
    KeyReqMsg m;
    m.corr = r.u64();
    m.key = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_key_at_req(const KeyAtReqMsg& m) {
    WireWriter w;
    w.u64(m.corr);
    w.u64(m.arg);
    w.str(m.key);
    return w.take();
}

Result<KeyAtReqMsg> decode_key_at_req(WireReader& r) {
    KeyAtReqMsg m;
    m.corr = r.u64();
    m.arg = r.u64();
    m.key = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_subscribe_req(const SubscribeReqMsg& m) {
    WireWriter w;
    w.u64(m.corr);
    w.str(m.topic);
    return w.take();
}

Result<SubscribeReqMsg> decode_subscribe_req(WireReader& r) {
    SubscribeReqMsg m;
    m.corr = r.u64();
    m.topic = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_publish_req_head(const PublishReqMsg& m) {
    WireWriter w;
    w.u64(m.corr);
    w.u8(static_cast<uint8_t>(m.persistence));
    w.str(m.topic);
    return w.take();
}

Result<PublishReqMsg> decode_publish_req(WireReader& r) {
    PublishReqMsg m;
    m.corr = r.u64();
    m.persistence = static_cast<PutKind>(r.u8());
    m.topic = r.str();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_resp_head(const RespMsg& m) {
    WireWriter w;
    w.u64(m.corr);
    w.u16(m.code);
    w.str(m.message);
    w.u64(m.per_key_version);
    w.u64(m.shard_seq);
    w.u64(m.timestamp_us);
    w.u64(m.timing.resident_ns);
    w.u64(m.timing.multicast_ns);
    w.u64(m.timing.processing_ns);
    w.u64(m.timing.persistence_ns);
    return w.take();
}

Result<RespMsg> decode_resp(WireReader& r) {
    RespMsg m;
    m.corr = r.u64();
    m.code = r.u16();
    m.message = r.str();
    m.per_key_version = r.u64();
    m.shard_seq = r.u64();
    m.timestamp_us = r.u64();
    m.timing.resident_ns = r.u64();
    m.timing.multicast_ns = r.u64();
    m.timing.processing_ns = r.u64();
    m.timing.persistence_ns = r.u64();
    if (!r.ok()) return short_frame();
    return m;
}

Bytes encode_notify_head(const NotifyMsg& m) {
    WireWriter w;
    w.str(m.topic);
    w.u64(m.topic_seq);
    w.u64(m.shard_seq);
    w.u64(m.timestamp_us);
    return w.take();
}

Result<NotifyMsg> decode_notify(WireReader& r) {
    NotifyMsg m;
    m.topic = r.str();
    m.topic_seq = r.u64();
    m.shard_seq = r.u64();
    m.timestamp_us = r.u64();
    if (!r.ok()) return short_frame();
    return m;
}

}  // namespace cascade
