#include <doctest.h>

#include <future>

#include "cluster_util.hpp"
#include "net/conn.hpp"
#include "net/frames.hpp"

using namespace cascade;
using namespace cascade::testing;

namespace {

std::string hex(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (uint8_t byte : b) {
        out += digits[byte >> 4];
        out += digits[byte & 0xf];
    }
    return out;
}

}  // namespace

TEST_CASE("frame heads encode to the documented little-endian layout") {
    // Hand-assembled from the layout comment in frames.hpp.
    McastAckMsg ack{"/p", 1, 2, 3, 4, 5};
    CHECK(hex(encode_mcast_ack(ack)) ==
          "020000002f7001000000020000000000000003000000040000000000000005000000"
          "00000000");

    PersistAckMsg pack{"/p", 0, 7, 9};
    CHECK(hex(encode_persist_ack(pack)) == "020000002f70000000000700000009000000"
                                           "00000000");

    TrigMsg trig{"/a/b"};
    CHECK(hex(encode_trig_head(trig)) == "040000002f612f62");

    KeyReqMsg get{0x11, "/a/b"};
    CHECK(hex(encode_key_req_head(get)) == "1100000000000000040000002f612f62");

    GapReqMsg gap{"/p", 2, 3, 10, 12};
    CHECK(hex(encode_gap_req(gap)) ==
          "020000002f7002000000030000000a000000000000000c00000000000000");
}

TEST_CASE("every message type round-trips byte-identically") {
    auto reencode = [](const Bytes& head, auto decode_fn, auto encode_fn) {
        WireReader r(head.data(), head.size());
        auto decoded = decode_fn(r);
        REQUIRE(decoded.ok());
        CHECK(encode_fn(decoded.value()) == head);
    };

    reencode(encode_mcast_head({PutKind::Persistent, "/pool/x", 3, 42, 99999, "/pool/x/key"}),
             [](WireReader& r) { return decode_mcast(r); },
             [](const McastMsg& m) { return encode_mcast_head(m); });
    reencode(encode_mcast_ack({"/p", 1, 2, 3, 4, 5}),
             [](WireReader& r) { return decode_mcast_ack(r); },
             [](const McastAckMsg& m) { return encode_mcast_ack(m); });
    reencode(encode_persist_ack({"/p", 1, 2, 3}),
             [](WireReader& r) { return decode_persist_ack(r); },
             [](const PersistAckMsg& m) { return encode_persist_ack(m); });
    reencode(encode_trig_head({"/t/k"}), [](WireReader& r) { return decode_trig(r); },
             [](const TrigMsg& m) { return encode_trig_head(m); });
    reencode(encode_gap_req({"/p", 0, 1, 5, 9}), [](WireReader& r) { return decode_gap_req(r); },
             [](const GapReqMsg& m) { return encode_gap_req(m); });
    reencode(encode_heartbeat({7, {{"/p", 0, 11, 222}, {"/q", 1, 33, 444}}}),
             [](WireReader& r) { return decode_heartbeat(r); },
             [](const HeartbeatMsg& m) { return encode_heartbeat(m); });
    reencode(encode_put_req_head({9, PutKind::Volatile, "/p/k"}),
             [](WireReader& r) { return decode_put_req(r); },
             [](const PutReqMsg& m) { return encode_put_req_head(m); });
    reencode(encode_key_req_head({10, "/p/k"}), [](WireReader& r) { return decode_key_req(r); },
             [](const KeyReqMsg& m) { return encode_key_req_head(m); });
    reencode(encode_key_at_req({11, 1234, "/p/k"}),
             [](WireReader& r) { return decode_key_at_req(r); },
             [](const KeyAtReqMsg& m) { return encode_key_at_req(m); });
    reencode(encode_subscribe_req({12, "topic"}),
             [](WireReader& r) { return decode_subscribe_req(r); },
             [](const SubscribeReqMsg& m) { return encode_subscribe_req(m); });
    reencode(encode_publish_req_head({13, PutKind::Persistent, "topic"}),
             [](WireReader& r) { return decode_publish_req(r); },
             [](const PublishReqMsg& m) { return encode_publish_req_head(m); });
    RespMsg resp;
    resp.corr = 14;
    resp.code = 3;
    resp.message = "nope";
    resp.per_key_version = 1;
    resp.shard_seq = 2;
    resp.timestamp_us = 3;
    resp.timing = {4, 5, 6, 7};
    reencode(encode_resp_head(resp), [](WireReader& r) { return decode_resp(r); },
             [](const RespMsg& m) { return encode_resp_head(m); });
    reencode(encode_notify_head({"topic", 1, 2, 3}),
             [](WireReader& r) { return decode_notify(r); },
             [](const NotifyMsg& m) { return encode_notify_head(m); });
}

TEST_CASE("truncated frames decode as protocol errors, not values") {
    Bytes head = encode_mcast_head({PutKind::Volatile, "/p", 0, 1, 2, "/p/k"});
    for (size_t len = 0; len < head.size(); ++len) {
        WireReader r(head.data(), len);
        CHECK_FALSE(decode_mcast(r).ok());
    }
}

TEST_CASE("error codes are stable across releases") {
    CHECK(static_cast<uint16_t>(Code::Ok) == 0);
    CHECK(static_cast<uint16_t>(Code::NoSuchPool) == 1);
    CHECK(static_cast<uint16_t>(Code::MalformedKey) == 2);
    CHECK(static_cast<uint16_t>(Code::KeyNotFound) == 3);
    CHECK(static_cast<uint16_t>(Code::VersionNotFound) == 4);
    CHECK(static_cast<uint16_t>(Code::NotFound) == 5);
    CHECK(static_cast<uint16_t>(Code::RetryExhausted) == 6);
    CHECK(static_cast<uint16_t>(Code::Timeout) == 7);
    CHECK(static_cast<uint16_t>(Code::LogFull) == 8);
    CHECK(static_cast<uint16_t>(Code::CorruptLog) == 9);
    CHECK(static_cast<uint16_t>(Code::ShardUnavailable) == 10);
    CHECK(static_cast<uint16_t>(Code::ViewChanged) == 11);
    CHECK(static_cast<uint16_t>(Code::CommitTimeout) == 12);
    CHECK(static_cast<uint16_t>(Code::NodeUnreachable) == 13);
    CHECK(static_cast<uint16_t>(Code::QueueFull) == 14);
    CHECK(static_cast<uint16_t>(Code::DuplicateRegistration) == 15);
    CHECK(static_cast<uint16_t>(Code::SchemaError) == 16);
    CHECK(static_cast<uint16_t>(Code::UnknownPool) == 17);
    CHECK(static_cast<uint16_t>(Code::UnknownLambda) == 18);
    CHECK(static_cast<uint16_t>(Code::NoOutEdges) == 19);
    CHECK(static_cast<uint16_t>(Code::ConfigError) == 20);
    CHECK(static_cast<uint16_t>(Code::BootstrapTimeout) == 21);
    CHECK(static_cast<uint16_t>(Code::NotPersistentPool) == 22);
    CHECK(static_cast<uint16_t>(Code::WrongNode) == 23);
    CHECK(static_cast<uint16_t>(Code::ConnectionClosed) == 24);
    CHECK(static_cast<uint16_t>(Code::ProtocolError) == 25);
    CHECK(static_cast<uint16_t>(Code::Internal) == 26);
}

TEST_CASE("framed conns deliver frames intact in both directions") {
    std::promise<std::shared_ptr<Conn>> accepted_promise;
    auto accepted_future = accepted_promise.get_future();
    auto server = Server::listen("127.0.0.1", 0, [&](std::shared_ptr<Conn> conn) {
        accepted_promise.set_value(std::move(conn));
    });
    REQUIRE(server.ok());

    auto client = Conn::dial("127.0.0.1", server.value()->port(), 1000);
    REQUIRE(client.ok());
    REQUIRE(accepted_future.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
    auto served = accepted_future.get();

    std::promise<std::pair<uint8_t, Bytes>> got_promise;
    auto got_future = got_promise.get_future();
    served->start(
        [&](Conn& c, uint8_t type, WireReader& r, uint64_t) {
            Bytes body = r.tail();
            // echo back
            c.send(type, body);
            got_promise.set_value({type, std::move(body)});
        },
        [](Conn&) {});

    std::promise<Bytes> echo_promise;
    auto echo_future = echo_promise.get_future();
    client.value()->start(
        [&](Conn&, uint8_t, WireReader& r, uint64_t) { echo_promise.set_value(r.tail()); },
        [](Conn&) {});

    Bytes head = bytes_of("head");
    Bytes payload(100'000);
    for (size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<uint8_t>(i * 7);
    REQUIRE(client.value()->send(kTrig, head, payload.data(), payload.size()));

    REQUIRE(got_future.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
    auto [type, body] = got_future.get();
    CHECK(type == kTrig);
    REQUIRE(body.size() == head.size() + payload.size());

    REQUIRE(echo_future.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
    CHECK(echo_future.get() == body);

    client.value()->close();
    client.value()->join();
    served->close();
    served->join();
    server.value()->stop();
}

TEST_CASE("service config serializes and reloads identically") {
    ServiceConfig cfg;
    cfg.node_id = 2;
    cfg.peers = {{0, "127.0.0.1", 7000}, {1, "127.0.0.1", 7001}, {2, "127.0.0.1", 7002}};
    cfg.pools = {make_pool("/a", Persistence::Persistent, 3, 2, 3),
                 make_pool("/b", Persistence::Volatile, 1, 1, 3)};
    cfg.log_dir = "/tmp/x";
    cfg.dfg_path = "dfg.json";
    cfg.window = 5;
    REQUIRE(cfg.validate().ok());

    auto reloaded = ServiceConfig::from_json_text(cfg.to_json_text());
    REQUIRE(reloaded.ok());
    CHECK(reloaded->to_json_text() == cfg.to_json_text());
    CHECK(reloaded->node_id == 2);
    CHECK(reloaded->window == 5);
    CHECK(reloaded->pools.size() == 2);
    CHECK(reloaded->pools[0].shards[1] == std::vector<uint32_t>{1, 2, 0});

    CHECK(ServiceConfig::from_json_text("{not json").status().is(Code::ConfigError));
    CHECK(ServiceConfig::from_json_text("{}").status().is(Code::ConfigError));
}
