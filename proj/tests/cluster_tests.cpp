#include <doctest.h>

#include <map>
#include <numeric>
#include <set>

#include "cluster_util.hpp"
#include "core/clock.hpp"
#include "core/hash.hpp"

using namespace cascade;
using namespace cascade::testing;

TEST_CASE("three nodes bootstrap into view 1 and serve put/get") {
    TestCluster cluster(3, {make_pool("/p", Persistence::Volatile, 3, 1, 3)});
    for (uint32_t i = 0; i < 3; ++i) CHECK(cluster.node(i).view_id() == 1);

    auto client = cluster.client();
    auto put = client->put("/p/hello", bytes_of("world"));
    REQUIRE(put.ok());
    CHECK(put->version.per_key_version == 0);
    CHECK(put->version.shard_seq == 1);
    CHECK(put->version.timestamp_us > 0);

    // Replication agreement lets any member answer; sample several routes.
    std::set<uint32_t> members_hit;
    for (int i = 0; i < 24; ++i) {
        auto member = client->route_get("/p/hello");
        REQUIRE(member.ok());
        members_hit.insert(member.value());
        auto got = client->get("/p/hello");
        REQUIRE(got.ok());
        CHECK(str_of(got->payload) == "world");
        CHECK(got->version.per_key_version == 0);
    }
    CHECK(members_hit.size() == 3);  // uniform routing reaches every member

    auto second = client->put("/p/hello", bytes_of("again"));
    REQUIRE(second.ok());
    CHECK(second->version.per_key_version == 1);
    CHECK(second->version.timestamp_us >= put->version.timestamp_us);
}

TEST_CASE("config errors: duplicate node id and unreachable peer") {
    ServiceConfig cfg;
    cfg.node_id = 0;
    cfg.peers = {{0, "127.0.0.1", 9001}, {0, "127.0.0.1", 9002}};
    CHECK(cfg.validate().is(Code::ConfigError));

    ServiceConfig lonely;
    lonely.node_id = 0;
    lonely.peers = {{0, "127.0.0.1", pick_free_port()}, {1, "127.0.0.1", pick_free_port()}};
    lonely.bootstrap_timeout_ms = 300;
    auto node = Node::start(lonely);
    REQUIRE_FALSE(node.ok());
    CHECK(node.status().is(Code::BootstrapTimeout));
    CHECK(node.status().message.find("1") != std::string::npos);  // names the peer
}

TEST_CASE("volatile pools reject persistent puts and unknown pools are reported") {
    TestCluster cluster(1, {make_pool("/v", Persistence::Volatile, 1, 1, 1)});
    auto client = cluster.client();
    CHECK(client->put("/v/k", bytes_of("x"), PutKind::Persistent)
              .status()
              .is(Code::NotPersistentPool));
    CHECK(client->put("/nope/k", bytes_of("x")).status().is(Code::NoSuchPool));
    CHECK(client->put("/v", bytes_of("x")).status().is(Code::MalformedKey));
    CHECK(client->get("/v/absent").status().is(Code::KeyNotFound));
}

TEST_CASE("trigger put acks without mutating the store") {
    TestCluster cluster(2, {make_pool("/p", Persistence::Volatile, 2, 1, 2)});
    auto client = cluster.client();
    REQUIRE(client->put("/p/base", bytes_of("v")).ok());

    auto trig = client->trigger_put("/p/base", bytes_of("trigger-payload"));
    REQUIRE(trig.ok());

    // No version consumed, nothing stored.
    auto got = client->get("/p/base");
    REQUIRE(got.ok());
    CHECK(got->version.per_key_version == 0);
    CHECK(str_of(got->payload) == "v");
    auto put = client->put("/p/base", bytes_of("v2"));
    REQUIRE(put.ok());
    CHECK(put->version.shard_seq == 2);  // trigger did not consume a seq
}

TEST_CASE("trigger sends spread uniformly over shard members") {
    TestCluster cluster(4, {make_pool("/p", Persistence::Volatile, 4, 1, 4)});
    auto client = cluster.client();

    const int sends = 4000;
    for (int i = 0; i < sends; ++i)
        REQUIRE(client->trigger_put("/p/k" + std::to_string(i), bytes_of("x")).ok());

    // Triggers land on the dispatcher even with no registrations; count them.
    std::vector<uint64_t> counts;
    uint64_t total = 0;
    for (uint32_t i = 0; i < 4; ++i) {
        uint64_t n = cluster.node(i).fastpath().stats().objects_dispatched;
        counts.push_back(n);
        total += n;
    }
    REQUIRE(total == sends);
    // Chi-square against uniform, 3 dof; reject only below p=0.01 (11.34).
    double expected = sends / 4.0;
    double chi2 = 0;
    for (uint64_t n : counts) chi2 += (n - expected) * (n - expected) / expected;
    INFO("counts " << counts[0] << "/" << counts[1] << "/" << counts[2] << "/" << counts[3]
                   << " chi2=" << chi2);
    CHECK(chi2 < 11.34);
}

TEST_CASE("replicas converge to byte-identical state under concurrent clients") {
    TestCluster cluster(3, {make_pool("/d", Persistence::Persistent, 3, 1, 3)});

    std::atomic<int> put_failures{0};
    auto worker = [&](int id) {
        auto client = cluster.client();
        std::mt19937 rng(id);
        for (int i = 0; i < 150; ++i) {
            std::string key = "/d/k" + std::to_string(rng() % 40);
            PutKind kind = (rng() % 2) ? PutKind::Persistent : PutKind::Volatile;
            auto put = client->put(
                key, bytes_of("c" + std::to_string(id) + "#" + std::to_string(i)), kind);
            if (!put.ok()) ++put_failures;
        }
    };
    std::vector<std::thread> threads;
    for (int c = 0; c < 2; ++c) threads.emplace_back(worker, c);
    for (auto& t : threads) t.join();
    REQUIRE(put_failures.load() == 0);

    Bytes fp0 = cluster.node(0).replica("/d", 0)->kv().state_fingerprint();
    Bytes fp1 = cluster.node(1).replica("/d", 0)->kv().state_fingerprint();
    Bytes fp2 = cluster.node(2).replica("/d", 0)->kv().state_fingerprint();
    CHECK(fp0 == fp1);
    CHECK(fp1 == fp2);
    CHECK_FALSE(fp0.empty());
}

TEST_CASE("sequencer gap retransmission repairs out-of-order delivery") {
    // Drive a replica directly: deliver seq 1 then 3; the replica must ask
    // for 2 before applying 3.
    std::vector<GapReqMsg> gap_requests;
    std::vector<uint64_t> applied;
    ShardReplica::Hooks hooks;
    hooks.send_mcast_ack = [&](const McastAckMsg& ack) { applied.push_back(ack.seq); };
    hooks.send_persist_ack = [](const PersistAckMsg&) {};
    hooks.send_gap_req = [&](const GapReqMsg& req) { gap_requests.push_back(req); };
    hooks.dispatch = [](std::shared_ptr<const DispatchObject>) {};
    ShardReplica replica("/p", 0, 7, Persistence::Volatile, 64, hooks);
    replica.set_position(0, 1);

    auto mk = [](uint64_t seq) {
        McastMsg m;
        m.kind = PutKind::Volatile;
        m.pool = "/p";
        m.shard = 0;
        m.seq = seq;
        m.timestamp_us = 1000 + seq;
        m.key = "/p/k";
        return m;
    };
    replica.enqueue(mk(1), make_payload(bytes_of("a")));
    replica.enqueue(mk(3), make_payload(bytes_of("c")));

    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (gap_requests.empty() && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    REQUIRE(gap_requests.size() == 1);
    CHECK(gap_requests[0].from_seq == 2);
    CHECK(gap_requests[0].to_seq == 2);
    CHECK(replica.applied_seq() == 1);  // 3 is buffered, not applied

    replica.enqueue(mk(2), make_payload(bytes_of("b")));
    deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (applied.size() < 3 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    REQUIRE(applied == std::vector<uint64_t>{1, 2, 3});
    auto obj = replica.kv().get_current("/p/k");
    REQUIRE(obj.ok());
    CHECK(obj->version.per_key_version == 2);
    replica.stop();
}

TEST_CASE("persistent puts survive a full stop/start cycle") {
    ScratchDir dir("restart");
    ServiceConfig cfg;
    cfg.node_id = 0;
    cfg.peers = {{0, "127.0.0.1", pick_free_port()}};
    cfg.pools = {make_pool("/d", Persistence::Persistent, 1, 1, 1)};
    cfg.log_dir = dir.file("logs");
    {
        auto node = Node::start(cfg);
        REQUIRE(node.ok());
        auto client = Client::create(cfg);
        REQUIRE(client.ok());
        for (int i = 0; i < 5; ++i)
            REQUIRE(client.value()->put("/d/k", bytes_of("v" + std::to_string(i))).ok());
        client.value()->close();
        node.value()->stop();
    }
    {
        auto node = Node::start(cfg);
        REQUIRE(node.ok());
        auto client = Client::create(cfg);
        REQUIRE(client.ok());
        auto got = client.value()->get("/d/k");
        REQUIRE(got.ok());
        CHECK(str_of(got->payload) == "v4");
        CHECK(got->version.per_key_version == 4);

        // History is walkable after recovery.
        auto v2 = client.value()->get_by_version("/d/k", 2);
        REQUIRE(v2.ok());
        CHECK(str_of(v2->payload) == "v2");

        // And new puts continue the chain.
        auto put = client.value()->put("/d/k", bytes_of("v5"));
        REQUIRE(put.ok());
        CHECK(put->version.per_key_version == 5);
        client.value()->close();
        node.value()->stop();
    }
}

TEST_CASE("get_by_time answers historical queries and delays future ones") {
    TestCluster cluster(3, {make_pool("/t", Persistence::Persistent, 3, 1, 3)});
    auto client = cluster.client();

    std::vector<std::pair<uint64_t, int>> stamps;  // (timestamp, i)
    for (int i = 0; i < 20; ++i) {
        auto put = client->put("/t/k", bytes_of("v" + std::to_string(i)));
        REQUIRE(put.ok());
        stamps.emplace_back(put->version.timestamp_us, i);
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    // Query between two known stamps: newest version at or before t.
    uint64_t t = stamps[10].first;
    auto got = client->get_by_time("/t/k", t);
    REQUIRE(got.ok());
    CHECK(str_of(got->payload) == "v10");  // boundary inclusive

    got = client->get_by_time("/t/k", stamps[7].first + 1);
    REQUIRE(got.ok());
    CHECK(str_of(got->payload) == "v7");

    CHECK(client->get_by_time("/t/k", stamps[0].first - 10'000'000)
              .status()
              .is(Code::NotFound));
    CHECK(client->get_by_time("/t/zzz", t).status().is(Code::KeyNotFound));

    // A timestamp just ahead of now blocks until puts push the frontier past it.
    std::atomic<bool> keep_putting{true};
    std::thread putter([&] {
        auto c2 = cluster.client();
        while (keep_putting.load()) {
            (void)c2->put("/t/k", bytes_of("tick"));
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
    });
    uint64_t future_t = epoch_us() + 60'000;
    uint64_t t0 = mono_ns();
    auto future_get = client->get_by_time("/t/k", future_t);
    uint64_t waited_ms = (mono_ns() - t0) / 1'000'000;
    keep_putting.store(false);
    putter.join();
    REQUIRE(future_get.ok());
    CHECK(future_get->version.timestamp_us <= future_t);
    INFO("waited " << waited_ms << "ms");
    CHECK(waited_ms >= 30);
    CHECK(waited_ms <= 200);
}

TEST_CASE("get_by_time on a quiet future timestamp times out") {
    TestCluster cluster(1, {make_pool("/t", Persistence::Persistent, 1, 1, 1)},
                        [](ServiceConfig& cfg) { cfg.get_by_time_timeout_ms = 300; });
    auto client = cluster.client();
    REQUIRE(client->put("/t/k", bytes_of("only")).ok());
    auto got = client->get_by_time("/t/k", epoch_us() + 2'000'000);
    CHECK(got.status().is(Code::Timeout));
}

TEST_CASE("wrong-node requests are refused with the sequencer's id") {
    TestCluster cluster(2, {make_pool("/p", Persistence::Volatile, 1, 2, 2)});
    // Shards land on nodes 0 and 1; find a key homed on node 0 and send the
    // put to node 1 by dialing it directly.
    auto client = cluster.client();
    std::string key;
    for (int i = 0; i < 64; ++i) {
        key = "/p/k" + std::to_string(i);
        auto seq_node = client->sequencer_of_key(key);
        REQUIRE(seq_node.ok());
        if (seq_node.value() == 0) break;
    }
    auto seq_node = client->sequencer_of_key(key);
    REQUIRE(seq_node.ok());
    REQUIRE(seq_node.value() == 0);

    const auto& wrong_peer = *cluster.config_of(1).peer(1);
    auto conn = Conn::dial(wrong_peer.host, wrong_peer.port, 1000);
    REQUIRE(conn.ok());
    std::promise<RespMsg> resp_promise;
    auto resp_future = resp_promise.get_future();
    conn.value()->start(
        [&](Conn&, uint8_t type, WireReader& r, uint64_t) {
            if (type == kResp) {
                auto resp = decode_resp(r);
                if (resp.ok()) resp_promise.set_value(resp.take());
            }
        },
        [](Conn&) {});
    PutReqMsg req{77, PutKind::PoolDefault, key};
    Bytes body = bytes_of("x");
    REQUIRE(conn.value()->send(kReqPut, encode_put_req_head(req), body.data(), body.size()));
    REQUIRE(resp_future.wait_for(std::chrono::seconds(5)) == std::future_status::ready);
    auto resp = resp_future.get();
    CHECK(resp.corr == 77);
    CHECK(resp.code == static_cast<uint16_t>(Code::WrongNode));
    CHECK(resp.message.find("node 0") != std::string::npos);
    conn.value()->close();
    conn.value()->join();
}

TEST_CASE("hash_first_suffix_component groups related keys on one shard") {
    TestCluster cluster(2, {make_pool("/g", Persistence::Volatile, 1, 2, 2,
                                      ShardingPolicy::HashFirstSuffixComponent)});
    auto client = cluster.client();
    auto a = client->sequencer_of_key("/g/cam0/f1");
    auto b = client->sequencer_of_key("/g/cam0/f2");
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(a.value() == b.value());
}
