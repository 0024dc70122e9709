#include <doctest.h>

#include <fstream>
#include <mutex>

#include "cluster_util.hpp"
#include "cms/cms.hpp"

using namespace cascade;
using namespace cascade::testing;

namespace {

// Writes the one-vertex CMS DFG and points the config at it.
void enable_cms(ServiceConfig& cfg, const std::string& tag) {
    std::string dfg_path = std::filesystem::temp_directory_path() /
                           ("dfg_cms_" + tag + "_" + std::to_string(::getpid()) + ".json");
    std::ofstream out(dfg_path);
    out << R"({
      "pools": ["/cms/topics"],
      "vertices": [
        {"id": "cms", "lambda": "cms_notify", "prefix": "/cms/topics",
         "dispatch_policy": "fifo_by_key"}
      ],
      "edges": []
    })";
    out.close();
    cfg.dfg_path = dfg_path;
}

struct Collected {
    std::mutex mu;
    std::vector<Client::NotifyEvent> events;

    void add(const Client::NotifyEvent& ev) {
        std::lock_guard lk(mu);
        events.push_back(ev);
    }
    size_t size() {
        std::lock_guard lk(mu);
        return events.size();
    }
};

bool wait_for_count(Collected& c, size_t want, int timeout_ms = 15'000) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (c.size() < want && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    return c.size() >= want;
}

}  // namespace

TEST_CASE("topic helpers") {
    CHECK(topic_of_key("/cms/topics/T") == "T");
    CHECK(topic_of_key("/cms/topics/a/b").empty());
    CHECK(topic_of_key("/other/T").empty());
    CHECK(validate_topic("T").ok());
    CHECK(validate_topic("a/b").is(Code::MalformedKey));
    CHECK(validate_topic("").is(Code::MalformedKey));
    CHECK(validate_topic("..").is(Code::MalformedKey));
}

TEST_CASE("publish maps to a put under /cms/topics and notifies subscribers in order") {
    TestCluster cluster(3, {make_pool("/cms/topics", Persistence::Persistent, 3, 1, 3)},
                        [](ServiceConfig& cfg) { enable_cms(cfg, "order"); });

    auto subscriber = cluster.client();
    Collected got;
    REQUIRE(subscriber->subscribe("T", [&](const Client::NotifyEvent& ev) { got.add(ev); }).ok());

    auto publisher = cluster.client();
    const int k = 50;
    for (int i = 0; i < k; ++i) {
        auto pub = publisher->publish("T", bytes_of("m" + std::to_string(i)), PutKind::Volatile);
        REQUIRE(pub.ok());
        CHECK(pub->version.per_key_version == static_cast<uint64_t>(i));
    }

    REQUIRE(wait_for_count(got, k));
    CHECK(got.size() == k);
    for (int i = 0; i < k; ++i) {
        CHECK(got.events[i].seq == static_cast<uint64_t>(i));
        CHECK(str_of(got.events[i].payload) == "m" + std::to_string(i));
        CHECK(got.events[i].topic == "T");
    }
    CHECK(subscriber->notify_gaps() == 0);

    // The publish stored the object: topics are ordinary keys.
    auto stored = publisher->get("/cms/topics/T");
    REQUIRE(stored.ok());
    CHECK(stored->version.per_key_version == k - 1);

    // A subscriber never polls.
    CHECK(subscriber->get_requests_sent() == 0);
}

TEST_CASE("both subscribers receive every message; quiet topics stay silent") {
    TestCluster cluster(2, {make_pool("/cms/topics", Persistence::Persistent, 2, 1, 2)},
                        [](ServiceConfig& cfg) { enable_cms(cfg, "fanout"); });

    auto sub1 = cluster.client();
    auto sub2 = cluster.client();
    Collected got1, got2, quiet;
    REQUIRE(sub1->subscribe("T", [&](const Client::NotifyEvent& ev) { got1.add(ev); }).ok());
    REQUIRE(sub2->subscribe("T", [&](const Client::NotifyEvent& ev) { got2.add(ev); }).ok());
    REQUIRE(sub1->subscribe("quiet", [&](const Client::NotifyEvent& ev) { quiet.add(ev); }).ok());

    auto publisher = cluster.client();
    for (int i = 0; i < 20; ++i)
        REQUIRE(publisher->publish("T", bytes_of("x" + std::to_string(i)), PutKind::Volatile).ok());

    REQUIRE(wait_for_count(got1, 20));
    REQUIRE(wait_for_count(got2, 20));
    CHECK(got1.size() == 20);
    CHECK(got2.size() == 20);
    CHECK(quiet.size() == 0);
}

TEST_CASE("a topic with no subscribers still stores per the chosen persistence") {
    TestCluster cluster(1, {make_pool("/cms/topics", Persistence::Persistent, 1, 1, 1)},
                        [](ServiceConfig& cfg) { enable_cms(cfg, "nosubs"); });
    auto client = cluster.client();
    REQUIRE(client->publish("lonely", bytes_of("p0"), PutKind::Persistent).ok());
    REQUIRE(client->publish("lonely", bytes_of("p1"), PutKind::Persistent).ok());
    auto got = client->get("/cms/topics/lonely");
    REQUIRE(got.ok());
    CHECK(str_of(got->payload) == "p1");
}

TEST_CASE("persistent publishes survive a broker restart") {
    ScratchDir dir("cms_restart");
    ServiceConfig cfg;
    cfg.node_id = 0;
    cfg.peers = {{0, "127.0.0.1", pick_free_port()}};
    cfg.pools = {make_pool("/cms/topics", Persistence::Persistent, 1, 1, 1)};
    cfg.log_dir = dir.file("logs");
    enable_cms(cfg, "restart");

    {
        auto node = Node::start(cfg);
        REQUIRE(node.ok());
        auto client = Client::create(cfg);
        REQUIRE(client.ok());
        for (int i = 0; i < 3; ++i)
            REQUIRE(client.value()
                        ->publish("T", bytes_of("durable" + std::to_string(i)),
                                  PutKind::Persistent)
                        .ok());
        client.value()->close();
        node.value()->stop();
    }
    {
        auto node = Node::start(cfg);
        REQUIRE(node.ok());
        auto client = Client::create(cfg);
        REQUIRE(client.ok());
        for (uint64_t v = 0; v < 3; ++v) {
            auto got = client.value()->get_by_version("/cms/topics/T", v);
            REQUIRE(got.ok());
            CHECK(str_of(got->payload) == "durable" + std::to_string(v));
        }
        client.value()->close();
        node.value()->stop();
    }
}

TEST_CASE("publish validates topics and propagates put errors") {
    TestCluster cluster(1, {make_pool("/cms/topics", Persistence::Persistent, 1, 1, 1)},
                        [](ServiceConfig& cfg) { enable_cms(cfg, "errors"); });
    auto client = cluster.client();
    CHECK(client->publish("a/b", bytes_of("x"), PutKind::Volatile).status().is(Code::MalformedKey));
    CHECK(client->publish("", bytes_of("x"), PutKind::Volatile).status().is(Code::MalformedKey));

    Status st = client->subscribe("a/b", [](const Client::NotifyEvent&) {});
    CHECK(st.is(Code::MalformedKey));
}

TEST_CASE("a disconnecting subscriber leaves the others untouched") {
    TestCluster cluster(1, {make_pool("/cms/topics", Persistence::Persistent, 1, 1, 1)},
                        [](ServiceConfig& cfg) { enable_cms(cfg, "dropout"); });

    auto stayer = cluster.client();
    Collected got;
    REQUIRE(stayer->subscribe("T", [&](const Client::NotifyEvent& ev) { got.add(ev); }).ok());

    {
        auto leaver = cluster.client();
        Collected tmp;
        REQUIRE(leaver->subscribe("T", [&](const Client::NotifyEvent& ev) { tmp.add(ev); }).ok());
        auto publisher = cluster.client();
        REQUIRE(publisher->publish("T", bytes_of("one"), PutKind::Volatile).ok());
        REQUIRE(wait_for_count(tmp, 1));
        leaver->close();  // mid-stream disconnect
    }

    auto publisher = cluster.client();
    for (int i = 0; i < 5; ++i)
        REQUIRE(publisher->publish("T", bytes_of("more" + std::to_string(i)), PutKind::Volatile)
                    .ok());
    REQUIRE(wait_for_count(got, 6));
    CHECK(got.size() == 6);
    CHECK(str_of(got.events.back().payload) == "more4");
}
