#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "core/clock.hpp"
#include "fastpath/dispatcher.hpp"
#include "fastpath/trie.hpp"

using namespace cascade;

namespace {

std::shared_ptr<const DispatchObject> make_object(const std::string& key, std::string body = "x",
                                                  bool trigger = true) {
    auto obj = std::make_shared<DispatchObject>();
    obj->key = key;
    obj->payload = make_payload(to_bytes(body));
    obj->is_trigger = trigger;
    return obj;
}

}  // namespace

TEST_CASE("trie matches whole-component prefixes, shortest first") {
    PrefixTrie trie;
    REQUIRE(trie.insert({"lf", "/sf/detect_animal", DispatchPolicy::RoundRobin}).ok());
    REQUIRE(trie.insert({"lx", "/sf", DispatchPolicy::RoundRobin}).ok());

    auto matches = trie.match("/sf/detect_animal/img1");
    REQUIRE(matches.size() == 2);
    CHECK(matches[0]->lambda_id == "lx");  // shortest prefix first
    CHECK(matches[1]->lambda_id == "lf");

    CHECK(trie.match("/sf").size() == 1);
    CHECK(trie.match("/other/key").empty());

    // Component-wise, not byte-wise, prefixing.
    REQUIRE(trie.insert({"lc", "/cms/top", DispatchPolicy::RoundRobin}).ok());
    CHECK(trie.match("/cms/topics/T").empty());
    CHECK(trie.match("/cms/top/x").size() == 1);
}

TEST_CASE("trie rejects duplicate (lambda, prefix) bindings") {
    PrefixTrie trie;
    REQUIRE(trie.insert({"f", "/a/b", DispatchPolicy::RoundRobin}).ok());
    CHECK(trie.insert({"f", "/a/b", DispatchPolicy::FifoByKey}).is(Code::DuplicateRegistration));
    CHECK(trie.insert({"f", "/a", DispatchPolicy::RoundRobin}).ok());  // different prefix is fine
    CHECK(trie.insert({"g", "/a/b", DispatchPolicy::RoundRobin}).ok());
    CHECK(trie.insert({"h", "nope", DispatchPolicy::RoundRobin}).is(Code::MalformedKey));
}

TEST_CASE("trie equals brute-force scan over random registrations") {
    std::mt19937 rng(31);
    const char* comps[] = {"a", "b", "c", "dd", "ee", "fff", "g1", "h2"};
    auto random_path = [&](int max_depth) {
        std::string p;
        int depth = 1 + static_cast<int>(rng() % max_depth);
        for (int i = 0; i < depth; ++i) p += std::string("/") + comps[rng() % 8];
        return p;
    };

    PrefixTrie trie;
    std::vector<LambdaRegistration> regs;
    for (int i = 0; i < 1000; ++i) {
        LambdaRegistration reg{"l" + std::to_string(i), random_path(4), DispatchPolicy::RoundRobin};
        if (trie.insert(reg).ok()) regs.push_back(reg);
    }

    for (int i = 0; i < 10'000; ++i) {
        std::string key = random_path(6);
        auto got = trie.match(key);
        std::multiset<std::string> got_ids;
        for (auto* r : got) got_ids.insert(r->lambda_id + "|" + r->prefix);

        std::multiset<std::string> want_ids;
        for (const auto& r : regs)
            if (is_path_prefix(r.prefix, key)) want_ids.insert(r.lambda_id + "|" + r.prefix);
        CHECK(got_ids == want_ids);
    }
}

TEST_CASE("register then dispatch produces exactly one upcall per match") {
    FastPath fp({2, 256});
    std::atomic<int> calls{0};
    REQUIRE(fp.register_lambda({"f", "/p/sub", DispatchPolicy::RoundRobin},
                               [&](const UpcallEvent&) { ++calls; })
                .ok());
    CHECK(fp.register_lambda({"f", "/p/sub", DispatchPolicy::RoundRobin}, [](const UpcallEvent&) {})
              .is(Code::DuplicateRegistration));

    fp.submit(make_object("/p/sub/k1"));
    fp.submit(make_object("/p/other"));  // no registration: dropped after the store applied it
    fp.submit(make_object("/q"));

    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (fp.stats().objects_dispatched < 3 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    fp.stop();
    CHECK(calls.load() == 1);
    CHECK(fp.stats().events_enqueued == 1);
}

TEST_CASE("round-robin spreads events cyclically per registration") {
    FastPath fp({4, 256});
    std::mutex mu;
    std::map<size_t, int> per_queue;
    std::atomic<int> calls{0};
    fp.set_timing_probe([&](const EventTiming& t) {
        std::lock_guard lk(mu);
        ++per_queue[t.queue_index];
    });
    REQUIRE(fp.register_lambda({"f", "/p", DispatchPolicy::RoundRobin},
                               [&](const UpcallEvent&) { ++calls; })
                .ok());
    for (int i = 0; i < 8; ++i) fp.submit(make_object("/p/k" + std::to_string(i)));
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (calls.load() < 8 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    fp.stop();

    REQUIRE(per_queue.size() == 4);
    for (const auto& [queue, n] : per_queue) CHECK(n == 2);
}

TEST_CASE("fifo_by_key sends same-key events to one queue in order") {
    FastPath fp({4, 4096});
    std::mutex mu;
    std::vector<int> observed;
    REQUIRE(fp.register_lambda({"f", "/p", DispatchPolicy::FifoByKey},
                               [&](const UpcallEvent& ev) {
                                   std::lock_guard lk(mu);
                                   observed.push_back(
                                       std::stoi(std::string(reinterpret_cast<const char*>(
                                                                 ev.object->payload->data()),
                                                             ev.object->payload->size())));
                               })
                .ok());
    for (int i = 0; i < 100; ++i) fp.submit(make_object("/p/same", std::to_string(i)));
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (fp.stats().events_executed < 100 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    fp.stop();

    REQUIRE(observed.size() == 100);
    for (int i = 0; i < 100; ++i) CHECK(observed[i] == i);
}

TEST_CASE("an object matching several lambdas shares one payload buffer") {
    FastPath fp({2, 256});
    std::mutex mu;
    std::vector<const PayloadBuffer*> seen;
    for (int i = 0; i < 3; ++i) {
        REQUIRE(fp.register_lambda({"f" + std::to_string(i), "/p", DispatchPolicy::RoundRobin},
                                   [&](const UpcallEvent& ev) {
                                       std::lock_guard lk(mu);
                                       seen.push_back(ev.object->payload.get());
                                   })
                    .ok());
    }

    uint64_t allocs_before = PayloadBuffer::total_allocations();
    fp.submit(make_object("/p/k", std::string(1024, 'z')));
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (fp.stats().events_executed < 3 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    fp.stop();
    uint64_t allocs_after = PayloadBuffer::total_allocations();

    REQUIRE(seen.size() == 3);
    CHECK(seen[0] == seen[1]);
    CHECK(seen[1] == seen[2]);
    // One buffer made by make_object, none on the dispatch path.
    CHECK(allocs_after - allocs_before == 1);
}

TEST_CASE("a throwing lambda does not kill its worker") {
    FastPath fp({1, 256});
    std::atomic<int> calls{0};
    REQUIRE(fp.register_lambda({"f", "/p", DispatchPolicy::RoundRobin},
                               [&](const UpcallEvent&) {
                                   if (calls++ == 0) throw std::runtime_error("boom");
                               })
                .ok());
    fp.submit(make_object("/p/a"));
    fp.submit(make_object("/p/b"));
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (fp.stats().events_executed < 2 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    fp.stop();
    CHECK(calls.load() == 2);
    CHECK(fp.stats().lambda_failures == 1);
    CHECK(fp.stats().events_executed == 2);
}

TEST_CASE("idle workers park instead of spinning") {
    FastPath fp({4, 256});
    REQUIRE(fp.register_lambda({"f", "/p", DispatchPolicy::RoundRobin}, [](const UpcallEvent&) {})
                .ok());
    // Thread CPU time across the whole process should stay near zero while
    // the pool idles.
    struct timespec t0, t1;
    clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &t0);
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &t1);
    double cpu_s = (t1.tv_sec - t0.tv_sec) + (t1.tv_nsec - t0.tv_nsec) * 1e-9;
    fp.stop();
    CHECK(cpu_s < 0.10);
}

TEST_CASE("match command reflects registrations applied in queue order") {
    FastPath fp({2, 256});
    CHECK(fp.match("/p/k").empty());
    REQUIRE(fp.register_lambda({"f", "/p", DispatchPolicy::RoundRobin}, [](const UpcallEvent&) {})
                .ok());
    auto matches = fp.match("/p/k");
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].lambda_id == "f");
    fp.stop();
}
