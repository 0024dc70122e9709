#pragma once

#include <atomic>
#include <functional>
#include <future>
#include <memory>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "core/bounded_queue.hpp"
#include "core/bytes.hpp"
#include "core/keys.hpp"
#include "core/status.hpp"
#include "fastpath/trie.hpp"

namespace cascade {

// One delivered or triggered object, shared (never copied) between every
// matching upcall event on this node.
struct DispatchObject {
    std::string key;  // full key
    PayloadPtr payload;
    Version version;  // zeroed for trigger puts
    bool is_trigger = false;

    // Replica-side designation inputs: of the member_count replicas that saw
    // this ordered delivery, exactly one runs each matching lambda. Triggers
    // arrive at a single member and always dispatch.
    uint32_t member_index = 0;
    uint32_t member_count = 1;
};

class RegisteredLambda;

struct UpcallEvent {
    std::shared_ptr<const DispatchObject> object;
    std::shared_ptr<const RegisteredLambda> lambda;
    uint64_t enqueue_ns = 0;   // when the dispatcher enqueued this event
    uint64_t dispatch_ns = 0;  // matching + enqueueing cost for the object
};

using LambdaFn = std::function<void(const UpcallEvent&)>;

class RegisteredLambda {
  public:
    RegisteredLambda(LambdaRegistration reg, LambdaFn fn)
        : registration(std::move(reg)), fn(std::move(fn)) {}

    const LambdaRegistration registration;
    const LambdaFn fn;

  private:
    friend class FastPath;
    size_t rr_next = 0;  // dispatcher-thread only
};

// Timing probe, invoked by workers after each lambda completes.
struct EventTiming {
    std::string lambda_id;
    uint64_t enqueue_ns = 0;    // when the dispatcher enqueued the event
    uint64_t dequeue_ns = 0;    // when a worker picked it up
    uint64_t exec_done_ns = 0;  // when the lambda returned
    uint64_t dispatch_ns = 0;   // dispatcher-side matching + enqueue cost
    size_t queue_index = 0;
};

// The per-node dispatch engine: a single dispatcher thread consumes delivered
// and triggered objects, matches key prefixes in the trie, and enqueues
// upcall events onto per-worker queues chosen round-robin or by key hash.
// Each worker owns exactly one queue; the dispatcher is its only producer.
class FastPath {
  public:
    struct Options {
        size_t worker_count = 0;      // 0: max(2, hardware_concurrency)
        size_t queue_capacity = 4096;
    };

    struct Stats {
        uint64_t objects_dispatched = 0;
        uint64_t events_enqueued = 0;
        uint64_t events_executed = 0;
        uint64_t lambda_failures = 0;
    };

    explicit FastPath(Options opts);
    ~FastPath();
    FastPath(const FastPath&) = delete;
    FastPath& operator=(const FastPath&) = delete;

    // Binds a lambda to a prefix. Synchronous with the dispatch stream: once
    // this returns, every later-submitted matching object produces an upcall.
    Status register_lambda(LambdaRegistration reg, LambdaFn fn);

    // Hands one object to the dispatcher. Blocks when the dispatch queue is
    // full (backpressure to the delivery context).
    void submit(std::shared_ptr<const DispatchObject> obj);

    // Trie matching against the currently applied registrations, in
    // trie-walk (shortest-prefix-first) order. Test/bench entry point; races
    // with in-flight register_lambda calls are resolved by queue order.
    std::vector<LambdaRegistration> match(std::string_view full_key);

    void set_timing_probe(std::function<void(const EventTiming&)> probe);

    size_t worker_count() const { return workers_.size(); }
    Stats stats() const;

    // Drains queues and joins all threads.
    void stop();

  private:
    struct RegisterCmd {
        std::shared_ptr<RegisteredLambda> lambda;
        std::promise<Status>* done;
    };
    struct MatchCmd {
        std::string key;
        std::promise<std::vector<LambdaRegistration>>* done;
    };
    using DispatchItem =
        std::variant<std::shared_ptr<const DispatchObject>, RegisterCmd, MatchCmd>;

    void dispatcher_loop();
    void worker_loop(size_t index);

    Options opts_;
    BoundedQueue<DispatchItem> inbox_;
    std::vector<std::unique_ptr<BoundedQueue<UpcallEvent>>> queues_;
    std::vector<std::thread> workers_;
    std::thread dispatcher_;

    // dispatcher-thread state
    PrefixTrie trie_;
    std::unordered_map<std::string, std::shared_ptr<RegisteredLambda>> by_binding_;

    mutable std::mutex probe_mu_;
    std::function<void(const EventTiming&)> probe_;

    std::atomic<uint64_t> objects_dispatched_{0};
    std::atomic<uint64_t> events_enqueued_{0};
    std::atomic<uint64_t> events_executed_{0};
    std::atomic<uint64_t> lambda_failures_{0};
    std::atomic<bool> stopped_{false};
};

}  // namespace cascade
