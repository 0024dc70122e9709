#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <unordered_map>

#include "net/conn.hpp"
#include "service/config.hpp"
#include "service/types.hpp"

namespace cascade {

// Client SDK. Routes puts to the home shard's sequencer, gets to a uniformly
// random member, trigger puts to a uniformly random member; one TCP
// connection per node, multiplexed by correlation id. Senders block when more
// than `window` puts per shard are in flight.
class Client {
  public:
    struct NotifyEvent {
        std::string topic;
        uint64_t seq = 0;  // per-topic sequence (per_key_version)
        uint64_t shard_seq = 0;
        uint64_t timestamp_us = 0;
        Bytes payload;
    };
    using NotifyFn = std::function<void(const NotifyEvent&)>;
    using PutCallback = std::function<void(Result<PutResult>)>;

    static Result<std::unique_ptr<Client>> create(ServiceConfig cfg);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    Result<PutResult> put(const std::string& key, Bytes payload,
                          PutKind kind = PutKind::PoolDefault);
    // Open-loop entry point: returns once the request is on the wire (or the
    // window made it block); `done` fires on the response.
    void put_async(const std::string& key, PayloadPtr payload, PutKind kind, PutCallback done);

    Result<TrigResult> trigger_put(const std::string& key, Bytes payload);
    using TrigCallback = std::function<void(Result<TrigResult>)>;
    void trigger_put_async(const std::string& key, PayloadPtr payload, TrigCallback done);
    Result<GetResult> get(const std::string& key);
    Result<GetResult> get_by_version(const std::string& key, uint64_t version);
    Result<GetResult> get_by_time(const std::string& key, uint64_t ts_us);

    Result<PutResult> publish(const std::string& topic, Bytes payload, PutKind persistence);
    Status subscribe(const std::string& topic, NotifyFn fn);

    // Routing introspection (tests).
    Result<uint32_t> sequencer_of_key(const std::string& key) const;
    Result<uint32_t> route_get(const std::string& key);
    uint64_t get_requests_sent() const { return gets_sent_.load(); }
    uint64_t notify_gaps() const { return notify_gaps_.load(); }
    const PoolRegistry& pools() const { return registry_; }

    void close();

  private:
    struct PendingReq {
        std::function<void(Result<RespMsg>, Bytes)> done;  // resp, payload tail
    };
    struct NodeConn {
        std::shared_ptr<Conn> conn;
        std::mutex mu;
        uint64_t next_corr = 1;
        std::unordered_map<uint64_t, PendingReq> pending;
    };
    struct WindowGate {
        std::mutex mu;
        std::condition_variable cv;
        uint32_t available;
    };
    struct Subscription {
        NotifyFn fn;
        bool seq_seen = false;
        uint64_t next_seq = 0;
    };

    explicit Client(ServiceConfig cfg, PoolRegistry registry);

    Result<NodeConn*> conn_to(uint32_t node_id);
    void on_frame(uint32_t node_id, Conn& conn, uint8_t type, WireReader& r, uint64_t recv_ns);
    void on_close(uint32_t node_id, Conn& conn);
    void fail_pending(NodeConn& nc, Code code);

    // Blocking request over a node conn; payload may be null.
    Result<RespMsg> call(uint32_t node_id, uint8_t type,
                         const std::function<Bytes(uint64_t corr)>& make_head,
                         const PayloadPtr& payload, uint64_t timeout_ms, Bytes* payload_out,
                         uint64_t* e2e_ns);

    struct Route {
        ObjectKey key;
        const ServiceConfig::PoolConfig* pool;
        uint32_t shard;
        const std::vector<uint32_t>* members;
    };
    Result<Route> route(const std::string& key) const;
    Result<uint32_t> pick_random_member(const Route& r);

    WindowGate& window_for(const std::string& pool, uint32_t shard);

    ServiceConfig cfg_;
    PoolRegistry registry_;

    std::mutex conns_mu_;
    std::map<uint32_t, std::unique_ptr<NodeConn>> conns_;
    std::set<uint32_t> dead_nodes_;
    std::vector<std::shared_ptr<Conn>> zombies_;
    bool closed_ = false;

    std::mutex windows_mu_;
    std::map<std::pair<std::string, uint32_t>, std::unique_ptr<WindowGate>> windows_;

    std::mutex subs_mu_;
    std::map<std::string, Subscription> subs_;

    std::mutex rng_mu_;
    std::mt19937 rng_{std::random_device{}()};

    std::atomic<uint64_t> gets_sent_{0};
    std::atomic<uint64_t> notify_gaps_{0};
};

}  // namespace cascade
