#pragma once

#include <map>
#include <memory>
#include <thread>
#include <unordered_map>

#include "cms/cms.hpp"
#include "core/thread_pool.hpp"
#include "dfg/runtime.hpp"
#include "fastpath/dispatcher.hpp"
#include "kv/lru_cache.hpp"
#include "net/conn.hpp"
#include "repl/replica.hpp"
#include "repl/sequencer.hpp"
#include "repl/view.hpp"
#include "service/client.hpp"
#include "service/config.hpp"

namespace cascade {

// The node daemon: hosts shard replicas, runs the per-shard sequencers it is
// responsible for, serves the client protocol, dispatches objects to lambdas
// and exchanges peer frames with the rest of the cluster.
class Node final : public StoreApi {
  public:
    // Blocks until every peer is reachable (BootstrapTimeout otherwise).
    // user_lambdas extends the built-in lambda registry.
    static Result<std::unique_ptr<Node>> start(ServiceConfig cfg,
                                               std::shared_ptr<LambdaRegistry> user_lambdas = {});
    ~Node() override;

    void stop();
    // Simulated kill: abandons staged log writes and severs sockets without
    // draining anything (threads are still joined; files are left exactly as
    // the last completed sync wrote them).
    void crash_stop();

    uint32_t id() const { return cfg_.node_id; }
    uint64_t view_id() const { return view_->get()->view_id; }
    const ServiceConfig& config() const { return cfg_; }

    FastPath& fastpath() { return *fastpath_; }
    SubscriptionTable& subscriptions() { return subs_; }
    LruCache& object_cache() { return *cache_; }
    ShardReplica* replica(const std::string& pool, uint32_t shard);
    ShardSequencer* sequencer(const std::string& pool, uint32_t shard);
    const DfgRuntime* dfg() const { return dfg_.get(); }

    // Embedded client used by lambda contexts; lazily connected.
    Client& local_client();

    // StoreApi (the lambda-facing surface)
    Result<PutResult> api_put(const std::string& key, PayloadPtr payload, PutKind kind) override;
    Status api_trigger_put(const std::string& key, PayloadPtr payload) override;
    Result<GetResult> api_get(const std::string& key, bool allow_cached) override;
    Result<GetResult> api_get_by_version(const std::string& key, uint64_t version) override;
    Result<GetResult> api_get_by_time(const std::string& key, uint64_t ts_us) override;
    Status api_register(LambdaRegistration reg, LambdaFn fn) override;
    bool api_hosts_pool(const std::string& pool_path) const override;
    const PoolRegistry& api_pools() const override { return registry_; }

  private:
    explicit Node(ServiceConfig cfg);

    Status boot(std::shared_ptr<LambdaRegistry> user_lambdas);
    Status setup_replicas();
    void setup_sequencer(const std::string& pool, uint32_t shard,
                         const std::vector<uint32_t>& members);
    Status bootstrap_peers();
    Status instantiate_dfg();

    // frame plumbing
    void on_accept(std::shared_ptr<Conn> conn);
    void on_frame(const std::weak_ptr<Conn>& wp, Conn& conn, uint8_t type, WireReader& r,
                  uint64_t recv_ns);
    void handle_put_like(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                         PutKind kind, PayloadPtr payload, uint64_t recv_ns);
    void handle_get(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                    uint64_t recv_ns);
    void handle_get_ver(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                        uint64_t version, uint64_t recv_ns);
    void handle_get_time(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                         uint64_t ts_us, uint64_t recv_ns);
    void respond_error(const std::weak_ptr<Conn>& wp, uint64_t corr, const Status& st,
                       uint64_t recv_ns);
    void respond_get(const std::weak_ptr<Conn>& wp, uint64_t corr, const VersionedObject& obj,
                     uint64_t recv_ns);

    bool send_to_peer(uint32_t peer, uint8_t type, const Bytes& head, const PayloadPtr& payload);
    void submit_trigger(const std::string& key, PayloadPtr payload);

    Result<std::pair<std::string, uint32_t>> locate(const std::string& key) const;
    ShardReplica* local_replica_for(const std::string& pool, uint32_t shard);

    // housekeeping
    void housekeeper_loop();
    void send_heartbeats(bool frontier_only_shard_valid, const std::string& pool, uint32_t shard,
                         const StabilityFrontier& frontier);
    void note_peer_alive(uint32_t peer);
    void handle_node_failure(uint32_t dead);
    void on_frontier_advance(const std::string& pool, uint32_t shard,
                             const StabilityFrontier& frontier);

    ServiceConfig cfg_;
    PoolRegistry registry_;
    std::shared_ptr<LambdaRegistry> lambdas_;
    std::unique_ptr<ViewTracker> view_;

    std::unique_ptr<FastPath> fastpath_;
    std::unique_ptr<LruCache> cache_;
    SubscriptionTable subs_;
    std::unique_ptr<DfgRuntime> dfg_;
    std::unique_ptr<ThreadPool> blocking_pool_;

    std::map<std::pair<std::string, uint32_t>, std::unique_ptr<ShardReplica>> replicas_;
    mutable std::mutex seq_mu_;
    std::map<std::pair<std::string, uint32_t>, std::unique_ptr<ShardSequencer>> sequencers_;

    std::unique_ptr<Server> server_;
    std::mutex conns_mu_;
    std::unordered_map<uint64_t, std::shared_ptr<Conn>> inbound_;
    std::unordered_map<uint64_t, uint32_t> inbound_node_;  // conn id -> peer id (from heartbeats)
    std::map<uint32_t, std::shared_ptr<Conn>> peer_conns_;
    std::vector<std::shared_ptr<Conn>> zombies_;

    std::mutex liveness_mu_;
    std::map<uint32_t, uint64_t> last_seen_ns_;

    std::thread housekeeper_;
    std::mutex hk_mu_;
    std::condition_variable hk_cv_;
    bool hk_stop_ = false;

    std::mutex client_mu_;
    std::unique_ptr<Client> embedded_client_;

    std::atomic<bool> stopped_{false};
    bool booted_ = false;
};

}  // namespace cascade
