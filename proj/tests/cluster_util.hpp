#pragma once

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include "service/client.hpp"
#include "service/node.hpp"

namespace cascade::testing {

namespace fs = std::filesystem;

inline uint16_t pick_free_port() {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    uint16_t port = ntohs(addr.sin_port);
    ::close(fd);
    return port;
}

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() / ("cascade_" + tag + "_" + std::to_string(::getpid()) +
                                            "_" + std::to_string(counter.fetch_add(1)));
        fs::create_directories(path);
    }
    ~ScratchDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Round-robin shard assignment over n nodes.
inline ServiceConfig::PoolConfig make_pool(const std::string& path, Persistence persistence,
                                           uint32_t replication, uint32_t shard_count,
                                           uint32_t n_nodes,
                                           ShardingPolicy policy = ShardingPolicy::HashFullKey) {
    ServiceConfig::PoolConfig pool;
    pool.desc = {path, persistence, replication, shard_count, policy};
    for (uint32_t s = 0; s < shard_count; ++s) {
        std::vector<uint32_t> members;
        for (uint32_t r = 0; r < replication; ++r) members.push_back((s + r) % n_nodes);
        pool.shards.push_back(std::move(members));
    }
    return pool;
}

class TestCluster {
  public:
    TestCluster(uint32_t n_nodes, std::vector<ServiceConfig::PoolConfig> pools,
                std::function<void(ServiceConfig&)> tweak = {},
                std::shared_ptr<LambdaRegistry> lambdas = {})
        : dir_("cluster") {
        ServiceConfig base;
        for (uint32_t i = 0; i < n_nodes; ++i)
            base.peers.push_back({i, "127.0.0.1", pick_free_port()});
        base.pools = std::move(pools);
        base.log_dir = dir_.file("logs");
        base.heartbeat_ms = 100;
        base.failure_timeout_ms = 2000;
        base.worker_count = 2;
        if (tweak) tweak(base);

        std::vector<std::future<Result<std::unique_ptr<Node>>>> futures;
        for (uint32_t i = 0; i < n_nodes; ++i) {
            ServiceConfig cfg = base;
            cfg.node_id = i;
            cfg.log_dir = dir_.file("logs_node" + std::to_string(i));
            configs_.push_back(cfg);
            futures.push_back(std::async(std::launch::async,
                                         [cfg, lambdas] { return Node::start(cfg, lambdas); }));
        }
        for (auto& f : futures) {
            auto node = f.get();
            if (!node.ok())
                throw std::runtime_error("cluster start failed: " + node.status().to_string());
            nodes_.push_back(node.take());
        }
        base_ = std::move(base);
    }

    ~TestCluster() { stop_all(); }

    void stop_all() {
        for (auto& n : nodes_)
            if (n) n->stop();
    }

    Node& node(uint32_t id) {
        for (auto& n : nodes_)
            if (n && n->id() == id) return *n;
        throw std::runtime_error("no such node");
    }

    // Stops and forgets a node (crash or graceful).
    void kill_node(uint32_t id, bool crash) {
        for (auto& n : nodes_) {
            if (n && n->id() == id) {
                crash ? n->crash_stop() : n->stop();
                n.reset();
            }
        }
    }

    ServiceConfig client_config() const {
        ServiceConfig cfg = base_;
        cfg.node_id = kNoNodeId;
        return cfg;
    }

    std::unique_ptr<Client> client() const {
        auto c = Client::create(client_config());
        if (!c.ok()) throw std::runtime_error("client create failed");
        return c.take();
    }

    const ServiceConfig& config_of(uint32_t id) const { return configs_.at(id); }
    std::string scratch_file(const std::string& name) const { return dir_.file(name); }
    size_t node_count() const { return nodes_.size(); }

  private:
    ScratchDir dir_;
    ServiceConfig base_;
    std::vector<ServiceConfig> configs_;
    std::vector<std::unique_ptr<Node>> nodes_;
};

inline Bytes bytes_of(const std::string& s) { return to_bytes(s); }

inline std::string str_of(const Bytes& b) {
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace cascade::testing
