#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/keys.hpp"
#include "core/status.hpp"

namespace cascade {

inline constexpr uint32_t kNoNodeId = UINT32_MAX;

// Cluster + node settings, loaded from one JSON file shared by every node
// and client. Shard membership is explicit: pools[i].shards lists, per shard,
// the ordered node ids holding a replica.
struct ServiceConfig {
    struct Peer {
        uint32_t id = 0;
        std::string host;
        uint16_t port = 0;

        std::string address() const { return host + ":" + std::to_string(port); }
    };

    struct PoolConfig {
        PoolDescriptor desc;
        std::vector<std::vector<uint32_t>> shards;  // shard index -> member node ids
    };

    uint32_t node_id = kNoNodeId;  // kNoNodeId for client-only use
    std::vector<Peer> peers;
    std::vector<PoolConfig> pools;
    std::string dfg_path;
    std::string log_dir;

    uint32_t worker_count = 0;  // 0: max(2, hardware parallelism)
    uint32_t queue_capacity = 4096;
    uint32_t window = 3;  // max in-flight puts per sender per shard
    uint64_t cache_bytes = 64ull << 20;
    uint64_t log_budget_bytes = 1ull << 30;
    uint64_t heartbeat_ms = 500;
    uint64_t failure_timeout_ms = 2000;
    uint64_t get_by_time_timeout_ms = 10'000;
    uint64_t bootstrap_timeout_ms = 10'000;
    uint64_t commit_timeout_ms = 10'000;

    static Result<ServiceConfig> from_json_text(const std::string& text);
    static Result<ServiceConfig> from_file(const std::string& path);
    std::string to_json_text() const;

    Status validate() const;

    const Peer* peer(uint32_t id) const;
    const PoolConfig* pool(std::string_view path) const;
    Result<PoolRegistry> registry() const;

    // Shards with a replica on `node`.
    std::vector<std::pair<std::string, uint32_t>> hosted_shards(uint32_t node) const;
};

}  // namespace cascade
