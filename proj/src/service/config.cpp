#include "service/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cascade {

using nlohmann::json;

namespace {

Result<ServiceConfig::Peer> parse_peer(const json& j) {
    ServiceConfig::Peer peer;
    if (!j.contains("id") || !j["id"].is_number_unsigned())
        return Status::error(Code::ConfigError, "peer entry needs an unsigned 'id'");
    peer.id = j["id"].get<uint32_t>();
    if (!j.contains("address") || !j["address"].is_string())
        return Status::error(Code::ConfigError, "peer entry needs an 'address' string");
    std::string addr = j["address"].get<std::string>();
    auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        return Status::error(Code::ConfigError, "peer address must be host:port, got " + addr);
    peer.host = addr.substr(0, colon);
    try {
        peer.port = static_cast<uint16_t>(std::stoul(addr.substr(colon + 1)));
    } catch (...) {
        return Status::error(Code::ConfigError, "bad port in peer address " + addr);
    }
    return peer;
}

Result<ServiceConfig::PoolConfig> parse_pool(const json& j) {
    ServiceConfig::PoolConfig pool;
    if (!j.contains("path") || !j["path"].is_string())
        return Status::error(Code::ConfigError, "pool entry needs a 'path' string");
    pool.desc.path = j["path"].get<std::string>();

    std::string persistence = j.value("persistence", "volatile");
    if (persistence == "volatile")
        pool.desc.persistence = Persistence::Volatile;
    else if (persistence == "persistent")
        pool.desc.persistence = Persistence::Persistent;
    else
        return Status::error(Code::ConfigError,
                             "pool " + pool.desc.path + ": unknown persistence '" + persistence + "'");

    pool.desc.replication_factor = j.value("replication_factor", 1u);
    pool.desc.shard_count = j.value("shard_count", 1u);

    std::string policy = j.value("sharding_policy", "hash_full_key");
    if (policy == "hash_full_key")
        pool.desc.sharding_policy = ShardingPolicy::HashFullKey;
    else if (policy == "hash_first_suffix_component")
        pool.desc.sharding_policy = ShardingPolicy::HashFirstSuffixComponent;
    else
        return Status::error(Code::ConfigError,
                             "pool " + pool.desc.path + ": unknown sharding_policy '" + policy + "'");

    if (!j.contains("shards") || !j["shards"].is_array())
        return Status::error(Code::ConfigError,
                             "pool " + pool.desc.path + " needs a 'shards' array of member lists");
    for (const auto& members : j["shards"]) {
        if (!members.is_array())
            return Status::error(Code::ConfigError, "pool " + pool.desc.path +
                                                        ": each shard needs a member id array");
        std::vector<uint32_t> ids;
        for (const auto& id : members) ids.push_back(id.get<uint32_t>());
        pool.shards.push_back(std::move(ids));
    }
    return pool;
}

}  // namespace

Result<ServiceConfig> ServiceConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        return Status::error(Code::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }

    ServiceConfig cfg;
    if (j.contains("node_id")) cfg.node_id = j["node_id"].get<uint32_t>();
    if (!j.contains("peers") || !j["peers"].is_array() || j["peers"].empty())
        return Status::error(Code::ConfigError, "config needs a non-empty 'peers' array");
    for (const auto& p : j["peers"]) {
        auto peer = parse_peer(p);
        if (!peer.ok()) return peer.status();
        cfg.peers.push_back(peer.take());
    }
    if (j.contains("pools")) {
        for (const auto& p : j["pools"]) {
            auto pool = parse_pool(p);
            if (!pool.ok()) return pool.status();
            cfg.pools.push_back(pool.take());
        }
    }
    cfg.dfg_path = j.value("dfg", "");
    cfg.log_dir = j.value("log_dir", "");
    cfg.worker_count = j.value("workers", 0u);
    cfg.queue_capacity = j.value("queue_capacity", 4096u);
    cfg.window = j.value("window", 3u);
    cfg.cache_bytes = j.value("cache_bytes", uint64_t(64) << 20);
    cfg.log_budget_bytes = j.value("log_budget_bytes", uint64_t(1) << 30);
    cfg.heartbeat_ms = j.value("heartbeat_ms", uint64_t(500));
    cfg.failure_timeout_ms = j.value("failure_timeout_ms", uint64_t(2000));
    cfg.get_by_time_timeout_ms = j.value("get_by_time_timeout_ms", uint64_t(10'000));
    cfg.bootstrap_timeout_ms = j.value("bootstrap_timeout_ms", uint64_t(10'000));
    cfg.commit_timeout_ms = j.value("commit_timeout_ms", uint64_t(10'000));

    Status st = cfg.validate();
    if (!st.ok()) return st;
    return cfg;
}

Result<ServiceConfig> ServiceConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Status::error(Code::ConfigError, "cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ServiceConfig::to_json_text() const {
    json j;
    if (node_id != kNoNodeId) j["node_id"] = node_id;
    j["peers"] = json::array();
    for (const auto& p : peers) j["peers"].push_back({{"id", p.id}, {"address", p.address()}});
    j["pools"] = json::array();
    for (const auto& p : pools) {
        json pool{{"path", p.desc.path},
                  {"persistence", persistence_name(p.desc.persistence)},
                  {"replication_factor", p.desc.replication_factor},
                  {"shard_count", p.desc.shard_count},
                  {"sharding_policy", sharding_policy_name(p.desc.sharding_policy)},
                  {"shards", p.shards}};
        j["pools"].push_back(std::move(pool));
    }
    if (!dfg_path.empty()) j["dfg"] = dfg_path;
    if (!log_dir.empty()) j["log_dir"] = log_dir;
    j["workers"] = worker_count;
    j["queue_capacity"] = queue_capacity;
    j["window"] = window;
    j["cache_bytes"] = cache_bytes;
    j["log_budget_bytes"] = log_budget_bytes;
    j["heartbeat_ms"] = heartbeat_ms;
    j["failure_timeout_ms"] = failure_timeout_ms;
    j["get_by_time_timeout_ms"] = get_by_time_timeout_ms;
    j["bootstrap_timeout_ms"] = bootstrap_timeout_ms;
    j["commit_timeout_ms"] = commit_timeout_ms;
    return j.dump(2);
}

Status ServiceConfig::validate() const {
    std::set<uint32_t> ids;
    for (const auto& p : peers) {
        if (!ids.insert(p.id).second)
            return Status::error(Code::ConfigError, "duplicate node id " + std::to_string(p.id));
        if (p.host.empty() || p.port == 0)
            return Status::error(Code::ConfigError,
                                 "peer " + std::to_string(p.id) + " needs host:port");
    }
    if (node_id != kNoNodeId && ids.count(node_id) == 0)
        return Status::error(Code::ConfigError,
                             "node_id " + std::to_string(node_id) + " is not in peers");

    auto reg = registry();  // checks pool path validity, nesting, bounds
    if (!reg.ok()) return reg.status();

    for (const auto& pool : pools) {
        if (pool.shards.size() != pool.desc.shard_count)
            return Status::error(Code::ConfigError,
                                 "pool " + pool.desc.path + ": 'shards' must list exactly " +
                                     std::to_string(pool.desc.shard_count) + " member lists");
        for (size_t i = 0; i < pool.shards.size(); ++i) {
            const auto& members = pool.shards[i];
            if (members.size() != pool.desc.replication_factor)
                return Status::error(Code::ConfigError,
                                     "pool " + pool.desc.path + " shard " + std::to_string(i) +
                                         ": needs exactly replication_factor=" +
                                         std::to_string(pool.desc.replication_factor) + " members");
            std::set<uint32_t> seen;
            for (uint32_t id : members) {
                if (ids.count(id) == 0)
                    return Status::error(Code::ConfigError,
                                         "pool " + pool.desc.path + " shard " + std::to_string(i) +
                                             ": member " + std::to_string(id) + " is not a peer");
                if (!seen.insert(id).second)
                    return Status::error(Code::ConfigError,
                                         "pool " + pool.desc.path + " shard " + std::to_string(i) +
                                             ": duplicate member " + std::to_string(id));
            }
        }
        if (pool.desc.persistence == Persistence::Persistent && log_dir.empty() &&
            node_id != kNoNodeId) {
            // Only nodes hosting a replica need somewhere to put the log.
            for (const auto& members : pool.shards)
                for (uint32_t id : members)
                    if (id == node_id)
                        return Status::error(Code::ConfigError, "persistent pool " +
                                                                    pool.desc.path +
                                                                    " requires log_dir");
        }
    }
    return Status::success();
}

const ServiceConfig::Peer* ServiceConfig::peer(uint32_t id) const {
    for (const auto& p : peers)
        if (p.id == id) return &p;
    return nullptr;
}

const ServiceConfig::PoolConfig* ServiceConfig::pool(std::string_view path) const {
    for (const auto& p : pools)
        if (p.desc.path == path) return &p;
    return nullptr;
}

Result<PoolRegistry> ServiceConfig::registry() const {
    PoolRegistry reg;
    for (const auto& p : pools) {
        Status st = reg.add(p.desc);
        if (!st.ok()) return st;
    }
    return reg;
}

std::vector<std::pair<std::string, uint32_t>> ServiceConfig::hosted_shards(uint32_t node) const {
    std::vector<std::pair<std::string, uint32_t>> out;
    for (const auto& pool : pools)
        for (uint32_t shard = 0; shard < pool.shards.size(); ++shard)
            for (uint32_t id : pool.shards[shard])
                if (id == node) out.emplace_back(pool.desc.path, shard);
    return out;
}

}  // namespace cascade
