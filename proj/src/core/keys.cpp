#include "core/keys.hpp"

#include "core/hash.hpp"

namespace cascade {

const char* persistence_name(Persistence p) {
    return p == Persistence::Volatile ? "volatile" : "persistent";
}

const char* sharding_policy_name(ShardingPolicy p) {
    return p == ShardingPolicy::HashFullKey ? "hash_full_key" : "hash_first_suffix_component";
}

std::string_view ObjectKey::first_suffix_component() const {
    auto pos = suffix.find('/');
    return pos == std::string::npos ? std::string_view(suffix)
                                    : std::string_view(suffix).substr(0, pos);
}

Result<std::vector<std::string_view>> split_path(std::string_view raw) {
    if (raw.empty() || raw[0] != '/')
        return Status::error(Code::MalformedKey, "path must begin with '/'");
    std::vector<std::string_view> out;
    size_t pos = 1;
    while (pos <= raw.size()) {
        size_t next = raw.find('/', pos);
        if (next == std::string_view::npos) next = raw.size();
        std::string_view comp = raw.substr(pos, next - pos);
        if (comp.empty())
            return Status::error(Code::MalformedKey, "empty path component in '" + std::string(raw) + "'");
        if (comp == "." || comp == "..")
            return Status::error(Code::MalformedKey, "'.' and '..' components are not allowed");
        out.push_back(comp);
        pos = next + 1;
    }
    return out;
}

bool is_path_prefix(std::string_view prefix, std::string_view path) {
    if (prefix.size() > path.size()) return false;
    if (path.substr(0, prefix.size()) != prefix) return false;
    return path.size() == prefix.size() || path[prefix.size()] == '/';
}

Status PoolRegistry::add(PoolDescriptor pool) {
    auto comps = split_path(pool.path);
    if (!comps.ok())
        return Status::error(Code::ConfigError, "bad pool path: " + comps.status().message);
    if (pool.replication_factor < 1 || pool.shard_count < 1)
        return Status::error(Code::ConfigError,
                             "pool " + pool.path + ": replication_factor and shard_count must be >= 1");
    for (const auto& existing : pools_) {
        if (existing.path == pool.path)
            return Status::error(Code::ConfigError, "duplicate pool path " + pool.path);
        if (is_path_prefix(existing.path, pool.path) || is_path_prefix(pool.path, existing.path))
            return Status::error(Code::ConfigError, "pool paths may not nest: " + existing.path +
                                                        " vs " + pool.path);
    }
    pools_.push_back(std::move(pool));
    return Status::success();
}

Result<ObjectKey> PoolRegistry::parse_key(std::string_view raw) const {
    auto comps = split_path(raw);
    if (!comps.ok()) return comps.status();

    // Pools cannot nest, so at most one registered prefix matches; scan for it.
    const PoolDescriptor* best = nullptr;
    for (const auto& pool : pools_) {
        if (is_path_prefix(pool.path, raw)) {
            if (best == nullptr || pool.path.size() > best->path.size()) best = &pool;
        }
    }
    if (best == nullptr)
        return Status::error(Code::NoSuchPool, "no registered pool prefixes '" + std::string(raw) + "'");
    if (raw.size() <= best->path.size() + 1)
        return Status::error(Code::MalformedKey,
                             "key '" + std::string(raw) + "' has an empty suffix in pool " + best->path);
    ObjectKey key;
    key.pool_path = best->path;
    key.suffix = std::string(raw.substr(best->path.size() + 1));
    return key;
}

const PoolDescriptor* PoolRegistry::find(std::string_view pool_path) const {
    for (const auto& pool : pools_)
        if (pool.path == pool_path) return &pool;
    return nullptr;
}

uint32_t map_key_to_shard(const ObjectKey& key, const PoolDescriptor& pool) {
    std::string_view hashed = pool.sharding_policy == ShardingPolicy::HashFirstSuffixComponent
                                  ? key.first_suffix_component()
                                  : std::string_view(key.suffix);
    return static_cast<uint32_t>(stable_hash(hashed) % pool.shard_count);
}

}  // namespace cascade
